//! Experiment configuration: TOML parsing with strict keys, preset-aware
//! defaults, and semantic validation that names the offending key.

use std::path::PathBuf;

use serde::Deserialize;

use crate::analysis::AnalysisOptions;
use crate::control::Gains;
use crate::error::{Error, Result};
use crate::field::{GaussianBump, ScalarField, PRESET_GAUSSIAN, PRESET_MULTIMODAL};
use crate::geometry::{FormationSpec, SwarmState};
use crate::linalg::{Mat2, Vec2};
use crate::sim::SimConfig;

/// A fully resolved experiment: every default applied, every value checked.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub field: ScalarField,
    /// Preset id or structural description, used in reports and file names.
    pub field_label: String,
    pub gains: Gains,
    pub formation: FormationSpec,
    pub initial: SwarmState,
    pub sim: SimConfig,
    pub analysis: AnalysisOptions,
    /// Output directory from the config file, if any. Callers fall back to
    /// the TRISEEK_OUT environment variable, then the working directory.
    pub output_dir: Option<PathBuf>,
    pub basename: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    field: Option<FieldSection>,
    gains: Option<GainsSection>,
    formation: Option<FormationSection>,
    initial: Option<InitialSection>,
    sim: Option<SimSection>,
    analysis: Option<AnalysisSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldSection {
    preset: Option<String>,
    kind: Option<String>,
    amplitude: Option<f64>,
    center: Option<[f64; 2]>,
    widths: Option<[f64; 2]>,
    shape: Option<[[f64; 2]; 2]>,
    components: Option<Vec<ComponentSection>>,
    slope: Option<[f64; 2]>,
    offset: Option<f64>,
    curvature: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentSection {
    amplitude: f64,
    center: [f64; 2],
    widths: Option<[f64; 2]>,
    shape: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsSection {
    k0: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormationSection {
    r1: Option<[f64; 2]>,
    r2: Option<[f64; 2]>,
    size: Option<f64>,
    angle_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    x0: Option<[f64; 2]>,
    x1: Option<[f64; 2]>,
    x2: Option<[f64; 2]>,
    /// Followers start at x0 + spread * r_i* unless placed explicitly.
    spread: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    dt: Option<f64>,
    t_max: Option<f64>,
    record_stride: Option<usize>,
    stop_tolerance: Option<f64>,
    singularity_floor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    quadrature_order: Option<usize>,
    lmi_budget: Option<usize>,
    lmi_lambda: Option<f64>,
    seed: Option<u64>,
    lmi_region_halfwidth: Option<f64>,
    regularity_grid_step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
    basename: Option<String>,
}

/// Horizon, start point, and certificate-region defaults that depend on
/// which benchmark the config selects.
struct ScenarioDefaults {
    formation_size: f64,
    x0: Vec2,
    t_max: f64,
    record_stride: usize,
    lmi_region_halfwidth: f64,
}

fn scenario_defaults(preset: Option<&str>) -> ScenarioDefaults {
    match preset {
        Some(PRESET_MULTIMODAL) => ScenarioDefaults {
            formation_size: 0.2,
            x0: Vec2::new(140.0, 140.0),
            t_max: 12_000.0,
            record_stride: 100,
            lmi_region_halfwidth: 5.0,
        },
        _ => ScenarioDefaults {
            formation_size: 0.4,
            x0: Vec2::new(300.0, 250.0),
            t_max: 600.0,
            record_stride: 10,
            lmi_region_halfwidth: 50.0,
        },
    }
}

fn semantic(path: &str, reason: impl Into<String>) -> Error {
    Error::ConfigSemantic { path: path.to_string(), reason: reason.into() }
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(semantic(path, format!("must be positive and finite, got {v}")));
    }
    Ok(v)
}

fn vec2(v: [f64; 2]) -> Vec2 {
    Vec2::new(v[0], v[1])
}

fn mat2(m: [[f64; 2]; 2]) -> Mat2 {
    Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

fn resolve_bump(
    path: &str,
    amplitude: f64,
    center: [f64; 2],
    widths: Option<[f64; 2]>,
    shape: Option<[[f64; 2]; 2]>,
) -> Result<GaussianBump> {
    let bump = match (widths, shape) {
        (Some(w), None) => GaussianBump::axis_aligned(amplitude, vec2(center), w),
        (None, Some(s)) => GaussianBump::new(amplitude, vec2(center), mat2(s)),
        (None, None) => {
            return Err(semantic(path, "give either widths or shape"));
        }
        (Some(_), Some(_)) => {
            return Err(semantic(path, "widths and shape are mutually exclusive"));
        }
    };
    bump.map_err(|e| semantic(path, e.to_string()))
}

fn resolve_field(section: &FieldSection) -> Result<(ScalarField, String)> {
    if let Some(preset) = &section.preset {
        if section.kind.is_some() {
            return Err(semantic("field", "preset and kind are mutually exclusive"));
        }
        let field = ScalarField::builtin(preset).ok_or_else(|| {
            semantic(
                "field.preset",
                format!(
                    "unknown preset {preset:?} (available: {PRESET_GAUSSIAN:?}, \
                     {PRESET_MULTIMODAL:?})"
                ),
            )
        })?;
        return Ok((field, preset.clone()));
    }
    let kind = section
        .kind
        .as_deref()
        .ok_or_else(|| semantic("field", "give either preset or kind"))?;
    let field = match kind {
        "gaussian" => {
            let amplitude = section
                .amplitude
                .ok_or_else(|| semantic("field.amplitude", "required for kind = \"gaussian\""))?;
            let center = section
                .center
                .ok_or_else(|| semantic("field.center", "required for kind = \"gaussian\""))?;
            let bump = resolve_bump("field", amplitude, center, section.widths, section.shape)?;
            ScalarField::Gaussian(bump)
        }
        "sum-of-gaussians" => {
            let comps = section.components.as_ref().ok_or_else(|| {
                semantic("field.components", "required for kind = \"sum-of-gaussians\"")
            })?;
            let mut bumps = Vec::with_capacity(comps.len());
            for (i, c) in comps.iter().enumerate() {
                let path = format!("field.components[{i}]");
                bumps.push(resolve_bump(&path, c.amplitude, c.center, c.widths, c.shape)?);
            }
            ScalarField::sum_of_gaussians(bumps)
                .map_err(|e| semantic("field.components", e.to_string()))?
        }
        "affine" => {
            let slope = section
                .slope
                .ok_or_else(|| semantic("field.slope", "required for kind = \"affine\""))?;
            ScalarField::affine(vec2(slope), section.offset.unwrap_or(0.0))
        }
        "quadratic" => {
            let curvature = section
                .curvature
                .ok_or_else(|| semantic("field.curvature", "required for kind = \"quadratic\""))?;
            let center = section
                .center
                .ok_or_else(|| semantic("field.center", "required for kind = \"quadratic\""))?;
            ScalarField::quadratic(mat2(curvature), vec2(center), section.offset.unwrap_or(0.0))
                .map_err(|e| semantic("field.curvature", e.to_string()))?
        }
        other => {
            return Err(semantic(
                "field.kind",
                format!(
                    "unknown kind {other:?} (available: gaussian, sum-of-gaussians, \
                     affine, quadratic)"
                ),
            ));
        }
    };
    let label = field.describe();
    Ok((field, label))
}

fn resolve_gains(section: Option<&GainsSection>) -> Result<Gains> {
    let k0 = section.and_then(|s| s.k0).unwrap_or(0.7);
    let k1 = section.and_then(|s| s.k1).unwrap_or(0.05);
    let k2 = section.and_then(|s| s.k2).unwrap_or(0.05);
    positive("gains.k0", k0)?;
    positive("gains.k1", k1)?;
    positive("gains.k2", k2)?;
    Gains::new(k0, k1, k2).map_err(|e| semantic("gains", e.to_string()))
}

fn resolve_formation(
    section: Option<&FormationSection>,
    defaults: &ScenarioDefaults,
) -> Result<FormationSpec> {
    let s = match section {
        None => {
            return FormationSpec::from_size_angle(defaults.formation_size, 90.0)
                .map_err(|e| semantic("formation", e.to_string()));
        }
        Some(s) => s,
    };
    match (s.r1, s.r2) {
        (Some(r1), Some(r2)) => {
            if s.size.is_some() || s.angle_deg.is_some() {
                return Err(semantic(
                    "formation",
                    "r1/r2 and size/angle_deg are mutually exclusive",
                ));
            }
            FormationSpec::new(vec2(r1), vec2(r2)).map_err(|e| semantic("formation", e.to_string()))
        }
        (None, None) => {
            let size = s.size.unwrap_or(defaults.formation_size);
            let angle = s.angle_deg.unwrap_or(90.0);
            FormationSpec::from_size_angle(size, angle)
                .map_err(|e| semantic("formation", e.to_string()))
        }
        _ => Err(semantic("formation", "r1 and r2 must be given together")),
    }
}

fn resolve_initial(
    section: Option<&InitialSection>,
    spec: &FormationSpec,
    defaults: &ScenarioDefaults,
) -> Result<SwarmState> {
    let x0 = section.and_then(|s| s.x0).map(vec2).unwrap_or(defaults.x0);
    let spread = section.and_then(|s| s.spread).unwrap_or(2.0);
    if section.and_then(|s| s.spread).is_some()
        && (section.and_then(|s| s.x1).is_some() || section.and_then(|s| s.x2).is_some())
    {
        return Err(semantic("initial", "spread and explicit x1/x2 are mutually exclusive"));
    }
    positive("initial.spread", spread)?;
    let x1 = section
        .and_then(|s| s.x1)
        .map(vec2)
        .unwrap_or_else(|| x0 + spec.r1_star() * spread);
    let x2 = section
        .and_then(|s| s.x2)
        .map(vec2)
        .unwrap_or_else(|| x0 + spec.r2_star() * spread);
    SwarmState::new(0.0, x0, x1, x2).map_err(|e| semantic("initial", e.to_string()))
}

fn resolve_sim(section: Option<&SimSection>, defaults: &ScenarioDefaults) -> Result<SimConfig> {
    let mut sim = SimConfig::new(
        section.and_then(|s| s.dt).unwrap_or(0.05),
        section.and_then(|s| s.t_max).unwrap_or(defaults.t_max),
        section.and_then(|s| s.record_stride).unwrap_or(defaults.record_stride),
    )
    .map_err(|e| semantic("sim", e.to_string()))?;
    sim.stop_tolerance = section.and_then(|s| s.stop_tolerance);
    sim.singularity_floor = section.and_then(|s| s.singularity_floor);
    sim.validate().map_err(|e| semantic("sim", e.to_string()))?;
    Ok(sim)
}

fn resolve_analysis(
    section: Option<&AnalysisSection>,
    defaults: &ScenarioDefaults,
) -> Result<AnalysisOptions> {
    let base = AnalysisOptions::default();
    let opts = AnalysisOptions {
        quadrature_order: section.and_then(|s| s.quadrature_order).unwrap_or(base.quadrature_order),
        lmi_budget: section.and_then(|s| s.lmi_budget).unwrap_or(base.lmi_budget),
        lmi_lambda: section.and_then(|s| s.lmi_lambda).unwrap_or(base.lmi_lambda),
        seed: section.and_then(|s| s.seed).unwrap_or(0),
        lmi_region_halfwidth: section
            .and_then(|s| s.lmi_region_halfwidth)
            .unwrap_or(defaults.lmi_region_halfwidth),
        regularity_grid_step: section
            .and_then(|s| s.regularity_grid_step)
            .unwrap_or(base.regularity_grid_step),
    };
    if opts.quadrature_order < 2 {
        return Err(semantic("analysis.quadrature_order", "need at least 2 nodes"));
    }
    if opts.lmi_budget == 0 {
        return Err(semantic("analysis.lmi_budget", "need at least one trial"));
    }
    positive("analysis.lmi_lambda", opts.lmi_lambda)?;
    positive("analysis.lmi_region_halfwidth", opts.lmi_region_halfwidth)?;
    positive("analysis.regularity_grid_step", opts.regularity_grid_step)?;
    Ok(opts)
}

/// Parses a TOML experiment description, applying defaults and rejecting
/// unknown keys. Syntax errors carry the line number; semantic errors carry
/// the key path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::ConfigSyntax(e.to_string()))?;
    let field_section =
        raw.field.as_ref().ok_or_else(|| semantic("field", "section is required"))?;
    let (field, field_label) = resolve_field(field_section)?;
    let defaults = scenario_defaults(field_section.preset.as_deref());
    let gains = resolve_gains(raw.gains.as_ref())?;
    let formation = resolve_formation(raw.formation.as_ref(), &defaults)?;
    let initial = resolve_initial(raw.initial.as_ref(), &formation, &defaults)?;
    let sim = resolve_sim(raw.sim.as_ref(), &defaults)?;
    let analysis = resolve_analysis(raw.analysis.as_ref(), &defaults)?;
    let output = raw.output.as_ref();
    Ok(ExperimentConfig {
        field,
        field_label,
        gains,
        formation,
        initial,
        sim,
        analysis,
        output_dir: output.and_then(|o| o.dir.as_ref()).map(PathBuf::from),
        basename: output
            .and_then(|o| o.basename.clone())
            .unwrap_or_else(|| "trajectory".to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_config_resolves_benchmark_defaults() {
        let cfg = parse_config("[field]\npreset = \"paper-gaussian\"\n").unwrap();
        assert_eq!(cfg.field_label, "paper-gaussian");
        assert_eq!(cfg.gains.k0, 0.7);
        assert_eq!(cfg.gains.k1, 0.05);
        assert_eq!(cfg.gains.k2, 0.05);
        assert_eq!(cfg.formation.r1_star(), Vec2::new(0.4, 0.0));
        assert_eq!(cfg.formation.r2_star(), Vec2::new(0.0, 0.4));
        assert_eq!(cfg.initial.x0, Vec2::new(300.0, 250.0));
        assert_eq!(cfg.initial.x1, Vec2::new(300.8, 250.0));
        assert_eq!(cfg.initial.x2, Vec2::new(300.0, 250.8));
        assert_eq!(cfg.sim.t_max, 600.0);
        assert_eq!(cfg.sim.record_stride, 10);
        assert_eq!(cfg.analysis.seed, 0);
        assert_eq!(cfg.analysis.lmi_region_halfwidth, 50.0);
        assert_eq!(cfg.basename, "trajectory");
        assert!(cfg.output_dir.is_none());
    }

    #[test]
    fn multimodal_preset_uses_longer_horizon_and_smaller_formation() {
        let cfg = parse_config("[field]\npreset = \"paper-multimodal\"\n").unwrap();
        assert_eq!(cfg.formation.r1_star(), Vec2::new(0.2, 0.0));
        assert_eq!(cfg.initial.x0, Vec2::new(140.0, 140.0));
        assert_eq!(cfg.sim.t_max, 12_000.0);
        assert_eq!(cfg.sim.record_stride, 100);
        assert_eq!(cfg.analysis.lmi_region_halfwidth, 5.0);
    }

    #[test]
    fn explicit_keys_override_defaults() {
        let text = r#"
            [field]
            preset = "paper-gaussian"

            [gains]
            k0 = 0.3

            [formation]
            size = 1.0
            angle_deg = 60.0

            [initial]
            x0 = [250.0, 200.0]
            spread = 3.0

            [sim]
            dt = 0.1
            t_max = 100.0
            record_stride = 5

            [analysis]
            seed = 42
            lmi_budget = 500

            [output]
            dir = "/tmp/runs"
            basename = "demo"
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.gains.k0, 0.3);
        assert_eq!(cfg.gains.k1, 0.05);
        assert_eq!(cfg.formation.r1_star(), Vec2::new(1.0, 0.0));
        assert!((cfg.formation.r2_star() - Vec2::new(0.5, 3f64.sqrt() / 2.0)).norm() < 1e-12);
        assert_eq!(cfg.initial.x1, Vec2::new(253.0, 200.0));
        assert_eq!(cfg.sim.dt, 0.1);
        assert_eq!(cfg.analysis.seed, 42);
        assert_eq!(cfg.analysis.lmi_budget, 500);
        assert_eq!(cfg.output_dir.as_deref(), Some(std::path::Path::new("/tmp/runs")));
        assert_eq!(cfg.basename, "demo");
    }

    #[test]
    fn inline_fields_parse() {
        let text = r#"
            [field]
            kind = "quadratic"
            curvature = [[-0.04, 0.0], [0.0, -0.03]]
            center = [40.0, 60.0]
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.field_label, "quadratic");
        assert_eq!(cfg.field.maximizer().unwrap(), Vec2::new(40.0, 60.0));

        let text = r#"
            [field]
            kind = "sum-of-gaussians"

            [[field.components]]
            amplitude = 2.0
            center = [0.0, 0.0]
            widths = [10.0, 10.0]

            [[field.components]]
            amplitude = 1.0
            center = [5.0, 5.0]
            shape = [[0.1, 0.0], [0.0, 0.2]]
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.field_label, "sum_of_gaussians(2)");

        let cfg = parse_config("[field]\nkind = \"affine\"\nslope = [1.0, 2.0]\n").unwrap();
        assert!(cfg.field.maximizer().is_err());
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let err = parse_config("[field]\npreset = \"paper-gaussian\"\noops ===\n").unwrap_err();
        match err {
            Error::ConfigSyntax(msg) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            parse_config("[field]\npreset = \"paper-gaussian\"\n\n[sim]\ndtt = 0.05\n")
                .unwrap_err();
        match err {
            Error::ConfigSyntax(msg) => assert!(msg.contains("dtt"), "{msg}"),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_key_path() {
        let err = parse_config("[field]\npreset = \"paper-gaussian\"\n\n[gains]\nk0 = -1.0\n")
            .unwrap_err();
        match err {
            Error::ConfigSemantic { path, .. } => assert_eq!(path, "gains.k0"),
            other => panic!("expected semantic error, got {other:?}"),
        }

        let err = parse_config("[field]\npreset = \"nope\"\n").unwrap_err();
        match err {
            Error::ConfigSemantic { path, reason } => {
                assert_eq!(path, "field.preset");
                assert!(reason.contains("paper-gaussian"));
            }
            other => panic!("expected semantic error, got {other:?}"),
        }

        let err = parse_config(
            "[field]\nkind = \"quadratic\"\ncurvature = [[-1.0, 0.5], [0.4, -1.0]]\ncenter = [0.0, 0.0]\n",
        )
        .unwrap_err();
        match err {
            Error::ConfigSemantic { path, .. } => assert_eq!(path, "field.curvature"),
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn contradictory_sections_are_rejected() {
        let err = parse_config(
            "[field]\npreset = \"paper-gaussian\"\n\n[formation]\nr1 = [1.0, 0.0]\nr2 = [0.0, 1.0]\nsize = 0.4\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConfigSemantic { .. }));

        let err = parse_config(
            "[field]\npreset = \"paper-gaussian\"\n\n[initial]\nx1 = [1.0, 0.0]\nspread = 2.0\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConfigSemantic { .. }));

        let err = parse_config(
            "[field]\npreset = \"paper-gaussian\"\nkind = \"affine\"\nslope = [1.0, 0.0]\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConfigSemantic { .. }));
    }

    #[test]
    fn formation_vectors_are_accepted() {
        let text = r#"
            [field]
            preset = "paper-gaussian"

            [formation]
            r1 = [0.3, 0.1]
            r2 = [-0.1, 0.5]
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.formation.r1_star(), Vec2::new(0.3, 0.1));
        assert_eq!(cfg.formation.r2_star(), Vec2::new(-0.1, 0.5));
    }
}
