//! Command-line front end: simulate, analyze, lmi-check, and verify
//! subcommands over the library pipeline.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{
    analyze_trajectory, build_system_matrices, lmi_search, taylor_checks, theorem_bound,
    Report,
};
use crate::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::field::{estimate_regularity, Rect};
use crate::io::{read_text, report_to_json, trajectory_from_csv, trajectory_to_csv, write_outputs};
use crate::linalg::Vec2;
use crate::sim::run;

/// Environment variable naming the default output directory.
pub const OUT_ENV_VAR: &str = "TRISEEK_OUT";

/// Three-agent source seeking: simulate runs, certify convergence, and
/// check every invariant the control scheme promises.
#[derive(Debug, Parser)]
#[command(name = "triseek", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write the trajectory CSV and report JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config, then TRISEEK_OUT,
        /// then the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the certification report from a stored trajectory CSV.
    Analyze {
        csv: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Search for a stability certificate and print the scaled quantities.
    LmiCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate and check the full invariant suite, one verdict per line.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Loads and resolves a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&read_text(path)?)
}

/// Picks the output directory: explicit flag, then config, then the
/// TRISEEK_OUT environment variable, then the working directory.
pub fn resolve_output_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = &config.output_dir {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var(OUT_ENV_VAR) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".")
}

fn summarize(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "admissible start: {} (rho0 = {:.4e}, rho* = {:.4e})\n",
        report.assumption2.passed(),
        report.assumption2.rho0,
        report.assumption2.rho_star
    ));
    out.push_str(&format!(
        "formation rates: fitted {:.6e} / {:.6e} (targets {:.2e} / {:.2e})\n",
        report.formation_fit_1.fitted_rate,
        report.formation_fit_2.fitted_rate,
        report.formation_fit_1.expected_rate,
        report.formation_fit_2.expected_rate
    ));
    if let Some(seeking) = &report.seeking {
        out.push_str(&format!("final |z| = {:.6e} m\n", seeking.final_z_norm));
        out.push_str(&format!(
            "final |grad f(x0)| = {:.6e}\n",
            seeking.final_gradient_norm
        ));
        let cert = &seeking.certificate;
        if let Some(radii) = &cert.radii {
            out.push_str(&format!(
                "certificate: feasible (margin {:.3e}); radii {:.4e} / {:.4e} m\n",
                cert.margin, radii.nominal, radii.conservative
            ));
        } else {
            out.push_str(&format!(
                "certificate: infeasible within budget (best margin {:.3e})\n",
                cert.margin
            ));
        }
    } else {
        out.push_str("no maximizer: seeking checks skipped\n");
    }
    out
}

/// Runs the experiment a config describes and writes both output files.
/// Returns the printable summary. An inadmissible start or any simulation
/// failure surfaces as an error before anything is written.
pub fn cmd_simulate(config_path: &Path, out_flag: Option<&Path>) -> Result<String> {
    let config = load_config(config_path)?;
    let traj = run(&config.initial, &config.field, &config.formation, &config.gains, &config.sim)?;
    let report = analyze_trajectory(&config.field, &traj, &config.analysis)?;
    let dir = resolve_output_dir(out_flag, &config);
    let (csv_path, report_path) = write_outputs(&dir, &config.basename, &traj, &report)?;
    let mut out = String::new();
    out.push_str(&format!("wrote {}\n", csv_path.display()));
    out.push_str(&format!("wrote {}\n", report_path.display()));
    out.push_str(&summarize(&report));
    Ok(out)
}

/// Rebuilds the report from a stored CSV without re-simulating; the result
/// is byte-identical to the JSON the original simulate run wrote.
pub fn cmd_analyze(csv_path: &Path, config_path: &Path) -> Result<String> {
    let config = load_config(config_path)?;
    let traj = trajectory_from_csv(&read_text(csv_path)?, &config)?;
    let report = analyze_trajectory(&config.field, &traj, &config.analysis)?;
    report_to_json(&report)
}

/// Searches for a certificate on the config's linearized system and prints
/// the scale-invariant quantities next to the reference magnitudes.
pub fn cmd_lmi_check(config_path: &Path) -> Result<String> {
    let config = load_config(config_path)?;
    let sys = build_system_matrices(&config.field, &config.gains)?;
    let hw = config.analysis.lmi_region_halfwidth;
    let region = Rect::new(
        sys.maximizer - Vec2::new(hw, hw),
        sys.maximizer + Vec2::new(hw, hw),
    )?;
    let step = config.analysis.regularity_grid_step.min(hw / 25.0);
    let reg = estimate_regularity(&config.field, &region, step)?;
    let alpha1 = 2.0 * reg.g_h * config.gains.k0;
    let search = lmi_search(
        &sys,
        alpha1,
        config.analysis.lmi_lambda,
        config.analysis.lmi_budget,
        config.analysis.seed,
    )?;
    let mut out = String::new();
    out.push_str(&format!(
        "system: maximizer ({:.4}, {:.4}), alpha1 = {:.4e}, lambda = {:.4e}\n",
        sys.maximizer.x, sys.maximizer.y, alpha1, config.analysis.lmi_lambda
    ));
    if search.verdict.feasible {
        out.push_str(&format!(
            "certificate: feasible, margin {:.4e} after {} trials\n",
            search.verdict.margin, search.trials_used
        ));
    } else {
        out.push_str(&format!(
            "certificate: infeasible within {} trials (best margin {:.4e})\n",
            search.trials_used, search.verdict.margin
        ));
    }
    let cand = &search.best;
    out.push_str(&format!(
        "  tau/gamma1          = {:>12.4e}   reference 1.429e-1\n",
        cand.tau / cand.gamma1
    ));
    out.push_str(&format!(
        "  gamma2/gamma1       = {:>12.4e}   reference 8.5901e4\n",
        cand.gamma2 / cand.gamma1
    ));
    out.push_str(&format!(
        "  sigma_min(P)/gamma1 = {:>12.4e}   reference 2.0e-1\n",
        search.verdict.p_min_eigenvalue / cand.gamma1
    ));
    if search.verdict.feasible {
        let radii = theorem_bound(
            &sys,
            cand,
            alpha1,
            &config.formation,
            &config.gains,
            reg.m_h,
        )?;
        out.push_str(&format!("  nominal radius      = {:.4e} m\n", radii.nominal));
        out.push_str(&format!("  conservative radius = {:.4e} m\n", radii.conservative));
    }
    Ok(out)
}

struct Checklist {
    lines: String,
    all_passed: bool,
}

impl Checklist {
    fn new() -> Self {
        Checklist { lines: String::new(), all_passed: true }
    }

    fn item(&mut self, name: &str, passed: bool, detail: String) {
        self.lines.push_str(&format!(
            "{} {name}: {detail}\n",
            if passed { "PASS" } else { "FAIL" }
        ));
        self.all_passed &= passed;
    }
}

/// Simulates the config and checks every invariant the pipeline promises,
/// printing one PASS/FAIL line per check. Returns the text and whether the
/// whole suite passed.
pub fn cmd_verify(config_path: &Path) -> Result<(String, bool)> {
    let config = load_config(config_path)?;
    let traj = run(&config.initial, &config.field, &config.formation, &config.gains, &config.sim)?;
    let report = analyze_trajectory(&config.field, &traj, &config.analysis)?;
    let mut list = Checklist::new();

    list.item(
        "admissible-start",
        report.assumption2.passed(),
        format!("rho0 = {:.4e}", report.assumption2.rho0),
    );
    for (name, fit) in [
        ("formation-decay-1", &report.formation_fit_1),
        ("formation-decay-2", &report.formation_fit_2),
    ] {
        list.item(
            name,
            fit.rate_ok && fit.oracle_ok,
            format!(
                "rate {:.6e} vs {:.2e}, oracle deviation {:.3e}",
                fit.fitted_rate, fit.expected_rate, fit.max_oracle_deviation
            ),
        );
    }
    let g = &report.geometry;
    list.item(
        "sine-sign-and-floor",
        g.sine_bound_holds,
        format!("min |sin theta12| = {:.6e}, floor {:.6e}", g.min_abs_sine, g.sine_floor),
    );
    list.item(
        "determinant-bound",
        g.det_bound_holds,
        format!("min slack {:.3e}", g.min_det_slack),
    );
    list.item(
        "inverse-convergence",
        g.inverse_rate_ok,
        format!("rate {:.6e}", g.inverse_convergence_rate),
    );
    if let Some(seeking) = &report.seeking {
        list.item(
            "phi1-bound",
            seeking.phi1_bound_holds,
            format!("max excess {:.3e}", seeking.phi1_max_excess),
        );
        list.item(
            "phi2star-bound",
            seeking.phi2_star_bound_holds,
            format!(
                "max {:.6e} vs alpha2* = {:.6e}",
                seeking.phi2_star_max, seeking.bounds.alpha2_star
            ),
        );
        list.item(
            "phi3-decay",
            seeking.phi3_rate_ok,
            format!("beta = {:.6e}", seeking.bounds.beta),
        );
        list.item(
            "residual-closure",
            seeking.residual_ok,
            format!("max {:.3e}", seeking.residual_max),
        );
        list.item(
            "gradient-closure",
            seeking.gradient_closure_ok,
            format!("max {:.3e}", seeking.gradient_closure_max),
        );
        // The certificate implies the radius bound; an infeasible search
        // leaves nothing to check.
        let cert = &seeking.certificate;
        match (&cert.radii, cert.bound_holds) {
            (Some(radii), Some(holds)) => list.item(
                "certified-radius",
                holds,
                format!(
                    "limsup |z| = {:.4e} <= conservative {:.4e}",
                    seeking.limsup_z, radii.conservative
                ),
            ),
            _ => list.item(
                "certified-radius",
                true,
                format!("no certificate within budget (margin {:.3e}); nothing to check", cert.margin),
            ),
        }
        let taylor = taylor_checks(
            &config.field,
            &seeking.run_regularity.region,
            2000,
            config.analysis.seed,
        )?;
        list.item(
            "taylor-remainders",
            taylor.passed,
            format!(
                "worst ratios {:.4} / {:.4}",
                taylor.worst_value_ratio, taylor.worst_gradient_ratio
            ),
        );
    }
    let rerun = run(&config.initial, &config.field, &config.formation, &config.gains, &config.sim)?;
    let csv = trajectory_to_csv(&traj);
    list.item(
        "determinism",
        trajectory_to_csv(&rerun) == csv,
        "repeated run serializes identically".to_string(),
    );
    list.item(
        "csv-round-trip",
        trajectory_to_csv(&trajectory_from_csv(&csv, &config)?) == csv,
        "write -> read -> write is byte-identical".to_string(),
    );

    let mut text = list.lines;
    text.push_str(if list.all_passed { "all checks passed\n" } else { "some checks FAILED\n" });
    Ok((text, list.all_passed))
}

/// Executes a parsed command line, printing results to stdout and errors to
/// stderr. Returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let outcome: Result<(String, bool)> = match &cli.command {
        Command::Simulate { config, out } => {
            cmd_simulate(config, out.as_deref()).map(|s| (s, true))
        }
        Command::Analyze { csv, config } => cmd_analyze(csv, config).map(|s| (s, true)),
        Command::LmiCheck { config } => cmd_lmi_check(config).map(|s| (s, true)),
        Command::Verify { config } => cmd_verify(config),
    };
    match outcome {
        Ok((text, ok)) => {
            print!("{text}");
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ConfigSyntax(_) | Error::ConfigSemantic { .. } => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path
    }

    const QUICK: &str = "[field]\npreset = \"paper-gaussian\"\n\n\
        [initial]\nx0 = [150.0, 140.0]\n\n\
        [sim]\ndt = 0.05\nt_max = 40.0\nrecord_stride = 40\n\n\
        [analysis]\nlmi_budget = 400\n";

    #[test]
    fn simulate_writes_both_files_and_summarizes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "quick.toml", QUICK);
        let text = cmd_simulate(&cfg, Some(dir.path())).unwrap();
        assert!(text.contains("trajectory.csv"));
        assert!(text.contains("trajectory_report.json"));
        assert!(text.contains("final |z|"));
        assert!(dir.path().join("trajectory.csv").exists());
        assert!(dir.path().join("trajectory_report.json").exists());
    }

    #[test]
    fn inadmissible_start_fails_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let bad = "[field]\npreset = \"paper-gaussian\"\n\n\
            [initial]\nx0 = [150.0, 140.0]\nx1 = [149.2, 140.0]\nx2 = [150.0, 140.8]\n\n\
            [sim]\ndt = 0.05\nt_max = 1.0\nrecord_stride = 1\n";
        let cfg = write_config(dir.path(), "bad.toml", bad);
        let err = cmd_simulate(&cfg, Some(dir.path())).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation(_)));
        assert!(!dir.path().join("trajectory.csv").exists());
    }

    #[test]
    fn analyze_reproduces_the_simulate_report_byte_for_byte() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "quick.toml", QUICK);
        cmd_simulate(&cfg, Some(dir.path())).unwrap();
        let stored = fs::read_to_string(dir.path().join("trajectory_report.json")).unwrap();
        let recomputed = cmd_analyze(&dir.path().join("trajectory.csv"), &cfg).unwrap();
        assert_eq!(recomputed, stored);
    }

    #[test]
    fn lmi_check_prints_scaled_quantities_with_references() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "quick.toml", QUICK);
        let text = cmd_lmi_check(&cfg).unwrap();
        assert!(text.contains("tau/gamma1"), "{text}");
        assert!(text.contains("reference 1.429e-1"));
        assert!(text.contains("reference 8.5901e4"));
        assert!(text.contains("reference 2.0e-1"));
        assert!(text.contains("feasible"));
    }

    #[test]
    fn verify_passes_on_a_quadratic_config() {
        let dir = tempfile::tempdir().unwrap();
        let quad = "[field]\nkind = \"quadratic\"\ncurvature = [[-0.04, 0.0], [0.0, -0.03]]\ncenter = [40.0, 60.0]\n\n\
            [initial]\nx0 = [10.0, 20.0]\n\n\
            [sim]\ndt = 0.05\nt_max = 400.0\nrecord_stride = 40\n\n\
            [analysis]\nlmi_budget = 800\nlmi_region_halfwidth = 30.0\n";
        let cfg = write_config(dir.path(), "quad.toml", quad);
        let (text, ok) = cmd_verify(&cfg).unwrap();
        assert!(ok, "{text}");
        assert!(text.contains("PASS formation-decay-1"));
        assert!(text.contains("PASS certified-radius"));
        assert!(text.contains("all checks passed"));
        assert!(!text.contains("FAIL"));
    }

    #[test]
    fn output_dir_resolution_prefers_flag_then_config_then_env() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_no_dir = parse_config(QUICK).unwrap();
        let flag = dir.path().join("flagged");
        assert_eq!(
            resolve_output_dir(Some(&flag), &cfg_no_dir),
            flag
        );
        let mut cfg_with_dir = cfg_no_dir.clone();
        cfg_with_dir.output_dir = Some(PathBuf::from("/tmp/from-config"));
        assert_eq!(
            resolve_output_dir(None, &cfg_with_dir),
            PathBuf::from("/tmp/from-config")
        );
        assert_eq!(resolve_output_dir(None, &cfg_no_dir), PathBuf::from("."));
    }
}
