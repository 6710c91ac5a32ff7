//! Trajectory CSV and report serialization. Numbers round-trip losslessly,
//! so write -> read -> write reproduces a file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::Report;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::{check_assumption2, SwarmState};
use crate::linalg::Vec2;
use crate::sim::{default_singularity_floor, step_count, Sample, Trajectory};

/// Column names of the normative trajectory schema, in order.
pub const CSV_COLUMNS: [&str; 22] = [
    "t", "x0x", "x0y", "x1x", "x1y", "x2x", "x2y", "r1x", "r1y", "r2x", "r2y", "d1", "d2",
    "zx", "zy", "znorm", "gx", "gy", "f0", "f1", "f2", "detR",
];

fn fmt(v: f64) -> String {
    // 17 significant digits: every finite f64 parses back to the same bits.
    format!("{v:.16e}")
}

fn row(sample: &Sample) -> String {
    let (zx, zy, znorm) = match sample.z {
        Some(z) => (z.x, z.y, z.norm()),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let cells = [
        sample.t,
        sample.x0.x,
        sample.x0.y,
        sample.x1.x,
        sample.x1.y,
        sample.x2.x,
        sample.x2.y,
        sample.r1.x,
        sample.r1.y,
        sample.r2.x,
        sample.r2.y,
        sample.delta1.norm(),
        sample.delta2.norm(),
        zx,
        zy,
        znorm,
        sample.g.x,
        sample.g.y,
        sample.f0,
        sample.f1,
        sample.f2,
        sample.det_r,
    ];
    cells.map(fmt).join(",")
}

/// Renders a trajectory as CSV text in the normative column order.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.samples.len() + 1));
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for sample in &traj.samples {
        out.push_str(&row(sample));
        out.push('\n');
    }
    out
}

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::CsvFormat {
        line,
        reason: format!("not a number: {cell:?}"),
    })
}

/// Parses trajectory CSV text back into a trajectory, reconstructing the
/// derived fields (formation errors, admissibility report, early-stop flag)
/// from the stored samples and the experiment config that produced the file.
pub fn trajectory_from_csv(text: &str, config: &ExperimentConfig) -> Result<Trajectory> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::CsvFormat {
        line: 1,
        reason: "empty file".to_string(),
    })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != CSV_COLUMNS {
        return Err(Error::CsvFormat {
            line: 1,
            reason: format!("header {names:?} does not match the trajectory schema"),
        });
    }
    let spec = &config.formation;
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != CSV_COLUMNS.len() {
            return Err(Error::CsvFormat {
                line: line_no,
                reason: format!("expected {} columns, found {}", CSV_COLUMNS.len(), cells.len()),
            });
        }
        let mut v = [0.0f64; 22];
        for (i, cell) in cells.iter().enumerate() {
            v[i] = parse_cell(cell, line_no)?;
        }
        let r1 = Vec2::new(v[7], v[8]);
        let r2 = Vec2::new(v[9], v[10]);
        let z = match (v[13].is_nan(), v[14].is_nan()) {
            (true, true) => None,
            (false, false) => Some(Vec2::new(v[13], v[14])),
            _ => {
                return Err(Error::CsvFormat {
                    line: line_no,
                    reason: "zx and zy must be NaN together or finite together".to_string(),
                });
            }
        };
        samples.push(Sample {
            t: v[0],
            x0: Vec2::new(v[1], v[2]),
            x1: Vec2::new(v[3], v[4]),
            x2: Vec2::new(v[5], v[6]),
            r1,
            r2,
            delta1: r1 - spec.r1_star(),
            delta2: r2 - spec.r2_star(),
            z,
            g: Vec2::new(v[16], v[17]),
            f0: v[18],
            f1: v[19],
            f2: v[20],
            det_r: v[21],
        });
    }
    let first = samples.first().ok_or(Error::CsvFormat {
        line: 2,
        reason: "no data rows".to_string(),
    })?;
    let initial = SwarmState::new(first.t, first.x0, first.x1, first.x2)?;
    let assumption2 = check_assumption2(&initial, spec)?;
    let floor = config.sim.singularity_floor.unwrap_or_else(|| {
        default_singularity_floor(spec, &config.gains, config.sim.t_max, assumption2.rho0)
    });
    let full_horizon = step_count(&config.sim) as f64 * config.sim.dt;
    let last_t = samples.last().expect("checked nonempty").t;
    Ok(Trajectory {
        samples,
        field_desc: config.field.describe(),
        gains: config.gains,
        formation: *spec,
        config: config.sim,
        singularity_floor: floor,
        assumption2,
        stopped_early: last_t < full_horizon,
    })
}

/// Renders a report as pretty JSON with a trailing newline. Key order is
/// fixed by the report structure, so equal reports serialize identically.
pub fn report_to_json(report: &Report) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| {
        Error::PreconditionFailed(format!("report serialization failed: {e}"))
    })?;
    text.push('\n');
    Ok(text)
}

/// Writes the trajectory CSV and report JSON under `dir` with the config's
/// base name, creating the directory if needed. Returns both paths.
pub fn write_outputs(
    dir: &Path,
    basename: &str,
    traj: &Trajectory,
    report: &Report,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let csv_path = dir.join(format!("{basename}.csv"));
    let report_path = dir.join(format!("{basename}_report.json"));
    fs::write(&csv_path, trajectory_to_csv(traj))
        .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    fs::write(&report_path, report_to_json(report)?)
        .map_err(|e| Error::io(report_path.display().to_string(), e))?;
    Ok((csv_path, report_path))
}

/// Reads a file into a string with a path-tagged error.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::sim::run;

    fn small_run(extra: &str) -> (ExperimentConfig, Trajectory) {
        let text = format!(
            "[field]\npreset = \"paper-gaussian\"\n\n[initial]\nx0 = [160.0, 150.0]\n\n\
             [sim]\ndt = 0.05\nt_max = 3.0\nrecord_stride = 12\n{extra}"
        );
        let config = parse_config(&text).unwrap();
        let traj = run(
            &config.initial,
            &config.field,
            &config.formation,
            &config.gains,
            &config.sim,
        )
        .unwrap();
        (config, traj)
    }

    #[test]
    fn header_matches_the_normative_schema() {
        let (_, traj) = small_run("");
        let csv = trajectory_to_csv(&traj);
        assert!(csv.starts_with(
            "t,x0x,x0y,x1x,x1y,x2x,x2y,r1x,r1y,r2x,r2y,d1,d2,zx,zy,znorm,gx,gy,f0,f1,f2,detR\n"
        ));
    }

    #[test]
    fn cells_carry_seventeen_significant_digits() {
        let (_, traj) = small_run("");
        let csv = trajectory_to_csv(&traj);
        let first_row = csv.lines().nth(1).unwrap();
        let cells: Vec<&str> = first_row.split(',').collect();
        assert_eq!(cells.len(), 22);
        assert_eq!(cells[0], "0.0000000000000000e0");
        assert_eq!(cells[1], "1.6000000000000000e2");
        for cell in cells {
            assert!(cell.contains('e'), "cell {cell} not in scientific notation");
        }
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let (config, traj) = small_run("");
        let csv = trajectory_to_csv(&traj);
        let back = trajectory_from_csv(&csv, &config).unwrap();
        assert_eq!(trajectory_to_csv(&back), csv);
        assert_eq!(back.samples.len(), traj.samples.len());
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            assert_eq!(a, b);
        }
        assert_eq!(back.assumption2, traj.assumption2);
        assert_eq!(back.stopped_early, traj.stopped_early);
        assert_eq!(back.singularity_floor, traj.singularity_floor);
    }

    #[test]
    fn early_stop_flag_survives_the_round_trip() {
        let (config, traj) = small_run("stop_tolerance = 1e3\n");
        assert!(traj.stopped_early);
        let back = trajectory_from_csv(&trajectory_to_csv(&traj), &config).unwrap();
        assert!(back.stopped_early);
    }

    #[test]
    fn affine_runs_round_trip_with_nan_seeking_columns() {
        let text = "[field]\nkind = \"affine\"\nslope = [0.01, 0.02]\n\n\
                    [initial]\nx0 = [0.0, 0.0]\n\n[sim]\ndt = 0.05\nt_max = 1.0\nrecord_stride = 5\n";
        let config = parse_config(text).unwrap();
        let traj = run(
            &config.initial,
            &config.field,
            &config.formation,
            &config.gains,
            &config.sim,
        )
        .unwrap();
        let csv = trajectory_to_csv(&traj);
        assert!(csv.lines().nth(1).unwrap().contains("NaN"));
        let back = trajectory_from_csv(&csv, &config).unwrap();
        assert!(back.samples.iter().all(|s| s.z.is_none()));
        assert_eq!(trajectory_to_csv(&back), csv);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let (config, traj) = small_run("");
        let csv = trajectory_to_csv(&traj);

        let mut lines: Vec<&str> = csv.lines().collect();
        let truncated = lines[1].rsplit_once(',').unwrap().0.to_string();
        lines[1] = &truncated;
        let err = trajectory_from_csv(&lines.join("\n"), &config).unwrap_err();
        match err {
            Error::CsvFormat { line, reason } => {
                assert_eq!(line, 2);
                assert!(reason.contains("21"), "{reason}");
            }
            other => panic!("expected CSV error, got {other:?}"),
        }

        let bad = csv.replacen("1.6000000000000000e2", "sixteen", 1);
        let err = trajectory_from_csv(&bad, &config).unwrap_err();
        assert!(matches!(err, Error::CsvFormat { line: 2, .. }));

        let err = trajectory_from_csv("a,b,c\n", &config).unwrap_err();
        assert!(matches!(err, Error::CsvFormat { line: 1, .. }));

        let err = trajectory_from_csv("", &config).unwrap_err();
        assert!(matches!(err, Error::CsvFormat { line: 1, .. }));
    }

    #[test]
    fn outputs_land_in_the_requested_directory() {
        let (config, traj) = small_run("");
        let report = crate::analysis::analyze_trajectory(
            &config.field,
            &traj,
            &crate::analysis::AnalysisOptions {
                lmi_budget: 50,
                ..config.analysis.clone()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, report_path) =
            write_outputs(dir.path(), "demo", &traj, &report).unwrap();
        assert_eq!(csv_path.file_name().unwrap(), "demo.csv");
        assert_eq!(report_path.file_name().unwrap(), "demo_report.json");
        let json = read_text(&report_path).unwrap();
        assert!(json.ends_with('\n'));
        let roundtrip: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(roundtrip.get("formation_fit_1").is_some());
    }
}
