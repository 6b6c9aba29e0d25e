//! Report and error files.

use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::run::Row;

#[derive(Serialize)]
pub struct Environment {
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

#[derive(Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub pass: bool,
    pub environment: Environment,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(config: ExperimentConfig, rows: Vec<Row>, seconds: f64) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            config,
            pass: rows.iter().all(|r| r.pass),
            rows,
            environment: Environment {
                version: env!("CARGO_PKG_VERSION"),
                os: std::env::consts::OS,
                arch: std::env::consts::ARCH,
                threads: rayon::current_num_threads(),
            },
            wall_clock_seconds: seconds,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ErrorClass {
    Config,
    Numerical,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Numerical => "numerical",
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    schema_version: u32,
    class: &'a str,
    message: &'a str,
}

pub fn write_error(dir: &Path, class: ErrorClass, message: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let rec = ErrorRecord {
        schema_version: SCHEMA_VERSION,
        class: class.name(),
        message,
    };
    std::fs::write(dir.join("error.json"), serde_json::to_string_pretty(&rec)? + "\n")
}

/// `report.json` and `table.csv`; the table holds no timing, so it is
/// reproducible byte for byte.
pub fn write_report(dir: &Path, report: &Report) -> std::io::Result<()> {
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    let mut w = csv::Writer::from_path(dir.join("table.csv"))?;
    w.write_record(["experiment", "label", "sweep_value", "quantity", "measured", "reference", "budget", "pass"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.experiment.clone(),
            r.label.clone(),
            opt(r.sweep_value),
            r.quantity.clone(),
            format!("{:e}", r.measured),
            opt(r.reference),
            opt(r.budget),
            r.pass.to_string(),
        ])?;
    }
    w.flush()
}
