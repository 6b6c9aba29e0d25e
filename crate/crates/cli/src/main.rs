//! `weyl`: batch driver for the verification experiments.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use weyl_core::spectral::SpectralOptions;

use config::{validate, ExperimentConfig};
use report::{write_error, write_report, ErrorClass, Report};
use run::{run, Context};

#[derive(Parser)]
#[command(name = "weyl", version, about = "Weyl calculus verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// Check a config file without running it.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `sampling.seed` and the spectral start vector seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "WEYL_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn load(c: &Common) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(&c.config).map_err(|e| format!("{}: {e}", c.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = c.seed {
        cfg.sampling.seed = s;
    }
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    c.out
        .clone()
        .or_else(|| cfg.and_then(|g| g.output.dir.as_ref().map(PathBuf::from)))
}

fn fail(out: Option<&PathBuf>, class: ErrorClass, msg: &str) -> ExitCode {
    eprintln!("error ({}): {msg}", class.name());
    if let Some(d) = out {
        if let Err(e) = write_error(d, class, msg) {
            eprintln!("could not write error record: {e}");
        }
    }
    ExitCode::from(match class {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numerical => EXIT_NUMERIC,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, execute) = match &cli.command {
        Command::Run(c) => (c, true),
        Command::Validate(c) => (c, false),
    };
    if let Some(t) = common.threads {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let cfg = match load(common) {
        Ok(c) => c,
        Err(msg) => return fail(out_dir(common, None).as_ref(), ErrorClass::Config, &msg),
    };
    let out = out_dir(common, Some(&cfg));
    let diags = validate(&cfg);
    if !execute {
        for d in &diags {
            println!("{d}");
        }
        return ExitCode::from(if diags.is_empty() { 0 } else { EXIT_CONFIG });
    }
    if !diags.is_empty() {
        return fail(out.as_ref(), ErrorClass::Config, &diags.join("; "));
    }
    if let Some(d) = &out {
        if let Err(e) = std::fs::create_dir_all(d) {
            return fail(None, ErrorClass::Config, &format!("{}: {e}", d.display()));
        }
    }
    let ctx = Context {
        spectral: SpectralOptions {
            seed: cfg.sampling.seed,
            ..Default::default()
        },
        out: out.as_deref(),
        verbose: common.verbose,
    };
    let start = Instant::now();
    let rows = match run(&cfg, &ctx) {
        Ok(r) => r,
        Err(e) => {
            let class = if e.is_config_error() { ErrorClass::Config } else { ErrorClass::Numerical };
            return fail(out.as_ref(), class, &e.to_string());
        }
    };
    let report = Report::new(cfg, rows, start.elapsed().as_secs_f64());
    for r in &report.rows {
        println!(
            "{} {} {} {:e} {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.label,
            r.quantity,
            r.measured,
            r.budget.map(|b| format!("(budget {b:e})")).unwrap_or_default()
        );
    }
    if let Some(d) = &out {
        if let Err(e) = write_report(d, &report) {
            return fail(None, ErrorClass::Numerical, &format!("writing report: {e}"));
        }
    }
    ExitCode::from(if report.pass { 0 } else { EXIT_FAIL })
}
