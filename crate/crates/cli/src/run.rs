//! Experiment execution; each run yields flat rows.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;
use weyl_core::metric::{estimate_structure_constants, SlownessOptions, StructureConstants, WeightField};
use weyl_core::moyal::{compose_integral, ComposeOptions};
use weyl_core::partition::{build_partition, Domain, PartitionOptions};
use weyl_core::quantizer::{quantize, quantize_samples, QuantizeOptions};
use weyl_core::spectral::{hermitian_eigenvalues, lanczos, Extreme, SpectralOptions};
use weyl_core::verify::{verify_fp, verify_l2, FpOptions, L2Options, SweepCase, SweepReport};
use weyl_core::{Result, WeylError};

use crate::config::{Experiment, ExperimentConfig};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub label: String,
    pub sweep_value: Option<f64>,
    pub quantity: String,
    pub measured: f64,
    pub reference: Option<f64>,
    pub budget: Option<f64>,
    pub pass: bool,
}

impl Row {
    fn info(exp: Experiment, label: &str, value: Option<f64>, quantity: impl Into<String>, measured: f64) -> Self {
        Row {
            experiment: exp.name().into(),
            label: label.into(),
            sweep_value: value,
            quantity: quantity.into(),
            measured,
            reference: None,
            budget: None,
            pass: measured.is_finite(),
        }
    }

    fn bounded(exp: Experiment, label: &str, value: Option<f64>, quantity: impl Into<String>, measured: f64, budget: f64) -> Self {
        Row {
            budget: Some(budget),
            pass: measured <= budget,
            ..Row::info(exp, label, value, quantity, measured)
        }
    }
}

pub struct Context<'a> {
    pub spectral: SpectralOptions,
    pub out: Option<&'a Path>,
    pub verbose: bool,
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Vec<Row>> {
    if ctx.verbose {
        eprintln!("running {}", cfg.experiment.name());
    }
    match cfg.experiment {
        Experiment::CheckMetric => check_metric(cfg),
        Experiment::Partition => partition(cfg),
        Experiment::Quantize => quantize_rows(cfg, ctx),
        Experiment::Compose => compose(cfg),
        Experiment::VerifyL2 => sweep(cfg, ctx, Experiment::VerifyL2),
        Experiment::VerifyFp => sweep(cfg, ctx, Experiment::VerifyFp),
        Experiment::FullSuite => full_suite(cfg, ctx),
    }
}

fn check_metric(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let e = Experiment::CheckMetric;
    let mut rows = Vec::new();
    for v in cfg.sweep_values() {
        let p = cfg.point(v)?;
        let one = WeightField::one(p.metric.dim_n());
        let k = estimate_structure_constants(&p.metric, &one, &p.spec, &SlownessOptions::default())?;
        rows.push(Row::bounded(e, &p.label, v, "c0", k.c0, cfg.budgets.c0_max));
        rows.push(Row::info(e, &p.label, v, "c0_prime", k.c0_prime));
        rows.push(Row::info(e, &p.label, v, "n0", k.n0 as f64));
    }
    Ok(rows)
}

fn partition(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let e = Experiment::Partition;
    let ps = &cfg.partition;
    let k = StructureConstants {
        c0: ps.c0,
        ..StructureConstants::flat()
    };
    let opts = PartitionOptions {
        step: ps.step,
        ..Default::default()
    };
    let mut rows = Vec::new();
    for v in cfg.sweep_values() {
        let p = cfg.point(v)?;
        let domain = Domain::new(p.spec.lo.clone(), p.spec.hi.clone())?;
        let grid = build_partition(&p.metric, ps.radius, &domain, &k, &opts)?;
        let pts = grid.interior_points(ps.interior_points)?;
        let defect = pts.iter().map(|x| (grid.identity_sum(x) - 1.0).abs()).fold(0.0, f64::max);
        rows.push(Row::info(e, &p.label, v, "centers", grid.len() as f64));
        rows.push(Row::info(e, &p.label, v, "interior_points", pts.len() as f64));
        rows.push(Row::bounded(e, &p.label, v, "identity_defect", defect, cfg.budgets.identity));
    }
    Ok(rows)
}

fn quantize_rows(cfg: &ExperimentConfig, ctx: &Context) -> Result<Vec<Row>> {
    let e = Experiment::Quantize;
    let spec = cfg.symbol.as_ref().expect("validated");
    let mut rows = Vec::new();
    for v in cfg.sweep_values() {
        let a = cfg.symbol_at(spec, v)?;
        let disc = cfg.disc_at(v)?;
        let op = quantize(a.as_ref(), &disc, &QuantizeOptions::default())?;
        let label = format!("{} N={}", a.name(), disc.points);
        rows.push(Row::info(e, &label, v, "self_adjointness_defect", op.self_adjointness_defect()));
        let eig = if op.dim() <= 1024 {
            hermitian_eigenvalues(&op.matrix)
        } else {
            let m = &op.matrix;
            vec![lanczos(|x| m * x, op.dim(), Extreme::Smallest, &ctx.spectral)?.value]
        };
        let oscillator = spec.name == "harmonic" && disc.n == 1;
        for (k, &l) in eig.iter().take(cfg.eigenvalues).enumerate() {
            let q = format!("eigenvalue[{k}]");
            rows.push(if oscillator {
                let target = (2 * k + 1) as f64 / (2.0 * PI);
                Row {
                    reference: Some(target),
                    ..Row::info(e, &label, v, q, l)
                }
                .relative_to(target, cfg.budgets.eigen_rel)
            } else {
                Row::info(e, &label, v, q, l)
            });
        }
        if cfg.output.export_matrix {
            if let Some(dir) = ctx.out {
                let mut f = std::fs::File::create(dir.join("matrix.bin"))?;
                op.write_to(&mut f)?;
            }
        }
    }
    Ok(rows)
}

impl Row {
    /// Pass iff `|measured − target| ≤ rel·|target|`.
    fn relative_to(mut self, target: f64, rel: f64) -> Self {
        self.budget = Some(rel);
        self.pass = (self.measured - target).abs() <= rel * target.abs();
        self
    }
}

fn compose(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let e = Experiment::Compose;
    let mut rows = Vec::new();
    for v in cfg.sweep_values() {
        let a = cfg.symbol_at(cfg.symbol.as_ref().expect("validated"), v)?;
        let b = cfg.symbol_at(cfg.symbol2.as_ref().expect("validated"), v)?;
        let disc = cfg.disc_at(v)?;
        let c = compose_integral(a.as_ref(), b.as_ref(), &disc, &ComposeOptions::default())?;
        let qc = quantize_samples(&c.to_samples())?.matrix;
        let qo = QuantizeOptions::default();
        let prod = quantize(a.as_ref(), &disc, &qo)?.matrix * quantize(b.as_ref(), &disc, &qo)?.matrix;
        let rel = (&qc - &prod).norm() / prod.norm();
        let label = format!("{}#{} N={}", a.name(), b.name(), disc.points);
        rows.push(Row::bounded(e, &label, v, "relative_frobenius", rel, cfg.budgets.compose_rel));
    }
    Ok(rows)
}

fn cases(cfg: &ExperimentConfig) -> Result<Vec<SweepCase>> {
    cfg.sweep_values()
        .into_iter()
        .map(|v| {
            let p = cfg.point(v)?;
            Ok(SweepCase {
                label: p.label,
                params: cfg.metric.sweep.iter().zip(v).map(|(s, v)| (s.param.clone(), v)).collect(),
                symbol: cfg.symbol_at(cfg.symbol.as_ref().expect("validated"), v)?,
                metric: p.metric,
                disc: cfg.disc_at(v)?,
                spec: p.spec,
            })
        })
        .collect()
}

fn sweep_rows(e: Experiment, rep: &SweepReport, values: &[Option<f64>], constant: &str) -> Vec<Row> {
    let mut rows = Vec::new();
    for ((r, c), v) in rep.reports.iter().zip(&rep.constants).zip(values) {
        rows.push(Row::info(e, &r.label, *v, "measured", r.measured));
        rows.push(Row::info(e, &r.label, *v, "seminorm", r.seminorm));
        rows.push(Row::info(e, &r.label, *v, constant, *c));
    }
    rows.push(Row::bounded(e, "sweep", None, "uniformity_spread", rep.spread, rep.budget));
    rows
}

fn sweep(cfg: &ExperimentConfig, ctx: &Context, e: Experiment) -> Result<Vec<Row>> {
    let cases = cases(cfg)?;
    let values = cfg.sweep_values();
    Ok(match e {
        Experiment::VerifyL2 => {
            let o = L2Options {
                budget: cfg.budgets.uniformity,
                spectral: ctx.spectral.clone(),
                ..Default::default()
            };
            sweep_rows(e, &verify_l2(&cases, &o)?, &values, "ratio")
        }
        _ => {
            let o = FpOptions {
                budget: cfg.budgets.uniformity,
                spectral: ctx.spectral.clone(),
                ..Default::default()
            };
            sweep_rows(e, &verify_fp(&cases, &o)?, &values, "lower_bound_constant")
        }
    })
}

/// Admissibility, partition, L² and lower bound, in that order, on small grids.
pub fn presets(seed: u64) -> Vec<ExperimentConfig> {
    let text = [
        r#"{"schema_version":1,"experiment":"check-metric",
            "metric":{"family":"sigma_tau","sweep":{"param":"tau","values":[0,10]}},
            "sampling":{"x_half":2,"xi_half":4,"scale_xi_with_tau":true,"lattice":64,"random":32}}"#,
        r#"{"schema_version":1,"experiment":"partition",
            "metric":{"family":"sigma_tau","sweep":{"param":"tau","values":[0,10]}},
            "sampling":{"x_half":1.5,"xi_half":4,"scale_xi_with_tau":true},
            "partition":{"interior_points":200}}"#,
        r#"{"schema_version":1,"experiment":"verify-l2",
            "metric":{"family":"sigma_tau","sweep":{"param":"tau","values":[0,1,10]}},
            "symbol":{"name":"adapted_sincos"},
            "discretization":{"half_width":2.5,"points":128,"adapt_to_tau":true},
            "sampling":{"x_half":1.5,"xi_half":1.5,"scale_xi_with_tau":true,"lattice":256,"random":128}}"#,
        r#"{"schema_version":1,"experiment":"verify-fp",
            "metric":{"family":"sigma_tau","sweep":{"param":"tau","values":[0,1,10]}},
            "symbol":{"name":"sigma_tau_fp"},
            "discretization":{"half_width":4,"points":128},
            "sampling":{"x_half":3.2,"xi_half":4,"scale_xi_with_tau":true}}"#,
    ];
    text.iter()
        .map(|t| {
            let mut c = ExperimentConfig::parse(t).expect("preset parses");
            c.sampling.seed = seed;
            c
        })
        .collect()
}

fn full_suite(cfg: &ExperimentConfig, ctx: &Context) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for p in presets(cfg.sampling.seed) {
        let diags = crate::config::validate(&p);
        if !diags.is_empty() {
            return Err(WeylError::Precondition(diags.join("; ")));
        }
        rows.extend(run(&p, ctx)?);
    }
    Ok(rows)
}
