//! Experiment configuration and static validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use weyl_core::metric::{builtin_family, MetricField, FAMILY_NAMES};
use weyl_core::quantizer::Discretization;
use weyl_core::sampling::SampleSpec;
use weyl_core::symbol::{builtin_symbol, symbol_params, SymbolRef};
use weyl_core::verify::l2::adapted_points;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CheckMetric,
    Partition,
    Quantize,
    Compose,
    VerifyL2,
    VerifyFp,
    FullSuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::CheckMetric => "check-metric",
            Experiment::Partition => "partition",
            Experiment::Quantize => "quantize",
            Experiment::Compose => "compose",
            Experiment::VerifyL2 => "verify-l2",
            Experiment::VerifyFp => "verify-fp",
            Experiment::FullSuite => "full-suite",
        }
    }

    fn needs_symbol(self) -> bool {
        matches!(
            self,
            Experiment::Quantize | Experiment::Compose | Experiment::VerifyL2 | Experiment::VerifyFp
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec {
            family: "constant".into(),
            params: BTreeMap::new(),
            sweep: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscSpec {
    #[serde(default = "one")]
    pub n: usize,
    pub half_width: f64,
    pub points: usize,
    /// Raise `points` to the `adapted_sincos` grid size for the swept `tau`.
    #[serde(default)]
    pub adapt_to_tau: bool,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSpec {
    pub x_half: f64,
    pub xi_half: f64,
    /// Multiply `xi_half` by `1 + tau` at each sweep point.
    pub scale_xi_with_tau: bool,
    pub lattice: usize,
    pub random: usize,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            x_half: 2.0,
            xi_half: 2.0,
            scale_xi_with_tau: false,
            lattice: 128,
            random: 64,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSpec {
    pub radius: f64,
    pub c0: f64,
    pub step: f64,
    pub interior_points: usize,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            radius: 0.25,
            c0: 4.0,
            step: 0.25,
            interior_points: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Allowed `max/min` across a sweep.
    pub uniformity: f64,
    pub identity: f64,
    pub eigen_rel: f64,
    pub compose_rel: f64,
    pub c0_max: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            uniformity: 2.0,
            identity: 1e-6,
            eigen_rel: 1e-3,
            compose_rel: 1e-5,
            c0_max: 1e6,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<String>,
    /// Write the quantized matrix of a `quantize` run as `matrix.bin`.
    pub export_matrix: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    #[serde(default)]
    pub symbol2: Option<SymbolSpec>,
    #[serde(default)]
    pub discretization: Option<DiscSpec>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub output: OutputSpec,
    /// Eigenvalues reported by `quantize`.
    #[serde(default = "six")]
    pub eigenvalues: usize,
}

fn six() -> usize {
    6
}

/// One resolved sweep point.
pub struct Point {
    pub label: String,
    pub metric: MetricField,
    pub spec: SampleSpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Sweep values, or a single unswept point.
    pub fn sweep_values(&self) -> Vec<Option<f64>> {
        match &self.metric.sweep {
            Some(s) => s.values.iter().map(|v| Some(*v)).collect(),
            None => vec![None],
        }
    }

    fn with_sweep(&self, params: &BTreeMap<String, f64>, value: Option<f64>) -> BTreeMap<String, f64> {
        let mut p = params.clone();
        if let (Some(s), Some(v)) = (&self.metric.sweep, value) {
            p.insert(s.param.clone(), v);
        }
        p
    }

    pub fn tau(&self, value: Option<f64>) -> f64 {
        self.with_sweep(&self.metric.params, value).get("tau").copied().unwrap_or(0.0)
    }

    pub fn point(&self, value: Option<f64>) -> weyl_core::Result<Point> {
        let metric = builtin_family(&self.metric.family, &self.with_sweep(&self.metric.params, value))?.metric;
        let s = &self.sampling;
        let xi = if s.scale_xi_with_tau { s.xi_half * (1.0 + self.tau(value)) } else { s.xi_half };
        let n = metric.dim_n();
        let spec = SampleSpec::phase_box(n, s.x_half, xi, s.lattice, s.random, s.seed);
        spec.validate()?;
        let label = match (&self.metric.sweep, value) {
            (Some(sw), Some(v)) => format!("{} {}={v}", self.metric.family, sw.param),
            _ => self.metric.family.clone(),
        };
        Ok(Point {
            label,
            metric,
            spec,
        })
    }

    /// The symbol with the swept parameter substituted when it accepts it.
    pub fn symbol_at(&self, spec: &SymbolSpec, value: Option<f64>) -> weyl_core::Result<SymbolRef> {
        let mut p = spec.params.clone();
        if let (Some(sw), Some(v)) = (&self.metric.sweep, value) {
            if symbol_params(&spec.name).is_some_and(|a| a.contains(&sw.param.as_str())) {
                p.insert(sw.param.clone(), v);
            }
        }
        builtin_symbol(&spec.name, &p)
    }

    pub fn disc_at(&self, value: Option<f64>) -> weyl_core::Result<Discretization> {
        let d = self
            .discretization
            .as_ref()
            .ok_or_else(|| weyl_core::WeylError::Precondition("discretization is required".into()))?;
        let points = if d.adapt_to_tau { adapted_points(self.tau(value), d.points) } else { d.points };
        Discretization::new(d.n, d.half_width, points)
    }
}

/// Static checks; every problem found is listed.
pub fn validate(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if cfg.schema_version != SCHEMA_VERSION {
        out.push(format!(
            "schema_version: expected {SCHEMA_VERSION}, got {}",
            cfg.schema_version
        ));
    }
    if cfg.experiment == Experiment::FullSuite {
        return out;
    }
    if !FAMILY_NAMES.contains(&cfg.metric.family.as_str()) {
        out.push(format!(
            "metric.family: unknown family `{}` (known: {})",
            cfg.metric.family,
            FAMILY_NAMES.join(", ")
        ));
    }
    if let Some(s) = &cfg.metric.sweep {
        if s.values.is_empty() {
            out.push("metric.sweep: sweep must be non-empty".into());
        }
    }
    let values = cfg.sweep_values();
    if out.is_empty() {
        for v in &values {
            if let Err(e) = cfg.point(*v) {
                out.push(format!("metric/sampling at {v:?}: {e}"));
            }
        }
    }
    let mut check_symbol = |field: &str, s: &Option<SymbolSpec>, required: bool| match s {
        None if required => out.push(format!("{field}: required for `{}`", cfg.experiment.name())),
        None => {}
        Some(spec) => {
            if symbol_params(&spec.name).is_none() {
                out.push(format!("{field}.name: unknown symbol `{}`", spec.name));
                return;
            }
            for v in &values {
                if let Err(e) = cfg.symbol_at(spec, *v) {
                    out.push(format!("{field} at {v:?}: {e}"));
                }
            }
        }
    };
    check_symbol("symbol", &cfg.symbol, cfg.experiment.needs_symbol());
    check_symbol("symbol2", &cfg.symbol2, cfg.experiment == Experiment::Compose);
    if cfg.experiment.needs_symbol() {
        match &cfg.discretization {
            None => out.push("discretization: required".into()),
            Some(_) => {
                for v in &values {
                    if let Err(e) = cfg.disc_at(*v) {
                        out.push(format!("discretization at {v:?}: {e}"));
                    }
                }
            }
        }
    }
    let b = &cfg.budgets;
    for (name, v) in [
        ("uniformity", b.uniformity),
        ("identity", b.identity),
        ("eigen_rel", b.eigen_rel),
        ("compose_rel", b.compose_rel),
        ("c0_max", b.c0_max),
    ] {
        if !(v > 0.0) {
            out.push(format!("budgets.{name}: must be positive"));
        }
    }
    let p = &cfg.partition;
    if !(p.radius > 0.0 && p.c0 > 0.0 && p.step > 0.0 && p.step <= 1.0) || p.interior_points == 0 {
        out.push("partition: radius, c0 must be positive, step in (0, 1], interior_points ≥ 1".into());
    }
    out
}
