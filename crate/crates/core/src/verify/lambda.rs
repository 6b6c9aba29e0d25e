//! Admissibility of the powers `λ_g^s`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::{estimate_slowness, estimate_temperance, weight_constants, MetricField, SlownessOptions, WeightField};
use crate::sampling::SampleSpec;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LambdaWeightReport {
    pub s: f64,
    pub c0: f64,
    pub n0: u32,
    pub mu: f64,
    pub nu: u32,
    /// `1.1 · C₀^{|s|}`.
    pub mu_cap: f64,
    /// `⌈|s| N₀⌉`.
    pub nu_cap: u32,
    pub pass: bool,
}

/// Estimates `(C₀, N₀)` for `g` and the weight constants of `λ_g^s`, then
/// compares them with `μ = C₀^{|s|}`, `ν = |s| N₀`.
pub fn verify_lambda_weight(g: &MetricField, s: f64, spec: &SampleSpec, opts: &SlownessOptions) -> Result<LambdaWeightReport> {
    let c0 = estimate_slowness(g, spec, opts)?.c0;
    let n0 = estimate_temperance(g, spec, c0)?.n0;
    let w = weight_constants(&WeightField::lambda_power(g, s), g, spec, c0, opts)?;
    let mu_cap = 1.1 * c0.powf(s.abs());
    let nu_cap = (s.abs() * n0 as f64).ceil() as u32;
    Ok(LambdaWeightReport {
        s,
        c0,
        n0,
        mu: w.mu,
        nu: w.nu,
        mu_cap,
        nu_cap,
        pass: w.mu <= mu_cap && w.nu <= nu_cap,
    })
}
