//! Uniform L²-boundedness sweeps.

use rayon::prelude::*;

use crate::error::Result;
use crate::metric::{family, WeightField};
use crate::quantizer::{quantize, Discretization, QuantizeOptions};
use crate::sampling::SampleSpec;
use crate::spectral::SpectralOptions;
use crate::symbol::{builtin_symbol, seminorm, SymbolRef};

use super::fp::SweepCase;
use super::report::{params, BoundReport, SweepReport};

#[derive(Clone, Debug)]
pub struct L2Options {
    /// Semi-norm order; `2n + 1` when unset.
    pub order: Option<usize>,
    pub order_sweep: Vec<usize>,
    pub budget: f64,
    pub quantize: QuantizeOptions,
    pub spectral: SpectralOptions,
}

impl Default for L2Options {
    fn default() -> Self {
        L2Options {
            order: None,
            order_sweep: Vec::new(),
            budget: 2.0,
            quantize: QuantizeOptions::default(),
            spectral: SpectralOptions::default(),
        }
    }
}

/// `‖a^w‖` against `‖a‖_{S(1, g)}^{(l)}` at one sweep point.
pub fn l2_case(case: &SweepCase, opts: &L2Options) -> Result<BoundReport> {
    let a = case.symbol.as_ref();
    let l = opts.order.unwrap_or(2 * a.dim_n() + 1);
    let op = quantize(a, &case.disc, &opts.quantize)?;
    let norm = op.norm(&opts.spectral)?.value;
    let one = WeightField::one(a.dim_n());
    let s = seminorm(a, &one, &case.metric, l, &case.spec)?.value;
    let mut rep = BoundReport::new(case.label.clone(), case.params.clone(), norm, s, l, op.dim());
    for &k in &opts.order_sweep {
        rep.order_sweep.push((k, seminorm(a, &one, &case.metric, k, &case.spec)?.value));
    }
    Ok(rep)
}

/// Runs [`l2_case`] over the sweep; the tracked constants are the ratios.
pub fn verify_l2(cases: &[SweepCase], opts: &L2Options) -> Result<SweepReport> {
    let reports: Vec<BoundReport> = cases.par_iter().map(|c| l2_case(c, opts)).collect::<Result<_>>()?;
    let constants = reports.iter().map(|r| r.ratio).collect();
    Ok(SweepReport::new(reports, constants, opts.budget))
}

const SWEEP_RADIUS: f64 = 1.5;

/// The built-in `adapted_sincos` with `R = 1.5`.
pub fn adapted_symbol(tau: f64) -> SymbolRef {
    builtin_symbol("adapted_sincos", &params(&[("tau", tau), ("radius", SWEEP_RADIUS)])).expect("valid parameters")
}

/// Grid size used for [`adapted_symbol`]: the smallest power of two
/// with `N ≥ 20(1+τ)`, at least `min_points`.
pub fn adapted_points(tau: f64, min_points: usize) -> usize {
    ((20.0 * (1.0 + tau)).ceil() as usize).next_power_of_two().max(min_points)
}

/// The `sigma_tau` sweep case for [`adapted_symbol`].
pub fn adapted_case(tau: f64, min_points: usize) -> Result<SweepCase> {
    let metric = family("sigma_tau", &[("tau", tau)])?.metric;
    let r = SWEEP_RADIUS;
    Ok(SweepCase {
        label: format!("sigma_tau tau={tau}"),
        params: params(&[("tau", tau)]),
        symbol: adapted_symbol(tau),
        metric,
        disc: Discretization::new(1, 2.5, adapted_points(tau, min_points))?,
        spec: SampleSpec::phase_box(1, r, r * (1.0 + tau), 256, 128, 11),
    })
}
