//! Decay of `a₁♯a₂` for symbols confined in separated balls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::metric::{ball_distance, point_ball_distance, Ball};
use crate::moyal::{compose_integral, ComposeOptions};
use crate::quantizer::Discretization;
use crate::symbol::SymbolRef;
use crate::symplectic::{dual_metric, harmonic_mean, QuadraticForm};

/// `a_j` confined in the `g_j`-ball `U_j`.
#[derive(Clone)]
pub struct ConfinedPair {
    pub a1: SymbolRef,
    pub u1: Ball,
    pub a2: SymbolRef,
    pub u2: Ball,
}

#[derive(Clone, Debug)]
pub struct BiconfinementOptions {
    /// Grid values below `floor · sup|a₁| sup|a₂|` are treated as zero.
    pub floor: f64,
    /// Fitted exponent may fall short of `N/2` by this much.
    pub slack: f64,
    pub compose: ComposeOptions,
}

impl Default for BiconfinementOptions {
    fn default() -> Self {
        BiconfinementOptions {
            floor: 1e-12,
            slack: 0.25,
            compose: ComposeOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecaySample {
    /// `(g₁^σ∧g₂^σ)(U₁ − U₂)`.
    pub distance2: f64,
    /// `sup_X |a₁♯a₂(X)| (1 + h(X − U₁) + h(X − U₂))^{N/2}`, one per exponent;
    /// `None` when the product is below the noise floor everywhere.
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayFit {
    pub exponent: u32,
    /// `−slope` of `ln value` against `ln(1 + distance2)`.
    pub fitted: f64,
    pub used: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayReport {
    pub samples: Vec<DecaySample>,
    pub fits: Vec<DecayFit>,
    pub pass: bool,
}

/// Weighted sups of `a₁♯a₂` on the composition grid, one per exponent.
pub fn biconfinement_values(
    pair: &ConfinedPair,
    h: &QuadraticForm,
    exponents: &[u32],
    disc: &Discretization,
    opts: &BiconfinementOptions,
) -> Result<Vec<Option<f64>>> {
    let comp = compose_integral(pair.a1.as_ref(), pair.a2.as_ref(), disc, &opts.compose)?;
    let pts = disc.sample_points();
    let sup = |a: &SymbolRef| pts.iter().map(|p| a.value(p).abs()).fold(0.0, f64::max);
    let floor = opts.floor * sup(&pair.a1) * sup(&pair.a2);
    let side = comp.side();
    let best: Vec<Vec<f64>> = (0..side)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0f64; exponents.len()];
            for k in 0..side {
                let v = comp.at(i, k).norm();
                if !(v > floor) {
                    continue;
                }
                let x = comp.point(i, k);
                let w = 1.0 + point_ball_distance(&pair.u1, &x, h) + point_ball_distance(&pair.u2, &x, h);
                for (r, &e) in row.iter_mut().zip(exponents) {
                    *r = r.max(v * w.powf(0.5 * e as f64));
                }
            }
            row
        })
        .collect();
    Ok((0..exponents.len())
        .map(|j| {
            let m = best.iter().map(|r| r[j]).fold(0.0, f64::max);
            (m > 0.0).then_some(m)
        })
        .collect())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fits the decay exponent of the weighted sup against ball separation.
/// Pairs whose product sinks below the noise floor are left out of the fit.
pub fn biconfinement_decay(
    pairs: &[ConfinedPair],
    g1: &QuadraticForm,
    g2: &QuadraticForm,
    exponents: &[u32],
    disc: &Discretization,
    opts: &BiconfinementOptions,
) -> Result<DecayReport> {
    let h = harmonic_mean(&dual_metric(g1), &dual_metric(g2))?;
    let mut samples = Vec::with_capacity(pairs.len());
    for p in pairs {
        let d = ball_distance(&p.u1, &p.u2, &h)?;
        let values = biconfinement_values(p, &h, exponents, disc, opts)?;
        samples.push(DecaySample { distance2: d, values });
    }
    let mut fits = Vec::new();
    for (j, &e) in exponents.iter().enumerate() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = samples
            .iter()
            .filter_map(|s| s.values[j].map(|v| ((1.0 + s.distance2).ln(), v.ln())))
            .unzip();
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        if xs.len() < 2 || !(spread > 1e-9) {
            return Err(WeylError::Fit(format!(
                "{} usable separations for N = {e}; need two distinct ones above the noise floor",
                xs.len()
            )));
        }
        let fitted = -slope(&xs, &ys);
        fits.push(DecayFit {
            exponent: e,
            fitted,
            used: xs.len(),
            pass: fitted >= 0.5 * e as f64 - opts.slack,
        });
    }
    let pass = fits.iter().all(|f| f.pass);
    Ok(DecayReport { samples, fits, pass })
}

/// `e^{−πκ|X − c|²}`-type bumps at `(±s/2, 0)`, confined in unit Euclidean balls.
pub fn separated_gaussians(separations: &[f64], kappa: f64) -> Result<Vec<ConfinedPair>> {
    separations
        .iter()
        .map(|&s| {
            let c1 = vec![-0.5 * s, 0.0];
            let c2 = vec![0.5 * s, 0.0];
            let id = QuadraticForm::identity(1);
            Ok(ConfinedPair {
                a1: crate::symbol::gaussian(1, kappa, c1.clone()).into_ref(),
                u1: Ball::new(c1, 1.0, id.clone())?,
                a2: crate::symbol::gaussian(1, kappa, c2.clone()).into_ref(),
                u2: Ball::new(c2, 1.0, id)?,
            })
        })
        .collect()
}
