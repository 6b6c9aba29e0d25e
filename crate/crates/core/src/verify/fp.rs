//! Lower bounds for non-negative symbols and the localized decomposition.

use std::collections::BTreeMap;

use rayon::prelude::*;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::moyal::expansion_term;
use crate::metric::{builtin_family, StructureConstants};
use crate::partition::{ball_samples, build_partition, Domain, MemberKind, PartitionGrid, PartitionOptions};
use crate::symbol::{bump, builtin_symbol};
use crate::symplectic::QuadraticForm;
use crate::spectral::{operator_norm, CMatrix};
use crate::symbol::product;
use crate::metric::{MetricField, WeightField};
use crate::quantizer::{quantize_samples, Discretization, SymbolSamples};
use crate::sampling::SampleSpec;
use crate::spectral::SpectralOptions;
use crate::symbol::{seminorm, SymbolRef};

use super::report::{BoundReport, SweepReport};

/// One sweep point: a symbol, its metric and the grids it is measured on.
#[derive(Clone)]
pub struct SweepCase {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub symbol: SymbolRef,
    pub metric: MetricField,
    pub disc: Discretization,
    pub spec: SampleSpec,
}

#[derive(Clone, Debug)]
pub struct FpOptions {
    pub order: usize,
    /// Extra semi-norm orders to report.
    pub order_sweep: Vec<usize>,
    /// Allowed `max/min` of the per-case constants.
    pub budget: f64,
    pub spectral: SpectralOptions,
}

impl Default for FpOptions {
    fn default() -> Self {
        FpOptions {
            order: 3,
            order_sweep: Vec::new(),
            budget: 2.0,
            spectral: SpectralOptions::default(),
        }
    }
}

/// Lower bound `L` of `a^w` against `‖a‖_{S(λ², g)}` at one sweep point.
pub fn fp_case(case: &SweepCase, opts: &FpOptions) -> Result<BoundReport> {
    let a = case.symbol.as_ref();
    let samples = SymbolSamples::from_symbol(a, &case.disc)?;
    let lowest = samples.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    if lowest < -1e-12 {
        return Err(WeylError::Precondition(format!(
            "symbol `{}` is negative on the grid (min {lowest:e})",
            a.name()
        )));
    }
    let op = quantize_samples(&samples)?;
    let l = op.min_eig(&opts.spectral)?.value;
    let weight = WeightField::lambda_power(&case.metric, 2.0);
    let s = seminorm(a, &weight, &case.metric, opts.order, &case.spec)?.value;
    let mut rep = BoundReport::new(case.label.clone(), case.params.clone(), l, s, opts.order, op.dim());
    for &k in &opts.order_sweep {
        let v = seminorm(a, &weight, &case.metric, k, &case.spec)?.value;
        rep.order_sweep.push((k, v));
    }
    Ok(rep)
}

/// Runs [`fp_case`] over the sweep. The tracked constant is
/// `C = max(0, −L)/s`; the sweep passes if these vary by at most `budget`.
pub fn verify_fp(cases: &[SweepCase], opts: &FpOptions) -> Result<SweepReport> {
    let reports: Vec<BoundReport> = cases.par_iter().map(|c| fp_case(c, opts)).collect::<Result<_>>()?;
    let constants = reports.iter().map(|r| (-r.ratio).max(0.0)).collect();
    Ok(SweepReport::new(reports, constants, opts.budget))
}

/// Smallest order after which the semi-norm changes by less than `rel`.
pub fn stable_order(sweep: &[(usize, f64)], rel: f64) -> Option<usize> {
    sweep
        .windows(2)
        .find(|w| (w[1].1 - w[0].1).abs() <= rel * w[0].1.abs())
        .map(|w| w[0].0)
}

/// Operator-level decomposition `ψ_Y♯a_Y♯ψ_Y = a_Y + r_Y`, `a_Y = φ_Y a`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FpDecomposition {
    pub members: usize,
    pub dim: usize,
    /// `‖a^w‖`.
    pub quantized_norm: f64,
    /// `‖a^w − Σ w_Y (ψ_Y♯a_Y♯ψ_Y − r_Y)^w |g_Y|^{1/2}‖ / ‖a^w‖`.
    pub reassembly_error: f64,
    /// `‖Σ w_Y r_Y^w |g_Y|^{1/2}‖`.
    pub remainder_norm: f64,
    /// `‖Σ w_Y (ψ_Y♯ψ_Y)^w |g_Y|^{1/2}‖`.
    pub psi_square_norm: f64,
    /// `sup |w₁(ψ_Y, a_Y)|` over the checked members.
    pub first_order_defect: f64,
    /// `‖a‖_{S(λ², g)}^{(order)}`.
    pub seminorm: f64,
    pub order: usize,
}

impl FpDecomposition {
    pub fn remainder_ratio(&self) -> f64 {
        self.remainder_norm / self.seminorm
    }
}

fn quantized(disc: &Discretization, pts: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Result<CMatrix> {
    let s = SymbolSamples {
        disc: disc.clone(),
        values: pts.iter().map(|p| Complex64::from(f(p))).collect(),
    };
    Ok(quantize_samples(&s)?.matrix)
}

/// Localizes `a` on the partition and measures the remainders and the
/// `ψ♯ψ` sum as operators on `disc`. Products of quantized members stand
/// in for `♯`, which is exact by definition of the composition.
pub fn fp_decompose(
    a: &SymbolRef,
    grid: &Arc<PartitionGrid>,
    disc: &Discretization,
    spec: &SampleSpec,
    opts: &FpOptions,
) -> Result<FpDecomposition> {
    if disc.n != 1 || a.dim_n() != 1 {
        return Err(WeylError::Unsupported("operator-level decomposition is implemented for n = 1".into()));
    }
    let pts = disc.sample_points();
    let avals: Vec<f64> = pts.par_iter().map(|p| a.value(p)).collect();
    let omega: Vec<f64> = pts
        .par_iter()
        .zip(&avals)
        .map(|(p, &v)| if v == 0.0 { 0.0 } else { grid.omega(p) })
        .collect();
    let mut active: Vec<usize> = pts
        .par_iter()
        .zip(&avals)
        .filter(|(_, &v)| v != 0.0)
        .flat_map_iter(|(p, _)| grid.neighbors(p).into_iter().filter(|&k| grid.omega_member(k, p) > 0.0).collect::<Vec<_>>())
        .collect();
    active.sort_unstable();
    active.dedup();
    let dim = disc.dim();
    let qa = quantize_samples(&SymbolSamples {
        disc: disc.clone(),
        values: avals.iter().map(|&v| Complex64::from(v)).collect(),
    })?;
    let zero = || (CMatrix::zeros(dim, dim), CMatrix::zeros(dim, dim), CMatrix::zeros(dim, dim));
    let (full, rem, psq) = active
        .par_iter()
        .map(|&k| {
            let c = grid.center(k);
            let w = Complex64::from(c.weight * c.sqrt_det);
            let ay = {
                let vals = pts
                    .iter()
                    .zip(avals.iter().zip(&omega))
                    .map(|(p, (&v, &o))| if v == 0.0 { 0.0 } else { grid.omega_member(k, p) / o * v });
                let s = SymbolSamples {
                    disc: disc.clone(),
                    values: vals.map(Complex64::from).collect(),
                };
                quantize_samples(&s)?.matrix
            };
            let py = quantized(disc, &pts, |p| grid.psi(k, p))?;
            let pap = &py * &ay * &py;
            let r = &pap - &ay;
            Ok((pap * w, r * w, (&py * &py) * w))
        })
        .try_fold(zero, |acc, m: Result<(CMatrix, CMatrix, CMatrix)>| {
            let m = m?;
            Ok::<_, WeylError>((acc.0 + m.0, acc.1 + m.1, acc.2 + m.2))
        })
        .try_reduce(zero, |x, y| Ok((x.0 + y.0, x.1 + y.1, x.2 + y.2)))?;
    let so = &opts.spectral;
    let quantized_norm = operator_norm(&qa.matrix, so)?.value;
    let reassembled = &full - &rem;
    let defect = operator_norm(&(&qa.matrix - reassembled), so)?.value;
    let reassembly_error = if quantized_norm > 0.0 { defect / quantized_norm } else { defect };
    let remainder_norm = operator_norm(&rem, so)?.value;
    let psi_square_norm = operator_norm(&psq, so)?.value;
    let first_order_defect = first_order_defect(a, grid, &active)?;
    let weight = WeightField::lambda_power(grid.metric(), 2.0);
    let seminorm = seminorm(a.as_ref(), &weight, grid.metric(), opts.order, spec)?.value;
    Ok(FpDecomposition {
        members: active.len(),
        dim,
        quantized_norm,
        reassembly_error,
        remainder_norm,
        psi_square_norm,
        first_order_defect,
        seminorm,
        order: opts.order,
    })
}

/// `sup |w₁(ψ_Y, φ_Y a)|` on ball samples of a few members.
fn first_order_defect(a: &SymbolRef, grid: &Arc<PartitionGrid>, active: &[usize]) -> Result<f64> {
    let stride = (active.len() / 8).max(1);
    let r = grid.radius();
    let mut worst = 0.0f64;
    for &k in active.iter().step_by(stride) {
        let psi = grid.member(k, MemberKind::Psi);
        let ay = product(grid.member(k, MemberKind::Phi), a.clone());
        let term = expansion_term(psi.as_ref(), ay.as_ref(), 1)?;
        let c = grid.center(k);
        for x in ball_samples(&c.form, &c.y, 1.2 * r, 6, 12) {
            worst = worst.max(term.value(&x)?.norm());
        }
    }
    Ok(worst)
}

/// Constants used for the s10 reference runs.
pub fn reference_constants() -> StructureConstants {
    StructureConstants {
        c0: 4.0,
        c0_prime: 4.0,
        n0: 1,
        mu_m: 4.0,
        nu_m: 2,
    }
}

/// `sin²(x) ξ² χ₀(|X|²/R²)` with `R = 1.6`: non-negative and compactly supported.
pub fn reference_symbol() -> SymbolRef {
    let a = builtin_symbol("fp_test", &BTreeMap::new()).expect("built-in symbol");
    product(a, bump(QuadraticForm::identity(1), vec![0.0, 0.0], 1.6).into_ref())
}

/// Frozen budgets for the reference decomposition.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FpBudgets {
    pub points: usize,
    pub step: f64,
    /// `‖Σ w_Y r_Y^w |g_Y|^{1/2}‖ / ‖a‖_{S(λ², g)}^{(3)}`.
    pub remainder_ratio: f64,
    /// `‖Σ w_Y (ψ_Y♯ψ_Y)^w |g_Y|^{1/2}‖`.
    pub psi_square_norm: f64,
}

impl FpBudgets {
    /// Both measured values within a factor `drift` of the frozen ones.
    pub fn check(&self, d: &FpDecomposition, drift: f64) -> bool {
        let within = |x: f64, g: f64| x <= g * drift && x >= g / drift;
        within(d.remainder_ratio(), self.remainder_ratio) && within(d.psi_square_norm, self.psi_square_norm)
    }
}

/// The reference decomposition: s10, `r = 1/2`, box `|x|, |ξ| ≤ 2.6`,
/// quantized with half-width 4.
pub fn reference_decomposition(points: usize, step: f64, opts: &FpOptions) -> Result<FpDecomposition> {
    let k = reference_constants();
    let g = builtin_family("s10", &BTreeMap::new())?.metric;
    let popts = PartitionOptions {
        step,
        ..Default::default()
    };
    let grid = build_partition(&g, 0.5, &Domain::phase_box(1, 2.6, 2.6), &k, &popts)?;
    let disc = Discretization::new(1, 4.0, points)?;
    let spec = SampleSpec::phase_box(1, 2.0, 2.0, 256, 0, 1);
    fp_decompose(&reference_symbol(), &grid, &disc, &spec, opts)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::metric::family;
    use crate::quantizer::quantize_fn;
    use crate::spectral::CVector;
    use crate::symbol::builtin_symbol;
    use crate::verify::report::params;

    fn sym(name: &str, p: &[(&str, f64)]) -> SymbolRef {
        builtin_symbol(name, &params(p)).unwrap()
    }

    #[test]
    fn xi_squared_is_nonnegative() {
        let g = family("s10", &[]).unwrap().metric;
        let case = SweepCase {
            label: "xi2".into(),
            params: BTreeMap::new(),
            symbol: sym("xi_squared", &[]),
            metric: g,
            disc: Discretization::new(1, 4.0, 64).unwrap(),
            spec: SampleSpec::phase_box(1, 3.0, 3.0, 64, 0, 1),
        };
        let r = fp_case(&case, &FpOptions::default()).unwrap();
        assert!(r.measured >= -1e-6, "{}", r.measured);
    }

    #[test]
    fn negative_symbol_is_rejected() {
        let case = SweepCase {
            label: "neg".into(),
            params: BTreeMap::new(),
            symbol: sym("sin_x", &[]),
            metric: family("s10", &[]).unwrap().metric,
            disc: Discretization::new(1, 4.0, 32).unwrap(),
            spec: SampleSpec::phase_box(1, 3.0, 3.0, 16, 0, 1),
        };
        assert!(matches!(fp_case(&case, &FpOptions::default()), Err(WeylError::Precondition(_))));
    }

    #[test]
    fn sin_squared_xi_squared_matches_operator_identity() {
        // (b ξ²)^w f = −(b' f' + b f'')/(4π²) − b'' f/(16π²), b = sin², f Gaussian
        let disc = Discretization::new(1, 6.0, 128).unwrap();
        let op = quantize_fn(&disc, |p| Complex64::from(p[0].sin().powi(2) * p[1] * p[1])).unwrap();
        let xs = disc.x_grid();
        let f = CVector::from_iterator(xs.len(), xs.iter().map(|x| Complex64::from((-PI * x * x).exp())));
        let got = &op.matrix * &f;
        for (i, &x) in xs.iter().enumerate() {
            let g = (-PI * x * x).exp();
            let (d1, d2) = (-2.0 * PI * x * g, (4.0 * PI * PI * x * x - 2.0 * PI) * g);
            let (b, b1, b2) = (x.sin().powi(2), (2.0 * x).sin(), 2.0 * (2.0 * x).cos());
            let want = -(b1 * d1 + b * d2) / (4.0 * PI * PI) - b2 * g / (16.0 * PI * PI);
            assert!((got[i] - want).norm() < 1e-8, "x={x}: {} vs {want}", got[i]);
        }
        let l = op.min_eig(&SpectralOptions::default()).unwrap().value;
        assert!(l >= -1.0 / (8.0 * PI * PI) - 1e-3, "{l}");
        assert!(l < 0.0);
    }

    #[test]
    fn small_tau_sweep() {
        let cases: Vec<SweepCase> = [0.0, 10.0]
            .iter()
            .map(|&tau| SweepCase {
                label: format!("tau={tau}"),
                params: params(&[("tau", tau)]),
                symbol: sym("sigma_tau_fp", &[("tau", tau)]),
                metric: family("sigma_tau", &[("tau", tau)]).unwrap().metric,
                disc: Discretization::new(1, 4.0, 64).unwrap(),
                spec: SampleSpec::phase_box(1, 3.2, 4.0 * (1.0 + tau), 64, 32, 3),
            })
            .collect();
        let opts = FpOptions {
            order_sweep: vec![3, 5, 7],
            ..Default::default()
        };
        let rep = verify_fp(&cases, &opts).unwrap();
        assert!(rep.pass);
        for r in &rep.reports {
            assert!(r.measured >= -1e-9, "{}", r.measured);
            assert!(r.seminorm > 0.0 && r.seminorm.is_finite());
            assert_eq!(r.order_sweep.len(), 3);
        }
    }

    fn reference_partition(step: f64) -> Arc<PartitionGrid> {
        let k = reference_constants();
        let g = family("s10", &[]).unwrap().metric;
        let opts = PartitionOptions {
            step,
            ..Default::default()
        };
        build_partition(&g, 0.5, &Domain::phase_box(1, 2.6, 2.6), &k, &opts).unwrap()
    }

    #[test]
    fn zero_symbol_has_no_remainder() {
        let grid = reference_partition(0.5);
        let disc = Discretization::new(1, 4.0, 32).unwrap();
        let spec = SampleSpec::phase_box(1, 2.0, 2.0, 16, 0, 1);
        let d = fp_decompose(&sym("zero", &[]), &grid, &disc, &spec, &FpOptions::default());
        // no active members: ‖a^w‖ = 0 makes the relative reassembly error undefined
        let d = d.unwrap();
        assert_eq!(d.members, 0);
        assert_eq!(d.remainder_norm, 0.0);
    }

    #[test]
    fn decomposition_reassembles() {
        let grid = reference_partition(0.5);
        let disc = Discretization::new(1, 4.0, 64).unwrap();
        let spec = SampleSpec::phase_box(1, 2.0, 2.0, 64, 0, 1);
        let d = fp_decompose(&reference_symbol(), &grid, &disc, &spec, &FpOptions::default()).unwrap();
        assert!(d.reassembly_error <= 1e-4, "{}", d.reassembly_error);
        assert_eq!(d.first_order_defect, 0.0);
        assert!(d.remainder_norm > 0.0 && d.psi_square_norm > 0.0);
    }

    #[test]
    fn stable_order_picks_first_flat_step() {
        assert_eq!(stable_order(&[(3, 1.0), (5, 2.0), (7, 2.001), (9, 2.001)], 0.01), Some(5));
        assert_eq!(stable_order(&[(3, 1.0), (5, 2.0)], 0.01), None);
    }
}
