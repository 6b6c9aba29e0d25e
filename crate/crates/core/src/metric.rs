//! Phase-space metric fields, weights and their structure constants.
//!
//! All estimators sample: the sup over ℝ^{2n} in each admissibility
//! condition is replaced by a sup over the points of a [`SampleSpec`], so
//! every returned constant is a lower bound of the true one.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::quad::gauss_legendre;
use crate::sampling::{unit_ball_offsets, unit_directions, SampleSpec};
use crate::symplectic::{dual_metric, harmonic_mean, lambda_gain, QuadraticForm};

pub type FormFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `X ↦ g_X`.
#[derive(Clone)]
pub struct MetricField {
    n: usize,
    name: String,
    params: BTreeMap<String, f64>,
    form: FormFn,
    lambda: Option<ScalarFn>,
    trusted: bool,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("n", &self.n)
            .field("name", &self.name)
            .field("params", &self.params)
            .finish()
    }
}

impl MetricField {
    /// A user-supplied field. Every evaluation is validated.
    pub fn new(n: usize, name: impl Into<String>, form: FormFn) -> Self {
        MetricField {
            n,
            name: name.into(),
            params: BTreeMap::new(),
            form,
            lambda: None,
            trusted: false,
        }
    }

    pub fn constant(g: QuadraticForm) -> Self {
        let n = g.dim_n();
        let m = g.matrix().clone();
        MetricField::new(n, "constant", Arc::new(move |_| m.clone()))
    }

    /// Attach a closed form for `λ_g`.
    pub fn with_lambda(mut self, f: ScalarFn) -> Self {
        self.lambda = Some(f);
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn eval(&self, x: &[f64]) -> Result<QuadraticForm> {
        if x.len() != 2 * self.n {
            return Err(WeylError::DimensionMismatch {
                expected: 2 * self.n,
                got: x.len(),
            });
        }
        let m = (self.form)(x);
        if self.trusted {
            Ok(QuadraticForm::from_trusted(self.n, m))
        } else {
            QuadraticForm::new(self.n, m)
        }
    }

    pub fn dual(&self, x: &[f64]) -> Result<QuadraticForm> {
        Ok(dual_metric(&self.eval(x)?))
    }

    /// `λ_g(X)`.
    pub fn lambda(&self, x: &[f64]) -> Result<f64> {
        match &self.lambda {
            Some(f) => Ok(f(x)),
            None => lambda_gain(&self.eval(x)?),
        }
    }
}

/// A positive function `X ↦ m(X)`.
#[derive(Clone)]
pub struct WeightField {
    n: usize,
    name: String,
    f: ScalarFn,
}

impl fmt::Debug for WeightField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightField")
            .field("n", &self.n)
            .field("name", &self.name)
            .finish()
    }
}

impl WeightField {
    pub fn new(n: usize, name: impl Into<String>, f: ScalarFn) -> Self {
        WeightField {
            n,
            name: name.into(),
            f,
        }
    }

    pub fn one(n: usize) -> Self {
        WeightField::new(n, "one", Arc::new(|_| 1.0))
    }

    /// `λ_g^s`.
    pub fn lambda_power(g: &MetricField, s: f64) -> Self {
        let g = g.clone();
        WeightField::new(
            g.dim_n(),
            format!("lambda^{s}"),
            Arc::new(move |x| g.lambda(x).map(|l| l.powf(s)).unwrap_or(f64::NAN)),
        )
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// A built-in metric together with its natural weights: `one`, `order`
/// (the family's order weight with exponent `m`) and `lambda` (`λ_g`).
#[derive(Clone, Debug)]
pub struct Family {
    pub metric: MetricField,
    pub weights: Vec<WeightField>,
}

impl Family {
    pub fn weight(&self, name: &str) -> Option<&WeightField> {
        self.weights.iter().find(|w| w.name() == name)
    }
}

pub const FAMILY_NAMES: [&str; 5] = ["constant", "s10", "sigma_tau", "shubin", "semiclassical"];

fn xi_norm2(x: &[f64], n: usize) -> f64 {
    x[n..].iter().map(|v| v * v).sum()
}

fn x_norm2(x: &[f64], n: usize) -> f64 {
    x[..n].iter().map(|v| v * v).sum()
}

fn block_diag(n: usize, a: f64, b: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, i)] = a;
        m[(n + i, n + i)] = b;
    }
    m
}

fn bad_param(name: &str, reason: &str) -> WeylError {
    WeylError::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}

/// Build a named family. Recognized parameters: `n` (default 1), `m` (order
/// of the `order` weight, default 1), `tau` for `sigma_tau`, `h` for
/// `semiclassical`, `scale` for `constant` (`g = scale·Γ₀`).
pub fn builtin_family(name: &str, params: &BTreeMap<String, f64>) -> Result<Family> {
    let allowed: &[&str] = match name {
        "constant" => &["n", "m", "scale"],
        "s10" | "shubin" => &["n", "m"],
        "sigma_tau" => &["n", "m", "tau"],
        "semiclassical" => &["n", "m", "h"],
        _ => {
            return Err(WeylError::UnknownName {
                kind: "metric family",
                name: name.into(),
            })
        }
    };
    for (k, v) in params {
        if !allowed.contains(&k.as_str()) {
            return Err(bad_param(k, &format!("not a parameter of `{name}`")));
        }
        if !v.is_finite() {
            return Err(bad_param(k, "must be finite"));
        }
    }
    let nf = params.get("n").copied().unwrap_or(1.0);
    if nf < 1.0 || nf.fract() != 0.0 || nf > 4.0 {
        return Err(bad_param("n", "must be an integer in 1..=4"));
    }
    let n = nf as usize;
    let m = params.get("m").copied().unwrap_or(1.0);

    let (form, lambda, order): (FormFn, ScalarFn, ScalarFn) = match name {
        "constant" => {
            let s = params.get("scale").copied().unwrap_or(1.0);
            if s <= 0.0 {
                return Err(bad_param("scale", "must be positive"));
            }
            let lam = 1.0 / s;
            (
                Arc::new(move |_| block_diag(n, s, s)),
                Arc::new(move |_| lam),
                Arc::new(move |_| lam.powf(m)),
            )
        }
        "s10" => (
            Arc::new(move |x| block_diag(n, 1.0, 1.0 / (1.0 + xi_norm2(x, n)))),
            Arc::new(move |x| (1.0 + xi_norm2(x, n)).sqrt()),
            Arc::new(move |x| (1.0 + xi_norm2(x, n).sqrt()).powf(m)),
        ),
        "sigma_tau" => {
            let tau = params.get("tau").copied().unwrap_or(0.0);
            if tau < 0.0 {
                return Err(bad_param("tau", "must be non-negative"));
            }
            let lam = move |x: &[f64]| 1.0 + xi_norm2(x, n).sqrt() + tau;
            (
                Arc::new(move |x| {
                    let l = lam(x);
                    block_diag(n, 1.0, 1.0 / (l * l))
                }),
                Arc::new(lam),
                Arc::new(move |x| lam(x).powf(m)),
            )
        }
        "shubin" => {
            let lam = move |x: &[f64]| 1.0 + x_norm2(x, n) + xi_norm2(x, n);
            (
                Arc::new(move |x| {
                    let w = 1.0 / lam(x);
                    block_diag(n, w, w)
                }),
                Arc::new(lam),
                Arc::new(move |x| lam(x).powf(m)),
            )
        }
        "semiclassical" => {
            let h = params.get("h").copied().unwrap_or(1.0);
            if !(h > 0.0 && h <= 1.0) {
                return Err(bad_param("h", "must lie in (0, 1]"));
            }
            (
                Arc::new(move |_| block_diag(n, h, h)),
                Arc::new(move |_| 1.0 / h),
                Arc::new(move |_| h.powf(-m)),
            )
        }
        _ => unreachable!(),
    };
    let metric = MetricField {
        n,
        name: name.into(),
        params: params.clone(),
        form,
        lambda: Some(lambda.clone()),
        trusted: true,
    };
    let weights = vec![
        WeightField::one(n),
        WeightField::new(n, "order", order),
        WeightField::new(n, "lambda", lambda),
    ];
    Ok(Family { metric, weights })
}

/// Convenience for `builtin_family` with `(key, value)` pairs.
pub fn family(name: &str, params: &[(&str, f64)]) -> Result<Family> {
    let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin_family(name, &p)
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct StructureConstants {
    /// Slowness constant.
    pub c0: f64,
    /// Temperance constant; reported separately from `c0`.
    pub c0_prime: f64,
    pub n0: u32,
    pub mu_m: f64,
    pub nu_m: u32,
}

impl StructureConstants {
    /// The single constant obtained by taking the worse of slowness and temperance.
    pub fn c0_max(&self) -> f64 {
        self.c0.max(self.c0_prime)
    }

    /// Constants of a constant metric with weight `1`.
    pub fn flat() -> Self {
        StructureConstants {
            c0: 1.0,
            c0_prime: 1.0,
            n0: 0,
            mu_m: 1.0,
            nu_m: 0,
        }
    }
}

/// `U = {X : g(X − center) ≤ r²}`.
#[derive(Clone, Debug)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub form: QuadraticForm,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64, form: QuadraticForm) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(bad_param("radius", "must be positive"));
        }
        if center.len() != 2 * form.dim_n() {
            return Err(WeylError::DimensionMismatch {
                expected: 2 * form.dim_n(),
                got: center.len(),
            });
        }
        Ok(Ball {
            center,
            radius,
            form,
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.form.eval(&d) <= self.radius * self.radius
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct UncertaintyReport {
    pub pass: bool,
    /// Most negative eigenvalue of `g_X^σ − g_X` over the samples.
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
}

pub const UNCERTAINTY_TOLERANCE: f64 = 1e-10;

pub fn check_uncertainty(g: &MetricField, spec: &SampleSpec) -> Result<UncertaintyReport> {
    let pts = spec.points()?;
    check_dim(g, spec)?;
    let margins: Vec<f64> = pts
        .par_iter()
        .map(|x| {
            let gx = g.eval(x)?;
            Ok(gx.margin_below(&dual_metric(&gx)))
        })
        .collect::<Result<_>>()?;
    let (i, &worst) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    Ok(UncertaintyReport {
        pass: worst >= -UNCERTAINTY_TOLERANCE,
        worst_margin: worst,
        worst_point: pts[i].clone(),
        samples: pts.len(),
    })
}

fn check_dim(g: &MetricField, spec: &SampleSpec) -> Result<()> {
    if spec.dim() != 2 * g.dim_n() {
        return Err(WeylError::DimensionMismatch {
            expected: 2 * g.dim_n(),
            got: spec.dim(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SlownessOptions {
    /// Directions per radius (half the offsets in dimension 2).
    pub directions: usize,
    /// Radii, relative to the admissible radius, of the sampled offsets.
    pub radii: Vec<f64>,
    /// Give up above this constant.
    pub c_max: f64,
    /// Relative width of the final bisection bracket.
    pub rel_tol: f64,
}


impl Default for SlownessOptions {
    fn default() -> Self {
        SlownessOptions {
            directions: 12,
            radii: vec![1.0, 0.75, 0.5],
            c_max: 1e6,
            rel_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SlownessEstimate {
    /// Smallest sampled `C` with `g_X(X−Y) ≤ 1/C ⇒ C^{-1} ≤ g_X/g_Y ≤ C`.
    pub c0: f64,
    /// Sampled sup of the two-sided ratio at `c0`.
    pub sup_ratio: f64,
    pub samples: usize,
    pub offsets: usize,
    /// Always `true`: the estimate is a sampled lower bound.
    pub lower_bound: bool,
}

/// Per-sample data reused across bisection steps.
struct Anchor {
    x: Vec<f64>,
    gx: QuadraticForm,
    /// `L^{-T}` with `g_X = L Lᵀ`.
    unit: DMatrix<f64>,
}

fn anchors(g: &MetricField, pts: &[Vec<f64>]) -> Result<Vec<Anchor>> {
    pts.par_iter()
        .map(|x| {
            let gx = g.eval(x)?;
            let l = gx.cholesky_lower();
            let unit = l
                .transpose()
                .solve_upper_triangular(&DMatrix::identity(l.nrows(), l.ncols()))
                .expect("triangular factor is invertible");
            Ok(Anchor {
                x: x.clone(),
                gx,
                unit,
            })
        })
        .collect()
}

fn offset_point(a: &Anchor, u: &[f64], scale: f64) -> Vec<f64> {
    let d = a.x.len();
    (0..d)
        .map(|i| {
            let mut s = 0.0;
            for k in 0..d {
                s += a.unit[(i, k)] * u[k];
            }
            a.x[i] + scale * s
        })
        .collect()
}

/// Sup over anchors and offsets of `f(anchor, Y)` with `g_X(Y−X) ≤ radius²`.
fn ball_sup<F>(anchors: &[Anchor], offsets: &[Vec<f64>], radius: f64, f: F) -> Result<f64>
where
    F: Fn(&Anchor, &[f64]) -> Result<f64> + Sync,
{
    let sups: Vec<f64> = anchors
        .par_iter()
        .map(|a| {
            let mut s: f64 = 0.0;
            for u in offsets {
                let y = offset_point(a, u, radius);
                s = s.max(f(a, &y)?);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(sups.into_iter().fold(0.0, f64::max))
}

/// Smallest `C` with `F(C) ≤ C`, bisecting in `log C`.
fn fixed_point<F>(c_max: f64, rel_tol: f64, what: &'static str, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f1 = f(1.0)?;
    if f1 <= 1.0 * (1.0 + 1e-12) {
        return Ok((1.0, f1));
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    let mut fhi = f(hi)?;
    while fhi > hi {
        lo = hi;
        hi *= 2.0;
        if hi > c_max {
            return Err(WeylError::NoConvergence {
                what,
                iterations: 0,
                residual: fhi,
            });
        }
        fhi = f(hi)?;
    }
    while hi / lo > 1.0 + rel_tol {
        let mid = (lo * hi).sqrt();
        let fm = f(mid)?;
        if fm <= mid {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
        }
    }
    Ok((hi, fhi))
}

fn two_sided(gx: &QuadraticForm, gy: &QuadraticForm) -> f64 {
    let (lo, hi) = gx.ratio_bounds(gy);
    hi.max(1.0 / lo)
}

pub fn estimate_slowness(
    g: &MetricField,
    spec: &SampleSpec,
    opts: &SlownessOptions,
) -> Result<SlownessEstimate> {
    check_dim(g, spec)?;
    let pts = spec.points()?;
    let offsets = unit_ball_offsets(spec.dim(), opts.directions, &opts.radii, spec.seed);
    if pts.is_empty() || offsets.is_empty() {
        return Err(WeylError::Precondition("empty admissible pair set".into()));
    }
    let anchors = anchors(g, &pts)?;
    let (c0, sup_ratio) = fixed_point(opts.c_max, opts.rel_tol, "slowness bisection", |c| {
        ball_sup(&anchors, &offsets, c.powf(-0.5), |a, y| {
            Ok(two_sided(&a.gx, &g.eval(y)?))
        })
    })?;
    Ok(SlownessEstimate {
        c0,
        sup_ratio,
        samples: pts.len(),
        offsets: offsets.len(),
        lower_bound: true,
    })
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TemperanceEstimate {
    pub n0: u32,
    /// Sampled sup for the certified exponent.
    pub c0_prime: f64,
    /// Certification threshold for `c0_prime`.
    pub cap: f64,
    /// Sampled sup of `g_X/g_Y (1+d)^{-N}` for `N = 0..=8`.
    pub sup_by_exponent: Vec<f64>,
    /// Log-log slope of the ratio envelope against `1 + d`, when enough
    /// far pairs exist.
    pub fitted_exponent: Option<f64>,
    pub pairs: usize,
    pub lower_bound: bool,
}

pub const MAX_EXPONENT: u32 = 8;

/// `g_X`-radii of the anchored pairs in the temperance sweep. Pairs drawn
/// only from the sample cloud are almost all far apart in wide boxes.
pub const TEMPERANCE_SCALES: [f64; 9] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
const TEMPERANCE_DIRECTIONS: usize = 12;

/// A sampled ordered pair: `(value, 1 + d, X, Y)` with `d = (g_X^σ ∧ g_Y^σ)(X−Y)`.
type PairEntry = (f64, f64, Vec<f64>, Vec<f64>);

/// All pairs of samples plus offsets `Y = X + s·L_X^{-T}u` around every
/// sample, both orientations, valued by `value(X, g_X, Y, g_Y)`.
fn temperance_pairs<F>(g: &MetricField, pts: &[Vec<f64>], seed: u64, value: F) -> Result<Vec<PairEntry>>
where
    F: Fn(&[f64], &QuadraticForm, &[f64], &QuadraticForm) -> f64 + Sync,
{
    let anchors = anchors(g, pts)?;
    let offsets = unit_ball_offsets(pts[0].len(), TEMPERANCE_DIRECTIONS, &TEMPERANCE_SCALES, seed);
    let entry = |x: &[f64], gx: &QuadraticForm, y: Vec<f64>, gy: &QuadraticForm| -> Result<[PairEntry; 2]> {
        let q = harmonic_mean(&dual_metric(gx), &dual_metric(gy))?;
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let one_d = 1.0 + q.eval(&diff);
        Ok([
            (value(x, gx, &y, gy), one_d, x.to_vec(), y.clone()),
            (value(&y, gy, x, gx), one_d, y, x.to_vec()),
        ])
    };
    let rows: Vec<Vec<PairEntry>> = (0..anchors.len())
        .into_par_iter()
        .map(|i| {
            let a = &anchors[i];
            let mut row = Vec::new();
            for b in &anchors[i + 1..] {
                row.extend(entry(&a.x, &a.gx, b.x.clone(), &b.gx)?);
            }
            for u in &offsets {
                let y = offset_point(a, u, 1.0);
                let gy = g.eval(&y)?;
                row.extend(entry(&a.x, &a.gx, y, &gy)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn sup_by_exponent(table: &[PairEntry]) -> (Vec<f64>, Vec<usize>) {
    // the diagonal X = Y contributes exactly 1
    let mut sups = vec![1.0f64; MAX_EXPONENT as usize + 1];
    let mut arg = vec![0; MAX_EXPONENT as usize + 1];
    for (idx, &(r, one_d, _, _)) in table.iter().enumerate() {
        let mut den = 1.0;
        for k in 0..=MAX_EXPONENT as usize {
            let v = r / den;
            if v > sups[k] {
                sups[k] = v;
                arg[k] = idx;
            }
            den *= one_d;
        }
    }
    (sups, arg)
}

/// Slope of the binned upper envelope of `log r` against `log(1+d)`.
fn envelope_slope(table: &[PairEntry]) -> Option<f64> {
    let far: Vec<(f64, f64)> = table
        .iter()
        .filter(|t| t.1 > 2.0)
        .map(|t| (t.1.ln(), t.0.ln()))
        .collect();
    if far.len() < 8 {
        return None;
    }
    let lo = far.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = far.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1.0 {
        return None;
    }
    let bins = 12;
    let mut env = vec![f64::NEG_INFINITY; bins];
    for (x, y) in &far {
        let b = (((x - lo) / (hi - lo)) * bins as f64).min(bins as f64 - 1.0) as usize;
        env[b] = env[b].max(*y);
    }
    let pts: Vec<(f64, f64)> = env
        .iter()
        .enumerate()
        .filter(|(_, y)| y.is_finite())
        .map(|(b, y)| (lo + (b as f64 + 0.5) * (hi - lo) / bins as f64, *y))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn certify_exponent(
    sups: &[f64],
    arg: &[usize],
    table: &[PairEntry],
    cap: f64,
    what: &str,
) -> Result<(u32, f64)> {
    for (k, &s) in sups.iter().enumerate() {
        if s <= cap * (1.0 + 1e-12) {
            return Ok((k as u32, s));
        }
    }
    let w = &table[arg[MAX_EXPONENT as usize]];
    Err(WeylError::Certification {
        reason: format!(
            "no {what} exponent in 0..={MAX_EXPONENT} stays below {cap} (sup {:e})",
            sups[MAX_EXPONENT as usize]
        ),
        x: w.2.clone(),
        y: w.3.clone(),
    })
}

/// Least `N₀ ∈ 0..=8` whose sampled sup `C₀'(N₀)` does not exceed `cap`.
///
/// One may assume `C₀' = C₀`, so callers normally pass the
/// slowness estimate as `cap`.
pub fn estimate_temperance(g: &MetricField, spec: &SampleSpec, cap: f64) -> Result<TemperanceEstimate> {
    check_dim(g, spec)?;
    let pts = spec.points()?;
    let table = temperance_pairs(g, &pts, spec.seed, |_, gx, _, gy| gx.ratio_bounds(gy).1)?;
    let (sups, arg) = sup_by_exponent(&table);
    let (n0, c0_prime) = certify_exponent(&sups, &arg, &table, cap, "temperance")?;
    Ok(TemperanceEstimate {
        n0,
        c0_prime,
        cap,
        sup_by_exponent: sups,
        fitted_exponent: envelope_slope(&table),
        pairs: table.len(),
        lower_bound: true,
    })
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct WeightConstants {
    pub mu: f64,
    pub nu: u32,
    pub sup_by_exponent: Vec<f64>,
    pub lower_bound: bool,
}

/// `(μ_m, ν_m)` for a weight on a metric with slowness constant `c0`.
///
/// `μ` is the smallest sampled value with `m(X)/m(Y) ∈ [μ^{-1}, μ]` on the
/// `g_X`-balls of radius² `min(C₀^{-1}, μ^{-1})`; `ν` is the least exponent
/// whose temperance sup stays below `μ`.
pub fn weight_constants(
    m: &WeightField,
    g: &MetricField,
    spec: &SampleSpec,
    c0: f64,
    opts: &SlownessOptions,
) -> Result<WeightConstants> {
    check_dim(g, spec)?;
    if m.dim_n() != g.dim_n() {
        return Err(WeylError::DimensionMismatch {
            expected: 2 * g.dim_n(),
            got: 2 * m.dim_n(),
        });
    }
    let pts = spec.points()?;
    let vals: Vec<f64> = pts.iter().map(|x| m.eval(x)).collect();
    if let Some(v) = vals.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(WeylError::Precondition(format!(
            "weight `{}` must be positive, got {v}",
            m.name()
        )));
    }
    let offsets = unit_ball_offsets(spec.dim(), opts.directions, &opts.radii, spec.seed);
    let anchors = anchors(g, &pts)?;
    let (mu, _) = fixed_point(opts.c_max, opts.rel_tol, "weight bisection", |mu| {
        let r = c0.max(mu).powf(-0.5);
        ball_sup(&anchors, &offsets, r, |a, y| {
            let q = m.eval(&a.x) / m.eval(y);
            Ok(q.max(1.0 / q))
        })
    })?;
    let table = temperance_pairs(g, &pts, spec.seed, |x, _, y, _| m.eval(x) / m.eval(y))?;
    let (sups, arg) = sup_by_exponent(&table);
    let (nu, _) = certify_exponent(&sups, &arg, &table, mu, "weight temperance")?;
    Ok(WeightConstants {
        mu,
        nu,
        sup_by_exponent: sups,
        lower_bound: true,
    })
}

/// Slowness, temperance (capped at the slowness constant) and the
/// constants of `weight`, in one pass.
pub fn estimate_structure_constants(
    g: &MetricField,
    weight: &WeightField,
    spec: &SampleSpec,
    opts: &SlownessOptions,
) -> Result<StructureConstants> {
    let s = estimate_slowness(g, spec, opts)?;
    let t = estimate_temperance(g, spec, s.c0)?;
    let w = weight_constants(weight, g, spec, s.c0, opts)?;
    Ok(StructureConstants {
        c0: s.c0,
        c0_prime: t.c0_prime,
        n0: t.n0,
        mu_m: w.mu,
        nu_m: w.nu,
    })
}

/// Projection onto `{z : (z−c)ᵀG(z−c) ≤ r²}` in the `Q` inner product.
///
/// With `Q = L Lᵀ` and `L^{-1} G L^{-T} = V Γ Vᵀ`, the KKT point is
/// `z − c = L^{-T} V (I + μΓ)^{-1} Vᵀ Lᵀ (w − c)`, where `μ ≥ 0` solves the
/// scalar equation `Σ γ_i p_i² / (1 + μγ_i)² = r²`.
struct EllipsoidProjector {
    c: DVector<f64>,
    r2: f64,
    g: DMatrix<f64>,
    lt: DMatrix<f64>,
    back: DMatrix<f64>,
    gamma: DVector<f64>,
}

impl EllipsoidProjector {
    fn new(ball: &Ball, q_lower: &DMatrix<f64>, q_lower_inv: &DMatrix<f64>) -> Self {
        let g = ball.form.matrix().clone();
        let m = q_lower_inv * &g * q_lower_inv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let eig = m.symmetric_eigen();
        let v = eig.eigenvectors;
        EllipsoidProjector {
            c: DVector::from_column_slice(&ball.center),
            r2: ball.radius * ball.radius,
            lt: v.transpose() * q_lower.transpose(),
            back: q_lower_inv.transpose() * v,
            gamma: eig.eigenvalues.map(|v| v.max(0.0)),
            g,
        }
    }

    fn project(&self, w: &DVector<f64>) -> DVector<f64> {
        let delta = w - &self.c;
        if (delta.transpose() * &self.g * &delta)[(0, 0)] <= self.r2 {
            return w.clone();
        }
        let p = &self.lt * &delta;
        let phi = |mu: f64| -> (f64, f64) {
            let mut s = 0.0;
            let mut ds = 0.0;
            for i in 0..p.len() {
                let den = 1.0 + mu * self.gamma[i];
                let t = self.gamma[i] * p[i] * p[i] / (den * den);
                s += t;
                ds += -2.0 * self.gamma[i] * t / den;
            }
            (s, ds)
        };
        // Newton on ψ(μ) = φ^{-1/2} − r^{-1}, which is nearly linear; the
        // iterates increase monotonically from μ = 0.
        let target = self.r2.sqrt().recip();
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut mu = 0.0;
        for _ in 0..200 {
            let (s, ds) = phi(mu);
            let psi = s.powf(-0.5) - target;
            if psi < 0.0 {
                lo = mu;
            } else {
                hi = mu;
            }
            let dpsi = -0.5 * s.powf(-1.5) * ds;
            let mut next = mu - psi / dpsi;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * mu.max(1.0) };
            }
            if (next - mu).abs() <= 1e-15 * mu.abs().max(1e-300) {
                mu = next;
                break;
            }
            mu = next;
        }
        let scaled = DVector::from_iterator(
            p.len(),
            (0..p.len()).map(|i| p[i] / (1.0 + mu * self.gamma[i])),
        );
        &self.c + &self.back * scaled
    }

    /// `max_{z ∈ E} a·z`.
    fn support(&self, a: &DVector<f64>, g_inv: &DMatrix<f64>) -> f64 {
        a.dot(&self.c) + self.r2.sqrt() * (a.transpose() * g_inv * a)[(0, 0)].max(0.0).sqrt()
    }
}

/// `inf_{Y ∈ U} form(X − Y)`.
pub fn point_ball_distance(ball: &Ball, x: &[f64], form: &QuadraticForm) -> f64 {
    if ball.contains(x) {
        return 0.0;
    }
    let d = x.len();
    let ql = form.cholesky_lower();
    let qli = ql
        .clone()
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .expect("triangular factor is invertible");
    let p = EllipsoidProjector::new(ball, &ql, &qli);
    let w = DVector::from_column_slice(x);
    let z = p.project(&w);
    let diff: Vec<f64> = (&w - z).iter().copied().collect();
    form.eval(&diff)
}

pub const BALL_DISTANCE_MAX_ITER: usize = 20_000;

/// `inf { form(X−Y) : X ∈ U₁, Y ∈ U₂ }`.
///
/// Alternating `form`-projections between the ellipsoids. The iteration
/// stops once the convexity lower bound
/// `f(x',y') ≥ f(x,y) + 2⟨Q(x−y), (x'−y') − (x−y)⟩` minimized over both
/// ellipsoids certifies a relative gap of `1e-10`.
pub fn ball_distance(b1: &Ball, b2: &Ball, form: &QuadraticForm) -> Result<f64> {
    let d = b1.center.len();
    if b2.center.len() != d || 2 * form.dim_n() != d {
        return Err(WeylError::DimensionMismatch {
            expected: d,
            got: b2.center.len().max(2 * form.dim_n()),
        });
    }
    if b1.contains(&b2.center) || b2.contains(&b1.center) {
        return Ok(0.0);
    }
    let q = form.matrix();
    let ql = form.cholesky_lower();
    let qli = ql
        .clone()
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .expect("triangular factor is invertible");
    let p1 = EllipsoidProjector::new(b1, &ql, &qli);
    let p2 = EllipsoidProjector::new(b2, &ql, &qli);
    let g1i = b1.form.inverse_matrix();
    let g2i = b2.form.inverse_matrix();
    let scale = {
        let diff = &p1.c - &p2.c;
        (diff.transpose() * q * &diff)[(0, 0)]
    };
    let tiny = 1e-14 * scale;

    let mut y = p2.c.clone();
    let mut x = p1.project(&y);
    let mut obj = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for _ in 0..BALL_DISTANCE_MAX_ITER {
        y = p2.project(&x);
        x = p1.project(&y);
        let diff = &x - &y;
        let qd = q * &diff;
        obj = diff.dot(&qd);
        if obj <= tiny {
            return Ok(0.0);
        }
        // min over E₁ of qd·x' minus max over E₂ of qd·y'
        let lin = -p1.support(&(-&qd), &g1i) - p2.support(&qd, &g2i);
        let lb = obj + 2.0 * (lin - diff.dot(&qd));
        gap = obj - lb.max(0.0);
        if gap <= 1e-10 * obj {
            return Ok(obj);
        }
    }
    if d == 2 {
        return Ok(boundary_grid_distance(b1, b2, form, 2048).min(obj));
    }
    Err(WeylError::NoConvergence {
        what: "ball distance",
        iterations: BALL_DISTANCE_MAX_ITER,
        residual: gap,
    })
}

/// Dense search over both ellipse boundaries (n = 1) followed by a local
/// refinement of the best pair of angles.
fn boundary_grid_distance(b1: &Ball, b2: &Ball, form: &QuadraticForm, m: usize) -> f64 {
    let boundary = |b: &Ball, th: f64| -> [f64; 2] {
        let u = b.form.unit_direction(&[th.cos(), th.sin()]);
        [b.center[0] + b.radius * u[0], b.center[1] + b.radius * u[1]]
    };
    let f = |s: f64, t: f64| {
        let a = boundary(b1, s);
        let b = boundary(b2, t);
        form.eval(&[a[0] - b[0], a[1] - b[1]])
    };
    let step = 2.0 * std::f64::consts::PI / m as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let (s, t) = (i as f64 * step, j as f64 * step);
            let v = f(s, t);
            if v < best.0 {
                best = (v, s, t);
            }
        }
    }
    let (mut v, mut s, mut t) = best;
    let mut h = step;
    while h > 1e-12 {
        let mut moved = false;
        for (ds, dt) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let w = f(s + ds, t + dt);
            if w < v {
                v = w;
                s += ds;
                t += dt;
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    v
}

/// `δ_r(X, Y) = 1 + (g_X^σ ∧ g_Y^σ)(U_{X,r} − U_{Y,r})`.
pub fn delta_r(g: &MetricField, x: &[f64], y: &[f64], r: f64) -> Result<f64> {
    let gx = g.eval(x)?;
    let gy = g.eval(y)?;
    delta_r_forms(&gx, x, &gy, y, r)
}

pub(crate) fn delta_r_forms(
    gx: &QuadraticForm,
    x: &[f64],
    gy: &QuadraticForm,
    y: &[f64],
    r: f64,
) -> Result<f64> {
    let q = harmonic_mean(&dual_metric(gx), &dual_metric(gy))?;
    let bx = Ball::new(x.to_vec(), r, gx.clone())?;
    let by = Ball::new(y.to_vec(), r, gy.clone())?;
    Ok(1.0 + ball_distance(&bx, &by, &q)?)
}

/// `N₁ = nN₀ + (n+1)(2N₀+1)`.
pub fn integrability_exponent(n: usize, n0: u32) -> u32 {
    n as u32 * n0 + (n as u32 + 1) * (2 * n0 + 1)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Truncation {
    /// Angles on the circle (n = 1) or random directions (n > 1).
    pub directions: usize,
    /// Gauss–Legendre nodes per radial shell.
    pub radial_nodes: usize,
    /// Stop once a shell contributes less than this fraction of the total.
    pub tail_tol: f64,
    pub max_shells: usize,
    pub seed: u64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            directions: 64,
            radial_nodes: 24,
            tail_tol: 1e-6,
            max_shells: 48,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct IntegrabilityReport {
    pub value: f64,
    pub n1: u32,
    pub shells: usize,
    pub last_shell_fraction: f64,
    /// Outer radius of the truncated domain, in `g_X`-units.
    pub radius: f64,
}

fn sphere_area(d: usize) -> f64 {
    // 2π^{d/2}/Γ(d/2) for even d
    let m = d / 2;
    2.0 * std::f64::consts::PI.powi(m as i32) / crate::jet::factorial(m - 1)
}

/// `∫ δ_r(X,Y)^{-N₁} |g_Y|^{1/2} dY` over geometrically growing shells in
/// `g_X`-normalized coordinates, with `N₁` from [`integrability_exponent`].
pub fn integrability_constant(
    g: &MetricField,
    x: &[f64],
    r: f64,
    constants: &StructureConstants,
    truncation: &Truncation,
) -> Result<IntegrabilityReport> {
    let n = g.dim_n();
    let d = 2 * n;
    if x.len() != d {
        return Err(WeylError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if !(r > 0.0) || r > constants.c0.powf(-0.5) * (1.0 + 1e-12) {
        return Err(WeylError::Precondition(format!(
            "radius {r} must lie in (0, C0^(-1/2)] with C0 = {}",
            constants.c0
        )));
    }
    let n1 = integrability_exponent(n, constants.n0) as i32;
    let gx = g.eval(x)?;
    let inv_sqrt_det_x = 1.0 / gx.sqrt_det();
    let l = gx.cholesky_lower();
    let unit = l
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(d, d))
        .expect("triangular factor is invertible");

    let (dirs, dir_weight): (Vec<Vec<f64>>, f64) = if d == 2 {
        let m = truncation.directions;
        let dirs = (0..m)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
        (dirs, 2.0 * std::f64::consts::PI / m as f64)
    } else {
        let mut v = unit_directions(d, truncation.directions, truncation.seed);
        let neg: Vec<Vec<f64>> = v.iter().map(|u| u.iter().map(|a| -a).collect()).collect();
        v.extend(neg);
        let w = sphere_area(d) / v.len() as f64;
        (v, w)
    };

    let integrand = |rho: f64, u: &[f64]| -> Result<f64> {
        let y: Vec<f64> = (0..d)
            .map(|i| x[i] + rho * (0..d).map(|k| unit[(i, k)] * u[k]).sum::<f64>())
            .collect();
        let gy = g.eval(&y)?;
        let delta = delta_r_forms(&gx, x, &gy, &y, r)?;
        Ok(delta.powi(-n1) * gy.sqrt_det() * inv_sqrt_det_x * rho.powi(d as i32 - 1))
    };

    let mut edges = vec![0.0, 2.0 * r];
    let mut total = 0.0;
    let mut last = f64::INFINITY;
    for shell in 0..truncation.max_shells {
        if shell + 1 >= edges.len() {
            let e = *edges.last().unwrap();
            edges.push(2.0 * e);
        }
        let (a, b) = (edges[shell], edges[shell + 1]);
        let (nodes, weights) = gauss_legendre(truncation.radial_nodes, a, b);
        let contrib: f64 = dirs
            .par_iter()
            .map(|u| {
                let mut s = 0.0;
                for (rho, w) in nodes.iter().zip(&weights) {
                    s += w * integrand(*rho, u)?;
                }
                Ok(s)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .sum::<f64>()
            * dir_weight;
        if !contrib.is_finite() {
            return Err(WeylError::NonFinite("integrability quadrature"));
        }
        total += contrib;
        last = contrib / total;
        if shell >= 2 && last < truncation.tail_tol {
            return Ok(IntegrabilityReport {
                value: total,
                n1: n1 as u32,
                shells: shell + 1,
                last_shell_fraction: last,
                radius: b,
            });
        }
    }
    Err(WeylError::Truncation { tail: last })
}
