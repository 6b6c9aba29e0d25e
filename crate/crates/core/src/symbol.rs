//! Symbols with exact directional derivatives, their semi-norms, confinement
//! norms and the windowed-Fourier norm of the Sjöstrand class.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::jet::{factorial, Jet, MAX_ORDER};
use crate::metric::{point_ball_distance, Ball, MetricField, WeightField};
use crate::sampling::{unit_directions, SampleSpec};
use crate::symplectic::{dual_metric, QuadraticForm};
use crate::window::{chi0_jet, lattice_window};

/// A smooth real function on ℝ^{2n}.
///
/// `jet(X, T, k)` returns the Taylor coefficients of `t ↦ a(X + tT)` up to
/// order `k`, so `a^{(k)}(X)T^k = k!·c_k`.
pub trait Symbol: Send + Sync {
    fn dim_n(&self) -> usize;

    fn name(&self) -> String;

    fn jet(&self, x: &[f64], dir: &[f64], order: usize) -> Jet;

    fn max_order(&self) -> usize {
        MAX_ORDER
    }

    fn value(&self, x: &[f64]) -> f64 {
        let zero = vec![0.0; x.len()];
        self.jet(x, &zero, 0).value()
    }

    /// `true` when the symbol decays at infinity in every direction; used by
    /// the aliasing and tail certificates.
    fn decays(&self) -> bool {
        false
    }

    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
}

pub type SymbolRef = Arc<dyn Symbol>;

impl fmt::Debug for dyn Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({}, n={})", self.name(), self.dim_n())
    }
}

pub type JetExpr = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

/// A symbol written as an expression in the coordinate jets
/// `(x_1, …, x_n, ξ_1, …, ξ_n)`.
#[derive(Clone)]
pub struct ExprSymbol {
    n: usize,
    name: String,
    expr: JetExpr,
    decays: bool,
    params: BTreeMap<String, f64>,
}

impl ExprSymbol {
    pub fn new(n: usize, name: impl Into<String>, expr: JetExpr) -> Self {
        ExprSymbol {
            n,
            name: name.into(),
            expr,
            decays: false,
            params: BTreeMap::new(),
        }
    }

    pub fn decaying(mut self) -> Self {
        self.decays = true;
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn into_ref(self) -> SymbolRef {
        Arc::new(self)
    }
}

impl Symbol for ExprSymbol {
    fn dim_n(&self) -> usize {
        self.n
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn jet(&self, x: &[f64], dir: &[f64], order: usize) -> Jet {
        let vars: Vec<Jet> = x
            .iter()
            .zip(dir)
            .map(|(&a, &t)| Jet::variable(a, t, order))
            .collect();
        (self.expr)(&vars)
    }

    fn decays(&self) -> bool {
        self.decays
    }

    fn params(&self) -> BTreeMap<String, f64> {
        self.params.clone()
    }
}

/// A plain function with central-difference derivatives.
///
/// Each derivative is computed with steps `h = ε^{1/(k+2)}` and `h/2`; if the
/// two disagree by more than `tol` (relative) the coefficient is NaN, which
/// every estimator reports as a non-finite value.
#[derive(Clone)]
pub struct FiniteDifferenceSymbol {
    n: usize,
    name: String,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    tol: f64,
}

pub const FD_MAX_ORDER: usize = 6;

impl FiniteDifferenceSymbol {
    pub fn new(n: usize, name: impl Into<String>, f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, tol: f64) -> Self {
        FiniteDifferenceSymbol {
            n,
            name: name.into(),
            f,
            tol,
        }
    }

    fn central(&self, x: &[f64], dir: &[f64], k: usize, h: f64) -> f64 {
        // Σ_j (−1)^j C(k,j) φ((k/2 − j)h) / h^k
        let mut s = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            let t = (k as f64 / 2.0 - j as f64) * h;
            let p: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + t * b).collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom * (self.f)(&p);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        s / h.powi(k as i32)
    }

    /// Derivative with its two-step consistency defect.
    pub fn derivative_checked(&self, x: &[f64], dir: &[f64], k: usize) -> (f64, f64) {
        if k == 0 {
            return ((self.f)(x), 0.0);
        }
        let h = f64::EPSILON.powf(1.0 / (k as f64 + 2.0));
        let d1 = self.central(x, dir, k, h);
        let d2 = self.central(x, dir, k, 0.5 * h);
        ((4.0 * d2 - d1) / 3.0, (d1 - d2).abs() / (1.0 + d2.abs()))
    }
}

impl Symbol for FiniteDifferenceSymbol {
    fn dim_n(&self) -> usize {
        self.n
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn max_order(&self) -> usize {
        FD_MAX_ORDER
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn jet(&self, x: &[f64], dir: &[f64], order: usize) -> Jet {
        let mut c = [0.0; MAX_ORDER + 1];
        for (k, ck) in c.iter_mut().enumerate().take(order.min(FD_MAX_ORDER) + 1) {
            let (d, defect) = self.derivative_checked(x, dir, k);
            *ck = if defect <= self.tol { d / factorial(k) } else { f64::NAN };
        }
        for ck in c.iter_mut().take(order + 1).skip(FD_MAX_ORDER + 1) {
            *ck = f64::NAN;
        }
        Jet::from_coeffs(&c[..=order])
    }
}

/// `Σ cᵢ aᵢ`.
pub struct Combination {
    terms: Vec<(f64, SymbolRef)>,
}

impl Combination {
    pub fn new(terms: Vec<(f64, SymbolRef)>) -> Self {
        assert!(!terms.is_empty());
        Combination { terms }
    }
}

impl Symbol for Combination {
    fn dim_n(&self) -> usize {
        self.terms[0].1.dim_n()
    }

    fn name(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, a)| format!("{c}*{}", a.name()))
            .collect();
        parts.join(" + ")
    }

    fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.1.max_order()).min().unwrap()
    }

    fn jet(&self, x: &[f64], dir: &[f64], order: usize) -> Jet {
        let mut j = Jet::zero(order);
        for (c, a) in &self.terms {
            j = j + a.jet(x, dir, order).scale(*c);
        }
        j
    }

    fn decays(&self) -> bool {
        self.terms.iter().all(|t| t.1.decays())
    }
}

/// `a · b`.
pub struct Product(pub SymbolRef, pub SymbolRef);

impl Symbol for Product {
    fn dim_n(&self) -> usize {
        self.0.dim_n()
    }

    fn name(&self) -> String {
        format!("({})*({})", self.0.name(), self.1.name())
    }

    fn max_order(&self) -> usize {
        self.0.max_order().min(self.1.max_order())
    }

    fn jet(&self, x: &[f64], dir: &[f64], order: usize) -> Jet {
        self.0.jet(x, dir, order) * self.1.jet(x, dir, order)
    }

    fn decays(&self) -> bool {
        self.0.decays() || self.1.decays()
    }
}

pub fn scaled(c: f64, a: SymbolRef) -> SymbolRef {
    Arc::new(Combination::new(vec![(c, a)]))
}

pub fn sum(a: SymbolRef, b: SymbolRef) -> SymbolRef {
    Arc::new(Combination::new(vec![(1.0, a), (1.0, b)]))
}

pub fn product(a: SymbolRef, b: SymbolRef) -> SymbolRef {
    Arc::new(Product(a, b))
}

fn check_order(a: &dyn Symbol, k: usize) -> Result<()> {
    if k > a.max_order() {
        return Err(WeylError::OrderUnavailable {
            requested: k,
            available: a.max_order(),
        });
    }
    Ok(())
}

/// `a^{(k)}(X)T^k`.
pub fn directional(a: &dyn Symbol, x: &[f64], t: &[f64], k: usize) -> Result<f64> {
    check_order(a, k)?;
    Ok(a.jet(x, t, k).derivative(k))
}

/// `a^{(k)}(X)(T₁, …, T_k)` by polarization:
/// `2^{-k}/k! Σ_{ε ∈ {±1}^k} ε₁⋯ε_k a^{(k)}(X)(Σ εᵢTᵢ)^k`.
pub fn multilinear(a: &dyn Symbol, x: &[f64], dirs: &[Vec<f64>]) -> Result<f64> {
    let k = dirs.len();
    check_order(a, k)?;
    if k == 0 {
        return Ok(a.value(x));
    }
    let d = x.len();
    let mut acc = 0.0;
    for mask in 0u32..(1 << k) {
        let mut t = vec![0.0; d];
        let mut sign = 1.0;
        for (i, dir) in dirs.iter().enumerate() {
            let e = if mask & (1 << i) != 0 { -1.0 } else { 1.0 };
            sign *= e;
            for (tj, dj) in t.iter_mut().zip(dir) {
                *tj += e * dj;
            }
        }
        acc += sign * a.jet(x, &t, k).derivative(k);
    }
    Ok(acc / (2f64.powi(k as i32) * factorial(k)))
}

/// Mixed partial `∂^α a(X)`, with `α` given per coordinate.
pub fn partial(a: &dyn Symbol, x: &[f64], alpha: &[usize]) -> Result<f64> {
    let d = x.len();
    let mut dirs = Vec::new();
    for (i, &m) in alpha.iter().enumerate() {
        for _ in 0..m {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            dirs.push(e);
        }
    }
    multilinear(a, x, &dirs)
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

pub const SYMBOL_NAMES: [&str; 13] = [
    "one",
    "zero",
    "coordinate",
    "gaussian",
    "sin_x",
    "sincos",
    "xi_squared",
    "s10_power",
    "fp_test",
    "sigma_tau_fp",
    "bump",
    "harmonic",
    "adapted_sincos",
];

/// Parameters accepted by a built-in symbol.
pub fn symbol_params(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "one" | "zero" | "sin_x" | "xi_squared" | "fp_test" | "harmonic" => &["n"],
        "coordinate" => &["n", "index"],
        "gaussian" => &["n", "s", "x0", "xi0"],
        "bump" => &["n", "radius", "x0", "xi0"],
        "sincos" => &["n", "p", "q"],
        "s10_power" => &["n", "m"],
        "sigma_tau_fp" => &["n", "tau"],
        "adapted_sincos" => &["n", "tau", "radius"],
        _ => return None,
    })
}

/// Built-in symbol corpus.
///
/// | name | symbol | parameters |
/// |---|---|---|
/// | `one`, `zero` | constants | `n` |
/// | `coordinate` | `X_i` | `n`, `index` |
/// | `gaussian` | `exp(−π s |X − c|²)` | `n`, `s`, `x0`, `xi0` |
/// | `sin_x` | `sin x₁` | `n` |
/// | `sincos` | `sin(p x₁) cos(q ξ₁)` | `n`, `p`, `q` |
/// | `xi_squared` | `|ξ|²` | `n` |
/// | `s10_power` | `(1+|ξ|²)^{m/2}` | `n`, `m` |
/// | `fp_test` | `sin²(x₁) ξ₁²` | `n` |
/// | `sigma_tau_fp` | `ξ₁² + τ² sin²(x₁)` | `n`, `tau` |
/// | `bump` | `χ₀(|X − c|²/R²)` | `n`, `radius`, `x0`, `xi0` |
/// | `harmonic` | `|x|² + |ξ|²` | `n` |
/// | `adapted_sincos` | `sin x cos η χ₀((x² + η²)/R²)`, `η = ξ/(1+τ)` | `n = 1`, `tau`, `radius` |
pub fn builtin_symbol(name: &str, params: &BTreeMap<String, f64>) -> Result<SymbolRef> {
    let allowed = symbol_params(name).ok_or_else(|| WeylError::UnknownName {
        kind: "symbol",
        name: name.into(),
    })?;
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(WeylError::InvalidParameter {
            name: k.clone(),
            reason: format!("not a parameter of `{name}`"),
        });
    }
    let nf = param(params, "n", 1.0);
    if nf < 1.0 || nf.fract() != 0.0 || nf > 4.0 {
        return Err(WeylError::InvalidParameter {
            name: "n".into(),
            reason: "must be an integer in 1..=4".into(),
        });
    }
    let n = nf as usize;
    let center = {
        let x0 = param(params, "x0", 0.0);
        let xi0 = param(params, "xi0", 0.0);
        let mut c = vec![x0; n];
        c.extend(std::iter::repeat(xi0).take(n));
        c
    };
    let sym = match name {
        "one" => ExprSymbol::new(n, "one", Arc::new(|v: &[Jet]| Jet::constant(1.0, v[0].order()))),
        "zero" => ExprSymbol::new(n, "zero", Arc::new(|v: &[Jet]| Jet::zero(v[0].order()))).decaying(),
        "coordinate" => {
            let i = param(params, "index", 0.0);
            if i < 0.0 || i.fract() != 0.0 || i as usize >= 2 * n {
                return Err(WeylError::InvalidParameter {
                    name: "index".into(),
                    reason: format!("must be an integer in 0..{}", 2 * n),
                });
            }
            let i = i as usize;
            ExprSymbol::new(n, format!("coordinate[{i}]"), Arc::new(move |v: &[Jet]| v[i]))
        }
        "gaussian" => {
            let s = param(params, "s", 1.0);
            if !(s > 0.0) {
                return Err(WeylError::InvalidParameter {
                    name: "s".into(),
                    reason: "must be positive".into(),
                });
            }
            gaussian(n, s, center)
        }
        "sin_x" => ExprSymbol::new(n, "sin_x", Arc::new(|v: &[Jet]| v[0].sin())),
        "sincos" => {
            let p = param(params, "p", 1.0);
            let q = param(params, "q", 1.0);
            ExprSymbol::new(
                n,
                "sincos",
                Arc::new(move |v: &[Jet]| v[0].scale(p).sin() * v[n].scale(q).cos()),
            )
        }
        "xi_squared" => ExprSymbol::new(
            n,
            "xi_squared",
            Arc::new(move |v: &[Jet]| {
                let mut s = Jet::zero(v[0].order());
                for xi in &v[n..] {
                    s = s + *xi * *xi;
                }
                s
            }),
        ),
        "s10_power" => {
            let m = param(params, "m", 1.0);
            ExprSymbol::new(
                n,
                "s10_power",
                Arc::new(move |v: &[Jet]| {
                    let mut s = Jet::constant(1.0, v[0].order());
                    for xi in &v[n..] {
                        s = s + *xi * *xi;
                    }
                    s.powf(0.5 * m)
                }),
            )
        }
        "fp_test" => ExprSymbol::new(
            n,
            "fp_test",
            Arc::new(move |v: &[Jet]| {
                let s = v[0].sin();
                s * s * v[n] * v[n]
            }),
        ),
        "sigma_tau_fp" => {
            let tau = param(params, "tau", 0.0);
            if tau < 0.0 {
                return Err(WeylError::InvalidParameter {
                    name: "tau".into(),
                    reason: "must be non-negative".into(),
                });
            }
            ExprSymbol::new(
                n,
                "sigma_tau_fp",
                Arc::new(move |v: &[Jet]| {
                    let s = v[0].sin();
                    v[n] * v[n] + (s * s).scale(tau * tau)
                }),
            )
        }
        "bump" => {
            let r = param(params, "radius", 1.0);
            if !(r > 0.0) {
                return Err(WeylError::InvalidParameter {
                    name: "radius".into(),
                    reason: "must be positive".into(),
                });
            }
            bump(QuadraticForm::identity(n), center, r)
        }
        "harmonic" => ExprSymbol::new(
            n,
            "harmonic",
            Arc::new(move |v: &[Jet]| {
                let mut s = Jet::zero(v[0].order());
                for c in v {
                    s = s + *c * *c;
                }
                s
            }),
        ),
        "adapted_sincos" => {
            let tau = param(params, "tau", 0.0);
            let r = param(params, "radius", 1.5);
            if n != 1 || tau < 0.0 || !(r > 0.0) {
                return Err(WeylError::InvalidParameter {
                    name: "tau".into(),
                    reason: "needs n = 1, tau ≥ 0 and radius > 0".into(),
                });
            }
            let s = 1.0 / (1.0 + tau);
            let inv_r2 = 1.0 / (r * r);
            ExprSymbol::new(
                1,
                "adapted_sincos",
                Arc::new(move |v: &[Jet]| {
                    let eta = v[1].scale(s);
                    let q = (v[0] * v[0] + eta * eta).scale(inv_r2);
                    v[0].sin() * eta.cos() * crate::window::chi0_jet(q)
                }),
            )
            .decaying()
        }
        _ => {
            return Err(WeylError::UnknownName {
                kind: "symbol",
                name: name.into(),
            })
        }
    };
    Ok(sym.with_params(params.clone()).into_ref())
}

/// `exp(−π s |X − c|²)`.
pub fn gaussian(n: usize, s: f64, center: Vec<f64>) -> ExprSymbol {
    let pi = std::f64::consts::PI;
    ExprSymbol::new(
        n,
        "gaussian",
        Arc::new(move |v: &[Jet]| {
            let mut q = Jet::zero(v[0].order());
            for (vi, ci) in v.iter().zip(&center) {
                let d = vi.add_scalar(-ci);
                q = q + d * d;
            }
            q.scale(-pi * s).exp()
        }),
    )
    .decaying()
}

/// `χ₀(G(X − c)/R²)`, supported in the `G`-ball of radius `R`.
pub fn bump(g: QuadraticForm, center: Vec<f64>, radius: f64) -> ExprSymbol {
    let n = g.dim_n();
    let m = g.matrix().clone();
    let inv_r2 = 1.0 / (radius * radius);
    ExprSymbol::new(
        n,
        "bump",
        Arc::new(move |v: &[Jet]| {
            let d: Vec<Jet> = v.iter().zip(&center).map(|(vi, ci)| vi.add_scalar(-ci)).collect();
            let mut q = Jet::zero(v[0].order());
            for i in 0..d.len() {
                for j in 0..d.len() {
                    if m[(i, j)] != 0.0 {
                        q = q + (d[i] * d[j]).scale(m[(i, j)]);
                    }
                }
            }
            chi0_jet(q.scale(inv_r2))
        }),
    )
    .decaying()
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SemiNormReport {
    pub order: usize,
    pub value: f64,
    /// `sup |a^{(k)}(X)T^k| / m(X)` for each `k ≤ order`.
    pub per_order: Vec<f64>,
    pub arg_max: Vec<f64>,
    pub samples: usize,
    pub directions: usize,
}

pub const SEMINORM_DIRECTIONS: usize = 16;

/// `max_{k ≤ l} sup_{X, g_X(T)=1} |a^{(k)}(X)T^k| / m(X)` on the samples.
pub fn seminorm(
    a: &dyn Symbol,
    m: &WeightField,
    g: &MetricField,
    l: usize,
    spec: &SampleSpec,
) -> Result<SemiNormReport> {
    let pts = spec.points()?;
    seminorm_at(a, m, g, l, &pts, SEMINORM_DIRECTIONS, spec.seed)
}

/// As [`seminorm`], on explicit points.
pub fn seminorm_at(
    a: &dyn Symbol,
    m: &WeightField,
    g: &MetricField,
    l: usize,
    points: &[Vec<f64>],
    directions: usize,
    seed: u64,
) -> Result<SemiNormReport> {
    check_order(a, l)?;
    let d = 2 * a.dim_n();
    if g.dim_n() != a.dim_n() || m.dim_n() != a.dim_n() {
        return Err(WeylError::DimensionMismatch {
            expected: d,
            got: 2 * g.dim_n().max(m.dim_n()),
        });
    }
    if points.is_empty() {
        return Err(WeylError::Precondition("sample grid must be non-empty".into()));
    }
    let dirs = unit_directions(d, directions, seed);
    let per_point: Vec<(Vec<f64>, usize)> = points
        .par_iter()
        .map(|x| {
            let gx = g.eval(x)?;
            let w = m.eval(x);
            let mut best = vec![0.0f64; l + 1];
            for u in &dirs {
                let t = gx.unit_direction(u);
                let j = a.jet(x, &t, l);
                for (k, b) in best.iter_mut().enumerate() {
                    let v = j.derivative(k).abs() / w;
                    if !v.is_finite() {
                        return Err(WeylError::NonFinite("symbol derivative"));
                    }
                    *b = b.max(v);
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .zip(0..)
        .collect();
    let mut per_order = vec![0.0f64; l + 1];
    let mut arg = 0;
    let mut value = 0.0f64;
    for (best, i) in &per_point {
        for k in 0..=l {
            per_order[k] = per_order[k].max(best[k]);
            if best[k] > value {
                value = best[k];
                arg = *i;
            }
        }
    }
    Ok(SemiNormReport {
        order: l,
        value,
        per_order,
        arg_max: points[arg].clone(),
        samples: points.len(),
        directions: dirs.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfinementOptions {
    /// Outer radius of the sampled region, in units of `g` around the
    /// center of `U`.
    pub outer_radius: f64,
    /// Radial samples (half inside radius 2, half geometric beyond).
    pub radial: usize,
    pub angular: usize,
    pub directions: usize,
    pub seed: u64,
}

impl Default for ConfinementOptions {
    fn default() -> Self {
        ConfinementOptions {
            outer_radius: 24.0,
            radial: 96,
            angular: 48,
            directions: 12,
            seed: 23,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ConfinementReport {
    /// `table[k][N] = ‖a‖^{(k,N)}_{g,U}` for `k, N ≤ l`.
    pub table: Vec<Vec<f64>>,
    /// `|||a|||^{(l')}` for `l' ≤ l`.
    pub combined: Vec<f64>,
    pub samples: usize,
}

impl ConfinementReport {
    pub fn norm(&self, l: usize) -> f64 {
        self.combined[l]
    }
}

/// Sample points around `U`: polar shells in `g`-normalized coordinates.
pub fn confinement_samples(g: &QuadraticForm, u: &Ball, opts: &ConfinementOptions) -> Vec<Vec<f64>> {
    let d = u.center.len();
    let inner = opts.radial / 2;
    let mut radii: Vec<f64> = (0..inner).map(|i| 2.0 * i as f64 / inner as f64).collect();
    let outer = opts.radial - inner;
    let ratio = (opts.outer_radius / 2.0).max(1.0).powf(1.0 / outer.max(1) as f64);
    let mut r = 2.0;
    for _ in 0..outer {
        radii.push(r);
        r *= ratio;
    }
    let dirs: Vec<Vec<f64>> = if d == 2 {
        (0..opts.angular)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / opts.angular as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        let mut v = unit_directions(d, opts.angular, opts.seed);
        let neg: Vec<Vec<f64>> = v.iter().map(|w| w.iter().map(|a| -a).collect()).collect();
        v.extend(neg);
        v
    };
    let mut pts = vec![u.center.clone()];
    for &rho in radii.iter().skip(1) {
        for w in &dirs {
            let t = g.unit_direction(w);
            pts.push(u.center.iter().zip(&t).map(|(c, ti)| c + rho * ti).collect());
        }
    }
    pts
}

/// `‖a‖^{(k,N)}_{g,U} = sup |a^{(k)}(X)T^k| (1 + g^σ(X − U))^{N/2}` over the
/// samples of [`confinement_samples`] and `g`-unit `T`.
///
/// If the weighted sup over the outer half of the sampled radii exceeds the
/// sup over the inner half, the symbol is reported as not confined.
pub fn confinement_norms(
    a: &dyn Symbol,
    g: &QuadraticForm,
    u: &Ball,
    l: usize,
    opts: &ConfinementOptions,
) -> Result<ConfinementReport> {
    check_order(a, l)?;
    let gs = dual_metric(g);
    if g.margin_below(&gs) < -1e-10 {
        return Err(WeylError::Precondition("confinement requires g ≤ g^σ".into()));
    }
    if u.radius > 1.0 + 1e-12 {
        return Err(WeylError::Precondition("U must have radius ≤ 1".into()));
    }
    if u.center.len() != 2 * a.dim_n() || g.dim_n() != a.dim_n() {
        return Err(WeylError::DimensionMismatch {
            expected: 2 * a.dim_n(),
            got: u.center.len(),
        });
    }
    let pts = confinement_samples(g, u, opts);
    let dirs: Vec<Vec<f64>> = unit_directions(u.center.len(), opts.directions, opts.seed)
        .iter()
        .map(|w| g.unit_direction(w))
        .collect();
    let half = 0.5 * opts.outer_radius;
    let rows: Vec<(bool, Vec<Vec<f64>>)> = pts
        .par_iter()
        .map(|x| {
            let dist = point_ball_distance(u, x, &gs);
            let rho = {
                let diff: Vec<f64> = x.iter().zip(&u.center).map(|(a, b)| a - b).collect();
                g.eval(&diff).sqrt()
            };
            let mut derivs = vec![0.0f64; l + 1];
            for t in &dirs {
                let j = a.jet(x, t, l);
                for (k, v) in derivs.iter_mut().enumerate() {
                    let dk = j.derivative(k).abs();
                    if !dk.is_finite() {
                        return Err(WeylError::NonFinite("symbol derivative"));
                    }
                    *v = v.max(dk);
                }
            }
            let table = derivs
                .iter()
                .map(|&dk| (0..=l).map(|nn| dk * (1.0 + dist).powf(0.5 * nn as f64)).collect())
                .collect();
            Ok((rho > half, table))
        })
        .collect::<Result<_>>()?;
    let mut inner = vec![vec![0.0f64; l + 1]; l + 1];
    let mut outer = vec![vec![0.0f64; l + 1]; l + 1];
    for (is_outer, t) in &rows {
        let target = if *is_outer { &mut outer } else { &mut inner };
        for k in 0..=l {
            for nn in 0..=l {
                target[k][nn] = target[k][nn].max(t[k][nn]);
            }
        }
    }
    for k in 0..=l {
        if outer[k][l] > inner[k][l] && outer[k][l] > 0.0 {
            return Err(WeylError::NotConfined {
                inner: inner[k][l],
                outer: outer[k][l],
            });
        }
    }
    let combined = (0..=l)
        .map(|ll| (0..=ll).map(|k| inner[k][ll]).fold(0.0, f64::max))
        .collect();
    Ok(ConfinementReport {
        table: inner,
        combined,
        samples: pts.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SjostrandGrid {
    /// Window centers `j ∈ [−extent, extent]^{2n}`.
    pub extent: i64,
    /// Samples per unit length.
    pub per_unit: usize,
    /// Zero-padding factor of each windowed transform.
    pub pad: usize,
    /// Relative contribution allowed from the outermost ring of windows.
    pub tail_tol: f64,
}

impl Default for SjostrandGrid {
    fn default() -> Self {
        SjostrandGrid {
            extent: 4,
            per_unit: 16,
            pad: 2,
            tail_tol: 1e-6,
        }
    }
}

/// `∫ sup_j |F(θ_j a)(Ξ)| dΞ` with the tensor-product lattice windows
/// `θ_j(X) = Π θ(X_i − j_i)` and `F u(Ξ) = ∫ e^{−2iπX·Ξ} u(X) dX` (n = 1).
pub fn sjostrand_norm(a: &dyn Symbol, grid: &SjostrandGrid) -> Result<f64> {
    let (full, ring) = sjostrand_parts(a, grid)?;
    if full > 0.0 && ring > grid.tail_tol * full {
        return Err(WeylError::Truncation { tail: ring / full });
    }
    Ok(full)
}

/// The norm, and the same quantity restricted to the outermost ring of
/// windows.
fn sjostrand_parts(a: &dyn Symbol, grid: &SjostrandGrid) -> Result<(f64, f64)> {
    use num_complex::Complex64;
    use rustfft::FftPlanner;
    if a.dim_n() != 1 {
        return Err(WeylError::Unsupported("windowed Fourier norm for n > 1".into()));
    }
    if grid.extent < 1 || grid.per_unit < 2 || grid.pad < 1 {
        return Err(WeylError::InvalidParameter {
            name: "sjostrand grid".into(),
            reason: "need extent ≥ 1, per_unit ≥ 2, pad ≥ 1".into(),
        });
    }
    let m = grid.per_unit;
    let w = 2 * m;
    let nf = w * grid.pad;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nf);
    let local: Vec<f64> = (0..w).map(|p| -1.0 + (p as f64 + 0.5) / m as f64).collect();
    let win: Vec<f64> = local.iter().map(|&t| lattice_window(t)).collect();
    let cell = 1.0 / (m * m) as f64;
    let centers: Vec<(i64, i64)> = (-grid.extent..=grid.extent)
        .flat_map(|i| (-grid.extent..=grid.extent).map(move |j| (i, j)))
        .collect();
    let spectra: Vec<(bool, Vec<f64>)> = centers
        .par_iter()
        .map(|&(i, j)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nf * nf];
            for p in 0..w {
                for q in 0..w {
                    let x = [i as f64 + local[p], j as f64 + local[q]];
                    let v = win[p] * win[q] * a.value(&x);
                    if !v.is_finite() {
                        return Err(WeylError::NonFinite("windowed symbol"));
                    }
                    buf[p * nf + q] = Complex64::new(v * cell, 0.0);
                }
            }
            // rows, then columns
            for row in buf.chunks_mut(nf) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); nf];
            for c in 0..nf {
                for r in 0..nf {
                    col[r] = buf[r * nf + c];
                }
                fft.process(&mut col);
                for r in 0..nf {
                    buf[r * nf + c] = col[r];
                }
            }
            let ring = i.abs() == grid.extent || j.abs() == grid.extent;
            Ok((ring, buf.iter().map(|z| z.norm()).collect()))
        })
        .collect::<Result<_>>()?;
    let mut full = vec![0.0f64; nf * nf];
    let mut outer = vec![0.0f64; nf * nf];
    for (ring, s) in &spectra {
        for (k, v) in s.iter().enumerate() {
            full[k] = full[k].max(*v);
            if *ring {
                outer[k] = outer[k].max(*v);
            }
        }
    }
    // frequency step 1/(2·pad) in each variable
    let dxi = m as f64 / nf as f64;
    let area = dxi * dxi;
    Ok((full.iter().sum::<f64>() * area, outer.iter().sum::<f64>() * area))
}
