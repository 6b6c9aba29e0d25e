//! The composition `a♯b`: the integral formula, the expansion terms `w_k`
//! and measured remainders `r_p`.
//!
//! `a♯b` is evaluated through its Fourier transform,
//! `(a♯b)^(Ξ) = ∫ â(Ξ₁) b̂(Ξ−Ξ₁) e^{iπ σ(Ξ₁,Ξ)} dΞ₁` with
//! `σ((s,t),(s',t')) = t s' − s t'`, which is the plane-wave form of the
//! double integral. For each pair of `s`-frequencies the `t`-sum is a
//! convolution done by FFT. Only `n = 1` is supported.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Result, WeylError};
use crate::jet::factorial;
use crate::quantizer::{Discretization, SymbolSamples};
use crate::symbol::{partial, Symbol};
use crate::symplectic::{dual_metric, QuadraticForm};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComposeOptions {
    /// Allowed `|a|²` fraction in the outer sixteenth of the box and in the
    /// outer eighth of the frequency band.
    pub tail_tol: f64,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions { tail_tol: 1e-8 }
    }
}

/// `a♯b` on the half-step lattice of a [`Discretization`]: `2N × 2N`
/// points `x = −L + (i+1)Δx/2`, `ξ = (k − N)/(4L)`, periodic in both.
#[derive(Clone, Debug)]
pub struct Composition {
    pub disc: Discretization,
    pub values: Vec<Complex64>,
}

impl Composition {
    pub fn side(&self) -> usize {
        2 * self.disc.points
    }

    pub fn point(&self, i: usize, k: usize) -> [f64; 2] {
        let d = &self.disc;
        [
            -d.half_width + 0.5 * (i as f64 + 1.0) * d.dx(),
            (k as f64 - d.points as f64) * d.dxi(),
        ]
    }

    pub fn at(&self, i: usize, k: usize) -> Complex64 {
        self.values[i * self.side() + k]
    }

    /// Values at the quantizer's sample lattice.
    pub fn to_samples(&self) -> SymbolSamples {
        let d = &self.disc;
        let nn = d.points;
        let side = self.side();
        let mut values = Vec::with_capacity(d.sample_count());
        for p in 0..2 * nn - 1 {
            for m in 0..=2 * nn {
                values.push(self.at(p, m % side));
            }
        }
        SymbolSamples {
            disc: d.clone(),
            values,
        }
    }

    /// Lattice indices whose points lie at least `margin` (a fraction of
    /// the box) inside it, thinned by `stride`.
    pub fn interior(&self, margin: f64, stride: usize) -> Vec<(usize, usize)> {
        let d = &self.disc;
        let (lx, lxi) = (d.half_width, d.nyquist());
        let mut out = Vec::new();
        for i in (0..self.side()).step_by(stride.max(1)) {
            for k in (0..self.side()).step_by(stride.max(1)) {
                let [x, xi] = self.point(i, k);
                if x.abs() <= (1.0 - margin) * lx && xi.abs() <= (1.0 - margin) * lxi {
                    out.push((i, k));
                }
            }
        }
        out
    }
}

fn fft2(data: &mut [Complex64], m: usize, fft: &Arc<dyn Fft<f64>>) {
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex64::from(0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

/// `(spatial, spectral)` tail fractions of samples on an `m × m` grid.
///
/// An axis along which the samples are constant is periodic on the box and
/// is left out of the spatial check.
fn tail_fractions(vals: &[Complex64], spec: &[Complex64], m: usize) -> (f64, f64) {
    let strip = (m / 16).max(1);
    let flat_x = (0..m).all(|i| (0..m).all(|k| vals[i * m + k] == vals[k]));
    let flat_xi = (0..m).all(|i| (0..m).all(|k| vals[i * m + k] == vals[i * m]));
    let near = |i: usize| i < strip || i >= m - strip;
    let band = (m / 8).max(1);
    let mut total = 0.0;
    let mut edge = 0.0;
    let mut stotal = 0.0;
    let mut sedge = 0.0;
    for i in 0..m {
        for k in 0..m {
            let v = vals[i * m + k].norm_sqr();
            total += v;
            if (!flat_x && near(i)) || (!flat_xi && near(k)) {
                edge += v;
            }
            // spectral index distance from zero frequency
            let fi = i.min(m - i);
            let fk = k.min(m - k);
            let s = spec[i * m + k].norm_sqr();
            stotal += s;
            if fi > m / 2 - band || fk > m / 2 - band {
                sedge += s;
            }
        }
    }
    let frac = |e: f64, t: f64| if t > 0.0 { e / t } else { 0.0 };
    (frac(edge, total), frac(sedge, stotal))
}

/// Samples on the `N × N` grid `x_j = −L + (j+½)Δx`, `ξ_k = (k − N/2)/(2L)`,
/// with the tail certificate, and their unnormalized 2D DFT.
fn sample_and_transform(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    disc: &Discretization,
    opts: &ComposeOptions,
    fft: &Arc<dyn Fft<f64>>,
    which: &'static str,
) -> Result<Vec<Complex64>> {
    let m = disc.points;
    let xs = disc.x_grid();
    let (dxi, h) = (2.0 * disc.dxi(), (m / 2) as f64);
    let vals: Vec<Complex64> = (0..m * m)
        .into_par_iter()
        .map(|idx| Complex64::from(f(&[xs[idx / m], (((idx % m) as f64) - h) * dxi])))
        .collect();
    if vals.iter().any(|v| !v.re.is_finite()) {
        return Err(WeylError::NonFinite(which));
    }
    let mut spec = vals.clone();
    fft2(&mut spec, m, fft);
    let (space, freq) = tail_fractions(&vals, &spec, m);
    let worst = space.max(freq);
    if worst > opts.tail_tol {
        return Err(WeylError::TailMass {
            fraction: worst,
            tolerance: opts.tail_tol,
        });
    }
    Ok(spec)
}

/// `a♯b` by the integral formula, sampled on the half-step lattice.
pub fn compose_integral(
    a: &dyn Symbol,
    b: &dyn Symbol,
    disc: &Discretization,
    opts: &ComposeOptions,
) -> Result<Composition> {
    compose_fn(&|x: &[f64]| a.value(x), &|x: &[f64]| b.value(x), disc, opts)
}

/// As [`compose_integral`] for closures.
pub fn compose_fn(
    a: &(dyn Fn(&[f64]) -> f64 + Sync),
    b: &(dyn Fn(&[f64]) -> f64 + Sync),
    disc: &Discretization,
    opts: &ComposeOptions,
) -> Result<Composition> {
    if disc.n != 1 {
        return Err(WeylError::Unsupported("composition for n > 1".into()));
    }
    let m = disc.points;
    let m2 = 2 * m;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let fwd2 = planner.plan_fft_forward(m2);
    let inv2 = planner.plan_fft_inverse(m2);
    let sa = sample_and_transform(a, disc, opts, &fwd, "left factor")?;
    let sb = sample_and_transform(b, disc, opts, &fwd, "right factor")?;

    // Continuous transform at s_p = p/(2L), t_q = q/(N h_ξ) = 2L q/N with
    // h_ξ = 1/(2L): â(p,q) = Δx h_ξ e^{−2iπ(x₀ s_p + ξ₀ t_q)} DFT[p, q].
    let (dx, dxi) = (disc.dx(), 2.0 * disc.dxi());
    let x0 = disc.x_grid()[0];
    let xi0 = -((m / 2) as f64) * dxi;
    let ds = 1.0 / (m as f64 * dx);
    let dt = 1.0 / (m as f64 * dxi);
    let half = (m / 2) as i64;
    let cont = |s: &[Complex64], p: i64, q: i64| -> Complex64 {
        let raw = s[(p.rem_euclid(m as i64) as usize) * m + q.rem_euclid(m as i64) as usize];
        let ph = -2.0 * PI * (x0 * p as f64 * ds + xi0 * q as f64 * dt);
        raw * Complex64::from_polar(dx * dxi, ph)
    };
    // b̂ columns in t, zero padded to 2N and transformed, one per s-index
    let bcols: Vec<Vec<Complex64>> = (-half..half)
        .map(|p| {
            let mut c = vec![Complex64::from(0.0); m2];
            for q in -half..half {
                c[q.rem_euclid(m2 as i64) as usize] = cont(&sb, p, q);
            }
            fwd2.process(&mut c);
            c
        })
        .collect();
    let arows: Vec<Vec<Complex64>> = (-half..half)
        .map(|p| (-half..half).map(|q| cont(&sa, p, q)).collect())
        .collect();
    let c = PI * ds * dt;
    let norm = Complex64::from(1.0 / m2 as f64);
    // output spectrum C(P, Q), P, Q ∈ [−N, N), stored at index mod 2N
    let spectrum: Vec<(i64, Vec<Complex64>)> = (-(m as i64)..m as i64)
        .into_par_iter()
        .map(|pp| {
            let mut acc = vec![Complex64::from(0.0); m2];
            let mut f = vec![Complex64::from(0.0); m2];
            for p1 in -half..half {
                let p2 = pp - p1;
                if p2 < -half || p2 >= half {
                    continue;
                }
                f.iter_mut().for_each(|v| *v = Complex64::from(0.0));
                for q1 in -half..half {
                    let ph = c * (q1 * pp) as f64;
                    f[q1.rem_euclid(m2 as i64) as usize] =
                        arows[(p1 + half) as usize][(q1 + half) as usize] * Complex64::from_polar(1.0, ph);
                }
                fwd2.process(&mut f);
                let bc = &bcols[(p2 + half) as usize];
                for (fv, bv) in f.iter_mut().zip(bc) {
                    *fv *= bv * norm;
                }
                inv2.process(&mut f);
                for qq in -(m as i64)..m as i64 {
                    let ph = -c * (p1 * qq) as f64;
                    acc[qq.rem_euclid(m2 as i64) as usize] += f[qq.rem_euclid(m2 as i64) as usize] * Complex64::from_polar(ds * dt, ph);
                }
            }
            (pp, acc)
        })
        .collect();
    // inverse transform onto x = x₀ + iΔx/2, ξ = ξ₀ + kΔξ/2
    let mut grid = vec![Complex64::from(0.0); m2 * m2];
    for (pp, row) in spectrum {
        let pi = pp.rem_euclid(m2 as i64) as usize;
        for (qi, v) in row.into_iter().enumerate() {
            let qq = if qi < m { qi as i64 } else { qi as i64 - m2 as i64 };
            let ph = 2.0 * PI * (x0 * pp as f64 * ds + xi0 * qq as f64 * dt);
            grid[pi * m2 + qi] = v * Complex64::from_polar(ds * dt, ph);
        }
    }
    let inv2d = planner.plan_fft_inverse(m2);
    fft2(&mut grid, m2, &inv2d);
    // index (i, k) is x = x₀ + iΔx/2, ξ = ξ₀ + k h_ξ/2, as in Composition::point
    let values = grid;
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(WeylError::NonFinite("composition"));
    }
    Ok(Composition {
        disc: disc.clone(),
        values,
    })
}

/// `w_k(a,b)`, equal to `(4iπ)^{-k}` times the real sum returned by
/// [`ExpansionTerm::real_sum`].
pub struct ExpansionTerm<'a> {
    pub order: usize,
    a: &'a dyn Symbol,
    b: &'a dyn Symbol,
}

/// `(α, β)` multi-index pairs with `|α| + |β| = k` in dimension `n`.
fn index_pairs(n: usize, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    fn compositions(n: usize, total: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(n - 1, total - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    let mut out = Vec::new();
    for la in 0..=k {
        for alpha in compositions(n, la) {
            for beta in compositions(n, k - la) {
                out.push((alpha.clone(), beta));
            }
        }
    }
    out
}

pub fn expansion_term<'a>(a: &'a dyn Symbol, b: &'a dyn Symbol, k: usize) -> Result<ExpansionTerm<'a>> {
    if a.dim_n() != b.dim_n() {
        return Err(WeylError::DimensionMismatch {
            expected: 2 * a.dim_n(),
            got: 2 * b.dim_n(),
        });
    }
    let avail = a.max_order().min(b.max_order());
    if k > avail {
        return Err(WeylError::OrderUnavailable {
            requested: k,
            available: avail,
        });
    }
    Ok(ExpansionTerm { order: k, a, b })
}

impl ExpansionTerm<'_> {
    /// `(4iπ)^{-k}`.
    pub fn factor(&self) -> Complex64 {
        Complex64::new(0.0, 4.0 * PI).powi(-(self.order as i32))
    }

    /// `Σ (−1)^{|β|}/(α!β!) ∂_ξ^α ∂_x^β a · ∂_ξ^β ∂_x^α b`.
    pub fn real_sum(&self, x: &[f64]) -> Result<f64> {
        let n = self.a.dim_n();
        let mut s = 0.0;
        for (alpha, beta) in index_pairs(n, self.order) {
            let mut da = beta.clone();
            da.extend_from_slice(&alpha);
            let mut db = alpha.clone();
            db.extend_from_slice(&beta);
            let fa: f64 = alpha.iter().chain(&beta).map(|&v| factorial(v)).product();
            let sign = if beta.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
            s += sign / fa * partial(self.a, x, &da)? * partial(self.b, x, &db)?;
        }
        Ok(s)
    }

    pub fn value(&self, x: &[f64]) -> Result<Complex64> {
        Ok(self.factor() * self.real_sum(x)?)
    }
}

/// `Λ₁,₂ = inf (g₁^σ(T)/g₂(T))^{1/2}`.
pub fn lambda12(g1: &QuadraticForm, g2: &QuadraticForm) -> f64 {
    dual_metric(g1).ratio_bounds(g2).0.sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RemainderMeasurement {
    pub order: usize,
    pub sup: f64,
    pub arg_max: [f64; 2],
    pub probes: usize,
    pub lambda12: Option<f64>,
}

/// `sup |a♯b − Σ_{k<p} w_k|` over interior lattice points.
pub fn remainder(
    a: &dyn Symbol,
    b: &dyn Symbol,
    p: usize,
    comp: &Composition,
    probes: &[(usize, usize)],
    frozen: Option<(&QuadraticForm, &QuadraticForm)>,
) -> Result<RemainderMeasurement> {
    let terms: Vec<ExpansionTerm> = (0..p).map(|k| expansion_term(a, b, k)).collect::<Result<_>>()?;
    let rows: Vec<(f64, [f64; 2])> = probes
        .par_iter()
        .map(|&(i, k)| {
            let x = comp.point(i, k);
            let mut s = comp.at(i, k);
            for t in &terms {
                s -= t.value(&x)?;
            }
            Ok((s.norm(), x))
        })
        .collect::<Result<_>>()?;
    let (sup, arg_max) = rows
        .into_iter()
        .fold((0.0, [f64::NAN; 2]), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(RemainderMeasurement {
        order: p,
        sup,
        arg_max,
        probes: probes.len(),
        lambda12: frozen.map(|(g1, g2)| lambda12(g1, g2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{quantize_fn, quantize_samples};
    use crate::symbol::{builtin_symbol, gaussian};

    fn disc(l: f64, nn: usize) -> Discretization {
        Discretization::new(1, l, nn).unwrap()
    }

    fn g(s: f64, x0: f64, xi0: f64) -> impl Fn(&[f64]) -> f64 + Sync {
        move |p: &[f64]| (-PI * s * ((p[0] - x0).powi(2) + (p[1] - xi0).powi(2))).exp()
    }

    #[test]
    fn one_is_the_unit() {
        let d = disc(4.0, 64);
        let b = g(1.0, 0.5, -0.3);
        let c = compose_fn(&|_| 1.0, &b, &d, &ComposeOptions::default()).unwrap();
        for i in 0..c.side() {
            for k in 0..c.side() {
                let x = c.point(i, k);
                assert!((c.at(i, k) - b(&x)).norm() < 1e-8, "{x:?}");
            }
        }
    }

    #[test]
    fn functions_of_xi_multiply() {
        let d = disc(4.0, 64);
        let a = |p: &[f64]| (-PI * p[1] * p[1]).exp();
        let b = |p: &[f64]| (-2.0 * PI * (p[1] - 0.2).powi(2)).exp() * p[1];
        let c = compose_fn(&a, &b, &d, &ComposeOptions::default()).unwrap();
        for (i, k) in c.interior(0.0, 3) {
            let x = c.point(i, k);
            assert!((c.at(i, k) - a(&x) * b(&x)).norm() < 1e-8);
        }
    }

    #[test]
    fn gaussian_product_matches_operator_product() {
        let d = disc(5.0, 128);
        let a = g(1.0, 0.4, 0.0);
        let b = g(1.5, -0.3, 0.5);
        let c = compose_fn(&a, &b, &d, &ComposeOptions::default()).unwrap();
        let ab = quantize_samples(&c.to_samples()).unwrap().matrix;
        let qa = quantize_fn(&d, |p| Complex64::from(a(p))).unwrap().matrix;
        let qb = quantize_fn(&d, |p| Complex64::from(b(p))).unwrap().matrix;
        let prod = &qa * &qb;
        let rel = (&ab - &prod).norm() / prod.norm();
        assert!(rel <= 1e-6, "{rel}");
    }

    #[test]
    fn conjugation_rule() {
        let d = disc(4.0, 64);
        let a = g(1.0, 0.4, 0.2);
        let b = |p: &[f64]| (-PI * (p[0] * p[0] + 2.0 * p[1] * p[1])).exp() * p[0];
        let ab = compose_fn(&a, &b, &d, &ComposeOptions::default()).unwrap();
        let ba = compose_fn(&b, &a, &d, &ComposeOptions::default()).unwrap();
        for (u, v) in ab.values.iter().zip(&ba.values) {
            assert!((u - v.conj()).norm() < 1e-8);
        }
    }

    #[test]
    fn wide_symbols_fail_the_tail_check() {
        let d = disc(2.0, 32);
        let r = compose_fn(&g(0.05, 0.0, 0.0), &g(1.0, 0.0, 0.0), &d, &ComposeOptions::default());
        assert!(matches!(r, Err(WeylError::TailMass { .. })));
    }

    #[test]
    fn first_order_term_of_x_and_xi() {
        let x = builtin_symbol("coordinate", &[("index".to_string(), 0.0)].into()).unwrap();
        let xi = builtin_symbol("coordinate", &[("index".to_string(), 1.0)].into()).unwrap();
        let p = [0.7, -1.3];
        let w0 = expansion_term(x.as_ref(), xi.as_ref(), 0).unwrap().value(&p).unwrap();
        let w1 = expansion_term(x.as_ref(), xi.as_ref(), 1).unwrap().value(&p).unwrap();
        assert!((w0 - Complex64::from(p[0] * p[1])).norm() < 1e-14);
        assert!((w1 - Complex64::new(0.0, 1.0 / (4.0 * PI))).norm() < 1e-14);
        for k in 2..5 {
            let w = expansion_term(x.as_ref(), xi.as_ref(), k).unwrap().value(&p).unwrap();
            assert!(w.norm() < 1e-14);
        }
    }

    #[test]
    fn first_order_term_is_antisymmetric() {
        let a = gaussian(1, 1.0, vec![0.2, 0.1]);
        let b = builtin_symbol("sin_x", &Default::default()).unwrap();
        for p in [[0.1, 0.4], [-0.8, 1.1], [1.5, -0.2]] {
            let ab = expansion_term(&a, b.as_ref(), 1).unwrap().real_sum(&p).unwrap();
            let ba = expansion_term(b.as_ref(), &a, 1).unwrap().real_sum(&p).unwrap();
            assert_eq!(ab, -ba);
        }
    }

    #[test]
    fn polynomial_expansion_terminates() {
        // x² ♯ ξ² = x²ξ² + ixξ/π − 1/(8π²); checked as operators on a
        // Gaussian vector, where x² is diagonal and ξ² is quantized
        let x2 = crate::symbol::ExprSymbol::new(1, "x2", Arc::new(|v| v[0].clone() * v[0].clone()));
        let xi2 = builtin_symbol("xi_squared", &Default::default()).unwrap();
        let p = [0.3, -0.7];
        let w: Vec<Complex64> = (0..6)
            .map(|k| expansion_term(&x2, xi2.as_ref(), k).unwrap().value(&p).unwrap())
            .collect();
        assert!((w[1] - Complex64::new(0.0, p[0] * p[1] / PI)).norm() < 1e-12);
        assert!((w[2] + Complex64::from(1.0 / (8.0 * PI * PI))).norm() < 1e-12);
        assert!(w[3..].iter().all(|v| v.norm() < 1e-12));

        let d = disc(6.0, 128);
        let q2 = quantize_fn(&d, |p| Complex64::from(p[1] * p[1])).unwrap().matrix;
        let x = crate::quantizer::multiplication(&d, |x| x[0] * x[0]);
        let sum = quantize_fn(&d, |p| {
            Complex64::new(p[0] * p[0] * p[1] * p[1] - 1.0 / (8.0 * PI * PI), p[0] * p[1] / PI)
        })
        .unwrap()
        .matrix;
        let xs = d.x_grid();
        let u = crate::spectral::CVector::from_iterator(xs.len(), xs.iter().map(|x| Complex64::from((-PI * x * x).exp())));
        let lhs = &x * (&q2 * &u);
        let rhs = &sum * &u;
        assert!((&lhs - &rhs).norm() < 1e-6 * lhs.norm(), "{}", (&lhs - &rhs).norm());
    }

    #[test]
    fn index_pairs_count() {
        // number of (α, β) with |α|+|β| = k in n dims is C(k + 2n − 1, 2n − 1)
        assert_eq!(index_pairs(1, 3).len(), 4);
        assert_eq!(index_pairs(2, 2).len(), 10);
    }

    #[test]
    fn lambda_of_identical_forms_is_lambda_g() {
        let g1 = QuadraticForm::diagonal(1, &[1.0, 0.01]).unwrap();
        assert!((lambda12(&g1, &g1) - 10.0).abs() < 1e-10);
    }
}
