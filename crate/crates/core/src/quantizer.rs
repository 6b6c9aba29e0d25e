//! Discretized Weyl quantization
//! `(a^w u)(x) = ∬ e^{2iπ(x−y)·ξ} a((x+y)/2, ξ) u(y) dy dξ`.
//!
//! The `x`-grid is `x_j = −L + (j+½)Δx`, `Δx = 2L/N`, and the `ξ`-integral
//! is the trapezoid rule on `ξ_m = m/(4L)`, `|m| ≤ N`. Its period `4L` in
//! `x − y` is twice the box, so separations up to `2L` are not aliased.
//! Midpoints `(x_j+x_k)/2` live on a half-grid of `2N−1` points, and for
//! each midpoint the kernel in `j−k` is one inverse DFT of length `2N`.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::spectral::{self, CMatrix, EigenEstimate, SpectralOptions};
use crate::symbol::Symbol;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Discretization {
    pub n: usize,
    pub half_width: f64,
    pub points: usize,
}

impl Discretization {
    pub fn new(n: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(WeylError::Unsupported(format!("quantization in dimension n = {n}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(WeylError::InvalidParameter {
                name: "L".into(),
                reason: "must be positive".into(),
            });
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(WeylError::InvalidParameter {
                name: "N".into(),
                reason: "must be a power of two, at least 4".into(),
            });
        }
        let dim = points.pow(n as u32);
        if dim > 8192 {
            return Err(WeylError::InvalidParameter {
                name: "N".into(),
                reason: format!("matrix dimension {dim} exceeds 8192"),
            });
        }
        Ok(Discretization {
            n,
            half_width,
            points,
        })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Step of the `ξ` trapezoid rule, `1/(4L)`.
    pub fn dxi(&self) -> f64 {
        0.25 / self.half_width
    }

    /// Largest resolved frequency `N/(4L)`.
    pub fn nyquist(&self) -> f64 {
        self.points as f64 / (4.0 * self.half_width)
    }

    /// Matrix dimension `N^n`.
    pub fn dim(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn x_grid(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.points).map(|j| -self.half_width + (j as f64 + 0.5) * dx).collect()
    }

    /// `(x_j + x_k)/2` indexed by `p = j + k`.
    pub fn midpoints(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..2 * self.points - 1)
            .map(|p| -self.half_width + 0.5 * (p as f64 + 1.0) * dx)
            .collect()
    }

    /// `ξ_m = m/(4L)`, `m = −N..=N`.
    pub fn xi_grid(&self) -> Vec<f64> {
        let h = self.points as i64;
        (-h..=h).map(|m| m as f64 * self.dxi()).collect()
    }

    /// Multi-index of a matrix row.
    pub fn row_index(&self, row: usize) -> Vec<usize> {
        match self.n {
            1 => vec![row],
            _ => vec![row / self.points, row % self.points],
        }
    }

    /// Phase-space points at which [`SymbolSamples`] stores values, in
    /// storage order: midpoints outermost, then frequencies.
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        let mids = self.midpoints();
        let xis = self.xi_grid();
        let mut out = Vec::with_capacity(self.sample_count());
        match self.n {
            1 => {
                for &x in &mids {
                    for &xi in &xis {
                        out.push(vec![x, xi]);
                    }
                }
            }
            _ => {
                for &x1 in &mids {
                    for &x2 in &mids {
                        for &e1 in &xis {
                            for &e2 in &xis {
                                out.push(vec![x1, x2, e1, e2]);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn sample_count(&self) -> usize {
        (2 * self.points - 1).pow(self.n as u32) * self.slice_len()
    }

    fn slice_len(&self) -> usize {
        (2 * self.points + 1).pow(self.n as u32)
    }
}

/// Complex symbol values on the quantization lattice.
#[derive(Clone, Debug)]
pub struct SymbolSamples {
    pub disc: Discretization,
    pub values: Vec<Complex64>,
}

impl SymbolSamples {
    pub fn from_fn<F>(disc: &Discretization, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let pts = disc.sample_points();
        let values: Vec<Complex64> = pts.par_iter().map(|p| f(p)).collect();
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(WeylError::NonFinite("symbol samples"));
        }
        Ok(SymbolSamples {
            disc: disc.clone(),
            values,
        })
    }

    pub fn from_symbol(a: &dyn Symbol, disc: &Discretization) -> Result<Self> {
        if a.dim_n() != disc.n {
            return Err(WeylError::DimensionMismatch {
                expected: 2 * disc.n,
                got: 2 * a.dim_n(),
            });
        }
        Self::from_fn(disc, |p| Complex64::from(a.value(p)))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuantizeOptions {
    /// Out-of-band over in-band `|a|²` mass allowed for decaying symbols.
    pub aliasing_tol: f64,
    /// Midpoint slices sampled by the aliasing check.
    pub aliasing_slices: usize,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        QuantizeOptions {
            aliasing_tol: 1e-8,
            aliasing_slices: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AliasingReport {
    pub fraction: f64,
    pub slices: usize,
}

/// Compares `Σ|a|²` over `ξ` beyond the Nyquist box (out to three times
/// it) with the in-band sum, on a subset of midpoint slices.
pub fn aliasing_fraction(a: &dyn Symbol, disc: &Discretization, slices: usize) -> AliasingReport {
    let mids = disc.midpoints();
    let nq = disc.nyquist();
    let h = disc.points as i64;
    let wide: Vec<f64> = (-3 * h..=3 * h).map(|m| m as f64 * disc.dxi()).collect();
    let stride = (mids.len() / slices.max(1)).max(1);
    let xs: Vec<Vec<f64>> = match disc.n {
        1 => mids.iter().step_by(stride).map(|&x| vec![x]).collect(),
        _ => {
            let s2 = (((mids.len() * mids.len()) as f64 / slices.max(1) as f64).sqrt() as usize).max(1);
            let mut v = Vec::new();
            for &x1 in mids.iter().step_by(s2) {
                for &x2 in mids.iter().step_by(s2) {
                    v.push(vec![x1, x2]);
                }
            }
            v
        }
    };
    let (inside, outside) = xs
        .par_iter()
        .map(|x| {
            let mut inn = 0.0;
            let mut out = 0.0;
            let mut acc = |xi: &[f64]| {
                let mut p = x.clone();
                p.extend_from_slice(xi);
                let v = a.value(&p);
                if xi.iter().all(|e| e.abs() <= nq * (1.0 + 1e-12)) {
                    inn += v * v;
                } else {
                    out += v * v;
                }
            };
            if disc.n == 1 {
                for &e in &wide {
                    acc(&[e]);
                }
            } else {
                for &e1 in &wide {
                    for &e2 in &wide {
                        acc(&[e1, e2]);
                    }
                }
            }
            (inn, out)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let fraction = if inside > 0.0 {
        outside / inside
    } else if outside > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    AliasingReport {
        fraction,
        slices: xs.len(),
    }
}

/// Dense matrix of `a^w` on the grid, with the weight `Δx^n` folded in.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub disc: Discretization,
    pub matrix: CMatrix,
}

/// Kernels `K_p(d)` for every midpoint, `d` taken mod `2N` per axis.
fn kernels(s: &SymbolSamples) -> Vec<Vec<Complex64>> {
    let d = &s.disc;
    let nn = 2 * d.points;
    let h = d.points;
    let slice = d.slice_len();
    let scale = Complex64::from(d.dxi().powi(d.n as i32) * d.dx().powi(d.n as i32));
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(nn);
    // trapezoid on m = −N..=N folded onto bins m mod 2N
    let fold = |vals: &[Complex64]| -> Vec<Complex64> {
        let mut c = vec![Complex64::from(0.0); nn];
        for (i, v) in vals.iter().enumerate() {
            let m = i as i64 - h as i64;
            let w = if m.unsigned_abs() as usize == h { 0.5 } else { 1.0 };
            c[m.rem_euclid(nn as i64) as usize] += v * w;
        }
        c
    };
    s.values
        .par_chunks(slice)
        .map(|vals| {
            let mut out = match d.n {
                1 => {
                    let mut c = fold(vals);
                    fft.process(&mut c);
                    c
                }
                _ => {
                    let m1 = nn + 1;
                    // fold second axis, then first
                    let rows: Vec<Vec<Complex64>> = (0..m1).map(|i| fold(&vals[i * m1..(i + 1) * m1])).collect();
                    let mut grid = vec![Complex64::from(0.0); nn * nn];
                    for j in 0..nn {
                        let col: Vec<Complex64> = rows.iter().map(|r| r[j]).collect();
                        let mut c = fold(&col);
                        fft.process(&mut c);
                        for (i, v) in c.into_iter().enumerate() {
                            grid[i * nn + j] = v;
                        }
                    }
                    for row in grid.chunks_mut(nn) {
                        fft.process(row);
                    }
                    grid
                }
            };
            out.iter_mut().for_each(|v| *v *= scale);
            out
        })
        .collect()
}

/// Quantizes sampled values.
pub fn quantize_samples(s: &SymbolSamples) -> Result<OperatorMatrix> {
    let d = &s.disc;
    if s.values.len() != d.sample_count() {
        return Err(WeylError::DimensionMismatch {
            expected: d.sample_count(),
            got: s.values.len(),
        });
    }
    let ker = kernels(s);
    let nn = d.points;
    let n2 = 2 * nn;
    let dim = d.dim();
    let np = 2 * nn - 1;
    let mut m = CMatrix::zeros(dim, dim);
    match d.n {
        1 => {
            for j in 0..nn {
                for k in 0..nn {
                    m[(j, k)] = ker[j + k][(j + n2 - k) % n2];
                }
            }
        }
        _ => {
            for row in 0..dim {
                let (j1, j2) = (row / nn, row % nn);
                for col in 0..dim {
                    let (k1, k2) = (col / nn, col % nn);
                    let p = (j1 + k1) * np + (j2 + k2);
                    let dd = ((j1 + n2 - k1) % n2) * n2 + (j2 + n2 - k2) % n2;
                    m[(row, col)] = ker[p][dd];
                }
            }
        }
    }
    Ok(OperatorMatrix {
        disc: d.clone(),
        matrix: m,
    })
}

/// `a^w` on the grid. Decaying symbols must pass the aliasing check.
pub fn quantize(a: &dyn Symbol, disc: &Discretization, opts: &QuantizeOptions) -> Result<OperatorMatrix> {
    if a.decays() {
        let rep = aliasing_fraction(a, disc, opts.aliasing_slices);
        if !(rep.fraction <= opts.aliasing_tol) {
            return Err(WeylError::Aliasing {
                fraction: rep.fraction,
                tolerance: opts.aliasing_tol,
            });
        }
    }
    quantize_samples(&SymbolSamples::from_symbol(a, disc)?)
}

/// Quantizes a closure sampled on the lattice; no aliasing check.
pub fn quantize_fn<F>(disc: &Discretization, f: F) -> Result<OperatorMatrix>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    quantize_samples(&SymbolSamples::from_fn(disc, f)?)
}

const MAGIC: &[u8; 8] = b"WEYLOPM1";

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `‖A − A*‖_F / ‖A‖_F`.
    pub fn self_adjointness_defect(&self) -> f64 {
        let nrm = self.matrix.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.adjoint()).norm() / nrm
    }

    pub fn norm(&self, opts: &SpectralOptions) -> Result<EigenEstimate> {
        spectral::operator_norm(&self.matrix, opts)
    }

    pub fn min_eig(&self, opts: &SpectralOptions) -> Result<EigenEstimate> {
        spectral::min_eig(&self.matrix, opts)
    }

    /// Header `WEYLOPM1`, `u32 n`, `u32 N`, `f64 L`, `u64 rows`, `u64 cols`,
    /// then row-major `(re, im)` pairs, all little-endian.
    pub fn write_to(&self, w: &mut dyn Write) -> Result<()> {
        let io = |e: std::io::Error| WeylError::Io(e.to_string());
        let mut buf = Vec::with_capacity(40 + 16 * self.dim() * self.dim());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.disc.n as u32).to_le_bytes());
        buf.extend_from_slice(&(self.disc.points as u32).to_le_bytes());
        buf.extend_from_slice(&self.disc.half_width.to_le_bytes());
        buf.extend_from_slice(&(self.matrix.nrows() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.matrix.ncols() as u64).to_le_bytes());
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let v = self.matrix[(i, j)];
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn read_from(r: &mut dyn Read) -> Result<Self> {
        let io = |e: std::io::Error| WeylError::Io(e.to_string());
        let mut head = [0u8; 40];
        r.read_exact(&mut head).map_err(io)?;
        if &head[..8] != MAGIC {
            return Err(WeylError::Io("not an operator matrix file".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(head[o..o + 8].try_into().unwrap());
        let disc = Discretization::new(
            u32_at(8) as usize,
            f64::from_le_bytes(head[16..24].try_into().unwrap()),
            u32_at(12) as usize,
        )?;
        let (rows, cols) = (u64_at(24) as usize, u64_at(32) as usize);
        if rows != disc.dim() || cols != disc.dim() {
            return Err(WeylError::Io("header dimensions disagree".into()));
        }
        let mut body = vec![0u8; 16 * rows * cols];
        r.read_exact(&mut body).map_err(io)?;
        let f = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
        let matrix = CMatrix::from_fn(rows, cols, |i, j| {
            let o = 16 * (i * cols + j);
            Complex64::new(f(o), f(o + 8))
        });
        Ok(OperatorMatrix { disc, matrix })
    }
}

/// Multiplication by `f(x)` on the grid.
pub fn multiplication(disc: &Discretization, f: impl Fn(&[f64]) -> f64) -> CMatrix {
    let xs = disc.x_grid();
    CMatrix::from_fn(disc.dim(), disc.dim(), |i, j| {
        if i != j {
            return Complex64::from(0.0);
        }
        let x: Vec<f64> = disc.row_index(i).iter().map(|&k| xs[k]).collect();
        Complex64::from(f(&x))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::hermitian_eigenvalues;
    use crate::symbol::builtin_symbol;
    use std::f64::consts::PI;

    fn disc(n: usize, l: f64, nn: usize) -> Discretization {
        Discretization::new(n, l, nn).unwrap()
    }

    fn sym(name: &str) -> crate::symbol::SymbolRef {
        builtin_symbol(name, &Default::default()).unwrap()
    }

    #[test]
    fn grid_layout() {
        let d = disc(1, 6.0, 8);
        let x = d.x_grid();
        assert!((x[0] + x[7]).abs() < 1e-15);
        assert!((d.nyquist() - 8.0 / 24.0).abs() < 1e-15);
        assert!((d.xi_grid()[16] - d.nyquist()).abs() < 1e-15);
        assert_eq!(d.midpoints().len(), 15);
        assert_eq!(d.xi_grid().len(), 17);
        assert!(Discretization::new(3, 1.0, 8).is_err());
        assert!(Discretization::new(1, 1.0, 12).is_err());
    }

    #[test]
    fn one_is_identity() {
        for d in [disc(1, 3.0, 32), disc(2, 2.0, 8)] {
            let a = quantize_fn(&d, |_| Complex64::from(1.0)).unwrap();
            let id = CMatrix::identity(d.dim(), d.dim());
            assert!((&a.matrix - id).norm() < 1e-8);
        }
    }

    #[test]
    fn coordinate_is_multiplication() {
        let d = disc(1, 4.0, 32);
        let a = quantize_fn(&d, |p| Complex64::from(p[0])).unwrap();
        let m = multiplication(&d, |x| x[0]);
        assert!((&a.matrix - m).norm() < 1e-8);
        let d2 = disc(2, 2.0, 8);
        let a2 = quantize_fn(&d2, |p| Complex64::from(p[1])).unwrap();
        assert!((&a2.matrix - multiplication(&d2, |x| x[1])).norm() < 1e-8);
    }

    #[test]
    fn xi_squared_is_nonnegative_and_acts_as_d_squared() {
        let d = disc(1, 6.0, 128);
        let a = quantize(sym("xi_squared").as_ref(), &d, &QuantizeOptions::default()).unwrap();
        let ev = hermitian_eigenvalues(&a.matrix);
        assert!(ev[0] >= -1e-6);
        // D²u = −u″/(4π²) on u = e^{−πx²}
        let xs = d.x_grid();
        let u = crate::spectral::CVector::from_iterator(xs.len(), xs.iter().map(|x| Complex64::from((-PI * x * x).exp())));
        let au = &a.matrix * &u;
        for (j, x) in xs.iter().enumerate() {
            let exact = (1.0 - 2.0 * PI * x * x) / (2.0 * PI) * (-PI * x * x).exp();
            assert!((au[j] - Complex64::from(exact)).norm() < 1e-8, "{x}");
        }
    }

    #[test]
    fn gaussian_projector_is_idempotent() {
        // 2e^{−2π|X−X₀|²} is the symbol of the projector onto a coherent state
        let d = disc(1, 5.0, 64);
        let a = quantize_fn(&d, |p| Complex64::from(2.0 * (-2.0 * PI * ((p[0] - 0.5).powi(2) + (p[1] + 0.3).powi(2))).exp())).unwrap();
        let q = &a.matrix;
        assert!((q * q - q).norm() < 1e-8);
        assert!((q.trace() - Complex64::from(1.0)).norm() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_levels() {
        let d = disc(1, 6.0, 256);
        let a = quantize_fn(&d, |p| Complex64::from(p[0] * p[0] + p[1] * p[1])).unwrap();
        assert!(a.self_adjointness_defect() < 1e-10);
        let ev = hermitian_eigenvalues(&a.matrix);
        for k in 0..6 {
            let exact = (2 * k + 1) as f64 / (2.0 * PI);
            assert!((ev[k] / exact - 1.0).abs() < 1e-3, "{k} {}", ev[k]);
        }
    }

    #[test]
    fn sin_norm_is_at_most_one() {
        let d = disc(1, 5.0, 64);
        let a = quantize(sym("sin_x").as_ref(), &d, &QuantizeOptions::default()).unwrap();
        let n = a.norm(&SpectralOptions::default()).unwrap().value;
        assert!(n <= 1.0 + 1e-6);
    }

    #[test]
    fn linearity_and_parity() {
        let d = disc(1, 4.0, 32);
        let f = |p: &[f64]| (-(p[0] - 0.3).powi(2) - p[1] * p[1]).exp();
        let g = |p: &[f64]| p[0] * p[1];
        let a = quantize_fn(&d, |p| Complex64::from(f(p))).unwrap();
        let b = quantize_fn(&d, |p| Complex64::from(g(p))).unwrap();
        let c = quantize_fn(&d, |p| Complex64::from(2.0 * f(p) - 3.0 * g(p))).unwrap();
        let lin = &a.matrix * Complex64::from(2.0) - &b.matrix * Complex64::from(3.0);
        assert!((&c.matrix - lin).norm() <= 1e-12 * c.matrix.norm());
        // even symbol commutes with x ↦ −x
        let e = quantize_fn(&d, |p| Complex64::from((-p[0] * p[0]).exp() * (1.0 + p[1] * p[1]))).unwrap();
        let nn = d.points;
        let r = CMatrix::from_fn(nn, nn, |i, j| Complex64::from(if i + j == nn - 1 { 1.0 } else { 0.0 }));
        assert!((&r * &e.matrix - &e.matrix * &r).norm() < 1e-8);
    }

    #[test]
    fn aliasing_is_detected() {
        let d = disc(1, 2.0, 16);
        let wide = crate::symbol::gaussian(1, 0.05, vec![0.0, 0.0]);
        assert!(matches!(
            quantize(&wide, &d, &QuantizeOptions::default()),
            Err(WeylError::Aliasing { .. })
        ));
        let fine = crate::symbol::gaussian(1, 1.0, vec![0.0, 0.0]);
        assert!(quantize(&fine, &d, &QuantizeOptions::default()).is_ok());
    }

    #[test]
    fn binary_round_trip() {
        let d = disc(1, 2.0, 8);
        let a = quantize_fn(&d, |p| Complex64::new(p[0], p[1])).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 40 + 16 * 64);
        let b = OperatorMatrix::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.disc, b.disc);
        buf[0] = b'X';
        assert!(OperatorMatrix::read_from(&mut buf.as_slice()).is_err());
    }
}
