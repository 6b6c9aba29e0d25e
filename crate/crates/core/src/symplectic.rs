//! Positive-definite quadratic forms on the symplectic space ℝ^{2n}.
//!
//! Coordinates are ordered `(x_1, …, x_n, ξ_1, …, ξ_n)` and the symplectic
//! form `σ = Σ dξ_j ∧ dx_j` is represented by
//!
//! ```text
//!     J = [ 0  -I ]        σ(T, Y) = Tᵀ J Y = ξ_T·x_Y − x_T·ξ_Y
//!         [ I   0 ]
//! ```
//!
//! The dual form `Γ^σ(T) = sup_{Γ(Y)=1} σ(T,Y)²` is `(JᵀT)ᵀ Γ^{-1} (JᵀT)`
//! (Cauchy–Schwarz in the Γ inner product), i.e. the matrix `J Γ^{-1} Jᵀ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};

/// Relative symmetry defect tolerated before symmetrizing.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Largest accepted eigenvalue ratio.
pub const MAX_CONDITION: f64 = 1e12;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// A positive-definite quadratic form `Γ(T) = Tᵀ G T` on ℝ^{2n}.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    n: usize,
    matrix: DMatrix<f64>,
}

impl QuadraticForm {
    /// Validates symmetry, positivity and conditioning; the stored matrix is
    /// the symmetrized input.
    pub fn new(n: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let d = 2 * n;
        if n == 0 {
            return Err(WeylError::InvalidParameter {
                name: "dim_n".into(),
                reason: "must be at least 1".into(),
            });
        }
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(WeylError::DimensionMismatch {
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(WeylError::NonFinite("quadratic form"));
        }
        let scale = matrix.norm().max(f64::MIN_POSITIVE);
        let defect = (&matrix - matrix.transpose()).norm() / scale;
        if defect > SYMMETRY_TOLERANCE {
            return Err(WeylError::NotSymmetric { defect });
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = sym
            .clone()
            .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or(WeylError::NoConvergence {
                what: "symmetric eigensolver",
                iterations: EIGEN_MAX_ITER,
                residual: f64::NAN,
            })?;
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if min <= 0.0 {
            return Err(WeylError::NotPositiveDefinite { min_eig: min });
        }
        if max / min > MAX_CONDITION {
            return Err(WeylError::IllConditioned { ratio: max / min });
        }
        Ok(QuadraticForm { n, matrix: sym })
    }

    /// Skips validation; for closed-form families known to be positive definite.
    pub(crate) fn from_trusted(n: usize, matrix: DMatrix<f64>) -> Self {
        QuadraticForm { n, matrix }
    }

    /// `Γ₀ = |dx|² + |dξ|²`.
    pub fn identity(n: usize) -> Self {
        QuadraticForm {
            n,
            matrix: DMatrix::identity(2 * n, 2 * n),
        }
    }

    pub fn diagonal(n: usize, diag: &[f64]) -> Result<Self> {
        if diag.len() != 2 * n {
            return Err(WeylError::DimensionMismatch {
                expected: 2 * n,
                got: diag.len(),
            });
        }
        Self::new(n, DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        let d = 2 * self.n;
        debug_assert_eq!(t.len(), d);
        let mut s = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.matrix[(i, j)] * t[j];
            }
            s += t[i] * row;
        }
        s
    }

    /// Bilinear form `⟨S, T⟩_Γ`.
    pub fn inner(&self, s: &[f64], t: &[f64]) -> f64 {
        let d = 2 * self.n;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += s[i] * self.matrix[(i, j)] * t[j];
            }
        }
        acc
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.n, &self.matrix * t)
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    /// `|Γ|^{1/2}`, the volume factor relative to the Euclidean structure.
    pub fn sqrt_det(&self) -> f64 {
        self.determinant().sqrt()
    }

    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        self.matrix
            .clone()
            .cholesky()
            .expect("validated positive definite")
            .inverse()
    }

    /// Lower Cholesky factor `L` with `G = L Lᵀ`.
    pub fn cholesky_lower(&self) -> DMatrix<f64> {
        self.matrix
            .clone()
            .cholesky()
            .expect("validated positive definite")
            .l()
    }

    /// Maps a Euclidean unit vector `u` to a Γ-unit vector `L^{-T} u`.
    pub fn unit_direction(&self, u: &[f64]) -> Vec<f64> {
        let l = self.cholesky_lower();
        let ut = DVector::from_column_slice(u);
        let t = l
            .transpose()
            .solve_upper_triangular(&ut)
            .expect("triangular factor is invertible");
        t.iter().copied().collect()
    }

    /// `(inf, sup)` of `self(T)/other(T)` over `T ≠ 0`.
    pub fn ratio_bounds(&self, other: &QuadraticForm) -> (f64, f64) {
        if self.n == 1 {
            // det(A − λB) = 0 in closed form
            let a = &self.matrix;
            let b = &other.matrix;
            let qa = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
            let qb = -(a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)]
                - a[(0, 1)] * b[(1, 0)]
                - a[(1, 0)] * b[(0, 1)]);
            let qc = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            let hi = (-qb + disc) / (2.0 * qa);
            // product of roots is qc/qa; avoids cancellation in the small root
            let lo = if hi > 0.0 { qc / (qa * hi) } else { (-qb - disc) / (2.0 * qa) };
            return (lo, hi);
        }
        let l = other.cholesky_lower();
        let linv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.ncols()))
            .expect("triangular factor is invertible");
        let m = &linv * &self.matrix * linv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let ev = m.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    /// Smallest eigenvalue of `other − self`; non-negative iff `self ≤ other`.
    pub fn margin_below(&self, other: &QuadraticForm) -> f64 {
        let diff = &other.matrix - &self.matrix;
        let diff = (&diff + diff.transpose()) * 0.5;
        diff.symmetric_eigenvalues().min()
    }
}

/// The standard symplectic structure on ℝ^{2n}.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticStructure {
    n: usize,
    j: DMatrix<f64>,
}

impl SymplecticStructure {
    pub fn new(n: usize) -> Self {
        let d = 2 * n;
        let mut j = DMatrix::zeros(d, d);
        for i in 0..n {
            j[(i, n + i)] = -1.0;
            j[(n + i, i)] = 1.0;
        }
        SymplecticStructure { n, j }
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }

    /// `σ(T, Y) = ξ_T·x_Y − x_T·ξ_Y`.
    pub fn sigma(&self, t: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        (0..n).map(|i| t[n + i] * y[i] - t[i] * y[n + i]).sum()
    }

    pub fn is_symplectic(&self, b: &DMatrix<f64>, tol: f64) -> bool {
        let lhs = b.transpose() * &self.j * b;
        (lhs - &self.j).norm() <= tol * (1.0 + b.norm().powi(2))
    }
}

/// Symplectic normal form of a form: `Sᵀ G S = diag(λ^{-1}, λ^{-1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticSpectrum {
    /// `λ_1 ≤ … ≤ λ_n`.
    pub lambdas: Vec<f64>,
    /// Columns are the new symplectic coordinate axes
    /// `(e_{x_1}, …, e_{x_n}, e_{ξ_1}, …, e_{ξ_n})`.
    pub basis: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FormSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// `Γ^σ`, realized as `J Γ^{-1} Jᵀ`.
pub fn dual_metric(g: &QuadraticForm) -> QuadraticForm {
    let j = SymplecticStructure::new(g.n);
    let m = j.matrix() * g.inverse_matrix() * j.matrix().transpose();
    QuadraticForm {
        n: g.n,
        matrix: (&m + m.transpose()) * 0.5,
    }
}

/// `Γ₁ ∧ Γ₂ = 2(Γ₁^{-1} + Γ₂^{-1})^{-1}`.
pub fn harmonic_mean(g1: &QuadraticForm, g2: &QuadraticForm) -> Result<QuadraticForm> {
    if g1.n != g2.n {
        return Err(WeylError::DimensionMismatch {
            expected: 2 * g1.n,
            got: 2 * g2.n,
        });
    }
    let s = g1.inverse_matrix() + g2.inverse_matrix();
    let inv = s
        .cholesky()
        .ok_or(WeylError::NotPositiveDefinite { min_eig: f64::NAN })?
        .inverse()
        * 2.0;
    Ok(QuadraticForm {
        n: g1.n,
        matrix: (&inv + inv.transpose()) * 0.5,
    })
}

fn sym_sqrt_and_inv(g: &QuadraticForm) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = g
        .matrix
        .clone()
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(WeylError::NoConvergence {
            what: "symmetric eigensolver",
            iterations: EIGEN_MAX_ITER,
            residual: f64::NAN,
        })?;
    let q = &eig.eigenvectors;
    let s = eig.eigenvalues.map(f64::sqrt);
    let si = s.map(|v| 1.0 / v);
    let sqrt = q * DMatrix::from_diagonal(&s) * q.transpose();
    let isqrt = q * DMatrix::from_diagonal(&si) * q.transpose();
    Ok((sqrt, isqrt))
}

/// Williamson normal form of `g`.
///
/// With `A = G^{1/2} J G^{1/2}` (antisymmetric), `AᵀA` has eigenvalues
/// `d_j²`, each twice, where `d_j = λ_j^{-1}`. An orthonormal basis
/// `(u_j, A u_j / d_j)` of each eigenspace gives the symplectic basis
/// `S = G^{-1/2} O diag(d, d)^{1/2}`.
pub fn symplectic_spectrum(g: &QuadraticForm) -> Result<SymplecticSpectrum> {
    let n = g.n;
    let d = 2 * n;
    let j = SymplecticStructure::new(n);
    let (gs, gis) = sym_sqrt_and_inv(g)?;
    let a = &gs * j.matrix() * &gs;
    let m = a.transpose() * &a;
    let m = (&m + m.transpose()) * 0.5;
    let eig = m
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(WeylError::NoConvergence {
            what: "symplectic spectrum",
            iterations: EIGEN_MAX_ITER,
            residual: f64::NAN,
        })?;
    let mut order: Vec<usize> = (0..d).collect();
    // largest d_j first, i.e. smallest λ_j first
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));

    let mut us: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut ds: Vec<f64> = Vec::with_capacity(n);
    for &idx in &order {
        if us.len() == n {
            break;
        }
        let mut e: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        for _ in 0..2 {
            for w in us.iter().chain(vs.iter()) {
                let c = w.dot(&e);
                e -= w * c;
            }
        }
        let norm = e.norm();
        if norm < 0.5 {
            continue;
        }
        e /= norm;
        let ae = &a * &e;
        let dj = ae.norm();
        if dj <= 0.0 || !dj.is_finite() {
            return Err(WeylError::NotPositiveDefinite { min_eig: dj });
        }
        vs.push(ae / dj);
        us.push(e);
        ds.push(dj);
    }
    if us.len() != n {
        return Err(WeylError::NoConvergence {
            what: "symplectic basis extraction",
            iterations: d,
            residual: (n - us.len()) as f64,
        });
    }
    let mut o = DMatrix::zeros(d, d);
    let mut scale = DVector::zeros(d);
    for k in 0..n {
        o.set_column(k, &us[k]);
        o.set_column(n + k, &vs[k]);
        scale[k] = ds[k].sqrt();
        scale[n + k] = ds[k].sqrt();
    }
    let basis = gis * o * DMatrix::from_diagonal(&scale);
    let lambdas = ds.iter().map(|v| 1.0 / v).collect();
    Ok(SymplecticSpectrum { lambdas, basis })
}

/// `λ = inf_T (Γ^σ(T)/Γ(T))^{1/2}`, the smallest symplectic eigenvalue.
pub fn lambda_gain(g: &QuadraticForm) -> Result<f64> {
    if g.n == 1 {
        // n = 1: λ = det(G)^{-1/2}
        return Ok(1.0 / g.sqrt_det());
    }
    Ok(symplectic_spectrum(g)?.lambdas[0])
}
