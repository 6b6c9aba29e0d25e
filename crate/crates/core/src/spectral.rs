//! Extreme eigenvalues and norms of dense complex matrices.
//!
//! Lanczos with full reorthogonalization is the default; power iteration on
//! `A*A` is kept as an independent check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpectralOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol: 1e-10,
            max_iter: 600,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn start_vector(dim: usize, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVector::from_fn(dim, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let n = v.norm();
    v / Complex64::from(n)
}

/// Extreme eigenvalue of a Hermitian operator given by its action.
pub fn lanczos<F>(op: F, dim: usize, which: Extreme, opts: &SpectralOptions) -> Result<EigenEstimate>
where
    F: Fn(&CVector) -> CVector,
{
    if dim == 0 {
        return Err(WeylError::Precondition("empty operator".into()));
    }
    let mut basis: Vec<CVector> = vec![start_vector(dim, opts.seed)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let cap = opts.max_iter.min(dim);
    let mut last = EigenEstimate {
        value: f64::NAN,
        residual: f64::INFINITY,
        iterations: 0,
    };
    for k in 0..cap {
        let q = &basis[k];
        let mut w = op(q);
        let a = q.dotc(&w).re;
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w.axpy(-c, b, Complex64::from(1.0));
            }
        }
        let bnorm = w.norm();
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let pick = (0..m)
            .min_by(|&i, &j| {
                let (x, y) = (eig.eigenvalues[i], eig.eigenvalues[j]);
                match which {
                    Extreme::Smallest => x.total_cmp(&y),
                    Extreme::Largest => y.total_cmp(&x),
                }
            })
            .unwrap();
        let theta = eig.eigenvalues[pick];
        let scale = eig.eigenvalues.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
        let residual = (bnorm * eig.eigenvectors[(m - 1, pick)]).abs();
        last = EigenEstimate {
            value: theta,
            residual,
            iterations: k + 1,
        };
        if !theta.is_finite() {
            return Err(WeylError::NonFinite("Lanczos Ritz value"));
        }
        if residual <= opts.tol * scale || bnorm <= 1e-14 * scale || k + 1 == dim {
            return Ok(last);
        }
        beta.push(bnorm);
        basis.push(w / Complex64::from(bnorm));
    }
    Err(WeylError::NoConvergence {
        what: "Lanczos",
        iterations: last.iterations,
        residual: last.residual,
    })
}

/// `(A + A*)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::from(0.5)
}

/// Smallest eigenvalue of `(A + A*)/2`.
pub fn min_eig(a: &CMatrix, opts: &SpectralOptions) -> Result<EigenEstimate> {
    let h = hermitian_part(a);
    lanczos(|v| &h * v, h.nrows(), Extreme::Smallest, opts)
}

/// Largest singular value, from Lanczos on `A*A`.
pub fn operator_norm(a: &CMatrix, opts: &SpectralOptions) -> Result<EigenEstimate> {
    let est = lanczos(|v| a.ad_mul(&(a * v)), a.ncols(), Extreme::Largest, opts)?;
    Ok(EigenEstimate {
        value: est.value.max(0.0).sqrt(),
        ..est
    })
}

/// Largest singular value by power iteration on `A*A`.
pub fn power_norm(a: &CMatrix, opts: &SpectralOptions) -> Result<EigenEstimate> {
    let mut v = start_vector(a.ncols(), opts.seed);
    let mut prev = 0.0;
    for k in 0..opts.max_iter * 20 {
        let w = a.ad_mul(&(a * &v));
        let nrm = w.norm();
        if !nrm.is_finite() {
            return Err(WeylError::NonFinite("power iteration"));
        }
        if nrm == 0.0 {
            return Ok(EigenEstimate {
                value: 0.0,
                residual: 0.0,
                iterations: k + 1,
            });
        }
        let change = (nrm - prev).abs() / nrm;
        v = w / Complex64::from(nrm);
        if change <= opts.tol {
            return Ok(EigenEstimate {
                value: nrm.sqrt(),
                residual: change,
                iterations: k + 1,
            });
        }
        prev = nrm;
    }
    Err(WeylError::NoConvergence {
        what: "power iteration",
        iterations: opts.max_iter * 20,
        residual: f64::NAN,
    })
}

/// All eigenvalues of `(A + A*)/2`, ascending. Dense; meant for `dim ≲ 1000`.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(a)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `‖A‖_F`.
pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}
