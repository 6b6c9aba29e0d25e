//! Almost-orthogonality bound for a weighted operator family.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::partition::PartitionGrid;
use crate::quantizer::{quantize_samples, Discretization, SymbolSamples};
use crate::symbol::Symbol;
use crate::spectral::{operator_norm, CMatrix, SpectralOptions};

pub struct CotlarInput {
    pub members: Vec<CMatrix>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CotlarReport {
    /// `max` of the two weighted sup-row-sums.
    pub bound: f64,
    /// `sup_Y Σ_Z w_Z ‖A_Y* A_Z‖^{1/2}`.
    pub left: f64,
    /// `sup_Y Σ_Z w_Z ‖A_Y A_Z*‖^{1/2}`.
    pub right: f64,
    /// `‖Σ_Y w_Y A_Y‖`.
    pub sum_norm: f64,
    pub consistent: bool,
    pub members: usize,
}

/// Pairwise tables `(‖A_Y*A_Z‖^{1/2}, ‖A_Y A_Z*‖^{1/2})`, row-major.
pub fn norm_tables(members: &[CMatrix], opts: &SpectralOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = members.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let vals: Vec<(usize, usize, f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let a = &members[i];
            let b = &members[j];
            let l = operator_norm(&a.ad_mul(b), opts)?.value;
            let r = operator_norm(&(a * b.adjoint()), opts)?.value;
            Ok((i, j, l.sqrt(), r.sqrt()))
        })
        .collect::<Result<_>>()?;
    let mut left = vec![0.0; k * k];
    let mut right = vec![0.0; k * k];
    // ‖A_Z*A_Y‖ = ‖(A_Y*A_Z)*‖, so both tables are symmetric
    for (i, j, l, r) in vals {
        left[i * k + j] = l;
        left[j * k + i] = l;
        right[i * k + j] = r;
        right[j * k + i] = r;
    }
    Ok((left, right))
}

pub fn cotlar_bound(input: &CotlarInput, opts: &SpectralOptions) -> Result<CotlarReport> {
    let k = input.members.len();
    if k == 0 || input.weights.len() != k {
        return Err(WeylError::DimensionMismatch {
            expected: k,
            got: input.weights.len(),
        });
    }
    let (lt, rt) = norm_tables(&input.members, opts)?;
    let row_sup = |t: &[f64]| {
        (0..k)
            .map(|i| (0..k).map(|j| input.weights[j] * t[i * k + j]).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let (left, right) = (row_sup(&lt), row_sup(&rt));
    let bound = left.max(right);
    let dim = input.members[0].nrows();
    let mut sum = CMatrix::zeros(dim, dim);
    for (a, w) in input.members.iter().zip(&input.weights) {
        sum += a * Complex64::from(*w);
    }
    let sum_norm = operator_norm(&sum, opts)?.value;
    Ok(CotlarReport {
        bound,
        left,
        right,
        sum_norm,
        consistent: sum_norm <= bound + 1e-8,
        members: k,
    })
}

/// `{(φ_Y a)^w}` with weights `w_Y |g_Y|^{1/2}` over the members meeting the
/// sample lattice of `disc`.
pub fn partition_family(a: &dyn Symbol, grid: &PartitionGrid, disc: &Discretization) -> Result<CotlarInput> {
    let pts = disc.sample_points();
    let vals: Vec<f64> = pts.par_iter().map(|p| a.value(p)).collect();
    let omega: Vec<f64> = pts.par_iter().map(|p| grid.omega(p)).collect();
    let mut active: Vec<usize> = pts
        .par_iter()
        .flat_map_iter(|p| grid.neighbors(p).into_iter().filter(|&k| grid.omega_member(k, p) > 0.0).collect::<Vec<_>>())
        .collect();
    active.sort_unstable();
    active.dedup();
    let members = active
        .par_iter()
        .map(|&k| {
            let values = pts
                .iter()
                .zip(vals.iter().zip(&omega))
                .map(|(p, (&v, &o))| {
                    let w = grid.omega_member(k, p);
                    Complex64::from(if w == 0.0 { 0.0 } else { w / o * v })
                })
                .collect();
            Ok(quantize_samples(&SymbolSamples {
                disc: disc.clone(),
                values,
            })?
            .matrix)
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = active
        .iter()
        .map(|&k| {
            let c = grid.center(k);
            c.weight * c.sqrt_det
        })
        .collect();
    Ok(CotlarInput { members, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{family, StructureConstants};
    use crate::partition::{build_partition, Domain, PartitionOptions};
    use crate::symbol::builtin_symbol;

    #[test]
    fn single_member_bound_is_its_norm() {
        let a = CMatrix::from_fn(6, 6, |i, j| Complex64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let o = SpectralOptions::default();
        let r = cotlar_bound(
            &CotlarInput {
                members: vec![a.clone()],
                weights: vec![1.0],
            },
            &o,
        )
        .unwrap();
        let n = operator_norm(&a, &o).unwrap().value;
        assert!((r.bound - n).abs() < 1e-8 * n);
        assert!(r.consistent);
    }

    #[test]
    fn disjoint_blocks() {
        // projections onto orthogonal coordinate blocks with scales 1, 2, 3
        let block = |start: usize, s: f64| {
            CMatrix::from_fn(9, 9, |i, j| {
                if i == j && i >= start && i < start + 3 {
                    Complex64::from(s)
                } else {
                    Complex64::from(0.0)
                }
            })
        };
        let input = CotlarInput {
            members: vec![block(0, 1.0), block(3, 2.0), block(6, 3.0)],
            weights: vec![1.0; 3],
        };
        let r = cotlar_bound(&input, &SpectralOptions::default()).unwrap();
        assert!((r.bound - 3.0).abs() < 1e-8);
        assert!((r.sum_norm - 3.0).abs() < 1e-8);
    }

    #[test]
    fn partition_of_one_reassembles_identity() {
        let k = StructureConstants {
            c0: 4.0,
            c0_prime: 4.0,
            n0: 1,
            mu_m: 4.0,
            nu_m: 2,
        };
        let g = family("s10", &[]).unwrap().metric;
        let opts = PartitionOptions {
            step: 0.5,
            ..Default::default()
        };
        let disc = Discretization::new(1, 1.5, 16).unwrap();
        let grid = build_partition(&g, 0.5, &Domain::phase_box(1, 1.5, disc.nyquist()), &k, &opts).unwrap();
        let one = builtin_symbol("one", &Default::default()).unwrap();
        let input = partition_family(one.as_ref(), &grid, &disc).unwrap();
        let mut sum = CMatrix::zeros(16, 16);
        for (a, w) in input.members.iter().zip(&input.weights) {
            sum += a * Complex64::from(*w);
        }
        let o = SpectralOptions::default();
        let defect = operator_norm(&(sum - CMatrix::identity(16, 16)), &o).unwrap().value;
        assert!(defect <= 1e-4, "{defect}");
        let r = cotlar_bound(&input, &o).unwrap();
        assert!(r.bound.is_finite() && r.consistent, "{r:?}");
    }
}
