//! Deterministic sample sets over phase-space boxes.
//!
//! Every sup/inf estimator in the crate is a sampled lower bound. Samples
//! come from a Halton lattice plus a ChaCha cloud with a pinned seed, so
//! repeated runs see identical points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SampleSpec {
    /// Lower corner of the box, one entry per phase-space coordinate.
    pub lo: Vec<f64>,
    /// Upper corner of the box.
    pub hi: Vec<f64>,
    /// Number of Halton lattice points.
    pub lattice: usize,
    /// Number of uniformly random points.
    pub random: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn cube(dim: usize, half_width: f64, lattice: usize, random: usize, seed: u64) -> Self {
        SampleSpec {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
            lattice,
            random,
            seed,
        }
    }

    /// Box `|x_i| ≤ x_half`, `|ξ_i| ≤ xi_half` in dimension `2n`.
    pub fn phase_box(n: usize, x_half: f64, xi_half: f64, lattice: usize, random: usize, seed: u64) -> Self {
        let mut lo = vec![-x_half; n];
        lo.extend(std::iter::repeat(-xi_half).take(n));
        let hi = lo.iter().map(|v| -v).collect();
        SampleSpec {
            lo,
            hi,
            lattice,
            random,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(WeylError::InvalidParameter {
                name: "sample box".into(),
                reason: "lo/hi must be non-empty and of equal length".into(),
            });
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a <= b)) {
            return Err(WeylError::InvalidParameter {
                name: "sample box".into(),
                reason: "lo must not exceed hi".into(),
            });
        }
        if self.lattice + self.random == 0 {
            return Err(WeylError::InvalidParameter {
                name: "sample count".into(),
                reason: "sample grid must be non-empty".into(),
            });
        }
        if self.dim() > PRIMES.len() {
            return Err(WeylError::Unsupported(format!(
                "sampling in dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let d = self.dim();
        let mut out = Vec::with_capacity(self.lattice + self.random);
        for i in 0..self.lattice {
            let p = (0..d)
                .map(|k| {
                    let u = radical_inverse(i as u64 + 1, PRIMES[k]);
                    self.lo[k] + u * (self.hi[k] - self.lo[k])
                })
                .collect();
            out.push(p);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random {
            let p = (0..d)
                .map(|k| self.lo[k] + rng.gen::<f64>() * (self.hi[k] - self.lo[k]))
                .collect();
            out.push(p);
        }
        Ok(out)
    }
}

/// Van der Corput radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Unit vectors covering the sphere `S^{d-1}`.
///
/// In dimension 2 these are `count` equally spaced angles on the half circle
/// (directions `T` and `−T` are equivalent for even-degree forms and the
/// odd ones only change sign). In higher dimension a seeded Gaussian cloud
/// is normalized.
pub fn unit_directions(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0]];
    }
    if d == 2 {
        return (0..count)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count + d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        out.push(e);
    }
    while out.len() < count + d {
        let v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            out.push(v.iter().map(|a| a / nrm).collect());
        }
    }
    out
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box–Muller
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Points of the closed unit ball in dimension `d`: the boundary directions
/// at several radii, plus the origin-free interior shells.
pub fn unit_ball_offsets(d: usize, directions: usize, radii: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let dirs = if d == 2 {
        // full circle here, since an offset and its negative are different points
        (0..2 * directions)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / directions as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        let mut v = unit_directions(d, directions, seed);
        let neg: Vec<Vec<f64>> = v.iter().map(|u| u.iter().map(|a| -a).collect()).collect();
        v.extend(neg);
        v
    };
    let mut out = Vec::with_capacity(dirs.len() * radii.len());
    for &r in radii {
        for u in &dirs {
            out.push(u.iter().map(|a| a * r).collect());
        }
    }
    out
}
