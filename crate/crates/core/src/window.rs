//! The plateau cutoff `χ₀` and the lattice windows built from it.
//!
//! `χ₀(t) = f(1−t) / (f(1−t) + f(t−½))` with `f(s) = e^{−1/s}` for `s > 0`
//! and `0` otherwise. It is smooth, non-increasing, `≡ 1` on `[0, ½]` and
//! `≡ 0` on `[1, ∞)`.

use crate::jet::Jet;

// e^{-700} is below every quantity we care about, and all derivatives of
// e^{-1/s} at s < 1/700 are smaller still.
const F_CUTOFF: f64 = 1.0 / 700.0;

fn f(s: f64) -> f64 {
    if s > F_CUTOFF {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn f_jet(s: Jet) -> Jet {
    if s.value() > F_CUTOFF {
        (-s.recip()).exp()
    } else {
        Jet::zero(s.order())
    }
}

pub fn chi0(t: f64) -> f64 {
    if t <= 0.5 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = f(1.0 - t);
    let b = f(t - 0.5);
    a / (a + b)
}

/// `χ₀ ∘ u` as a jet.
pub fn chi0_jet(u: Jet) -> Jet {
    let t = u.value();
    let order = u.order();
    if t <= 0.5 - F_CUTOFF {
        return Jet::constant(1.0, order);
    }
    if t >= 1.0 - F_CUTOFF {
        return Jet::zero(order);
    }
    let one_minus = (-u).add_scalar(1.0);
    let a = f_jet(one_minus);
    let b = f_jet(u.add_scalar(-0.5));
    a / (a + b)
}

/// `χ₁(t) = χ₀(t/2)`: `≡ 1` on `[0, 1]`, supported in `[0, 2]`.
pub fn chi1(t: f64) -> f64 {
    chi0(0.5 * t)
}

/// One-dimensional lattice window `θ` with `Σ_k θ(t − k) = 1`.
///
/// `θ(t) = ρ(t) / Σ_k ρ(t − k)` where `ρ(t) = χ₀(t²)` is supported in
/// `|t| < 1`, so at most two neighbors enter the normalizer.
pub fn lattice_window(t: f64) -> f64 {
    let rho = |s: f64| chi0(s * s);
    let num = rho(t);
    if num == 0.0 {
        return 0.0;
    }
    let k0 = t.floor();
    let mut den = 0.0;
    for k in [k0 - 1.0, k0, k0 + 1.0, k0 + 2.0] {
        den += rho(t - k);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        for i in 0..=50 {
            let t = 0.5 * i as f64 / 50.0;
            assert_eq!(chi0(t), 1.0);
        }
        for i in 0..=50 {
            let t = 1.0 + i as f64 / 10.0;
            assert_eq!(chi0(t), 0.0);
        }
    }

    #[test]
    fn non_increasing_in_transition() {
        let mut prev = 1.0;
        for i in 0..=1000 {
            let t = 0.5 + 0.5 * i as f64 / 1000.0;
            let v = chi0(t);
            assert!(v <= prev + 1e-15);
            assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn jet_matches_value_and_finite_difference() {
        let h = 1e-5;
        for &t in &[0.55, 0.7, 0.75, 0.9, 0.97] {
            let j = chi0_jet(Jet::variable(t, 1.0, 3));
            assert!((j.value() - chi0(t)).abs() < 1e-15);
            let fd = (chi0(t + h) - chi0(t - h)) / (2.0 * h);
            assert!((j.derivative(1) - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn derivative_bounds_are_finite() {
        let mut sup = [0.0f64; 9];
        for i in 0..=2000 {
            let t = 0.4 + 0.7 * i as f64 / 2000.0;
            let j = chi0_jet(Jet::variable(t, 1.0, 8));
            for k in 0..=8 {
                sup[k] = sup[k].max(j.derivative(k).abs());
            }
        }
        assert!(sup.iter().all(|v| v.is_finite()));
        assert!(sup[1] > 0.0);
    }

    #[test]
    fn lattice_window_sums_to_one() {
        for i in 0..200 {
            let t = -3.0 + 6.0 * i as f64 / 199.0;
            let s: f64 = (-6..=6).map(|k| lattice_window(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14, "t={t} s={s}");
        }
    }
}
