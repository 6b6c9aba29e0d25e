//! Truncated Taylor series in one real variable.
//!
//! A [`Jet`] holds the coefficients of `t ↦ f(X + tT)` up to a fixed order,
//! which gives exact directional derivatives `f^{(k)}(X)T^k = k!·c_k`
//! without finite differences. Mixed partials and multilinear forms with
//! distinct directions are recovered by polarization (see
//! [`crate::symbol::multilinear`]).

use std::ops::{Add, Mul, Neg, Sub};

/// Highest supported Taylor order.
pub const MAX_ORDER: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; MAX_ORDER + 1],
    len: usize,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} > {MAX_ORDER}");
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = value;
        Jet { c, len: order + 1 }
    }

    /// The affine jet `t ↦ x0 + t·slope`.
    pub fn variable(x0: f64, slope: f64, order: usize) -> Self {
        let mut j = Self::constant(x0, order);
        if order >= 1 {
            j.c[1] = slope;
        }
        j
    }

    pub fn from_coeffs(c: &[f64]) -> Self {
        let mut j = Self::constant(0.0, c.len() - 1);
        j.c[..c.len()].copy_from_slice(c);
        j
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    pub fn order(&self) -> usize {
        self.len - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k < self.len {
            self.c[k]
        } else {
            0.0
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.len]
    }

    /// `d^k/dt^k` at `t = 0`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|v| v.is_finite())
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in &mut self.c[..self.len] {
            *v *= s;
        }
        self
    }

    pub fn add_scalar(mut self, s: f64) -> Self {
        self.c[0] += s;
        self
    }

    pub fn recip(&self) -> Self {
        let a = &self.c;
        let mut b = [0.0; MAX_ORDER + 1];
        b[0] = 1.0 / a[0];
        for k in 1..self.len {
            let mut s = 0.0;
            for j in 1..=k {
                s += a[j] * b[k - j];
            }
            b[k] = -s * b[0];
        }
        Jet { c: b, len: self.len }
    }

    pub fn exp(&self) -> Self {
        let a = &self.c;
        let mut e = [0.0; MAX_ORDER + 1];
        e[0] = a[0].exp();
        for k in 1..self.len {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e, len: self.len }
    }

    pub fn ln(&self) -> Self {
        let a = &self.c;
        let mut l = [0.0; MAX_ORDER + 1];
        l[0] = a[0].ln();
        for k in 1..self.len {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Jet { c: l, len: self.len }
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.c;
        let mut s = [0.0; MAX_ORDER + 1];
        let mut c = [0.0; MAX_ORDER + 1];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..self.len {
            let (mut ss, mut cc) = (0.0, 0.0);
            for j in 1..=k {
                let ja = j as f64 * a[j];
                ss += ja * c[k - j];
                cc += ja * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (Jet { c: s, len: self.len }, Jet { c, len: self.len })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    /// `self^p` for a jet with positive constant term.
    pub fn powf(&self, p: f64) -> Self {
        let a = &self.c;
        let mut b = [0.0; MAX_ORDER + 1];
        b[0] = a[0].powf(p);
        for k in 1..self.len {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * a[j] * b[k - j];
            }
            b[k] = s / (k as f64 * a[0]);
        }
        Jet { c: b, len: self.len }
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..p {
            out = out * *self;
        }
        out
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.len, rhs.len);
        for k in 0..self.len {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.len, rhs.len);
        for k in 0..self.len {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.len, rhs.len);
        let mut out = [0.0; MAX_ORDER + 1];
        for k in 0..self.len {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            out[k] = s;
        }
        Jet { c: out, len: self.len }
    }
}

impl std::ops::Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}
