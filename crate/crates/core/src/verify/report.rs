use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One measured quantity against a semi-norm.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundReport {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    /// `‖a^w‖` or the smallest eigenvalue.
    pub measured: f64,
    pub seminorm: f64,
    pub order: usize,
    /// `measured / seminorm`.
    pub ratio: f64,
    pub dim: usize,
    /// Semi-norms over the order sweep, if one was requested.
    pub order_sweep: Vec<(usize, f64)>,
}

impl BoundReport {
    pub fn new(label: impl Into<String>, params: BTreeMap<String, f64>, measured: f64, seminorm: f64, order: usize, dim: usize) -> Self {
        BoundReport {
            label: label.into(),
            params,
            measured,
            seminorm,
            order,
            ratio: measured / seminorm,
            dim,
            order_sweep: Vec::new(),
        }
    }
}

/// Sweep uniformity: `spread = max/min` of the tracked constants.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepReport {
    pub reports: Vec<BoundReport>,
    pub constants: Vec<f64>,
    pub spread: f64,
    pub budget: f64,
    pub pass: bool,
}

/// `max/min` of non-negative values; all zero counts as uniform, a zero
/// next to a positive value does not.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max == 0.0 {
        1.0
    } else if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

impl SweepReport {
    pub fn new(reports: Vec<BoundReport>, constants: Vec<f64>, budget: f64) -> Self {
        let s = spread(&constants);
        SweepReport {
            reports,
            constants,
            spread: s,
            budget,
            pass: s <= budget,
        }
    }
}

pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_conventions() {
        assert_eq!(spread(&[0.0, 0.0]), 1.0);
        assert_eq!(spread(&[2.0, 1.0, 1.5]), 2.0);
        assert!(spread(&[0.0, 1.0]).is_infinite());
        let r = BoundReport::new("x", params(&[("tau", 1.0)]), 3.0, 2.0, 3, 8);
        assert_eq!(r.ratio, 1.5);
    }
}
