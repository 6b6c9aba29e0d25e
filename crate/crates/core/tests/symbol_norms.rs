use std::sync::Arc;

use proptest::prelude::*;
use weyl_core::metric::{family, WeightField};
use weyl_core::sampling::SampleSpec;
use weyl_core::symbol::*;

fn sym(name: &str, params: &[(&str, f64)]) -> SymbolRef {
    let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin_symbol(name, &p).unwrap()
}

#[test]
fn xi_squared_in_lambda_squared_class_uniformly_in_tau() {
    let a = sym("xi_squared", &[]);
    let mut values = Vec::new();
    for tau in [0.0, 10.0, 100.0] {
        let f = family("sigma_tau", &[("tau", tau)]).unwrap();
        let m = WeightField::lambda_power(&f.metric, 2.0);
        let spec = SampleSpec::phase_box(1, 5.0, 50.0 * (1.0 + tau), 200, 50, 8);
        let r = seminorm(a.as_ref(), &m, &f.metric, 4, &spec).unwrap();
        // |a|/λ² ≤ 1, |a'T|/λ² ≤ 2|ξ|/λ ≤ 2, |a''T²|/λ² ≤ 2, higher orders vanish
        assert!(r.value <= 2.0 + 1e-12 && r.value > 1.5, "tau={tau}: {}", r.value);
        assert_eq!(r.per_order[3], 0.0);
        values.push(r.value);
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min < 1.1, "{values:?}");
}

fn corpus() -> Vec<SymbolRef> {
    vec![
        sym("gaussian", &[("s", 0.8)]),
        sym("sincos", &[("p", 2.0), ("q", 0.5)]),
        sym("fp_test", &[]),
        sym("sigma_tau_fp", &[("tau", 3.0)]),
        sym("s10_power", &[("m", 1.0)]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seminorm_homogeneity_and_triangle(c in -5.0f64..5.0, i in 0usize..5, j in 0usize..5, seed in 0u64..1000) {
        let g = family("s10", &[]).unwrap().metric;
        let m = WeightField::one(1);
        let spec = SampleSpec::phase_box(1, 3.0, 6.0, 12, 12, seed);
        let cs = corpus();
        let (a, b) = (cs[i].clone(), cs[j].clone());
        let na = seminorm(a.as_ref(), &m, &g, 3, &spec).unwrap().value;
        let nb = seminorm(b.as_ref(), &m, &g, 3, &spec).unwrap().value;
        let nca = seminorm(scaled(c, a.clone()).as_ref(), &m, &g, 3, &spec).unwrap().value;
        prop_assert!((nca - c.abs() * na).abs() <= 1e-13 * (1.0 + nca));
        let nsum = seminorm(sum(a, b).as_ref(), &m, &g, 3, &spec).unwrap().value;
        prop_assert!(nsum <= na + nb + 1e-12);
    }

    #[test]
    fn multilinear_is_symmetric(i in 0usize..5, x in -2.0f64..2.0, xi in -2.0f64..2.0,
                                t in prop::collection::vec(-1.0f64..1.0, 6), perm in 0usize..6) {
        let a = corpus()[i].clone();
        let dirs: Vec<Vec<f64>> = t.chunks(2).map(|c| c.to_vec()).collect();
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let p: Vec<Vec<f64>> = orders[perm].iter().map(|&k| dirs[k].clone()).collect();
        let v1 = multilinear(a.as_ref(), &[x, xi], &dirs).unwrap();
        let v2 = multilinear(a.as_ref(), &[x, xi], &p).unwrap();
        prop_assert!((v1 - v2).abs() <= 1e-9 * (1.0 + v1.abs()));
    }

    #[test]
    fn order_zero_jet_is_the_value(i in 0usize..5, x in -3.0f64..3.0, xi in -3.0f64..3.0) {
        let a = corpus()[i].clone();
        let v = a.value(&[x, xi]);
        prop_assert_eq!(directional(a.as_ref(), &[x, xi], &[0.3, 0.4], 0).unwrap(), v);
    }

    #[test]
    fn finite_difference_agrees_with_exact(x in -1.5f64..1.5, xi in -1.5f64..1.5, th in 0.0f64..3.14) {
        let fd = FiniteDifferenceSymbol::new(1, "sincos_fd", Arc::new(|p: &[f64]| (2.0 * p[0]).sin() * (0.5 * p[1]).cos()), 1e-4);
        let exact = sym("sincos", &[("p", 2.0), ("q", 0.5)]);
        let t = [th.cos(), th.sin()];
        for k in 1..=3 {
            let a = directional(&fd, &[x, xi], &t, k).unwrap();
            let b = directional(exact.as_ref(), &[x, xi], &t, k).unwrap();
            prop_assert!((a - b).abs() < 1e-4 * (1.0 + b.abs()));
        }
    }
}
