use weyl_core::metric::*;
use weyl_core::partition::*;
use weyl_core::sampling::SampleSpec;
use weyl_core::symbol::{builtin_symbol, seminorm};

fn constants() -> StructureConstants {
    StructureConstants {
        c0: 4.0,
        c0_prime: 4.0,
        n0: 1,
        mu_m: 4.0,
        nu_m: 2,
    }
}

fn grid(tau: f64, opts: &PartitionOptions) -> std::sync::Arc<PartitionGrid> {
    let g = family("sigma_tau", &[("tau", tau)]).unwrap().metric;
    let k = constants();
    build_partition(&g, default_radius(&k), &Domain::phase_box(1, 1.5, 4.0 * (1.0 + tau)), &k, opts).unwrap()
}

fn spread(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn probe_centers(g: &PartitionGrid) -> Vec<usize> {
    g.interior_points(5).unwrap().iter().map(|x| g.nearest_center(x)).collect()
}

#[test]
fn member_seminorms_are_tau_uniform() {
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    for tau in [0.0, 10.0, 100.0] {
        let g = grid(tau, &PartitionOptions::default());
        let c = probe_centers(&g);
        phi.push(max_member_seminorm(&g, &c, MemberKind::Phi, 3).unwrap().value);
        psi.push(max_member_seminorm(&g, &c, MemberKind::Psi, 3).unwrap().value);
    }
    assert!(spread(&phi) <= 1.25, "{phi:?}");
    assert!(spread(&psi) <= 1.25, "{psi:?}");
    assert!(phi.iter().chain(&psi).all(|v| v.is_finite()));
}

#[test]
fn split_xi_squared_frozen_ratio_is_tau_uniform() {
    let a = builtin_symbol("xi_squared", &Default::default()).unwrap();
    let mut ratios = Vec::new();
    for tau in [0.0, 10.0, 100.0] {
        let f = family("sigma_tau", &[("tau", tau)]).unwrap();
        let m = WeightField::lambda_power(&f.metric, 2.0);
        let g = grid(tau, &PartitionOptions::default());
        let split = split_symbol(a.clone(), &g, &constants()).unwrap();
        let spec = SampleSpec::phase_box(1, 1.5, 4.0 * (1.0 + tau), 200, 0, 5);
        let whole = seminorm(a.as_ref(), &m, &f.metric, 2, &spec).unwrap().value;
        let mut worst: f64 = 0.0;
        for c in probe_centers(&g) {
            worst = worst.max(split.frozen_seminorm(c, &m, 2).unwrap().value);
        }
        ratios.push(worst / whole);
    }
    assert!(spread(&ratios) <= 1.25, "{ratios:?}");
}

#[test]
fn reference_defect_shrinks_under_refinement() {
    for tau in [0.0, 10.0] {
        let defect = |step: f64| {
            let opts = PartitionOptions {
                step,
                normalization: Normalization::Reference { refine: 4 },
                ..Default::default()
            };
            let g = grid(tau, &opts);
            g.interior_points(200)
                .unwrap()
                .iter()
                .map(|x| (g.identity_sum(x) - 1.0).abs())
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (defect(0.25), defect(0.125));
        assert!(fine < 0.5 * coarse, "{coarse} {fine}");
    }
}
