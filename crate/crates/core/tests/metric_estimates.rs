use weyl_core::metric::*;
use weyl_core::sampling::SampleSpec;

fn tau_box(tau: f64, lattice: usize, random: usize) -> SampleSpec {
    SampleSpec::phase_box(1, 5.0, 50.0 * (1.0 + tau), lattice, random, 17)
}

fn sigma_tau(tau: f64) -> Family {
    family("sigma_tau", &[("tau", tau)]).unwrap()
}

/// Brute-force slowness for a metric `diag(1, λ(ξ)^{-2})`: the generalized
/// ratio is `max(λ_Y²/λ_X², λ_X²/λ_Y²)` and the g_X-ball of radius `c` in
/// the ξ direction is `|Δξ| ≤ c λ_X` (x offsets do not change the form).
fn diag_slowness_oracle(lam: impl Fn(f64) -> f64, xi_max: f64) -> f64 {
    let sup = |cap: f64| {
        let c = cap.powf(-0.5);
        let mut s: f64 = 1.0;
        for i in 0..=800 {
            let xi = -xi_max + 2.0 * xi_max * i as f64 / 800.0;
            let lx = lam(xi);
            for k in 0..=200 {
                let d = c * lx * (-1.0 + 2.0 * k as f64 / 200.0);
                let q = (lam(xi + d) / lx).powi(2);
                s = s.max(q.max(1.0 / q));
            }
        }
        s
    };
    let mut cap = 1.0;
    while sup(cap) > cap {
        cap *= 1.001;
    }
    cap
}

#[test]
fn s10_slowness_is_finite_and_refinement_stable() {
    let g = family("s10", &[]).unwrap().metric;
    let opts = SlownessOptions::default();
    let coarse = estimate_slowness(&g, &SampleSpec::phase_box(1, 50.0, 50.0, 150, 50, 3), &opts).unwrap();
    let fine = estimate_slowness(&g, &SampleSpec::phase_box(1, 50.0, 50.0, 300, 100, 3), &opts).unwrap();
    assert!(coarse.c0.is_finite() && coarse.lower_bound);
    assert!((coarse.c0 / fine.c0 - 1.0).abs() < 0.10, "{} {}", coarse.c0, fine.c0);
    let oracle = diag_slowness_oracle(|xi| (1.0 + xi * xi).sqrt(), 50.0);
    assert!(fine.c0 <= oracle * 1.01, "{} vs oracle {oracle}", fine.c0);
    assert!(fine.c0 >= oracle * 0.95, "{} vs oracle {oracle}", fine.c0);
}

#[test]
fn sigma_tau_slowness_is_tau_uniform() {
    let opts = SlownessOptions::default();
    let est: Vec<f64> = [0.0, 10.0, 100.0]
        .iter()
        .map(|&t| estimate_slowness(&sigma_tau(t).metric, &tau_box(t, 120, 60), &opts).unwrap().c0)
        .collect();
    let oracle = diag_slowness_oracle(|xi| 1.0 + xi.abs(), 50.0);
    for c in &est {
        assert!((c / est[0] - 1.0).abs() < 0.05, "{est:?}");
        assert!((c / oracle - 1.0).abs() < 0.05, "{c} vs oracle {oracle}");
    }
}

#[test]
fn s10_temperance_certifies_small_exponent() {
    let g = family("s10", &[]).unwrap().metric;
    let spec = SampleSpec::phase_box(1, 50.0, 50.0, 120, 60, 4);
    let c0 = estimate_slowness(&g, &spec, &SlownessOptions::default()).unwrap().c0;
    let t = estimate_temperance(&g, &spec, c0).unwrap();
    assert!(t.n0 <= 4, "{t:?}");
    assert!(t.c0_prime >= 1.0 && t.c0_prime <= c0 * (1.0 + 1e-12));
}

struct Sweep {
    c0: f64,
    c0_prime: f64,
    n0: u32,
    mu_lambda: f64,
    nu_lambda: u32,
    mu_lambda2: f64,
}

fn sweep(tau: f64) -> Sweep {
    let f = sigma_tau(tau);
    let spec = tau_box(tau, 120, 60);
    let opts = SlownessOptions::default();
    let s = estimate_slowness(&f.metric, &spec, &opts).unwrap();
    let t = estimate_temperance(&f.metric, &spec, s.c0).unwrap();
    let w1 = weight_constants(f.weight("lambda").unwrap(), &f.metric, &spec, s.c0, &opts).unwrap();
    let sq = WeightField::lambda_power(&f.metric, 2.0);
    let w2 = weight_constants(&sq, &f.metric, &spec, s.c0, &opts).unwrap();
    Sweep {
        c0: s.c0,
        c0_prime: t.c0_prime,
        n0: t.n0,
        mu_lambda: w1.mu,
        nu_lambda: w1.nu,
        mu_lambda2: w2.mu,
    }
}

#[test]
fn sigma_tau_structure_constants_are_tau_uniform() {
    let taus = [0.0, 1.0, 10.0, 100.0];
    let runs: Vec<Sweep> = taus.iter().map(|&t| sweep(t)).collect();
    let spread = |f: &dyn Fn(&Sweep) -> f64| {
        let v: Vec<f64> = runs.iter().map(f).collect();
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    assert!(spread(&|s| s.c0) <= 1.25);
    assert!(spread(&|s| s.c0.max(s.c0_prime)) <= 1.10);
    assert!(spread(&|s| s.mu_lambda) <= 1.25);
    for s in &runs {
        assert_eq!(s.n0, runs[0].n0);
        assert!(s.c0_prime >= 1.0 && s.c0_prime <= s.c0 * (1.0 + 1e-12));
        // λ_g is admissible with ν = N₀
        assert!(s.nu_lambda <= s.n0);
        let sq = s.mu_lambda * s.mu_lambda;
        assert!((s.mu_lambda2 / sq - 1.0).abs() < 0.15, "{} vs {sq}", s.mu_lambda2);
    }
}

#[test]
fn ratio_bounded_by_power_of_delta() {
    // g_X(T)/g_Y(T) ≤ C₀^{3+N₀} δ_r(X,Y)^{N₀} with r = C₀^{-1/2}
    for tau in [0.0, 10.0] {
        let f = sigma_tau(tau);
        let spec = tau_box(tau, 60, 20);
        let c0 = estimate_slowness(&f.metric, &spec, &SlownessOptions::default()).unwrap().c0;
        let n0 = estimate_temperance(&f.metric, &spec, c0).unwrap().n0;
        let r = c0.powf(-0.5);
        let pts = spec.points().unwrap();
        for (i, x) in pts.iter().enumerate() {
            let gx = f.metric.eval(x).unwrap();
            for y in pts.iter().skip(i + 1).step_by(3) {
                let gy = f.metric.eval(y).unwrap();
                let d = delta_r(&f.metric, x, y, r).unwrap();
                let bound = c0.powi(3 + n0 as i32) * d.powi(n0 as i32);
                assert!(gx.ratio_bounds(&gy).1 <= bound, "tau={tau}");
                assert!(gy.ratio_bounds(&gx).1 <= bound, "tau={tau}");
            }
        }
    }
}

#[test]
fn sigma_tau_integrability_is_tau_uniform() {
    let mut values = Vec::new();
    for tau in [0.0, 10.0, 100.0] {
        let f = sigma_tau(tau);
        let spec = tau_box(tau, 80, 20);
        let c0 = estimate_slowness(&f.metric, &spec, &SlownessOptions::default()).unwrap().c0;
        let t = estimate_temperance(&f.metric, &spec, c0).unwrap();
        let k = StructureConstants {
            c0,
            c0_prime: t.c0_prime,
            n0: t.n0,
            mu_m: 1.0,
            nu_m: 0,
        };
        let rep = integrability_constant(&f.metric, &[0.0, 0.0], c0.powf(-0.5), &k, &Truncation::default()).unwrap();
        assert!(rep.last_shell_fraction < 1e-6);
        values.push(rep.value);
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 2.0, "{values:?}");
}
