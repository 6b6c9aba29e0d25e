//! The eleven acceptance criteria. Each prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weyl_core::metric::*;
use weyl_core::moyal::*;
use weyl_core::partition::*;
use weyl_core::quantizer::*;
use weyl_core::sampling::SampleSpec;
use weyl_core::spectral::{hermitian_eigenvalues, SpectralOptions};
use weyl_core::symbol::{builtin_symbol, SymbolRef};
use weyl_core::symplectic::*;
use weyl_core::verify::*;
use weyl_core::verify::report::spread;

type Outcome = Result<(bool, String), String>;

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn sym(name: &str, p: &[(&str, f64)]) -> SymbolRef {
    builtin_symbol(name, &p.iter().map(|(k, v)| (k.to_string(), *v)).collect()).unwrap()
}

fn random_form(rng: &mut ChaCha8Rng, n: usize) -> QuadraticForm {
    let d = 2 * n;
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    QuadraticForm::new(n, &a * a.transpose() + DMatrix::identity(d, d) * 0.2).unwrap()
}

fn sigma(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() / 2;
    (0..n).map(|i| t[n + i] * y[i] - t[i] * y[n + i]).sum()
}

/// Involution of the dual metric, and agreement with `sup σ(T,Y)²/g(Y)`:
/// the maximizer solves `G Y = σ(T, ·)`, and random `Y` never exceed it.
fn c1_dual_metric() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut inv, mut sup) = (0.0f64, 0.0f64);
    let mut exceeded = false;
    for i in 0..200 {
        let n = 1 + i % 3;
        let d = 2 * n;
        let g = random_form(&mut rng, n);
        let gg = dual_metric(&dual_metric(&g));
        inv = inv.max((gg.matrix() - g.matrix()).norm() / g.matrix().norm());
        let t: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() - 0.5).collect();
        // σ(T, Y) = a·Y
        let a = DVector::from_fn(d, |j, _| if j < n { t[n + j] } else { -t[j - n] });
        let y = g.matrix().clone().lu().solve(&a).ok_or("singular form")?;
        let best = sigma(&t, y.as_slice()).powi(2) / g.eval(y.as_slice());
        let gs = dual_metric(&g).eval(&t);
        sup = sup.max((best - gs).abs() / gs);
        for _ in 0..50 {
            let z: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() - 0.5).collect();
            exceeded |= sigma(&t, &z).powi(2) / g.eval(&z) > gs * (1.0 + 1e-12);
        }
    }
    Ok((
        inv <= 1e-10 && sup <= 1e-10 && !exceeded,
        format!("involution {inv:.1e}, sup definition {sup:.1e}, sampled exceedance {exceeded}"),
    ))
}

fn c2_quantizer() -> Outcome {
    let d = Discretization::new(1, 6.0, 256).map_err(e)?;
    let one = quantize(sym("one", &[]).as_ref(), &d, &QuantizeOptions::default()).map_err(e)?;
    let id = (&one.matrix - DMatrix::<Complex64>::identity(256, 256)).norm();
    let h = quantize(sym("harmonic", &[]).as_ref(), &d, &QuantizeOptions::default()).map_err(e)?;
    let ev = hermitian_eigenvalues(&h.matrix);
    let rel = (0..6)
        .map(|k| {
            let t = (2 * k + 1) as f64 / (2.0 * PI);
            (ev[k] - t).abs() / t
        })
        .fold(0.0, f64::max);
    Ok((id <= 1e-8 && rel <= 1e-3, format!("identity defect {id:.1e}, oscillator levels max rel {rel:.1e}")))
}

fn c3_composition() -> Outcome {
    let d = Discretization::new(1, 5.0, 128).map_err(e)?;
    let g = |s: f64, x0: f64, xi0: f64| sym("gaussian", &[("s", s), ("x0", x0), ("xi0", xi0)]);
    let pairs = [
        (g(1.0, 0.0, 0.0), g(1.0, 0.0, 0.0)),
        (g(1.0, 0.5, 0.0), g(2.0, 0.0, -0.5)),
        (g(0.7, -0.4, 0.3), g(1.3, 0.6, 0.1)),
        (g(2.0, -1.0, 0.0), g(0.8, 0.0, 1.0)),
        (g(1.5, 0.2, -0.2), g(3.0, -0.3, 0.4)),
    ];
    let o = QuantizeOptions::default();
    let mut worst = 0.0f64;
    for (a, b) in &pairs {
        let c = compose_integral(a.as_ref(), b.as_ref(), &d, &ComposeOptions::default()).map_err(e)?;
        let qc = quantize_samples(&c.to_samples()).map_err(e)?.matrix;
        let p = quantize(a.as_ref(), &d, &o).map_err(e)?.matrix * quantize(b.as_ref(), &d, &o).map_err(e)?.matrix;
        worst = worst.max((&qc - &p).norm() / p.norm());
    }
    Ok((worst <= 1e-5, format!("max relative Frobenius {worst:.1e} over 5 Gaussian pairs")))
}

fn c4_expansion() -> Outcome {
    let x = sym("coordinate", &[("index", 0.0)]);
    let xi = sym("coordinate", &[("index", 1.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut poly = 0.0f64;
    for _ in 0..50 {
        let p = [rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0];
        let mut s = Complex64::from(0.0);
        for k in 0..4 {
            s += expansion_term(x.as_ref(), xi.as_ref(), k).map_err(e)?.value(&p).map_err(e)?;
        }
        poly = poly.max((s - Complex64::new(p[0] * p[1], 1.0 / (4.0 * PI))).norm());
    }
    let corpus = [sym("sincos", &[]), sym("gaussian", &[("x0", 0.3)]), sym("fp_test", &[]), sym("xi_squared", &[])];
    let mut anti = true;
    for a in &corpus {
        for b in &corpus {
            for _ in 0..10 {
                let p = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0];
                let ab = expansion_term(a.as_ref(), b.as_ref(), 1).map_err(e)?.value(&p).map_err(e)?;
                let ba = expansion_term(b.as_ref(), a.as_ref(), 1).map_err(e)?.value(&p).map_err(e)?;
                anti &= ab == -ba;
            }
        }
    }
    let d = Discretization::new(1, 4.0, 64).map_err(e)?;
    let fa = |p: &[f64]| (-PI * p[1] * p[1]).exp();
    let fb = |p: &[f64]| (-2.0 * PI * (p[1] - 0.3).powi(2)).exp();
    let c = compose_fn(&fa, &fb, &d, &ComposeOptions::default()).map_err(e)?;
    let mut xi_err = 0.0f64;
    for (i, k) in c.interior(0.25, 3) {
        let p = c.point(i, k);
        xi_err = xi_err.max((c.at(i, k) - fa(&p) * fb(&p)).norm());
    }
    Ok((
        poly <= 1e-8 && anti && xi_err <= 1e-8,
        format!("x#xi defect {poly:.1e}, w1 antisymmetric {anti}, xi-only product defect {xi_err:.1e}"),
    ))
}

fn structure(c0: f64) -> StructureConstants {
    StructureConstants {
        c0,
        c0_prime: c0,
        n0: 1,
        mu_m: c0,
        nu_m: 2,
    }
}

fn c5_partition() -> Outcome {
    let k = structure(4.0);
    let r = default_radius(&k);
    let mut detail = Vec::new();
    let mut ok = true;
    let cases: Vec<(String, MetricField, Domain)> = vec![
        ("s10".into(), family("s10", &[]).map_err(e)?.metric, Domain::phase_box(1, 1.5, 4.0)),
        ("sigma_tau 0".into(), family("sigma_tau", &[("tau", 0.0)]).map_err(e)?.metric, Domain::phase_box(1, 1.5, 4.0)),
        ("sigma_tau 10".into(), family("sigma_tau", &[("tau", 10.0)]).map_err(e)?.metric, Domain::phase_box(1, 1.5, 44.0)),
    ];
    for (name, g, dom) in &cases {
        let grid = build_partition(g, r, dom, &k, &PartitionOptions::default()).map_err(e)?;
        let pts = grid.interior_points(1000).map_err(e)?;
        let defect = pts.iter().map(|x| (grid.identity_sum(x) - 1.0).abs()).fold(0.0, f64::max);
        // quadrature error of ω against a 4x refined lattice, at two steps
        let refined = |step: f64| -> Result<f64, String> {
            let o = PartitionOptions {
                step,
                normalization: Normalization::Reference { refine: 4 },
                ..Default::default()
            };
            let gr = build_partition(g, r, dom, &k, &o).map_err(e)?;
            Ok(gr.interior_points(200).map_err(e)?.iter().map(|x| (gr.identity_sum(x) - 1.0).abs()).fold(0.0, f64::max))
        };
        let (coarse, fine) = (refined(0.25)?, refined(0.125)?);
        ok &= pts.len() == 1000 && defect <= 1e-6 && fine < coarse;
        detail.push(format!("{name}: defect {defect:.1e}, quadrature {coarse:.1e} -> {fine:.1e}"));
    }
    Ok((ok, detail.join("; ")))
}

fn c6_integrability() -> Outcome {
    let mut values = Vec::new();
    let mut ok = true;
    for tau in [0.0, 10.0, 100.0] {
        let g = family("sigma_tau", &[("tau", tau)]).map_err(e)?.metric;
        let spec = SampleSpec::phase_box(1, 2.0, 4.0 * (1.0 + tau), 80, 20, 3);
        let c0 = estimate_slowness(&g, &spec, &SlownessOptions::default()).map_err(e)?.c0;
        let t = estimate_temperance(&g, &spec, c0).map_err(e)?;
        let k = StructureConstants {
            c0,
            c0_prime: t.c0_prime,
            n0: t.n0,
            mu_m: 1.0,
            nu_m: 0,
        };
        let tr = Truncation::default();
        let rep = integrability_constant(&g, &[0.0, 0.0], c0.powf(-0.5), &k, &tr).map_err(e)?;
        let deeper = Truncation { tail_tol: 1e-9, ..tr };
        let rep2 = integrability_constant(&g, &[0.0, 0.0], c0.powf(-0.5), &k, &deeper).map_err(e)?;
        let n1 = t.n0 + 2 * (2 * t.n0 + 1);
        ok &= rep.last_shell_fraction < 1e-6 && (rep2.value - rep.value).abs() <= 1e-5 * rep2.value && rep.n1 == n1;
        values.push(rep.value);
    }
    let s = spread(&values);
    Ok((ok && s <= 2.0, format!("values {values:.4?}, spread {s:.3}")))
}

fn c7_biconfinement() -> Outcome {
    let pairs = separated_gaussians(&[2.0, 3.0, 4.0, 6.0, 8.0], 0.5).map_err(e)?;
    let d = Discretization::new(1, 10.0, 256).map_err(e)?;
    let id = QuadraticForm::identity(1);
    let r = biconfinement_decay(&pairs, &id, &id, &[2, 4], &d, &BiconfinementOptions::default()).map_err(e)?;
    let fits: Vec<String> = r
        .fits
        .iter()
        .map(|f| format!("N={} fitted {:.2} (>= {:.2}, {} points)", f.exponent, f.fitted, 0.5 * f.exponent as f64 - 0.25, f.used))
        .collect();
    Ok((r.pass, fits.join(", ")))
}

fn c8_l2() -> Outcome {
    let cases: Vec<SweepCase> = [0.0, 1.0, 10.0, 100.0].iter().map(|&t| adapted_case(t, 128)).collect::<Result<_, _>>().map_err(e)?;
    let rep = verify_l2(&cases, &L2Options::default()).map_err(e)?;
    let so = SpectralOptions::default();
    let k = structure(4.0);
    let mut cotlar = Vec::new();
    for (name, a) in [("one", sym("one", &[])), ("adapted", adapted_symbol(0.0))] {
        let g = family("s10", &[]).map_err(e)?.metric;
        let disc = Discretization::new(1, 1.5, 16).map_err(e)?;
        let o = PartitionOptions {
            step: 0.5,
            ..Default::default()
        };
        let grid = build_partition(&g, 0.5, &Domain::phase_box(1, 1.5, disc.nyquist()), &k, &o).map_err(e)?;
        let input = partition_family(a.as_ref(), &grid, &disc).map_err(e)?;
        cotlar.push((name, cotlar_bound(&input, &so).map_err(e)?));
    }
    let ok = rep.spread <= 2.0 && cotlar.iter().all(|(_, c)| c.sum_norm <= c.bound + 1e-8);
    let cd: Vec<String> = cotlar.iter().map(|(n, c)| format!("{n}: |sum| {:.3} <= M {:.3}", c.sum_norm, c.bound)).collect();
    Ok((ok, format!("ratio spread {:.3} over tau in {{0,1,10,100}}; Cotlar {}", rep.spread, cd.join(", "))))
}

fn c9_fp() -> Outcome {
    let d = Discretization::new(1, 6.0, 256).map_err(e)?;
    let op = quantize(sym("fp_test", &[]).as_ref(), &d, &QuantizeOptions::default()).map_err(e)?;
    let l = op.min_eig(&SpectralOptions::default()).map_err(e)?.value;
    let floor = -1.0 / (8.0 * PI * PI) - 1e-3;
    let cases: Vec<SweepCase> = [0.0, 1.0, 10.0, 100.0]
        .iter()
        .map(|&tau| {
            Ok(SweepCase {
                label: format!("tau={tau}"),
                params: BTreeMap::from([("tau".to_string(), tau)]),
                symbol: sym("sigma_tau_fp", &[("tau", tau)]),
                metric: family("sigma_tau", &[("tau", tau)]).map_err(e)?.metric,
                disc: Discretization::new(1, 4.0, 256).map_err(e)?,
                spec: SampleSpec::phase_box(1, 3.2, 4.0 * (1.0 + tau), 128, 64, 3),
            })
        })
        .collect::<Result<_, String>>()?;
    let rep = verify_fp(&cases, &FpOptions::default()).map_err(e)?;
    let lows: Vec<String> = rep.reports.iter().map(|r| format!("{:.2e}", r.measured)).collect();
    Ok((
        l >= floor && rep.pass,
        format!(
            "sin^2 xi^2 min-eig {l:.4e} >= {floor:.4e}; sweep lower bounds [{}], C spread {}",
            lows.join(", "),
            rep.spread
        ),
    ))
}

fn c10_fp_pipeline() -> Outcome {
    let b: FpBudgets = serde_json::from_str(include_str!("../golden/fp_budgets.json")).map_err(e)?;
    let d = reference_decomposition(b.points, b.step, &FpOptions::default()).map_err(e)?;
    Ok((
        d.reassembly_error <= 1e-4 && b.check(&d, 2.0),
        format!(
            "reassembly {:.1e}, remainder ratio {:.3e} (golden {:.3e}), psi#psi {:.4} (golden {:.4}), {} members",
            d.reassembly_error,
            d.remainder_ratio(),
            b.remainder_ratio,
            d.psi_square_norm,
            b.psi_square_norm,
            d.members
        ),
    ))
}

fn c11_lambda_weight() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, g, xi) in [
        ("s10", family("s10", &[]).map_err(e)?.metric, 20.0),
        ("sigma_tau 0", family("sigma_tau", &[("tau", 0.0)]).map_err(e)?.metric, 4.0),
        ("sigma_tau 10", family("sigma_tau", &[("tau", 10.0)]).map_err(e)?.metric, 44.0),
    ] {
        for s in [-1.0, 1.0, 2.0] {
            let spec = SampleSpec::phase_box(1, 2.0, xi, 48, 16, 5);
            let r = verify_lambda_weight(&g, s, &spec, &SlownessOptions::default()).map_err(e)?;
            ok &= r.pass;
            detail.push(format!("{name} s={s}: mu {:.3}<={:.3} nu {}<={}", r.mu, r.mu_cap, r.nu, r.nu_cap));
        }
    }
    Ok((ok, detail.join("; ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Option<Duration>); 11] = [
        (1, "dual metric", c1_dual_metric, Some(Duration::from_secs(5))),
        (2, "quantizer", c2_quantizer, Some(Duration::from_secs(30))),
        (3, "composition", c3_composition, Some(Duration::from_secs(60))),
        (4, "expansion", c4_expansion, None),
        (5, "partition", c5_partition, None),
        (6, "integrability", c6_integrability, None),
        (7, "biconfinement", c7_biconfinement, None),
        (8, "L2 uniformity", c8_l2, None),
        (9, "lower bound", c9_fp, Some(Duration::from_secs(300))),
        (10, "FP pipeline", c10_fp_pipeline, None),
        (11, "lambda weights", c11_lambda_weight, None),
    ];
    let mut failed = 0;
    for (id, name, f, limit) in criteria {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(v) => v,
            Err(msg) => (false, format!("error: {msg}")),
        };
        let el = t.elapsed();
        let in_time = limit.map_or(true, |l| el <= l);
        let pass = ok && in_time;
        failed += usize::from(!pass);
        let budget = limit.map(|l| format!(" / {}s", l.as_secs())).unwrap_or_default();
        println!(
            "acceptance {id:>2} {} {name}: {detail} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            el.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
