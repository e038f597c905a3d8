//! Acceptance suite. Every check prints one `PASS` or `FAIL` line; run with
//! `cargo test -p bohmflow --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

use std::f64::consts::PI;

use bohmflow::fields::QForm;
use bohmflow::{
    classify_regime, continuity_residual, equivariance_test, hj_residual, measure_fringe_spacing,
    measure_node_spacing, Ensemble, FieldFrame, FieldSolver, GridSpec, PropagatorSpec, PsiForm,
    Regime, RegimeThresholds, SamplerSpec, SplitOperator, TwoSlitParams,
};

fn verdict(criterion: u32, name: &str, checks: &[(bool, String)]) {
    let pass = checks.iter().all(|(ok, _)| *ok);
    let detail: Vec<&str> = checks.iter().map(|(_, d)| d.as_str()).collect();
    println!(
        "criterion {criterion} ({name}): {}  [{}]",
        if pass { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    assert!(pass, "criterion {criterion} failed: {detail:?}");
}

fn sci(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn wide() -> GridSpec {
    GridSpec::new(-128.0, 128.0, 8192).unwrap()
}

fn frame(p: &TwoSlitParams, t: f64) -> FieldFrame {
    let g = wide();
    FieldSolver::new(p.particle(), g).frame(&p.sample(g, t, PsiForm::Normalized)).unwrap()
}

#[test]
fn criterion_1_fringe_spacing() {
    let p = TwoSlitParams::default();
    let mut checks = Vec::new();
    for (t, tol) in [(10.0, 0.01), (6.0, 0.02), (8.0, 0.02)] {
        let f = frame(&p, t);
        let predicted = p.fringe_spacing(t).unwrap();
        let nodes = measure_node_spacing(&f).unwrap();
        let maxima = measure_fringe_spacing(&f).unwrap();
        let err = nodes / predicted - 1.0;
        checks.push((
            err.abs() < tol,
            format!("t={t}: node gap {nodes:.5} vs {predicted:.5} ({err:+.2e}, tol {tol}), maxima gap {maxima:.5}"),
        ));
    }
    assert!((p.fringe_spacing(10.0).unwrap() - 2.0 * PI).abs() < 1e-14);
    verdict(1, "fringe spacing", &checks);
}

#[test]
fn criterion_2_width_law() {
    let p = TwoSlitParams::default();
    let analytic = p.sigma_abs(p.tau());
    let target = 2f64.sqrt() * p.sigma0();
    let single = p.single_packet();
    let g = GridSpec::new(-32.0, 32.0, 2048).unwrap();
    let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), 1e-3).unwrap());
    let frames = prop.evolve(&single.sample(g, 0.0, PsiForm::Normalized), p.tau(), 500).unwrap();
    let end = frames.last().unwrap();
    let (_, var) = end.position_moments();
    let numeric = var.sqrt();
    verdict(
        2,
        "width law",
        &[
            ((analytic - target).abs() < 1e-12, format!("closed form {:.3e} off", (analytic - target).abs())),
            ((numeric - target).abs() < 1e-8, format!("propagated {:.3e} off", (numeric - target).abs())),
        ],
    );
}

#[test]
fn criterion_3_numeric_vs_analytic() {
    let p = TwoSlitParams::default();
    let g = GridSpec::new(-64.0, 64.0, 4096).unwrap();
    let exact = p.sample(g, 10.0, PsiForm::Normalized);
    let error_at = |dt: f64| {
        let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), dt).unwrap());
        let frames = prop.evolve(&p.sample(g, 0.0, PsiForm::Normalized), 10.0, 100_000).unwrap();
        frames.last().unwrap().l2_distance(&exact).unwrap()
    };
    let errors: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| error_at(dt)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    verdict(
        3,
        "numeric vs analytic",
        &[
            (errors[2] < 1e-6, format!("L2 at dt=1e-3: {:.3e}", errors[2])),
            (
                orders.iter().all(|o| (1.8..=2.2).contains(o)),
                format!("dt order {orders:.3?} from errors {}", sci(&errors)),
            ),
        ],
    );
}

#[test]
fn criterion_4_equivariance() {
    let p = TwoSlitParams::default();
    let ks = |n: usize| {
        let e = Ensemble::analytic(&p, &SamplerSpec::quantile(n), &[0.0, 10.0], 1e-3).unwrap();
        equivariance_test(&e, |x| p.rho_closed_form(x, 10.0), p.support(10.0), 10.0, Some(0.045)).unwrap()
    };
    let main = ks(2000);
    let scaling: Vec<f64> = [250, 1000, 4000].iter().map(|&n| ks(n).ks_statistic).collect();
    verdict(
        4,
        "equivariance",
        &[
            (main.ks_statistic < 0.045, format!("KS at n=2000: {:.3e}", main.ks_statistic)),
            (
                scaling.windows(2).all(|w| w[1] <= 1.1 * w[0]),
                format!("KS over 250/1000/4000: {}", sci(&scaling)),
            ),
        ],
    );
}

#[test]
fn criterion_5_non_crossing() {
    let p = TwoSlitParams::default();
    let times: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
    let e = Ensemble::analytic(&p, &SamplerSpec::quantile(2000), &times, 1e-3).unwrap();
    let violations = e.crossing_violations(1e-10);
    verdict(
        5,
        "non-crossing",
        &[(violations == 0, format!("{violations} violations over {} stored times", times.len()))],
    );
}

#[test]
fn criterion_6_field_equation_residuals() {
    let p = TwoSlitParams::default();
    let zero = vec![0.0; wide().len()];
    let residuals = |delta: f64| {
        let a = frame(&p, 5.0 - 0.5 * delta);
        let b = frame(&p, 5.0 + 0.5 * delta);
        (
            continuity_residual(&a, &b).unwrap().max_norm,
            hj_residual(&a, &b, &zero).unwrap().max_norm,
        )
    };
    let (c1, h1) = residuals(1e-4);
    let (c2, h2) = residuals(5e-5);
    let (oc, oh) = ((c1 / c2).log2(), (h1 / h2).log2());
    verdict(
        6,
        "field-equation residuals",
        &[
            (c1 < 1e-5, format!("continuity {c1:.3e}")),
            (h1 < 1e-4, format!("Hamilton-Jacobi {h1:.3e}")),
            ((1.8..=2.2).contains(&oc), format!("continuity order {oc:.2}")),
            ((1.8..=2.2).contains(&oh), format!("Hamilton-Jacobi order {oh:.2}")),
        ],
    );
}

#[test]
fn criterion_7_quantum_potential() {
    let p = TwoSlitParams::default();
    let g = wide();
    let solver = FieldSolver::new(p.particle(), g);
    let mut checks = Vec::new();
    for t in [0.0, 5.0, 10.0] {
        let w = p.sample(g, t, PsiForm::Normalized);
        let (qd, mask) = solver.quantum_potential(&w, QForm::Density).unwrap();
        let (qy, _) = solver.quantum_potential(&w, QForm::Dynamical).unwrap();
        let worst = (0..g.len()).filter(|&j| !mask[j]).map(|j| (qd[j] - qy[j]).abs()).fold(0.0, f64::max);
        checks.push((worst < 1e-8, format!("t={t}: forms differ by {worst:.2e}")));
    }
    let single = p.single_packet();
    let (q, _) = solver.quantum_potential(&single.sample(g, 0.0, PsiForm::Normalized), QForm::Density).unwrap();
    let centre = q[g.nearest_index(0.0)];
    let expected = p.hbar().powi(2) / (4.0 * p.mass() * p.sigma0().powi(2));
    checks.push(((centre - expected).abs() < 1e-8, format!("single packet Q(0) = {centre:.12}")));
    verdict(7, "quantum potential", &checks);
}

#[test]
fn criterion_8_symmetry() {
    let p = TwoSlitParams::default();
    let g = wide();
    let times: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
    let exact_zero = times.iter().all(|&t| p.velocity(0.0, t) == 0.0);
    let mut grid_v: f64 = 0.0;
    let mut j_odd: f64 = 0.0;
    for &t in &times {
        let f = frame(&p, t);
        let centre = g.nearest_index(0.0);
        if !f.node_mask[centre] {
            grid_v = grid_v.max(f.v[centre].abs());
        }
        // x_j and x_{n-j} are mirror images on this grid
        for j in 1..g.len() {
            j_odd = j_odd.max((f.j[j] + f.j[g.len() - j]).abs());
        }
    }
    let e = Ensemble::analytic(&p, &SamplerSpec::quantile(2000), &times, 1e-3).unwrap();
    let mirror = e.mirror_error();
    verdict(
        8,
        "symmetry",
        &[
            (exact_zero, "closed-form v(0, t) = 0".into()),
            (grid_v < 1e-9, format!("grid |v(0, t)| <= {grid_v:.2e}")),
            (mirror < 1e-8, format!("ensemble mirror error {mirror:.2e}")),
            (j_odd < 1e-10, format!("|J(x) + J(-x)| <= {j_odd:.2e}")),
        ],
    );
}

#[test]
fn criterion_9_regime_pins() {
    let p = TwoSlitParams::default();
    let th = RegimeThresholds::default();
    let checks: Vec<(bool, String)> = [
        (1.0, Regime::HuygensEhrenfestFresnel),
        (3.0, Regime::Transition),
        (8.0, Regime::Fraunhofer),
    ]
    .iter()
    .map(|&(t, want)| {
        let r = classify_regime(&p, &frame(&p, t), &th);
        (r.regime == want, format!("t={t}: {:?} (visibility {:.3})", r.regime, r.visibility))
    })
    .collect();
    verdict(9, "regime pins", &checks);
}
