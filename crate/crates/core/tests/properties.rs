use std::f64::consts::PI;

use bohmflow::cdf::NumericCdf;
use bohmflow::fields::QForm;
use bohmflow::{
    equivariance_test, ks_statistic, sample_initial, Ensemble, FieldSolver, GridSpec, Particle,
    PropagatorSpec, PsiForm, SamplerSpec, SplitOperator, TwoSlitParams, WaveSample,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = TwoSlitParams> {
    (0.5..2.0f64, 0.5..2.0f64, 0.3..1.0f64, 4.0..12.0f64)
        .prop_map(|(h, m, s, d)| TwoSlitParams::new(h, m, s, d).unwrap())
}

fn packet(g: GridSpec, centre: f64, width: f64, k: f64) -> WaveSample {
    WaveSample::from_fn(g, 0.0, |x| {
        Complex64::new(-(x - centre).powi(2) / (4.0 * width * width), k * x).exp()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn widths_are_consistent(p in params(), t in 0.0..20.0f64) {
        let tau = p.tau();
        prop_assert!(tau.is_finite() && tau > 0.0);
        prop_assert!((tau - 2.0 * p.mass() * p.sigma0().powi(2) / p.hbar()).abs() <= 1e-15 * tau);
        let w = p.sigma_complex(t);
        prop_assert_eq!(w.re, p.sigma0());
        prop_assert!((w.magnitude() - p.sigma_abs(t)).abs() <= 1e-14 * p.sigma_abs(t));
        prop_assert!(p.sigma_abs(t) >= p.sigma0());
    }

    #[test]
    fn closed_form_density_is_modulus_squared(p in params(), t in 0.0..20.0f64, u in -1.0..1.0f64) {
        let (a, b) = p.support(t);
        let x = 0.5 * (a + b) + 0.5 * u * (b - a);
        let direct = p.psi(x, t).norm_sqr();
        prop_assume!(direct > 1e-250);
        prop_assert!((p.rho_closed_form(x, t) / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wavefunction_is_even(p in params(), t in 0.0..20.0f64, x in 0.0..40.0f64) {
        prop_assert_eq!(p.psi(x, t), p.psi(-x, t));
        prop_assert_eq!(p.rho_closed_form(x, t), p.rho_closed_form(-x, t));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn frame_fields_are_consistent(t in 0.0..10.0f64, sigma0 in 0.4..1.0f64, d in 4.0..12.0f64) {
        let p = TwoSlitParams::new(1.0, 1.0, sigma0, d).unwrap();
        let g = GridSpec::new(-128.0, 128.0, 4096).unwrap();
        let w = p.sample(g, t, PsiForm::Normalized);
        let f = FieldSolver::new(p.particle(), g).frame(&w).unwrap();
        for (j, z) in w.values.iter().enumerate() {
            prop_assert!((f.rho[j] - z.norm_sqr()).abs() <= 1e-14 * z.norm_sqr().max(1.0));
            prop_assert!(f.s_wrapped[j] > -PI && f.s_wrapped[j] <= PI);
            if !f.node_mask[j] {
                prop_assert!((f.v[j] * f.rho[j] - f.j[j]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn global_phase_leaves_fields_unchanged(t in 0.0..10.0f64, phase in -PI..PI) {
        let p = TwoSlitParams::default();
        let g = GridSpec::new(-128.0, 128.0, 4096).unwrap();
        let solver = FieldSolver::new(p.particle(), g);
        let w = p.sample(g, t, PsiForm::Normalized);
        let factor = Complex64::from_polar(1.0, phase);
        let shifted = WaveSample::new(g, t, w.values.iter().map(|z| z * factor).collect()).unwrap();
        let (a, b) = (solver.frame(&w).unwrap(), solver.frame(&shifted).unwrap());
        let peak = a.rho.iter().copied().fold(0.0, f64::max);
        for j in 0..g.len() {
            prop_assert!((a.rho[j] - b.rho[j]).abs() <= 1e-12 * peak);
            prop_assert!((a.j[j] - b.j[j]).abs() <= 1e-12);
            if !a.q_mask[j] {
                prop_assert!((a.v[j] - b.v[j]).abs() <= 1e-12);
                prop_assert!((a.q[j] - b.q[j]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn quantum_potential_scales_with_hbar(hbar in 0.1..5.0f64, width in 0.5..2.0f64, k in -2.0..2.0f64) {
        let g = GridSpec::new(-32.0, 32.0, 1024).unwrap();
        let rho = packet(g, 1.0, width, k).density();
        let q = |h: f64| FieldSolver::new(Particle::new(h, 1.3).unwrap(), g).quantum_potential_of_density(&rho).unwrap();
        let (q1, q2) = (q(hbar), q(2.0 * hbar));
        for (a, b) in q1.iter().zip(&q2) {
            if a.is_finite() {
                prop_assert_eq!(*b, 4.0 * a);
            }
        }
    }

    #[test]
    fn quantum_potential_forms_agree(width in 0.5..2.0f64, k in -2.0..2.0f64, centre in -5.0..5.0f64) {
        let g = GridSpec::new(-32.0, 32.0, 1024).unwrap();
        let solver = FieldSolver::new(Particle::default(), g);
        let w = packet(g, centre, width, k);
        let (qd, mask) = solver.quantum_potential(&w, QForm::Density).unwrap();
        let (qy, _) = solver.quantum_potential(&w, QForm::Dynamical).unwrap();
        for j in (0..g.len()).filter(|&j| !mask[j]) {
            prop_assert!((qd[j] - qy[j]).abs() < 1e-8, "{} {} {}", g.x(j), qd[j], qy[j]);
        }
    }

    #[test]
    fn propagation_conserves_norm_and_reverses(
        width in 0.5..2.0f64,
        k in -3.0..3.0f64,
        dt in 1e-3..2e-2f64,
        omega in 0.0..2.0f64,
    ) {
        let g = GridSpec::new(-32.0, 32.0, 512).unwrap();
        let spec = PropagatorSpec::with_potential_fn(g, Particle::default(), dt, |x| 0.5 * omega * omega * x * x).unwrap();
        let prop = SplitOperator::new(spec);
        let w0 = packet(g, 0.5, width, k);
        let mut w = w0.clone();
        for _ in 0..200 {
            w = prop.step(&w).unwrap();
        }
        prop_assert!((w.norm_squared() - w0.norm_squared()).abs() < 1e-9 * w0.norm_squared());
        for _ in 0..200 {
            w = prop.step_by(&w, -dt).unwrap();
        }
        prop_assert!(w.l2_distance(&w0).unwrap() < 1e-8);
    }

    #[test]
    fn quantile_samples_invert_the_initial_cdf(p in params(), n in 1usize..300) {
        let xs = sample_initial(|x| p.rho_closed_form(x, 0.0), &SamplerSpec::quantile(n), p.support(0.0)).unwrap();
        let (a, b) = p.support(0.0);
        let cdf = NumericCdf::new(|x| p.rho_closed_form(x, 0.0), a, b).unwrap();
        for (k, x) in xs.iter().enumerate() {
            prop_assert!((cdf.cdf(*x) - (k as f64 + 0.5) / n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn ks_report_is_consistent(xs in prop::collection::vec(-3.0..3.0f64, 1..200), threshold in 0.0..1.0f64) {
        let d = ks_statistic(&xs, |x| ((x + 3.0) / 6.0).clamp(0.0, 1.0));
        prop_assert!((0.0..=1.0).contains(&d));
        let p = TwoSlitParams::default();
        let e = Ensemble::analytic(&p, &SamplerSpec::quantile(xs.len()), &[0.0], 1e-2).unwrap();
        let r = equivariance_test(&e, |x| p.rho_closed_form(x, 0.0), p.support(0.0), 0.0, Some(threshold)).unwrap();
        prop_assert_eq!(r.pass, r.ks_statistic < threshold);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ensembles_keep_order_and_mirror_symmetry(p in params(), n in 2usize..40, t_end in 0.5..6.0f64) {
        let times: Vec<f64> = (0..=10).map(|k| t_end * k as f64 / 10.0).collect();
        let e = Ensemble::analytic(&p, &SamplerSpec::quantile(n), &times, 1e-2).unwrap();
        prop_assert_eq!(e.crossing_violations(1e-10), 0);
        prop_assert!(e.mirror_error() < 1e-8, "{}", e.mirror_error());
    }

    #[test]
    fn trajectory_steps_follow_the_velocity(x0 in -7.0..7.0f64) {
        let p = TwoSlitParams::default();
        let dt = 1e-2;
        let tr = bohmflow::integrate(x0, &p, 0.0, 10.0, dt).unwrap();
        for i in 1..tr.times.len() {
            let step = (tr.positions[i] - tr.positions[i - 1]).abs();
            let h = tr.times[i] - tr.times[i - 1];
            let speed = p.velocity(tr.positions[i - 1], tr.times[i - 1]).abs()
                .max(p.velocity(tr.positions[i], tr.times[i]).abs());
            prop_assert!(tr.flags[i] || step <= 10.0 * speed * h + 1e-12, "t={} step={step}", tr.times[i]);
        }
    }
}
