use std::f64::consts::PI;

use bohmflow::propagator::{evolve, read_initial_state, step};
use bohmflow::spectral::Spectral;
use bohmflow::{Error, GridSpec, Particle, PropagatorSpec, PsiForm, SplitOperator, TwoSlitParams, WaveSample};
use num_complex::Complex64;

/// Displaced ground state of `V = m ω² x² / 2`, evolved in closed form.
fn coherent_state(grid: GridSpec, omega: f64, x0: f64, t: f64) -> WaveSample {
    let (hbar, m) = (1.0, 1.0);
    let xc = x0 * (omega * t).cos();
    let pc = -m * omega * x0 * (omega * t).sin();
    let amp = (m * omega / (PI * hbar)).powf(0.25);
    WaveSample::from_fn(grid, t, |x| {
        let phase = -0.5 * omega * t + pc * x / hbar - 0.5 * pc * xc / hbar;
        amp * Complex64::new(-m * omega / (2.0 * hbar) * (x - xc).powi(2), phase).exp()
    })
}

fn trap(grid: GridSpec, omega: f64, dt: f64) -> SplitOperator {
    SplitOperator::new(
        PropagatorSpec::with_potential_fn(grid, Particle::default(), dt, |x| 0.5 * omega * omega * x * x)
            .unwrap(),
    )
}

/// Two-slit closed form summed over periodic images of the grid.
fn periodized(p: &TwoSlitParams, grid: GridSpec, t: f64) -> WaveSample {
    let l = grid.length();
    WaveSample::from_fn(grid, t, |x| (-6..=6).map(|k| p.psi(x + k as f64 * l, t)).sum())
}

#[test]
fn plane_wave_picks_up_its_phase() {
    let g = GridSpec::new(-5.0, 5.0, 128).unwrap();
    let particle = Particle::new(0.9, 1.7).unwrap();
    let k = 2.0 * PI * 4.0 / g.length();
    let dt = 0.013;
    let w = WaveSample::from_fn(g, 0.0, |x| Complex64::from_polar(0.3, k * x));
    let next = step(&w, &PropagatorSpec::free(g, particle, dt).unwrap()).unwrap();
    let factor = Complex64::from_polar(1.0, -particle.hbar() * k * k * dt / (2.0 * particle.mass()));
    for (a, b) in w.values.iter().zip(&next.values) {
        assert!((a * factor - b).norm() < 1e-14);
    }
    assert_eq!(next.t, dt);
}

#[test]
fn single_packet_width_at_tau() {
    let p = TwoSlitParams::default().single_packet();
    let g = GridSpec::new(-32.0, 32.0, 2048).unwrap();
    let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), 1e-3).unwrap());
    let frames = prop.evolve(&p.sample(g, 0.0, PsiForm::Normalized), p.tau(), 100).unwrap();
    let last = frames.last().unwrap();
    assert_eq!(last.t, 0.5);
    let (mean, var) = last.position_moments();
    assert!(mean.abs() < 1e-12);
    assert!((var.sqrt() - 2f64.sqrt() * 0.5).abs() < 1e-8, "{}", var.sqrt());
}

#[test]
fn two_slit_matches_closed_form_on_a_wide_grid() {
    let p = TwoSlitParams::default();
    let g = GridSpec::new(-128.0, 128.0, 8192).unwrap();
    let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), 1e-3).unwrap());
    let frames = prop.evolve(&p.sample(g, 0.0, PsiForm::Normalized), 10.0, 10_000).unwrap();
    let last = frames.last().unwrap();
    let err = last.l2_distance(&p.sample(g, 10.0, PsiForm::Normalized)).unwrap();
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn narrow_grid_matches_the_periodic_images() {
    // on [-64, 64] the t = 10 state wraps; the propagator is exact for the
    // periodized solution
    let p = TwoSlitParams::default();
    let g = GridSpec::new(-64.0, 64.0, 4096).unwrap();
    let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), 1e-3).unwrap());
    let end = prop.step_by(&p.sample(g, 0.0, PsiForm::Normalized), 10.0).unwrap();
    let err = end.l2_distance(&periodized(&p, g, 10.0)).unwrap();
    assert!(err < 1e-12, "{err:e}");
    assert!(end.boundary_amplitude() > 1e-6);
}

#[test]
fn emission_rule_counts_frames() {
    let p = TwoSlitParams::default();
    let g = GridSpec::new(-64.0, 64.0, 4096).unwrap();
    let spec = PropagatorSpec::free(g, p.particle(), 1e-3).unwrap();
    let w0 = p.sample(g, 0.0, PsiForm::Normalized);
    let frames = evolve(&w0, &spec, 10.0, 100).unwrap();
    assert_eq!(frames.len(), 101);
    assert_eq!(frames[0].t, 0.0);
    assert_eq!(frames.last().unwrap().t, 10.0);
    for (k, f) in frames.iter().enumerate() {
        assert!((f.t - 0.1 * k as f64).abs() < 1e-9);
    }
    let drift = frames
        .iter()
        .map(|f| (f.norm_squared() - w0.norm_squared()).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-9, "{drift:e}");
}

#[test]
fn zero_span_returns_the_input() {
    let p = TwoSlitParams::default();
    let g = GridSpec::new(-64.0, 64.0, 1024).unwrap();
    let spec = PropagatorSpec::free(g, p.particle(), 1e-3).unwrap();
    let w0 = p.sample(g, 2.0, PsiForm::Normalized);
    let frames = evolve(&w0, &spec, 2.0, 7).unwrap();
    assert_eq!(frames, vec![w0]);
}

#[test]
fn last_step_lands_on_final_time() {
    let g = GridSpec::new(-16.0, 16.0, 256).unwrap();
    let prop = trap(g, 2.0, 0.03);
    let frames = prop.evolve(&coherent_state(g, 2.0, 1.0, 0.0), 1.0, 5).unwrap();
    // 34 steps: emitted at 0, 5, ..., 30 and the shortened last one
    assert_eq!(frames.len(), 8);
    assert_eq!(frames.last().unwrap().t, 1.0);
    let err = frames.last().unwrap().l2_distance(&coherent_state(g, 2.0, 1.0, 1.0)).unwrap();
    assert!(err < 1e-3);
}

#[test]
fn norm_is_conserved_with_a_potential() {
    let g = GridSpec::new(-16.0, 16.0, 512).unwrap();
    let prop = trap(g, 2.0, 1e-3);
    let w0 = coherent_state(g, 2.0, 0.5, 0.0);
    let mut w = w0.clone();
    for _ in 0..10_000 {
        w = prop.step(&w).unwrap();
    }
    assert!((w.norm_squared() - w0.norm_squared()).abs() < 1e-9);
}

#[test]
fn forward_then_backward_returns_the_start() {
    let g = GridSpec::new(-16.0, 16.0, 512).unwrap();
    let prop = trap(g, 2.0, 1e-3);
    let w0 = coherent_state(g, 2.0, 0.5, 0.0);
    let mut w = w0.clone();
    for _ in 0..1000 {
        w = prop.step_by(&w, 1e-3).unwrap();
    }
    for _ in 0..1000 {
        w = prop.step_by(&w, -1e-3).unwrap();
    }
    assert!(w.l2_distance(&w0).unwrap() < 1e-8);
    assert!(w.t.abs() < 1e-12);
}

#[test]
fn free_evolution_conserves_momentum() {
    let p = TwoSlitParams::default();
    let g = GridSpec::new(-64.0, 64.0, 2048).unwrap();
    // give the state a drift so the first moment is non-trivial
    let w0 = WaveSample::from_fn(g, 0.0, |x| p.psi(x, 0.0) * Complex64::from_polar(1.0, 0.7 * x));
    let spectral = Spectral::new(g);
    let mean_k = |w: &WaveSample| {
        let mut c = w.values.clone();
        spectral.forward(&mut c);
        let total: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        c.iter().zip(spectral.wavenumbers()).map(|(z, k)| z.norm_sqr() * k).sum::<f64>() / total
    };
    let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), 1e-2).unwrap());
    let k0 = mean_k(&w0);
    assert!((k0 - 0.7).abs() < 1e-6);
    let mut w = w0;
    for _ in 0..500 {
        w = prop.step(&w).unwrap();
        assert!((mean_k(&w) - k0).abs() < 1e-12);
    }
}

#[test]
fn strang_splitting_is_second_order() {
    let g = GridSpec::new(-16.0, 16.0, 512).unwrap();
    let exact = coherent_state(g, 2.0, 1.0, 1.0);
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let frames = trap(g, 2.0, dt).evolve(&coherent_state(g, 2.0, 1.0, 0.0), 1.0, 1000).unwrap();
            frames.last().unwrap().l2_distance(&exact).unwrap()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "{errors:?}");
    }
}

#[test]
fn coarse_steps_break_the_trap_accuracy() {
    let g = GridSpec::new(-16.0, 16.0, 512).unwrap();
    let exact = coherent_state(g, 2.0, 0.5, 10.0);
    let run = |dt: f64| {
        let frames = trap(g, 2.0, dt).evolve(&coherent_state(g, 2.0, 0.5, 0.0), 10.0, 100_000).unwrap();
        frames.last().unwrap().l2_distance(&exact).unwrap()
    };
    assert!(run(1e-3) < 1e-5);
    assert!(run(0.5) > 1e-2);
}

#[test]
fn rejects_bad_specs_and_mismatched_grids() {
    let g = GridSpec::new(-1.0, 1.0, 16).unwrap();
    let particle = Particle::default();
    assert!(PropagatorSpec::free(g, particle, 0.0).is_err());
    assert!(PropagatorSpec::free(g, particle, f64::NAN).is_err());
    assert!(PropagatorSpec::new(g, particle, 0.1, vec![0.0; 8]).is_err());
    let mut v = vec![0.0; 16];
    v[3] = f64::INFINITY;
    assert!(PropagatorSpec::new(g, particle, 0.1, v).is_err());
    let other = GridSpec::new(-2.0, 2.0, 16).unwrap();
    let w = WaveSample::from_fn(other, 0.0, |_| Complex64::new(1.0, 0.0));
    let spec = PropagatorSpec::free(g, particle, 0.1).unwrap();
    assert!(matches!(step(&w, &spec), Err(Error::GridMismatch(_))));
    let w = WaveSample::from_fn(g, 0.0, |_| Complex64::new(1.0, 0.0));
    assert!(evolve(&w, &spec, 1.0, 0).is_err());
    assert!(evolve(&w, &spec, -1.0, 1).is_err());
}

#[test]
fn initial_state_from_csv() {
    let g = GridSpec::new(-1.0, 1.0, 16).unwrap();
    let mut text = String::from("# an initial state\nx,re,im\n");
    for x in g.points() {
        text.push_str(&format!("{x},{},{}\n", (-x * x).exp(), 0.5 * x));
    }
    let w = read_initial_state(text.as_bytes(), g, 0.25).unwrap();
    assert_eq!(w.t, 0.25);
    assert_eq!(w.values[3], Complex64::new((-g.x(3) * g.x(3)).exp(), 0.5 * g.x(3)));

    let shifted = text.replace("-1,", "-0.9,");
    assert!(read_initial_state(shifted.as_bytes(), g, 0.0).is_err());
    let short: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    assert!(read_initial_state(short.as_bytes(), g, 0.0).is_err());
    assert!(read_initial_state("x,re,im\n0,a,1\n".as_bytes(), g, 0.0).is_err());
}
