//! Split-operator integration of `i hbar ∂psi/∂t = -(hbar²/2m) psi'' + V psi`.
//!
//! Each step applies half a potential kick, an exact kinetic drift in
//! wavenumber space, and the second half kick. For `V = 0` the step is exact
//! up to rounding.

use std::io::BufRead;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Particle, WaveSample};
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSpec {
    pub grid: GridSpec,
    pub particle: Particle,
    pub dt: f64,
    pub potential: Vec<f64>,
}

impl PropagatorSpec {
    pub fn new(grid: GridSpec, particle: Particle, dt: f64, potential: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be finite and > 0, got {dt}"),
            });
        }
        if potential.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} potential values for {} grid points",
                potential.len(),
                grid.len()
            )));
        }
        if let Some(bad) = potential.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "potential",
                reason: format!("non-finite value {bad}"),
            });
        }
        Ok(Self {
            grid,
            particle,
            dt,
            potential,
        })
    }

    pub fn free(grid: GridSpec, particle: Particle, dt: f64) -> Result<Self> {
        Self::new(grid, particle, dt, vec![0.0; grid.len()])
    }

    /// Potential sampled from a function of `x`.
    pub fn with_potential_fn(
        grid: GridSpec,
        particle: Particle,
        dt: f64,
        v: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Self::new(grid, particle, dt, grid.points().into_iter().map(v).collect())
    }

    pub fn is_free(&self) -> bool {
        self.potential.iter().all(|&v| v == 0.0)
    }
}

/// A propagator with transforms planned once for its grid.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    spec: PropagatorSpec,
    spectral: Spectral,
}

impl SplitOperator {
    pub fn new(spec: PropagatorSpec) -> Self {
        let spectral = Spectral::new(spec.grid);
        Self { spec, spectral }
    }

    pub fn spec(&self) -> &PropagatorSpec {
        &self.spec
    }

    /// One step of size `spec.dt`.
    pub fn step(&self, w: &WaveSample) -> Result<WaveSample> {
        self.step_by(w, self.spec.dt)
    }

    /// One Strang step of arbitrary (possibly negative) size `h`.
    pub fn step_by(&self, w: &WaveSample, h: f64) -> Result<WaveSample> {
        self.spec.grid.ensure_same(&w.grid)?;
        let mut psi = w.values.clone();
        self.advance_in_place(&mut psi, h);
        Ok(WaveSample {
            grid: w.grid,
            t: w.t + h,
            values: psi,
        })
    }

    fn advance_in_place(&self, psi: &mut [Complex64], h: f64) {
        let hbar = self.spec.particle.hbar();
        let m = self.spec.particle.mass();
        let free = self.spec.is_free();
        if !free {
            self.kick(psi, 0.5 * h);
        }
        self.spectral.forward(psi);
        for (z, &k) in psi.iter_mut().zip(self.spectral.wavenumbers()) {
            *z *= Complex64::from_polar(1.0, -hbar * k * k * h / (2.0 * m));
        }
        self.spectral.inverse(psi);
        if !free {
            self.kick(psi, 0.5 * h);
        }
    }

    fn kick(&self, psi: &mut [Complex64], h: f64) {
        let hbar = self.spec.particle.hbar();
        for (z, &v) in psi.iter_mut().zip(&self.spec.potential) {
            *z *= Complex64::from_polar(1.0, -v * h / hbar);
        }
    }

    /// Steps from `w0.t` to `t_final`, emitting the initial frame, every
    /// `emit_every`-th step and always the final frame.
    ///
    /// The step count is `ceil((t_final - t0) / dt)` with a relative slack of
    /// 1e-9, and the last step is shortened to land exactly on `t_final`.
    pub fn evolve(&self, w0: &WaveSample, t_final: f64, emit_every: usize) -> Result<Vec<WaveSample>> {
        let mut frames = Vec::new();
        self.evolve_each(w0, t_final, emit_every, |w| {
            frames.push(w.clone());
            Ok(())
        })?;
        Ok(frames)
    }

    /// Streaming form of [`SplitOperator::evolve`]: `emit` sees each frame
    /// in turn and may stop the run by returning an error.
    pub fn evolve_each(
        &self,
        w0: &WaveSample,
        t_final: f64,
        emit_every: usize,
        mut emit: impl FnMut(&WaveSample) -> Result<()>,
    ) -> Result<()> {
        self.spec.grid.ensure_same(&w0.grid)?;
        if emit_every == 0 {
            return Err(Error::InvalidParameter {
                name: "emit_every",
                reason: "must be >= 1".into(),
            });
        }
        let span = t_final - w0.t;
        if !(span >= 0.0 && span.is_finite()) {
            return Err(Error::InvalidTime {
                t: t_final,
                reason: "t_final must not precede the initial time",
            });
        }
        let dt = self.spec.dt;
        let steps = step_count(span, dt);
        emit(w0)?;
        let mut w = w0.clone();
        for k in 1..=steps {
            let t_prev = w0.t + (k - 1) as f64 * dt;
            let t_next = if k == steps { t_final } else { w0.t + k as f64 * dt };
            self.advance_in_place(&mut w.values, t_next - t_prev);
            w.t = t_next;
            if k % emit_every == 0 || k == steps {
                emit(&w)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn step_count(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let ratio = span / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Free-function form of [`SplitOperator::step`].
pub fn step(w: &WaveSample, spec: &PropagatorSpec) -> Result<WaveSample> {
    SplitOperator::new(spec.clone()).step(w)
}

/// Free-function form of [`SplitOperator::evolve`].
pub fn evolve(
    w0: &WaveSample,
    spec: &PropagatorSpec,
    t_final: f64,
    emit_every: usize,
) -> Result<Vec<WaveSample>> {
    SplitOperator::new(spec.clone()).evolve(w0, t_final, emit_every)
}

/// Reads an initial state from CSV rows `x, re, im`.
///
/// Lines starting with `#` and a header line whose first field is not a
/// number are skipped. Every `x` must match the grid within 1e-9 of the
/// spacing.
pub fn read_initial_state(reader: impl BufRead, grid: GridSpec, t: f64) -> Result<WaveSample> {
    let mut values = Vec::with_capacity(grid.len());
    let tol = 1e-9 * grid.spacing();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let Ok(x) = fields[0].parse::<f64>() else {
            if values.is_empty() {
                continue;
            }
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected a number, got `{}`", fields[0]),
            });
        };
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected 3 columns, got {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })
        };
        let (re, im) = (parse(fields[1])?, parse(fields[2])?);
        let j = values.len();
        if j >= grid.len() {
            return Err(Error::GridMismatch(format!("more than {} rows", grid.len())));
        }
        if (x - grid.x(j)).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "row {} has x = {x}, grid expects {}",
                line_no,
                grid.x(j)
            )));
        }
        values.push(Complex64::new(re, im));
    }
    WaveSample::new(grid, t, values)
}
