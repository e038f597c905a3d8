//! Hydrodynamic fields of a sampled wavefunction.
//!
//! Writing `psi = sqrt(rho) exp(i S / hbar)` turns the Schrödinger equation
//! into a continuity equation for `rho` and a Hamilton–Jacobi equation for
//! `S` with the extra quantum potential `Q`. This module extracts `rho`,
//! `S`, the flux `J`, the velocity `v = J / rho` and `Q` on a periodic grid,
//! and evaluates how well a pair of frames satisfies both equations.
//!
//! All spatial derivatives are spectral. Points where the density is below a
//! threshold are flagged in a mask; values there are filled by linear
//! interpolation and must not be trusted.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Particle, WaveSample};
use crate::spectral::Spectral;

/// Threshold on `rho` below which a grid point counts as a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum NodeThreshold {
    /// Fraction of the frame's maximum density.
    Relative(f64),
    Absolute(f64),
}

impl NodeThreshold {
    /// Node mask used for the velocity field.
    pub const VELOCITY: NodeThreshold = NodeThreshold::Relative(1e-12);
    /// Mask used for the quantum potential. Second derivatives divided by
    /// `rho` lose about `1e-16 k_max² max(rho) / rho` to rounding, so `Q` needs
    /// a much higher floor than `v`.
    pub const QUANTUM_POTENTIAL: NodeThreshold = NodeThreshold::Relative(1e-4);

    pub fn resolve(&self, rho: &[f64]) -> f64 {
        match *self {
            NodeThreshold::Relative(f) => f * rho.iter().copied().fold(0.0, f64::max),
            NodeThreshold::Absolute(a) => a,
        }
    }
}

impl Default for NodeThreshold {
    fn default() -> Self {
        Self::VELOCITY
    }
}

/// Which expression of the quantum potential to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QForm {
    /// `-(hbar²/8m) [2 rho''/rho - (rho'/rho)²]`, from the density alone.
    Density,
    /// `-(hbar²/2m) [Re(psi''/psi) + Im(psi'/psi)²]`, from the wavefunction.
    Dynamical,
}

/// Density and phase of a wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct Polar {
    pub rho: Vec<f64>,
    /// `hbar arg(psi)` in `(-π hbar, π hbar]`.
    pub phase: Vec<f64>,
    pub unwrapped: Option<Vec<f64>>,
}

/// Velocity with its node mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub values: Vec<f64>,
    pub node_mask: Vec<bool>,
}

/// All hydrodynamic fields of one wavefunction sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub grid: GridSpec,
    pub t: f64,
    pub particle: Particle,
    pub rho: Vec<f64>,
    pub s_wrapped: Vec<f64>,
    pub s_unwrapped: Vec<f64>,
    pub j: Vec<f64>,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    /// True where `rho` is below the velocity node threshold.
    pub node_mask: Vec<bool>,
    /// True where `rho` is below the quantum-potential threshold.
    pub q_mask: Vec<bool>,
    pub node_threshold: f64,
    pub q_threshold: f64,
}

/// Computes fields for wavefunctions on a fixed grid.
#[derive(Debug, Clone)]
pub struct FieldSolver {
    particle: Particle,
    spectral: Spectral,
    node_threshold: NodeThreshold,
    q_threshold: NodeThreshold,
}

/// Amplitude above which the periodic wrap of the grid is no longer harmless.
pub const BOUNDARY_TOLERANCE: f64 = 1e-14;

impl FieldSolver {
    pub fn new(particle: Particle, grid: GridSpec) -> Self {
        Self {
            particle,
            spectral: Spectral::new(grid),
            node_threshold: NodeThreshold::VELOCITY,
            q_threshold: NodeThreshold::QUANTUM_POTENTIAL,
        }
    }

    pub fn with_node_threshold(mut self, threshold: NodeThreshold) -> Self {
        self.node_threshold = threshold;
        self
    }

    pub fn with_q_threshold(mut self, threshold: NodeThreshold) -> Self {
        self.q_threshold = threshold;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        self.spectral.grid()
    }

    pub fn particle(&self) -> Particle {
        self.particle
    }

    fn check(&self, w: &WaveSample) -> Result<()> {
        self.grid().ensure_same(&w.grid)?;
        if !w.all_finite() {
            return Err(Error::NonFinite(format!("wavefunction at t = {}", w.t)));
        }
        let edge = w.boundary_amplitude();
        if edge > BOUNDARY_TOLERANCE {
            log::warn!(
                "amplitude {edge:e} at the grid boundary (t = {}); periodic derivatives may be contaminated",
                w.t
            );
        }
        Ok(())
    }

    pub fn decompose(&self, w: &WaveSample, unwrap: bool) -> Result<Polar> {
        self.check(w)?;
        Ok(decompose(w, self.particle.hbar(), unwrap))
    }

    /// `J = (hbar/m) Im(psi* psi')`.
    pub fn current_density(&self, w: &WaveSample) -> Result<Vec<f64>> {
        self.check(w)?;
        Ok(self.flux(&w.values))
    }

    fn flux(&self, psi: &[Complex64]) -> Vec<f64> {
        let dpsi = self.spectral.derivative(psi, 1);
        let scale = self.particle.hbar() / self.particle.mass();
        psi.iter()
            .zip(&dpsi)
            .map(|(p, dp)| scale * (p.conj() * dp).im)
            .collect()
    }

    /// `v = J / rho` away from nodes, interpolated across them.
    pub fn velocity(&self, w: &WaveSample) -> Result<Velocity> {
        self.check(w)?;
        let rho = w.density();
        let j = self.flux(&w.values);
        let threshold = self.node_threshold.resolve(&rho);
        let node_mask = mask_below(&rho, threshold)?;
        let mut values: Vec<f64> = j.iter().zip(&rho).map(|(j, r)| j / r).collect();
        fill_masked(&mut values, &node_mask);
        Ok(Velocity { values, node_mask })
    }

    /// Unmasked quantum potential. Values at zero density are not finite.
    pub fn quantum_potential_raw(&self, w: &WaveSample, form: QForm) -> Result<Vec<f64>> {
        self.check(w)?;
        Ok(match form {
            QForm::Density => self.q_density(&w.density()),
            QForm::Dynamical => self.q_dynamical(&w.values),
        })
    }

    /// Quantum potential from a density array alone.
    pub fn quantum_potential_of_density(&self, rho: &[f64]) -> Result<Vec<f64>> {
        if rho.len() != self.grid().len() {
            return Err(Error::GridMismatch(format!(
                "{} density values for {} grid points",
                rho.len(),
                self.grid().len()
            )));
        }
        Ok(self.q_density(rho))
    }

    /// Quantum potential with its mask; masked points are interpolated.
    pub fn quantum_potential(&self, w: &WaveSample, form: QForm) -> Result<(Vec<f64>, Vec<bool>)> {
        let mut q = self.quantum_potential_raw(w, form)?;
        let rho = w.density();
        let mask = mask_below(&rho, self.q_threshold.resolve(&rho))?;
        fill_masked(&mut q, &mask);
        Ok((q, mask))
    }

    fn q_density(&self, rho: &[f64]) -> Vec<f64> {
        let d1 = self.spectral.derivative_real(rho, 1);
        let d2 = self.spectral.derivative_real(rho, 2);
        let pre = -self.particle.hbar().powi(2) / (8.0 * self.particle.mass());
        rho.iter()
            .zip(d1.iter().zip(&d2))
            .map(|(&r, (&r1, &r2))| pre * (2.0 * r2 / r - (r1 / r).powi(2)))
            .collect()
    }

    fn q_dynamical(&self, psi: &[Complex64]) -> Vec<f64> {
        let d1 = self.spectral.derivative(psi, 1);
        let d2 = self.spectral.derivative(psi, 2);
        let pre = -self.particle.hbar().powi(2) / (2.0 * self.particle.mass());
        psi.iter()
            .zip(d1.iter().zip(&d2))
            .map(|(p, (p1, p2))| pre * ((p2 / p).re + (p1 / p).im.powi(2)))
            .collect()
    }

    /// Every field at once. `Q` uses the density form.
    pub fn frame(&self, w: &WaveSample) -> Result<FieldFrame> {
        self.check(w)?;
        let polar = decompose(w, self.particle.hbar(), true);
        let j = self.flux(&w.values);
        let node_threshold = self.node_threshold.resolve(&polar.rho);
        let node_mask = mask_below(&polar.rho, node_threshold)?;
        let mut v: Vec<f64> = j.iter().zip(&polar.rho).map(|(j, r)| j / r).collect();
        fill_masked(&mut v, &node_mask);
        let q_threshold = self.q_threshold.resolve(&polar.rho);
        let q_mask = mask_below(&polar.rho, q_threshold)?;
        let mut q = self.q_density(&polar.rho);
        fill_masked(&mut q, &q_mask);
        Ok(FieldFrame {
            grid: w.grid,
            t: w.t,
            particle: self.particle,
            s_unwrapped: polar.unwrapped.expect("requested"),
            rho: polar.rho,
            s_wrapped: polar.phase,
            j,
            v,
            q,
            node_mask,
            q_mask,
            node_threshold,
            q_threshold,
        })
    }
}

/// Density and `hbar arg(psi)`, optionally unwrapped along the grid.
///
/// The unwrapped phase is anchored at the grid point nearest `x = 0`.
pub fn decompose(w: &WaveSample, hbar: f64, unwrap: bool) -> Polar {
    let rho = w.density();
    let phase: Vec<f64> = w.values.iter().map(|z| hbar * principal_arg(*z)).collect();
    let unwrapped = unwrap.then(|| {
        let anchor = w.grid.nearest_index(0.0);
        unwrap_phase(&phase, anchor, hbar)
    });
    Polar {
        rho,
        phase,
        unwrapped,
    }
}

/// `arg` mapped to `(-π, π]`.
fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Wraps an action difference into `(-π hbar, π hbar]`.
pub fn wrap_action(ds: f64, hbar: f64) -> f64 {
    let period = 2.0 * PI * hbar;
    let mut r = ds - period * (ds / period).round();
    if r <= -PI * hbar {
        r += period;
    } else if r > PI * hbar {
        r -= period;
    }
    r
}

fn unwrap_phase(phase: &[f64], anchor: usize, hbar: f64) -> Vec<f64> {
    let mut out = vec![0.0; phase.len()];
    out[anchor] = phase[anchor];
    for j in anchor + 1..phase.len() {
        out[j] = out[j - 1] + wrap_action(phase[j] - phase[j - 1], hbar);
    }
    for j in (0..anchor).rev() {
        out[j] = out[j + 1] + wrap_action(phase[j] - phase[j + 1], hbar);
    }
    out
}

fn mask_below(rho: &[f64], threshold: f64) -> Result<Vec<bool>> {
    let mask: Vec<bool> = rho.iter().map(|&r| !(r >= threshold && r > 0.0)).collect();
    if mask.iter().all(|&m| m) {
        return Err(Error::AllMasked { threshold });
    }
    Ok(mask)
}

/// Replaces masked entries by linear interpolation between the nearest
/// unmasked neighbours, or by the nearest unmasked value past either end.
pub(crate) fn fill_masked(values: &mut [f64], mask: &[bool]) {
    let known: Vec<usize> = (0..values.len()).filter(|&j| !mask[j]).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return;
    };
    for j in 0..first {
        values[j] = values[first];
    }
    for j in last + 1..values.len() {
        values[j] = values[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a + 1 {
            let (va, vb) = (values[a], values[b]);
            for j in a + 1..b {
                let w = (j - a) as f64 / (b - a) as f64;
                values[j] = va + w * (vb - va);
            }
        }
    }
}

/// Pointwise residual of a field equation between two frames.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    /// Midpoint of the frame pair.
    pub t: f64,
    pub delta: f64,
    pub values: Vec<f64>,
    /// Points excluded from `max_norm`.
    pub mask: Vec<bool>,
    pub max_norm: f64,
}

fn frame_pair(a: &FieldFrame, b: &FieldFrame) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    if a.particle != b.particle {
        return Err(Error::GridMismatch("frames carry different hbar or mass".into()));
    }
    let delta = b.t - a.t;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidTime {
            t: b.t,
            reason: "the second frame must be strictly later than the first",
        });
    }
    Ok(delta)
}

fn finish(t: f64, delta: f64, values: Vec<f64>, mask: Vec<bool>) -> Residual {
    let max_norm = values
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| !m)
        .map(|(r, _)| r.abs())
        .fold(0.0, f64::max);
    Residual {
        t,
        delta,
        values,
        mask,
        max_norm,
    }
}

/// `∂rho/∂t + ∂J/∂x` at the midpoint of two frames.
pub fn continuity_residual(a: &FieldFrame, b: &FieldFrame) -> Result<Residual> {
    let delta = frame_pair(a, b)?;
    let spectral = Spectral::new(a.grid);
    let j_mid: Vec<f64> = a.j.iter().zip(&b.j).map(|(x, y)| 0.5 * (x + y)).collect();
    let div = spectral.derivative_real(&j_mid, 1);
    let values = a
        .rho
        .iter()
        .zip(&b.rho)
        .zip(&div)
        .map(|((ra, rb), dj)| (rb - ra) / delta + dj)
        .collect();
    Ok(finish(a.t + 0.5 * delta, delta, values, vec![false; a.grid.len()]))
}

/// `∂S/∂t + (∂S/∂x)²/2m + V + Q` at the midpoint of two frames.
///
/// The time derivative uses the wrapped phase difference, so neither frame
/// needs a globally consistent unwrapping.
pub fn hj_residual(a: &FieldFrame, b: &FieldFrame, potential: &[f64]) -> Result<Residual> {
    let delta = frame_pair(a, b)?;
    if potential.len() != a.grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} potential values for {} grid points",
            potential.len(),
            a.grid.len()
        )));
    }
    let hbar = a.particle.hbar();
    let m = a.particle.mass();
    let n = a.grid.len();
    let mut values = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for j in 0..n {
        let ds_dt = wrap_action(b.s_wrapped[j] - a.s_wrapped[j], hbar) / delta;
        let kinetic = 0.5 * m * 0.5 * (a.v[j].powi(2) + b.v[j].powi(2));
        let q = 0.5 * (a.q[j] + b.q[j]);
        values.push(ds_dt + kinetic + potential[j] + q);
        mask.push(a.node_mask[j] || b.node_mask[j] || a.q_mask[j] || b.q_mask[j]);
    }
    Ok(finish(a.t + 0.5 * delta, delta, values, mask))
}
