//! Closed-form free evolution of two coherent Gaussian packets.
//!
//! Two packets of width `sigma0` centred at `±d/2`, both at rest at `t = 0`,
//! evolve under the free Schrödinger equation as
//!
//! ```text
//! psi(x, t) ∝ exp(-(x + d/2)² / 4 sigma0 s(t)) + exp(-(x - d/2)² / 4 sigma0 s(t))
//! s(t)      = sigma0 + i (hbar / 2 m sigma0) t
//! ```
//!
//! The complex width `s(t)` carries both the spreading of each packet
//! (`|s(t)|`) and the position-dependent phase that produces fringes once the
//! packets overlap.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::grid::{GridSpec, Particle, WaveSample};

/// Physical constants and geometry of the two-packet model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct TwoSlitParams {
    hbar: f64,
    mass: f64,
    sigma0: f64,
    d: f64,
}

#[derive(Deserialize)]
struct RawParams {
    hbar: f64,
    mass: f64,
    sigma0: f64,
    d: f64,
}

impl TryFrom<RawParams> for TwoSlitParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        TwoSlitParams::new(raw.hbar, raw.mass, raw.sigma0, raw.d)
    }
}

impl Default for TwoSlitParams {
    /// `hbar = 1`, `m = 1`, `sigma0 = 0.5`, `d = 10`.
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            sigma0: 0.5,
            d: 10.0,
        }
    }
}

/// Which prefactor multiplies the bare pair of exponentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiForm {
    /// Unit-norm solution of the free Schrödinger equation. The packet
    /// prefactor `(2π)^{-1/4} s(t)^{-1/2}` is kept, so the global phase is
    /// zero at `t = 0` and then follows the exact time dependence.
    #[default]
    Normalized,
    /// The bare sum of exponentials, no normalization and no global phase.
    Raw,
}

/// Complex packet width `s(t) = sigma0 + i (hbar / 2 m sigma0) t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexWidth {
    pub re: f64,
    pub im: f64,
}

impl ComplexWidth {
    pub fn magnitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl TwoSlitParams {
    /// Validates the parameters. `d = 0` is accepted and collapses the model
    /// to a single packet.
    pub fn new(hbar: f64, mass: f64, sigma0: f64, d: f64) -> Result<Self> {
        let hbar = positive("hbar", hbar)?;
        let mass = positive("mass", mass)?;
        let sigma0 = positive("sigma0", sigma0)?;
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("must be finite and >= 0, got {d}"),
            });
        }
        Ok(Self {
            hbar,
            mass,
            sigma0,
            d,
        })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn particle(&self) -> Particle {
        Particle::new(self.hbar, self.mass).expect("validated at construction")
    }

    /// The same packet with zero separation.
    pub fn single_packet(&self) -> Self {
        Self { d: 0.0, ..*self }
    }

    pub fn with_separation(&self, d: f64) -> Result<Self> {
        Self::new(self.hbar, self.mass, self.sigma0, d)
    }

    /// Characteristic spreading time `2 m sigma0² / hbar`.
    pub fn tau(&self) -> f64 {
        2.0 * self.mass * self.sigma0 * self.sigma0 / self.hbar
    }

    /// Asymptotic widening rate `hbar / 2 m sigma0`.
    pub fn spreading_velocity(&self) -> f64 {
        self.hbar / (2.0 * self.mass * self.sigma0)
    }

    pub fn sigma_complex(&self, t: f64) -> ComplexWidth {
        ComplexWidth {
            re: self.sigma0,
            im: self.spreading_velocity() * t,
        }
    }

    /// Packet width `sigma0 sqrt(1 + (t / tau)²)`.
    pub fn sigma_abs(&self, t: f64) -> f64 {
        self.sigma0 * (t / self.tau()).hypot(1.0)
    }

    /// Overlap of the two initial packets, `exp(-d² / 8 sigma0²)`. Conserved
    /// by the free evolution.
    pub fn overlap(&self) -> f64 {
        (-self.d * self.d / (8.0 * self.sigma0 * self.sigma0)).exp()
    }

    fn exponents(&self, x: f64, t: f64) -> (Complex64, Complex64) {
        let denom = 4.0 * self.sigma0 * self.sigma_complex(t).to_complex();
        let half = 0.5 * self.d;
        let plus = -(x + half) * (x + half) / denom;
        let minus = -(x - half) * (x - half) / denom;
        (plus, minus)
    }

    fn prefactor(&self, t: f64, form: PsiForm) -> Complex64 {
        match form {
            PsiForm::Raw => Complex64::new(1.0, 0.0),
            PsiForm::Normalized => {
                let s = self.sigma_complex(t).to_complex();
                let pair = (2.0 * (1.0 + self.overlap())).sqrt();
                s.powf(-0.5) / ((2.0 * PI).powf(0.25) * pair)
            }
        }
    }

    /// `|prefactor|²`, the density normalization at time `t`.
    pub fn density_normalization(&self, t: f64, form: PsiForm) -> f64 {
        match form {
            PsiForm::Raw => 1.0,
            PsiForm::Normalized => {
                1.0 / ((2.0 * PI).sqrt() * self.sigma_abs(t) * 2.0 * (1.0 + self.overlap()))
            }
        }
    }

    /// Unit-norm wavefunction.
    pub fn psi(&self, x: f64, t: f64) -> Complex64 {
        self.psi_with(x, t, PsiForm::Normalized)
    }

    pub fn psi_with(&self, x: f64, t: f64, form: PsiForm) -> Complex64 {
        let (a, b) = self.exponents(x, t);
        self.prefactor(t, form) * (a.exp() + b.exp())
    }

    /// `∂psi/∂x` of the unit-norm wavefunction.
    pub fn psi_dx(&self, x: f64, t: f64) -> Complex64 {
        let (a, b) = self.exponents(x, t);
        let scale = 2.0 * self.sigma0 * self.sigma_complex(t).to_complex();
        let half = 0.5 * self.d;
        let sum = -(x + half) * a.exp() - (x - half) * b.exp();
        self.prefactor(t, PsiForm::Normalized) * sum / scale
    }

    /// Bohmian velocity `(hbar / m) Im(psi' / psi)`.
    ///
    /// Both exponentials are rescaled by the larger of their real parts, so
    /// the ratio stays finite far into the tails.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let (a, b) = self.exponents(x, t);
        let shift = a.re.max(b.re);
        let ea = (a - shift).exp();
        let eb = (b - shift).exp();
        let half = 0.5 * self.d;
        let scale = 2.0 * self.sigma0 * self.sigma_complex(t).to_complex();
        let ratio = (-(x + half) * ea - (x - half) * eb) / (scale * (ea + eb));
        self.hbar / self.mass * ratio.im
    }

    /// Density from the expanded two-packet form with the interference term
    /// written out explicitly.
    pub fn rho_closed_form(&self, x: f64, t: f64) -> f64 {
        self.rho_closed_form_with(x, t, PsiForm::Normalized)
    }

    pub fn rho_closed_form_with(&self, x: f64, t: f64, form: PsiForm) -> f64 {
        let st = self.sigma_abs(t);
        let wavenumber = self.hbar * t * self.d / (4.0 * self.mass * self.sigma0.powi(2) * st * st);
        self.density_normalization(t, form) * self.interference_profile(x, st, wavenumber)
    }

    fn interference_profile(&self, x: f64, width: f64, wavenumber: f64) -> f64 {
        let half = 0.5 * self.d;
        let two_var = 2.0 * width * width;
        (-(x + half).powi(2) / two_var).exp()
            + (-(x - half).powi(2) / two_var).exp()
            + 2.0 * (-(x * x + half * half) / two_var).exp() * (wavenumber * x).cos()
    }

    /// Far-field density: the width is replaced by `v_s t` and the fringe
    /// argument by `(m d / hbar) x / t`.
    pub fn rho_asymptotic(&self, x: f64, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidTime {
                t,
                reason: "the asymptotic density needs t > 0",
            });
        }
        let width = self.spreading_velocity() * t;
        let wavenumber = self.asymptotic_wavenumber(t);
        let norm = 1.0 / ((2.0 * PI).sqrt() * width * 2.0 * (1.0 + self.overlap()));
        Ok(norm * self.interference_profile(x, width, wavenumber))
    }

    /// Coefficient of `x` in the far-field fringe cosine, `m d / (hbar t)`.
    pub fn asymptotic_wavenumber(&self, t: f64) -> f64 {
        self.mass * self.d / (self.hbar * t)
    }

    /// Distance between adjacent far-field maxima, `(2π hbar / m d) t`.
    pub fn fringe_spacing(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidTime {
                t,
                reason: "fringe spacing needs t > 0",
            });
        }
        if self.d == 0.0 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "a single packet has no fringes".into(),
            });
        }
        Ok(2.0 * PI * self.hbar * t / (self.mass * self.d))
    }

    /// Interval holding all but a negligible fraction of the density at `t`.
    pub fn support(&self, t: f64) -> (f64, f64) {
        let reach = 0.5 * self.d + 12.0 * self.sigma_abs(t);
        (-reach, reach)
    }

    /// Samples the wavefunction on a grid.
    pub fn sample(&self, grid: GridSpec, t: f64, form: PsiForm) -> WaveSample {
        WaveSample::from_fn(grid, t, |x| self.psi_with(x, t, form))
    }
}
