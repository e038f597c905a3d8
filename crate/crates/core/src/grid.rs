//! Uniform periodic grids and wavefunctions sampled on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

/// Reduced Planck constant and particle mass, the two constants every
/// field and propagation routine needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    hbar: f64,
    mass: f64,
}

impl Particle {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        Ok(Self {
            hbar: positive("hbar", hbar)?,
            mass: positive("mass", mass)?,
        })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

impl Default for Particle {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

/// `n` uniformly spaced points on the periodic interval `[x_min, x_max)`.
///
/// The point `x_max` is the periodic image of `x_min` and is not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    n: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.x_min, raw.x_max, raw.n)
    }
}

impl GridSpec {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidParameter {
                name: "x_max",
                reason: format!("need finite x_max > x_min, got [{x_min}, {x_max}]"),
            });
        }
        if n < Self::MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("need a power of two >= {}, got {n}", Self::MIN_POINTS),
            });
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Index of the grid point closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.spacing()).round();
        j.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * std::f64::consts::PI / self.length();
        let n = self.n as i64;
        (0..n)
            .map(|j| if j < n / 2 { j } else { j - n })
            .map(|j| j as f64 * dk)
            .collect()
    }

    pub(crate) fn same_as(&self, other: &GridSpec) -> bool {
        let tol = 1e-12 * self.length().abs().max(1.0);
        self.n == other.n
            && (self.x_min - other.x_min).abs() <= tol
            && (self.x_max - other.x_max).abs() <= tol
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}) n={} vs [{}, {}) n={}",
                self.x_min, self.x_max, self.n, other.x_min, other.x_max, other.n
            )))
        }
    }
}

/// A wavefunction sampled on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSample {
    pub grid: GridSpec,
    pub t: f64,
    pub values: Vec<Complex64>,
}

impl WaveSample {
    pub fn new(grid: GridSpec, t: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, t, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: GridSpec, t: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self { grid, t, values }
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    /// True when the discrete norm is within 1e-9 of one.
    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= 1e-9
    }

    pub fn normalize(&mut self) {
        let norm = self.norm_squared().sqrt();
        if norm > 0.0 {
            self.values.iter_mut().for_each(|z| *z /= norm);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest amplitude found at the two outermost points of the grid.
    pub fn boundary_amplitude(&self) -> f64 {
        let first = self.values.first().map_or(0.0, |z| z.norm());
        let last = self.values.last().map_or(0.0, |z| z.norm());
        first.max(last)
    }

    /// Discrete L2 distance to another sample on the same grid.
    pub fn l2_distance(&self, other: &WaveSample) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((sum * self.grid.spacing()).sqrt())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Mean and variance of `|psi|^2` over the grid.
    pub fn position_moments(&self) -> (f64, f64) {
        let rho = self.density();
        let xs = self.grid.points();
        let mass: f64 = rho.iter().sum();
        let mean = rho.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>() / mass;
        let var = rho
            .iter()
            .zip(&xs)
            .map(|(r, x)| r * (x - mean).powi(2))
            .sum::<f64>()
            / mass;
        (mean, var)
    }
}
