//! Fourier differentiation on a periodic grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

/// Cached forward/inverse transforms and wavenumbers for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        Self {
            grid,
            forward,
            inverse,
            k: grid.wavenumbers(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// In-place inverse transform, scaled so that `inverse(forward(f)) == f`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// `order`-th derivative of a complex field.
    ///
    /// For odd orders the Nyquist coefficient is zeroed; it has no
    /// well-defined derivative on an even grid.
    pub fn derivative(&self, f: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        let n = buf.len();
        for (j, (z, &k)) in buf.iter_mut().zip(&self.k).enumerate() {
            if order % 2 == 1 && j == n / 2 {
                *z = Complex64::new(0.0, 0.0);
            } else {
                *z *= Complex64::new(0.0, k).powu(order);
            }
        }
        self.inverse(&mut buf);
        buf
    }

    /// `order`-th derivative of a real field.
    pub fn derivative_real(&self, f: &[f64], order: u32) -> Vec<f64> {
        let z: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.derivative(&z, order).into_iter().map(|z| z.re).collect()
    }
}
