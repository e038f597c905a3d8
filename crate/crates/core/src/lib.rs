//! Quantum hydrodynamics of one-dimensional wave packets.
//!
//! The crate follows a wavefunction-first workflow: obtain `psi(x, t)` from
//! the closed-form two-packet model ([`analytic`]) or from the split-operator
//! integrator ([`propagator`]), derive the hydrodynamic fields from it
//! ([`fields`]), then integrate Bohmian trajectories through the resulting
//! velocity field ([`trajectories`]) and check them against the density
//! ([`analysis`]).
//!
//! ```
//! use bohmflow::{Ensemble, SamplerSpec, TwoSlitParams};
//!
//! let params = TwoSlitParams::default();
//! let ensemble = Ensemble::analytic(&params, &SamplerSpec::quantile(5), &[0.0, 2.0], 1e-2)?;
//! assert_eq!(ensemble.crossing_violations(1e-10), 0);
//! # Ok::<(), bohmflow::Error>(())
//! ```

pub mod analysis;
pub mod analytic;
pub mod cdf;
pub mod error;
pub mod fields;
pub mod grid;
pub mod io;
pub mod propagator;
pub mod spectral;
pub mod trajectories;

pub use analysis::{
    classify_regime, equivariance_test, fringe_law_slope, ks_statistic, measure_fringe_spacing,
    measure_node_spacing, residual_summary, EquivarianceReport, Regime, RegimeReport,
    RegimeThresholds, ResidualSummary,
};
pub use analytic::{ComplexWidth, PsiForm, TwoSlitParams};
pub use error::{Error, Result};
pub use fields::{continuity_residual, hj_residual, FieldFrame, FieldSolver, NodeThreshold, QForm};
pub use grid::{GridSpec, Particle, WaveSample};
pub use propagator::{PropagatorSpec, SplitOperator};
pub use trajectories::{
    integrate, run_ensemble, sample_initial, Ensemble, FrameVelocity, SamplerMode, SamplerSpec,
    Trajectory, VelocityField,
};

// Every chapter of the guide is compiled as a doctest so the book's code
// stays in sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/analytic-model.md")]
    mod analytic_model {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    mod propagation {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
