//! Verification of ensembles and frames against the model: equivariance,
//! fringe spacing, regime classification and field-equation residuals.

use serde::{Deserialize, Serialize};

use crate::analytic::TwoSlitParams;
use crate::cdf::NumericCdf;
use crate::error::{Error, Result};
use crate::fields::{continuity_residual, hj_residual, FieldFrame};
use crate::trajectories::{Ensemble, Provenance, SamplerMode};

/// Two-sided Kolmogorov–Smirnov distance between the empirical CDF of
/// `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        let below = f - i as f64 / n;
        let above = (i as f64 + 1.0) / n - f;
        acc.max(below).max(above)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub t: f64,
    pub ks_statistic: f64,
    pub sample_size: usize,
    pub threshold: f64,
    pub pass: bool,
    pub sampler: SamplerMode,
}

/// Default acceptance threshold `2 / sqrt(count)`.
pub fn default_ks_threshold(count: usize) -> f64 {
    2.0 / (count as f64).sqrt()
}

/// Compares the ensemble positions stored at `t` with the density `rho_t`.
pub fn equivariance_test(
    ensemble: &Ensemble,
    rho_t: impl Fn(f64) -> f64,
    support: (f64, f64),
    t: f64,
    threshold: Option<f64>,
) -> Result<EquivarianceReport> {
    let positions = ensemble.positions_at(t)?;
    let cdf = NumericCdf::new(rho_t, support.0, support.1)?;
    let ks = ks_statistic(&positions, |x| cdf.cdf(x));
    let threshold = threshold.unwrap_or_else(|| default_ks_threshold(positions.len()));
    Ok(EquivarianceReport {
        t,
        ks_statistic: ks,
        sample_size: positions.len(),
        threshold,
        pass: ks < threshold,
        sampler: ensemble.sampler.mode,
    })
}

/// Interior local maxima of `rho`, refined by a parabola through each
/// maximum and its two neighbours. Maxima below `floor` are ignored.
pub fn local_maxima(frame: &FieldFrame, floor: f64) -> Vec<f64> {
    let rho = &frame.rho;
    (1..rho.len().saturating_sub(1))
        .filter(|&j| rho[j] > rho[j - 1] && rho[j] >= rho[j + 1] && rho[j] > floor)
        .map(|j| refine(frame, j))
        .collect()
}

/// Interior local minima of `rho` lying between two maxima above `floor`.
pub fn local_minima(frame: &FieldFrame, floor: f64) -> Vec<f64> {
    let rho = &frame.rho;
    let maxima: Vec<usize> = (1..rho.len().saturating_sub(1))
        .filter(|&j| rho[j] > rho[j - 1] && rho[j] >= rho[j + 1] && rho[j] > floor)
        .collect();
    maxima
        .windows(2)
        .map(|w| {
            let j = (w[0]..=w[1])
                .min_by(|&a, &b| rho[a].total_cmp(&rho[b]))
                .expect("non-empty range");
            refine(frame, j)
        })
        .collect()
}

fn refine(frame: &FieldFrame, j: usize) -> f64 {
    let rho = &frame.rho;
    let (a, b, c) = (rho[j - 1], rho[j], rho[j + 1]);
    let curvature = a - 2.0 * b + c;
    let offset = if curvature != 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
    frame.grid.x(j) + offset.clamp(-0.5, 0.5) * frame.grid.spacing()
}

fn centroid(frame: &FieldFrame) -> f64 {
    let mass: f64 = frame.rho.iter().sum();
    frame
        .rho
        .iter()
        .zip(frame.grid.points())
        .map(|(r, x)| r * x)
        .sum::<f64>()
        / mass
}

/// Median gap between adjacent features among the `keep` nearest `centre`.
fn median_gap(mut features: Vec<f64>, centre: f64, keep: usize) -> f64 {
    features.sort_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()));
    features.truncate(keep);
    features.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = features.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    if gaps.len() % 2 == 1 {
        gaps[mid]
    } else {
        0.5 * (gaps[mid - 1] + gaps[mid])
    }
}

/// Median gap between adjacent maxima among the five maxima nearest the
/// density centroid.
pub fn measure_fringe_spacing(frame: &FieldFrame) -> Result<f64> {
    let peak = frame.rho.iter().copied().fold(0.0, f64::max);
    let maxima = local_maxima(frame, 1e-6 * peak);
    if maxima.len() < 3 {
        return Err(Error::NotFringed { found: maxima.len() });
    }
    Ok(median_gap(maxima, centroid(frame), 5))
}

/// Median gap between adjacent density minima among the six minima nearest
/// the centroid, i.e. those bounding the central five fringes.
///
/// The Gaussian envelope pulls maxima towards the centre but leaves the
/// nodes of the cosine term almost in place, so this tracks the fringe
/// period more closely than [`measure_fringe_spacing`] while the envelope
/// is still narrow.
pub fn measure_node_spacing(frame: &FieldFrame) -> Result<f64> {
    let peak = frame.rho.iter().copied().fold(0.0, f64::max);
    let maxima = local_maxima(frame, 1e-6 * peak);
    if maxima.len() < 3 {
        return Err(Error::NotFringed { found: maxima.len() });
    }
    Ok(median_gap(local_minima(frame, 1e-6 * peak), centroid(frame), 6))
}

/// Ordinary least-squares slope of `(t, spacing)` samples.
pub fn fringe_law_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let mean_t = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_s = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let num: f64 = samples.iter().map(|(t, s)| (t - mean_t) * (s - mean_s)).sum();
    let den: f64 = samples.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Packets still evolve independently.
    HuygensEhrenfestFresnel,
    /// Fringes are developing.
    Transition,
    /// Stationary fringe pattern expanding linearly in time.
    Fraunhofer,
}

/// Thresholds on the interference visibility and on fringe stationarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Visibility below this is the early regime.
    pub early_below: f64,
    /// Visibility at or above this may be the far-field regime.
    pub fraunhofer_at_least: f64,
    /// Largest relative mismatch between the measured fringe spacing and
    /// the linear far-field law for the pattern to count as stationary.
    pub stationarity_tolerance: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            early_below: 0.01,
            fraunhofer_at_least: 0.9,
            stationarity_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub t: f64,
    pub regime: Regime,
    pub thresholds: (f64, f64),
    pub stationarity_tolerance: f64,
    /// Interference term at `x = 0` relative to the peak of one packet term.
    pub visibility: f64,
    /// `measured / predicted - 1` for the fringe spacing, when measurable.
    pub fringe_mismatch: Option<f64>,
}

/// Classifies the evolution stage of a two-packet frame.
///
/// The visibility is the interference term at `x = 0`, obtained by
/// subtracting the two packet terms from the frame's density, divided by
/// the peak of a single packet term. The far-field regime additionally
/// requires the measured fringe spacing to follow `(2π hbar / m d) t`.
pub fn classify_regime(
    params: &TwoSlitParams,
    frame: &FieldFrame,
    thresholds: &RegimeThresholds,
) -> RegimeReport {
    let t = frame.t;
    let width = params.sigma_abs(t);
    let norm = params.density_normalization(t, crate::analytic::PsiForm::Normalized);
    let half = 0.5 * params.d();
    let packet_at_origin = norm * (-half * half / (2.0 * width * width)).exp();
    let rho0 = frame.rho[frame.grid.nearest_index(0.0)];
    let visibility = (rho0 - 2.0 * packet_at_origin) / norm;

    let fringe_mismatch = match (measure_fringe_spacing(frame), params.fringe_spacing(t)) {
        (Ok(measured), Ok(predicted)) => Some(measured / predicted - 1.0),
        _ => None,
    };
    let regime = if visibility < thresholds.early_below {
        Regime::HuygensEhrenfestFresnel
    } else if visibility >= thresholds.fraunhofer_at_least
        && fringe_mismatch.is_some_and(|m| m.abs() <= thresholds.stationarity_tolerance)
    {
        Regime::Fraunhofer
    } else {
        Regime::Transition
    };
    RegimeReport {
        t,
        regime,
        thresholds: (thresholds.early_below, thresholds.fraunhofer_at_least),
        stationarity_tolerance: thresholds.stationarity_tolerance,
        visibility,
        fringe_mismatch,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResidual {
    pub t_start: f64,
    pub t_end: f64,
    pub continuity_max: f64,
    pub hamilton_jacobi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub pairs: Vec<PairResidual>,
    pub continuity_max: f64,
    pub hamilton_jacobi_max: f64,
}

/// Max-norm residuals of both field equations for each consecutive pair.
pub fn residual_summary(frames: &[FieldFrame], potential: &[f64]) -> Result<ResidualSummary> {
    if frames.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "frames",
            reason: "need at least two frames".into(),
        });
    }
    let pairs = frames
        .windows(2)
        .map(|p| {
            Ok(PairResidual {
                t_start: p[0].t,
                t_end: p[1].t,
                continuity_max: continuity_residual(&p[0], &p[1])?.max_norm,
                hamilton_jacobi_max: hj_residual(&p[0], &p[1], potential)?.max_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualSummary {
        continuity_max: pairs.iter().map(|p| p.continuity_max).fold(0.0, f64::max),
        hamilton_jacobi_max: pairs.iter().map(|p| p.hamilton_jacobi_max).fold(0.0, f64::max),
        pairs,
    })
}

/// JSON form of a report with the ensemble's provenance attached.
pub fn with_provenance<T: Serialize>(report: &T, provenance: &Provenance) -> serde_json::Value {
    serde_json::json!({ "report": report, "provenance": provenance })
}
