//! Bohmian trajectories: integrating `dx/dt = v(x, t)` through a velocity
//! field computed beforehand, either from the closed-form model or from
//! stored propagator frames.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::TwoSlitParams;
use crate::cdf::NumericCdf;
use crate::error::{Error, Result};
use crate::fields::FieldFrame;
use crate::grid::GridSpec;
use crate::propagator::step_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    /// Position `k` is the `(k + 1/2) / count` quantile of the density.
    #[default]
    Quantile,
    /// Inverse-CDF of seeded uniform draws, sorted.
    SeededRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub count: usize,
    pub mode: SamplerMode,
    #[serde(default)]
    pub seed: u64,
}

impl SamplerSpec {
    pub fn quantile(count: usize) -> Self {
        Self {
            count,
            mode: SamplerMode::Quantile,
            seed: 0,
        }
    }

    pub fn seeded(count: usize, seed: u64) -> Self {
        Self {
            count,
            mode: SamplerMode::SeededRandom,
            seed,
        }
    }
}

/// Draws initial positions from `rho0` restricted to `support`.
pub fn sample_initial<F: Fn(f64) -> f64>(
    rho0: F,
    spec: &SamplerSpec,
    support: (f64, f64),
) -> Result<Vec<f64>> {
    if spec.count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "must be >= 1".into(),
        });
    }
    let cdf = NumericCdf::new(rho0, support.0, support.1)?;
    let n = spec.count;
    let mut xs: Vec<f64> = match spec.mode {
        SamplerMode::Quantile => (0..n)
            .map(|k| cdf.quantile_tails((k as f64 + 0.5) / n as f64, ((n - k) as f64 - 0.5) / n as f64))
            .collect(),
        SamplerMode::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..n).map(|_| cdf.quantile(rng.random::<f64>())).collect()
        }
    };
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// A velocity query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: f64,
    /// The value came from a node region or outside the data and should not
    /// be trusted.
    pub masked: bool,
}

/// Anything trajectories can be integrated through.
pub trait VelocityField: Sync {
    fn velocity(&self, x: f64, t: f64) -> FieldValue;

    /// Largest displacement a single step may make before it is retried
    /// with half the step.
    fn length_scale(&self, t: f64) -> f64;
}

impl VelocityField for TwoSlitParams {
    fn velocity(&self, x: f64, t: f64) -> FieldValue {
        let value = TwoSlitParams::velocity(self, x, t);
        FieldValue {
            value,
            masked: !value.is_finite(),
        }
    }

    fn length_scale(&self, t: f64) -> f64 {
        let width = self.sigma_abs(t);
        let fringe = self.fringe_spacing(t).unwrap_or(width);
        fringe.min(width).max(0.1 * self.sigma0())
    }
}

/// Velocity interpolated from stored frames: cubic in `x`, linear in `t`.
#[derive(Clone)]
pub struct FrameVelocity {
    grid: GridSpec,
    times: Vec<f64>,
    v: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
    scale: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for FrameVelocity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameVelocity")
            .field("grid", &self.grid)
            .field("frames", &self.times.len())
            .finish()
    }
}

impl FrameVelocity {
    /// Frames must share a grid and be strictly increasing in time.
    pub fn new(frames: &[FieldFrame]) -> Result<Self> {
        Self::from_frames(frames.iter().cloned())
    }

    /// Like [`FrameVelocity::new`], keeping only the velocity and node mask
    /// of each frame as it arrives.
    pub fn from_frames(frames: impl IntoIterator<Item = FieldFrame>) -> Result<Self> {
        let mut frames = frames.into_iter();
        let first = frames.next().ok_or(Error::InvalidParameter {
            name: "frames",
            reason: "need at least one frame".into(),
        })?;
        let grid = first.grid;
        let spacing = grid.spacing();
        let mut field = Self {
            grid,
            times: vec![first.t],
            v: vec![first.v],
            mask: vec![first.node_mask],
            scale: Arc::new(move |_| 16.0 * spacing),
        };
        for frame in frames {
            field.push(frame)?;
        }
        Ok(field)
    }

    /// Appends a frame later than every stored one.
    pub fn push(&mut self, frame: FieldFrame) -> Result<()> {
        self.grid.ensure_same(&frame.grid)?;
        if !(frame.t > *self.times.last().expect("at least one frame")) {
            return Err(Error::InvalidTime {
                t: frame.t,
                reason: "frames must be strictly increasing in time",
            });
        }
        self.times.push(frame.t);
        self.v.push(frame.v);
        self.mask.push(frame.node_mask);
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.times.len()
    }

    pub fn with_length_scale(mut self, scale: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.scale = Arc::new(scale);
        self
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    fn spatial(&self, frame: usize, x: f64) -> (f64, bool) {
        let n = self.grid.len() as i64;
        let u = (x - self.grid.x_min()) / self.grid.spacing();
        let base = u.floor();
        let s = u - base;
        let base = base as i64;
        let idx = |o: i64| (base + o).rem_euclid(n) as usize;
        let (i0, i1, i2, i3) = (idx(-1), idx(0), idx(1), idx(2));
        let vals = &self.v[frame];
        let mask = &self.mask[frame];
        // Lagrange weights on nodes -1, 0, 1, 2
        let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
        let value = w0 * vals[i0] + w1 * vals[i1] + w2 * vals[i2] + w3 * vals[i3];
        let outside = x < self.grid.x_min() || x >= self.grid.x_max();
        let masked = outside || mask[i0] || mask[i1] || mask[i2] || mask[i3];
        (value, masked)
    }
}

impl VelocityField for FrameVelocity {
    fn velocity(&self, x: f64, t: f64) -> FieldValue {
        let (t0, t1) = self.time_range();
        let slack = 1e-12 * (t1 - t0).abs().max(1.0);
        let out_of_range = t < t0 - slack || t > t1 + slack;
        let tc = t.clamp(t0, t1);
        let hi = self.times.partition_point(|&s| s < tc).clamp(1, self.times.len().max(2) - 1);
        if self.times.len() == 1 {
            let (value, masked) = self.spatial(0, x);
            return FieldValue {
                value,
                masked: masked || out_of_range,
            };
        }
        let lo = hi - 1;
        let w = (tc - self.times[lo]) / (self.times[hi] - self.times[lo]);
        let (va, ma) = self.spatial(lo, x);
        let (vb, mb) = self.spatial(hi, x);
        FieldValue {
            value: (1.0 - w) * va + w * vb,
            masked: ma || mb || out_of_range,
        }
    }

    fn length_scale(&self, t: f64) -> f64 {
        (self.scale)(t)
    }
}

/// Step-control settings shared by every trajectory of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub dt: f64,
    /// Steps are halved at most until `dt / min_step_divisor`.
    pub min_step_divisor: u32,
}

impl IntegrationSettings {
    pub fn new(dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be finite and > 0, got {dt}"),
            });
        }
        Ok(Self {
            dt,
            min_step_divisor: 64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_condition: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// True when the interval ending at this time needed step refinement or
    /// accepted a masked velocity.
    pub flags: Vec<bool>,
}

impl Trajectory {
    pub fn final_position(&self) -> f64 {
        *self.positions.last().expect("trajectories hold at least the start")
    }

    pub fn any_flagged(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }
}

/// A trajectory that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub initial_condition: f64,
    pub t: f64,
    pub reason: String,
}

fn rk4(field: &impl VelocityField, x: f64, t: f64, h: f64) -> (f64, bool) {
    let k1 = field.velocity(x, t);
    let k2 = field.velocity(x + 0.5 * h * k1.value, t + 0.5 * h);
    let k3 = field.velocity(x + 0.5 * h * k2.value, t + 0.5 * h);
    let k4 = field.velocity(x + h * k3.value, t + h);
    let masked = k1.masked || k2.masked || k3.masked || k4.masked;
    let dx = h / 6.0 * (k1.value + 2.0 * k2.value + 2.0 * k3.value + k4.value);
    (dx, masked)
}

/// One step of size `h`, halved recursively down to `min_h` whenever the
/// displacement exceeds the field's length scale or a query is masked.
fn advance(
    field: &impl VelocityField,
    x: f64,
    t: f64,
    h: f64,
    min_h: f64,
) -> std::result::Result<(f64, bool), String> {
    let (dx, masked) = rk4(field, x, t, h);
    let too_far = !(dx.abs() <= field.length_scale(t));
    if dx.is_finite() && !masked && !too_far {
        return Ok((x + dx, false));
    }
    if 0.5 * h.abs() >= min_h * (1.0 - 1e-12) {
        let half = 0.5 * h;
        let (xm, _) = advance(field, x, t, half, min_h)?;
        let (xe, _) = advance(field, xm, t + half, half, min_h)?;
        return Ok((xe, true));
    }
    if dx.is_finite() {
        Ok((x + dx, true))
    } else {
        Err(format!("non-finite velocity near x = {x} after refining to h = {h:e}"))
    }
}

fn integrate_between(
    field: &impl VelocityField,
    x: f64,
    ta: f64,
    tb: f64,
    settings: &IntegrationSettings,
) -> std::result::Result<(f64, bool), String> {
    let steps = step_count(tb - ta, settings.dt);
    if steps == 0 {
        return Ok((x, false));
    }
    let h = (tb - ta) / steps as f64;
    let min_h = h / settings.min_step_divisor as f64;
    let mut x = x;
    let mut flagged = false;
    for k in 0..steps {
        let t = ta + k as f64 * h;
        let (xn, f) = advance(field, x, t, h, min_h)?;
        x = xn;
        flagged |= f;
    }
    Ok((x, flagged))
}

/// Integrates from `t0` to `t1`, storing every step.
pub fn integrate(
    x0: f64,
    field: &impl VelocityField,
    t0: f64,
    t1: f64,
    dt: f64,
) -> std::result::Result<Trajectory, AbortRecord> {
    let settings = IntegrationSettings::new(dt).map_err(|e| AbortRecord {
        initial_condition: x0,
        t: t0,
        reason: e.to_string(),
    })?;
    let steps = step_count(t1 - t0, dt);
    let times: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { t1 } else { t0 + k as f64 * (t1 - t0) / steps as f64 })
        .collect();
    integrate_on(x0, field, &times, &settings)
}

/// Integrates through `times` (first entry is the start), storing only
/// there. Steps between stored times are uniform and at most `settings.dt`.
pub fn integrate_on(
    x0: f64,
    field: &impl VelocityField,
    times: &[f64],
    settings: &IntegrationSettings,
) -> std::result::Result<Trajectory, AbortRecord> {
    let mut positions = Vec::with_capacity(times.len());
    let mut flags = Vec::with_capacity(times.len());
    let mut x = x0;
    positions.push(x0);
    flags.push(false);
    for pair in times.windows(2) {
        let (xn, f) = integrate_between(field, x, pair[0], pair[1], settings).map_err(|reason| {
            AbortRecord {
                initial_condition: x0,
                t: pair[0],
                reason,
            }
        })?;
        x = xn;
        positions.push(x);
        flags.push(f);
    }
    Ok(Trajectory {
        initial_condition: x0,
        times: times.to_vec(),
        positions,
        flags,
    })
}

/// Where the velocity field of an ensemble came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Analytic {
        params: TwoSlitParams,
    },
    Frames {
        grid: GridSpec,
        frame_count: usize,
        t_first: f64,
        t_last: f64,
        note: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub times: Vec<f64>,
    /// Ordered by initial condition.
    pub trajectories: Vec<Trajectory>,
    pub sampler: SamplerSpec,
    pub settings: IntegrationSettings,
    pub provenance: Provenance,
    pub aborted: Vec<AbortRecord>,
}

/// Samples initial conditions from `rho0`, then integrates them through
/// `field` over `times` in parallel.
///
/// Fails only when more than 1% of the trajectories abort.
pub fn run_ensemble<F, R>(
    field: &F,
    rho0: R,
    support: (f64, f64),
    sampler: &SamplerSpec,
    times: &[f64],
    settings: IntegrationSettings,
    provenance: Provenance,
) -> Result<Ensemble>
where
    F: VelocityField,
    R: Fn(f64) -> f64,
{
    if times.is_empty() || times.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidParameter {
            name: "times",
            reason: "need a non-empty, strictly increasing time grid".into(),
        });
    }
    let starts = sample_initial(rho0, sampler, support)?;
    let results: Vec<_> = starts
        .par_iter()
        .map(|&x0| integrate_on(x0, field, times, &settings))
        .collect();
    let total = results.len();
    let mut trajectories = Vec::with_capacity(total);
    let mut aborted = Vec::new();
    for r in results {
        match r {
            Ok(tr) => trajectories.push(tr),
            Err(a) => aborted.push(a),
        }
    }
    if aborted.len() * 100 > total {
        return Err(Error::TooManyAborts {
            aborted: aborted.len(),
            total,
            report: aborted,
        });
    }
    Ok(Ensemble {
        times: times.to_vec(),
        trajectories,
        sampler: *sampler,
        settings,
        provenance,
        aborted,
    })
}

impl Ensemble {
    /// Ensemble through the closed-form velocity field, sampled from the
    /// closed-form density at `times[0]`.
    pub fn analytic(
        params: &TwoSlitParams,
        sampler: &SamplerSpec,
        times: &[f64],
        dt: f64,
    ) -> Result<Self> {
        let t0 = *times.first().ok_or(Error::InvalidParameter {
            name: "times",
            reason: "empty".into(),
        })?;
        run_ensemble(
            params,
            |x| params.rho_closed_form(x, t0),
            params.support(t0),
            sampler,
            times,
            IntegrationSettings::new(dt)?,
            Provenance::Analytic { params: *params },
        )
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or(Error::TimeNotStored(t))
    }

    pub fn positions_at(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.time_index(t)?;
        Ok(self.trajectories.iter().map(|tr| tr.positions[k]).collect())
    }

    /// Number of (time, neighbour pair) instances where the order by initial
    /// condition is broken by more than `tol`.
    pub fn crossing_violations(&self, tol: f64) -> usize {
        (0..self.times.len())
            .map(|k| {
                self.trajectories
                    .windows(2)
                    .filter(|p| p[1].positions[k] < p[0].positions[k] - tol)
                    .count()
            })
            .sum()
    }

    /// Largest `|x_i(t) + x_{n-1-i}(t)|` over all stored times; zero for an
    /// ensemble symmetric under `x -> -x`.
    pub fn mirror_error(&self) -> f64 {
        let n = self.trajectories.len();
        let mut worst = 0.0f64;
        for i in 0..n / 2 + n % 2 {
            let (a, b) = (&self.trajectories[i], &self.trajectories[n - 1 - i]);
            for (xa, xb) in a.positions.iter().zip(&b.positions) {
                worst = worst.max((xa + xb).abs());
            }
        }
        worst
    }

    /// CSV with one row per stored point: `trajectory_id,t,x,flagged`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "trajectory_id,t,x,flagged")?;
        for (id, tr) in self.trajectories.iter().enumerate() {
            for ((t, x), f) in tr.times.iter().zip(&tr.positions).zip(&tr.flags) {
                writeln!(w, "{id},{t:.16e},{x:.16e},{}", u8::from(*f))?;
            }
        }
        Ok(())
    }

    /// JSON sidecar describing how the ensemble was produced.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "count": self.trajectories.len(),
            "sampler": self.sampler,
            "settings": self.settings,
            "provenance": self.provenance,
            "times": self.times,
            "initial_conditions": self
                .trajectories
                .iter()
                .map(|t| t.initial_condition)
                .collect::<Vec<_>>(),
            "flagged_trajectories": self.trajectories.iter().filter(|t| t.any_flagged()).count(),
            "aborted": self.aborted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);
    impl VelocityField for Constant {
        fn velocity(&self, _x: f64, _t: f64) -> FieldValue {
            FieldValue {
                value: self.0,
                masked: false,
            }
        }
        fn length_scale(&self, _t: f64) -> f64 {
            f64::INFINITY
        }
    }

    struct Spike;
    impl VelocityField for Spike {
        fn velocity(&self, x: f64, _t: f64) -> FieldValue {
            FieldValue {
                value: if x > 1.0 { f64::NAN } else { 1.0 },
                masked: x > 1.0,
            }
        }
        fn length_scale(&self, _t: f64) -> f64 {
            1.0
        }
    }

    #[test]
    fn single_quantile_is_median() {
        let p = TwoSlitParams::default();
        let xs = sample_initial(|x| p.rho_closed_form(x, 0.0), &SamplerSpec::quantile(1), p.support(0.0)).unwrap();
        assert_eq!(xs.len(), 1);
        assert!(xs[0].abs() < 1e-10, "{xs:?}");
    }

    #[test]
    fn two_quantiles_sit_in_each_packet() {
        let p = TwoSlitParams::default();
        let xs = sample_initial(|x| p.rho_closed_form(x, 0.0), &SamplerSpec::quantile(2), p.support(0.0)).unwrap();
        assert!((xs[0] + 5.0).abs() < 0.05, "{xs:?}");
        assert!((xs[1] - 5.0).abs() < 0.05, "{xs:?}");
    }

    #[test]
    fn quantiles_strictly_increase() {
        let p = TwoSlitParams::default();
        let xs = sample_initial(|x| p.rho_closed_form(x, 0.0), &SamplerSpec::quantile(500), p.support(0.0)).unwrap();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let p = TwoSlitParams::default();
        let rho = |x| p.rho_closed_form(x, 0.0);
        let a = sample_initial(rho, &SamplerSpec::seeded(50, 7), p.support(0.0)).unwrap();
        let b = sample_initial(rho, &SamplerSpec::seeded(50, 7), p.support(0.0)).unwrap();
        let c = sample_initial(rho, &SamplerSpec::seeded(50, 8), p.support(0.0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_count_and_zero_mass_rejected() {
        assert!(sample_initial(|_| 1.0, &SamplerSpec::quantile(0), (0.0, 1.0)).is_err());
        assert!(sample_initial(|_| 0.0, &SamplerSpec::quantile(3), (0.0, 1.0)).is_err());
    }

    #[test]
    fn constant_field_moves_linearly() {
        let tr = integrate(1.0, &Constant(2.0), 0.0, 3.0, 0.1).unwrap();
        assert_eq!(tr.times.len(), 31);
        assert!((tr.final_position() - 7.0).abs() < 1e-12);
        assert!(!tr.any_flagged());
    }

    #[test]
    fn masked_region_aborts_only_when_non_finite() {
        let err = integrate(0.0, &Spike, 0.0, 5.0, 0.1).unwrap_err();
        assert!(err.reason.contains("non-finite"));
        assert_eq!(err.initial_condition, 0.0);
    }

    #[test]
    fn origin_trajectory_stays_put() {
        let p = TwoSlitParams::default();
        let tr = integrate(0.0, &p, 0.0, 10.0, 1e-2).unwrap();
        assert!(tr.positions.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn single_gaussian_trajectory_scales_with_width() {
        let p = TwoSlitParams::default().single_packet();
        let tr = integrate(0.25, &p, 0.0, p.tau(), 1e-3).unwrap();
        let exact = 0.25 * p.sigma_abs(p.tau()) / p.sigma0();
        assert!((tr.final_position() - exact).abs() < 1e-10);
        assert!((exact - 0.353_553_390_593_273_8).abs() < 1e-15);
    }

    #[test]
    fn csv_rows() {
        let p = TwoSlitParams::default();
        let e = Ensemble::analytic(&p, &SamplerSpec::quantile(3), &[0.0, 1.0], 1e-2).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        assert!(text.starts_with("trajectory_id,t,x,flagged\n"));
        assert_eq!(e.sidecar()["provenance"]["source"], "analytic");
    }

    #[test]
    fn missing_time_rejected() {
        let p = TwoSlitParams::default();
        let e = Ensemble::analytic(&p, &SamplerSpec::quantile(3), &[0.0, 1.0], 1e-2).unwrap();
        assert!(matches!(e.positions_at(0.5), Err(Error::TimeNotStored(_))));
    }
}
