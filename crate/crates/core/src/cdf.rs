//! Cumulative distribution of a density given only as a function of `x`.

use crate::error::{Error, Result};

// 5-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(&u, w)| w * f(mid + half * u))
        .sum::<f64>()
        * half
}

/// CDF of a non-negative density on `[lo, hi]`, accumulated cell by cell.
///
/// Inside a cell the CDF is refined with a Gauss–Legendre integral from the
/// cell's left edge, so `cdf` and `quantile` are consistent to rounding.
/// Masses are accumulated from both ends; the upper half of the
/// distribution is resolved from the right so both tails keep full relative
/// precision and a symmetric density gives mirror-symmetric quantiles.
pub struct NumericCdf<F> {
    density: F,
    lo: f64,
    hi: f64,
    cumulative: Vec<f64>,
    // mass from edge i to `hi`
    complement: Vec<f64>,
    total: f64,
}

impl<F: Fn(f64) -> f64> NumericCdf<F> {
    pub const DEFAULT_CELLS: usize = 1 << 15;

    pub fn new(density: F, lo: f64, hi: f64) -> Result<Self> {
        Self::with_cells(density, lo, hi, Self::DEFAULT_CELLS)
    }

    pub fn with_cells(density: F, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) || cells == 0 {
            return Err(Error::InvalidParameter {
                name: "support",
                reason: format!("need a finite interval with hi > lo, got [{lo}, {hi}]"),
            });
        }
        let mut masses = Vec::with_capacity(cells);
        for i in 0..cells {
            let a = edge(lo, hi, cells, i);
            let b = edge(lo, hi, cells, i + 1);
            let mass = gauss_legendre(&density, a, b);
            if !mass.is_finite() || mass < -1e-300 {
                return Err(Error::NonFinite(format!("density mass {mass} on [{a}, {b}]")));
            }
            masses.push(mass.max(0.0));
        }
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        let mut complement = vec![0.0; cells + 1];
        for i in (0..cells).rev() {
            complement[i] = complement[i + 1] + masses[i];
        }
        if !(acc > 0.0) {
            return Err(Error::ZeroMass { lo, hi });
        }
        Ok(Self {
            density,
            lo,
            hi,
            cumulative,
            complement,
            total: acc,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Unnormalized mass on the support.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    fn cells(&self) -> usize {
        self.cumulative.len() - 1
    }

    fn unnormalized(&self, x: f64, cell: usize) -> f64 {
        let a = edge(self.lo, self.hi, self.cells(), cell);
        self.cumulative[cell] + gauss_legendre(&self.density, a, x)
    }

    fn unnormalized_upper(&self, x: f64, cell: usize) -> f64 {
        let b = edge(self.lo, self.hi, self.cells(), cell + 1);
        self.complement[cell + 1] + gauss_legendre(&self.density, x, b)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let h = (self.hi - self.lo) / self.cells() as f64;
        let cell = (((x - self.lo) / h) as usize).min(self.cells() - 1);
        let below = self.unnormalized(x, cell);
        let value = if below <= 0.5 * self.total {
            below / self.total
        } else {
            1.0 - self.unnormalized_upper(x, cell) / self.complement[0]
        };
        value.clamp(0.0, 1.0)
    }

    /// Inverse CDF at probability `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        self.quantile_tails(p, 1.0 - p)
    }

    /// Inverse CDF given both tail probabilities, `lower + upper = 1`.
    ///
    /// Passing the upper tail explicitly avoids the rounding of `1 - p`, so
    /// mirrored requests on a symmetric density give mirrored points. When
    /// the CDF stays within [`Self::PROBABILITY_TOLERANCE`] of the requested
    /// level across whole cells (a stretch of negligible density, such as
    /// the gap between two separated packets) the centre of that stretch is
    /// returned.
    pub fn quantile_tails(&self, lower: f64, upper: f64) -> f64 {
        let tol = Self::PROBABILITY_TOLERANCE;
        let right_total = self.complement[0];
        let first = self
            .cumulative
            .partition_point(|&c| c < (lower - tol) * self.total);
        let last = self
            .complement
            .partition_point(|&c| c >= (upper - tol) * right_total);
        if last > 0 && first < last - 1 {
            let a = edge(self.lo, self.hi, self.cells(), first);
            let b = edge(self.lo, self.hi, self.cells(), last - 1);
            return 0.5 * (a + b);
        }
        if lower == upper {
            // both sums round differently; averaging keeps mirrored densities mirrored
            0.5 * (self.first_crossing(lower * self.total) + self.last_crossing_from_right(upper * right_total))
        } else if lower < upper {
            self.first_crossing(lower * self.total)
        } else {
            self.last_crossing_from_right(upper * right_total)
        }
    }

    /// Probability resolution of [`Self::quantile_tails`].
    pub const PROBABILITY_TOLERANCE: f64 = 1e-10;

    /// Smallest `x` whose unnormalized CDF reaches `target`.
    fn first_crossing(&self, target: f64) -> f64 {
        // first index with cumulative >= target
        let upper = self.cumulative.partition_point(|&c| c < target);
        if upper == 0 {
            return self.lo;
        }
        if upper > self.cells() {
            return self.hi;
        }
        let cell = upper - 1;
        let mut a = edge(self.lo, self.hi, self.cells(), cell);
        let mut b = edge(self.lo, self.hi, self.cells(), cell + 1);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.unnormalized(mid, cell) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

impl<F: Fn(f64) -> f64> NumericCdf<F> {
    /// Largest `x` whose unnormalized upper-tail mass still reaches `target`.
    fn last_crossing_from_right(&self, target: f64) -> f64 {
        // complement is non-increasing; count edges with complement >= target
        let count = self.complement.partition_point(|&c| c >= target);
        if count == 0 {
            return self.lo;
        }
        if count > self.cells() {
            return self.hi;
        }
        let cell = count - 1;
        let mut a = edge(self.lo, self.hi, self.cells(), cell);
        let mut b = edge(self.lo, self.hi, self.cells(), cell + 1);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.unnormalized_upper(mid, cell) >= target {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

fn edge(lo: f64, hi: f64, cells: usize, i: usize) -> f64 {
    if i == cells {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / cells as f64)
    }
}
