//! The deterministic polar model: radial flow `dr/dt = b(r)`, unit angular
//! speed, and the reset `(r, α) -> (h(r), 0)` on the ray `θ = α`.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::cadlag::{CadlagPath, PathBuilder};
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::rng::Grid;

/// A smooth real function with a known derivative.
pub trait ScalarMap: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// Shape-preserving (Fritsch-Carlson) cubic Hermite interpolant through
/// tabulated points; constant outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param("table", "need at least two points"));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::param("table", "non-finite entry"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::param("table", "x values must strictly increase"));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            m[i] = if secants[i - 1] * secants[i] <= 0.0 {
                0.0
            } else {
                0.5 * (secants[i - 1] + secants[i])
            };
        }
        for i in 0..n - 1 {
            let d = secants[i];
            if d == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / d;
            let b = m[i + 1] / d;
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * d;
                m[i + 1] = tau * b * d;
            }
        }
        Ok(Self { xs, ys, slopes: m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    fn locate(&self, x: f64) -> Option<(usize, f64, f64)> {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return None;
        }
        let i = self.xs.partition_point(|&v| v <= x).clamp(1, self.xs.len() - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        Some((i, h, (x - self.xs[i]) / h))
    }
}

impl ScalarMap for MonotoneCubic {
    fn value(&self, x: f64) -> f64 {
        match self.locate(x) {
            None if x < self.xs[0] => self.ys[0],
            None => *self.ys.last().unwrap(),
            Some((i, h, s)) => {
                let (s2, s3) = (s * s, s * s * s);
                (2.0 * s3 - 3.0 * s2 + 1.0) * self.ys[i]
                    + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
                    + (-2.0 * s3 + 3.0 * s2) * self.ys[i + 1]
                    + (s3 - s2) * h * self.slopes[i + 1]
            }
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            None => 0.0,
            Some((i, h, s)) => {
                let s2 = s * s;
                ((6.0 * s2 - 6.0 * s) * self.ys[i]
                    + (-6.0 * s2 + 6.0 * s) * self.ys[i + 1]) / h
                    + (3.0 * s2 - 4.0 * s + 1.0) * self.slopes[i]
                    + (3.0 * s2 - 2.0 * s) * self.slopes[i + 1]
            }
        }
    }
}

/// Built-in radial drifts.
#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    /// `b(r) = c`
    Constant(f64),
    /// `b(r) = c tanh(r)`
    Tanh(f64),
    /// Monotone-cubic interpolation of `(r, b(r))` pairs.
    Table(MonotoneCubic),
}

impl ScalarMap for Drift {
    fn value(&self, x: f64) -> f64 {
        match self {
            Drift::Constant(c) => *c,
            Drift::Tanh(c) => c * x.tanh(),
            Drift::Table(t) => t.value(x),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Drift::Constant(_) => 0.0,
            Drift::Tanh(c) => c / x.cosh().powi(2),
            Drift::Table(t) => t.derivative(x),
        }
    }
}

impl Drift {
    /// Bound on `|b|`, `|b'|` and `|b''|`.
    pub fn bound(&self) -> f64 {
        match self {
            Drift::Constant(c) => c.abs(),
            // |tanh| <= 1, |sech^2| <= 1, |tanh''| <= 4 / (3 sqrt 3)
            Drift::Tanh(c) => c.abs(),
            Drift::Table(t) => {
                let (lo, hi) = t.domain();
                sample_sup(lo, hi, 4001, |x| t.value(x).abs().max(t.derivative(x).abs()))
            }
        }
    }
}

/// Built-in reset maps, all odd so that negative radii reset sensibly.
#[derive(Debug, Clone, PartialEq)]
pub enum Reset {
    /// `h(r) = κ r`
    Linear(f64),
    /// `h(r) = a r / (1 + |r|)`
    Saturating(f64),
    /// Monotone-cubic interpolation of `(r, h(r))` pairs for `r >= 0`
    /// starting at `(0, 0)`, linear past the last point, extended oddly.
    Table(MonotoneCubic),
}

impl Reset {
    fn table_tail_slope(t: &MonotoneCubic) -> f64 {
        let n = t.xs.len();
        (t.ys[n - 1] - t.ys[n - 2]) / (t.xs[n - 1] - t.xs[n - 2])
    }

    /// `sup |h'|`.
    pub fn slope_bound(&self) -> f64 {
        match self {
            Reset::Linear(k) => k.abs(),
            Reset::Saturating(a) => a.abs(),
            Reset::Table(t) => {
                let (lo, hi) = t.domain();
                sample_sup(lo, hi, 4001, |x| t.derivative(x).abs()).max(Self::table_tail_slope(t).abs())
            }
        }
    }
}

impl ScalarMap for Reset {
    fn value(&self, x: f64) -> f64 {
        match self {
            Reset::Linear(k) => k * x,
            Reset::Saturating(a) => a * x / (1.0 + x.abs()),
            Reset::Table(t) => {
                let r = x.abs();
                let (_, hi) = t.domain();
                let v = if r > hi {
                    t.value(hi) + Self::table_tail_slope(t) * (r - hi)
                } else {
                    t.value(r)
                };
                v.copysign(x)
            }
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Reset::Linear(k) => *k,
            Reset::Saturating(a) => a / (1.0 + x.abs()).powi(2),
            Reset::Table(t) => {
                let r = x.abs();
                if r > t.domain().1 {
                    Self::table_tail_slope(t)
                } else {
                    t.derivative(r)
                }
            }
        }
    }
}

fn sample_sup(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..n)
        .map(|i| f(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .fold(0.0, f64::max)
}

/// The deterministic model. Immutable once built and cheap to share.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    drift: Arc<dyn ScalarMap>,
    drift_bound: f64,
    reset: Arc<dyn ScalarMap>,
    reset_slope_bound: f64,
    alpha: f64,
    r0: f64,
}

impl SystemSpec {
    /// Validates the model on a sample grid: `|b|, |b'| <= K_b`, `h(0) = 0`,
    /// `h` strictly increasing on `[0, ∞)` and `|h'| <= ‖h'‖∞`.
    pub fn new(
        drift: Arc<dyn ScalarMap>,
        drift_bound: f64,
        reset: Arc<dyn ScalarMap>,
        reset_slope_bound: f64,
        alpha: f64,
        r0: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0 * std::f64::consts::PI) {
            return Err(Error::param("alpha", format!("must lie in (0, 2π), got {alpha}")));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::param("r0", format!("must be positive, got {r0}")));
        }
        if !(drift_bound >= 0.0 && drift_bound.is_finite()) {
            return Err(Error::param("drift_bound", "must be finite and nonnegative"));
        }
        if !(reset_slope_bound >= 0.0 && reset_slope_bound.is_finite()) {
            return Err(Error::param("reset_slope_bound", "must be finite and nonnegative"));
        }
        let span = 10.0 * r0.max(1.0);
        let slack = 1e-9 * drift_bound.max(1.0);
        let n = 2001;
        for i in 0..n {
            let x = -span + 2.0 * span * i as f64 / (n - 1) as f64;
            let (b, db) = (drift.value(x), drift.derivative(x));
            if !(b.abs() <= drift_bound + slack && db.abs() <= drift_bound + slack) {
                return Err(Error::param(
                    "drift",
                    format!("|b| or |b'| exceeds the bound {drift_bound} at r = {x}"),
                ));
            }
        }
        if reset.value(0.0).abs() > 1e-14 {
            return Err(Error::param("reset", "h(0) must be 0"));
        }
        let mut prev = reset.value(0.0);
        for i in 1..n {
            let x = span * i as f64 / (n - 1) as f64;
            let h = reset.value(x);
            if !(h > prev) {
                return Err(Error::param("reset", format!("h is not strictly increasing near r = {x}")));
            }
            prev = h;
            if reset.derivative(x).abs() > reset_slope_bound * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::param(
                    "reset",
                    format!("|h'| exceeds the bound {reset_slope_bound} at r = {x}"),
                ));
            }
        }
        Ok(Self {
            drift,
            drift_bound,
            reset,
            reset_slope_bound,
            alpha,
            r0,
        })
    }

    pub fn builtin(drift: Drift, reset: Reset, alpha: f64, r0: f64) -> Result<Self> {
        let kb = drift.bound();
        let hb = reset.slope_bound();
        Self::new(Arc::new(drift), kb, Arc::new(reset), hb, alpha, r0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn theta0(&self) -> f64 {
        0.0
    }

    pub fn drift_bound(&self) -> f64 {
        self.drift_bound
    }

    pub fn reset_slope_bound(&self) -> f64 {
        self.reset_slope_bound
    }

    /// `ϱ = log(‖h'‖∞ ∨ 1)`.
    pub fn varrho(&self) -> f64 {
        self.reset_slope_bound.max(1.0).ln()
    }

    pub fn b(&self, r: f64) -> f64 {
        self.drift.value(r)
    }

    pub fn b_prime(&self, r: f64) -> f64 {
        self.drift.derivative(r)
    }

    pub fn h(&self, r: f64) -> f64 {
        self.reset.value(r)
    }

    pub fn h_prime(&self, r: f64) -> f64 {
        self.reset.derivative(r)
    }

    /// Checks `T ∈ (Nα, (N+1)α)` with `N >= 1` and returns `N`.
    pub fn horizon_index(&self, horizon: f64) -> Result<usize> {
        let n = (horizon / self.alpha).floor();
        if !(horizon.is_finite() && n >= 1.0 && horizon > n * self.alpha && horizon < (n + 1.0) * self.alpha) {
            return Err(Error::Horizon {
                horizon,
                alpha: self.alpha,
            });
        }
        Ok(n as usize)
    }
}

/// Impulse times with the radial left limits and post-reset values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImpulseSchedule {
    pub times: Vec<f64>,
    pub pre_values: Vec<f64>,
    pub post_values: Vec<f64>,
}

impl ImpulseSchedule {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64, pre: f64, post: f64) {
        self.times.push(t);
        self.pre_values.push(pre);
        self.post_values.push(post);
    }

    /// `k,tau_k,pre_value,post_value` with `k` counted from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,tau_k,pre_value,post_value\n");
        for k in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                k + 1,
                fmt_f64(self.times[k]),
                fmt_f64(self.pre_values[k]),
                fmt_f64(self.post_values[k])
            );
        }
        s
    }
}

/// `q(t) = ⌊t / α⌋`, the number of deterministic impacts in `[0, t]`.
pub fn impact_count(t: f64, alpha: f64) -> Result<u64> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    Ok((t / alpha).floor() as u64)
}

/// Sample times for cycle `[start, end]`: both ends plus the grid points
/// strictly inside (points within a tiny fraction of a step of either end
/// are dropped).
pub(crate) fn cycle_times(grid: &Grid, start: f64, end: f64) -> Vec<f64> {
    let tol = 1e-9 * grid.dt;
    let mut out = vec![start];
    let mut i = grid.interval_of(start) + 1;
    while i <= grid.intervals {
        let g = grid.time(i);
        if g >= end - tol {
            break;
        }
        if g > start + tol {
            out.push(g);
        }
        i += 1;
    }
    out.push(end);
    out
}

fn rk4(spec: &SystemSpec, r: f64, h: f64) -> f64 {
    let k1 = spec.b(r);
    let k2 = spec.b(r + 0.5 * h * k1);
    let k3 = spec.b(r + 0.5 * h * k2);
    let k4 = spec.b(r + h * k3);
    r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates the deterministic system on `[0, T]` with a classical
/// fourth-order step between impacts. Impacts happen exactly at `kα`, so the
/// last step of each cycle is shortened to land on it; the reset is applied
/// exactly. The path has dimension 2: `(r, θ)`.
pub fn deterministic_trajectory(spec: &SystemSpec, horizon: f64, dt: f64) -> Result<(CadlagPath, ImpulseSchedule)> {
    let n = spec.horizon_index(horizon)?;
    let max = spec.alpha / 100.0;
    if !(dt > 0.0 && dt <= max) {
        return Err(Error::Resolution { dt, max });
    }
    let grid = Grid::new(dt, horizon)?;
    let mut builder = PathBuilder::new(2);
    let mut schedule = ImpulseSchedule::default();
    let mut r = spec.r0;
    for k in 1..=n + 1 {
        let start = (k - 1) as f64 * spec.alpha;
        let end = if k <= n { k as f64 * spec.alpha } else { horizon };
        let times = cycle_times(&grid, start, end);
        builder.start_segment(start, &[r, 0.0]);
        for w in times.windows(2) {
            r = rk4(spec, r, w[1] - w[0]);
            builder.push(w[1], &[r, w[1] - start]);
        }
        if k <= n {
            let post = spec.h(r);
            schedule.push(end, r, post);
            r = post;
        }
    }
    Ok((builder.finish(horizon)?, schedule))
}
