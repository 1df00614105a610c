//! Right-continuous paths with left limits, time distortions and the
//! distances built from them.
//!
//! A [`CadlagPath`] is stored as a list of continuous segments. Segment `k`
//! covers `[s_k, s_{k+1})`; its last sample sits at `s_{k+1}` and holds the
//! left limit there. Segment starts after the first are the jump times.
//! Between samples the path is linear, so every sup below is taken over the
//! merged breakpoints of the two piecewise-linear functions and is exact for
//! the interpolated paths.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::{fmt_f64, parse_f64};

/// Largest number of jumps per path the brute-force oracle accepts.
pub const ORACLE_MAX_JUMPS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Segment {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("segments are never empty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Samples, row-major with `dim` values per time.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation, with `t` clamped into the segment's time range.
    fn eval_clamped(&self, dim: usize, t: f64, out: &mut [f64]) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            out.copy_from_slice(&self.values[..dim]);
            return;
        }
        if t >= self.times[n - 1] {
            out.copy_from_slice(&self.values[(n - 1) * dim..n * dim]);
            return;
        }
        let hi = self.times.partition_point(|&s| s <= t).min(n - 1);
        let lo = hi - 1;
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        for (j, o) in out.iter_mut().enumerate() {
            let a = self.values[lo * dim + j];
            let b = self.values[hi * dim + j];
            *o = a + w * (b - a);
        }
    }
}

/// Incremental construction of a [`CadlagPath`], one segment at a time.
#[derive(Debug, Clone)]
pub struct PathBuilder {
    dim: usize,
    segments: Vec<Segment>,
}

impl PathBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            segments: Vec::new(),
        }
    }

    /// Opens a new segment at `t`. For every segment after the first, `t`
    /// must equal the time of the last sample pushed (the left limit).
    pub fn start_segment(&mut self, t: f64, value: &[f64]) {
        debug_assert_eq!(value.len(), self.dim);
        self.segments.push(Segment {
            times: vec![t],
            values: value.to_vec(),
        });
    }

    pub fn push(&mut self, t: f64, value: &[f64]) {
        debug_assert_eq!(value.len(), self.dim);
        let seg = self
            .segments
            .last_mut()
            .expect("start_segment must be called before push");
        seg.times.push(t);
        seg.values.extend_from_slice(value);
    }

    pub fn finish(self, horizon: f64) -> Result<CadlagPath> {
        CadlagPath::new(horizon, self.dim, self.segments)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    horizon: f64,
    dim: usize,
    segments: Vec<Segment>,
}

impl CadlagPath {
    /// Builds a path from `(times, row-major values)` segment pairs.
    pub fn from_segments(horizon: f64, dim: usize, segments: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let segments = segments
            .into_iter()
            .map(|(times, values)| Segment { times, values })
            .collect();
        Self::new(horizon, dim, segments)
    }

    fn new(horizon: f64, dim: usize, segments: Vec<Segment>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidPath(m));
        if dim == 0 {
            return bad("dimension must be positive".into());
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return bad(format!("horizon must be positive, got {horizon}"));
        }
        if segments.is_empty() {
            return bad("no segments".into());
        }
        for (k, seg) in segments.iter().enumerate() {
            if seg.times.is_empty() || seg.values.len() != seg.times.len() * dim {
                return bad(format!("segment {k}: sample/value count mismatch"));
            }
            if seg.times.iter().chain(&seg.values).any(|v| !v.is_finite()) {
                return bad(format!("segment {k}: non-finite entry"));
            }
            if seg.times.windows(2).any(|w| w[1] <= w[0]) {
                return bad(format!("segment {k}: sample times must strictly increase"));
            }
        }
        if segments[0].start() != 0.0 {
            return bad("first segment must start at 0".into());
        }
        for (k, w) in segments.windows(2).enumerate() {
            if w[1].start() != w[0].end() {
                return bad(format!(
                    "segment {} ends at {} but segment {} starts at {}",
                    k,
                    w[0].end(),
                    k + 1,
                    w[1].start()
                ));
            }
        }
        for (k, w) in segments.windows(2).enumerate() {
            if w[0].len() < 2 {
                return bad(format!("segment {k} has zero length"));
            }
        }
        if segments.last().unwrap().end() != horizon {
            return bad(format!("path ends at {} instead of the horizon {horizon}", segments.last().unwrap().end()));
        }
        Ok(Self {
            horizon,
            dim,
            segments,
        })
    }

    /// A single continuous segment sampled at the given times.
    pub fn continuous(horizon: f64, dim: usize, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::from_segments(horizon, dim, vec![(times, values)])
    }

    /// Piecewise-constant path: `levels[k]` holds on `[jumps[k-1], jumps[k])`.
    pub fn step(horizon: f64, jumps: &[f64], levels: &[Vec<f64>]) -> Result<Self> {
        if levels.len() != jumps.len() + 1 {
            return Err(Error::InvalidPath("need one more level than jumps".into()));
        }
        let dim = levels[0].len();
        let mut b = PathBuilder::new(dim);
        let mut bounds = vec![0.0];
        bounds.extend_from_slice(jumps);
        bounds.push(horizon);
        for (k, level) in levels.iter().enumerate() {
            if level.len() != dim {
                return Err(Error::Shape("levels differ in dimension".into()));
            }
            b.start_segment(bounds[k], level);
            if bounds[k + 1] > bounds[k] {
                b.push(bounds[k + 1], level);
            }
        }
        b.finish(horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.segments[1..].iter().map(Segment::start).collect()
    }

    /// Index of the segment whose half-open interval contains `t`, with jump
    /// times within `tol` of `t` treated as already reached.
    fn segment_index_at(&self, t: f64, tol: f64) -> usize {
        self.segments
            .partition_point(|s| s.start() <= t + tol)
            .saturating_sub(1)
    }

    /// Right-continuous value at `t`.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let k = self.segment_index_at(t, 0.0);
        self.segments[k].eval_clamped(self.dim, t, &mut out);
        out
    }

    /// Left limit at `t > 0`.
    pub fn left_limit(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let k = self.segments.partition_point(|s| s.start() < t).saturating_sub(1);
        self.segments[k].eval_clamped(self.dim, t, &mut out);
        out
    }

    /// Applies `f(t, value) -> new value` sample by sample, keeping the
    /// segment layout. The output dimension is `new_dim`.
    pub fn map_samples<F>(&self, new_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, f64, &[f64]) -> Vec<f64>,
    {
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(k, seg)| {
                let mut values = Vec::with_capacity(seg.len() * new_dim);
                for (i, &t) in seg.times.iter().enumerate() {
                    values.extend(f(k, i, t, &seg.values[i * self.dim..(i + 1) * self.dim]));
                }
                Segment {
                    times: seg.times.clone(),
                    values,
                }
            })
            .collect();
        Self::new(self.horizon, new_dim, segments)
    }

    /// Writes the path as CSV: a comment line with the jump times, a column
    /// header, then `segment_index,t,value_1..value_d` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let jumps: Vec<String> = self.jump_times().into_iter().map(fmt_f64).collect();
        let _ = writeln!(s, "# jump_times={}", jumps.join(";"));
        s.push_str("segment_index,t");
        for j in 1..=self.dim {
            let _ = write!(s, ",value_{j}");
        }
        s.push('\n');
        for (k, seg) in self.segments.iter().enumerate() {
            for (i, &t) in seg.times.iter().enumerate() {
                let _ = write!(s, "{k},{}", fmt_f64(t));
                for v in &seg.values[i * self.dim..(i + 1) * self.dim] {
                    let _ = write!(s, ",{}", fmt_f64(*v));
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty file".into(),
        })?;
        let jumps_field = first.strip_prefix("# jump_times=").ok_or(Error::Parse {
            line: 1,
            reason: "expected '# jump_times=' header".into(),
        })?;
        let declared: Vec<f64> = if jumps_field.trim().is_empty() {
            Vec::new()
        } else {
            jumps_field
                .split(';')
                .map(|f| parse_f64(f, 1))
                .collect::<Result<_>>()?
        };
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 2,
            reason: "missing column header".into(),
        })?;
        let dim = header.split(',').count().saturating_sub(2);
        if dim == 0 || !header.starts_with("segment_index,t") {
            return Err(Error::Parse {
                line: 2,
                reason: format!("bad column header {header:?}"),
            });
        }
        let mut segments: Vec<Segment> = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 2 {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected {} fields, got {}", dim + 2, fields.len()),
                });
            }
            let k: usize = fields[0].trim().parse().map_err(|e| Error::Parse {
                line: i + 1,
                reason: format!("segment index: {e}"),
            })?;
            let t = parse_f64(fields[1], i + 1)?;
            if k == segments.len() {
                segments.push(Segment {
                    times: Vec::new(),
                    values: Vec::new(),
                });
            } else if k + 1 != segments.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("segment index {k} out of order"),
                });
            }
            let seg = segments.last_mut().unwrap();
            seg.times.push(t);
            for f in &fields[2..] {
                seg.values.push(parse_f64(f, i + 1)?);
            }
        }
        let horizon = segments
            .last()
            .map(Segment::end)
            .ok_or(Error::Parse {
                line: 3,
                reason: "no samples".into(),
            })?;
        let path = Self::new(horizon, dim, segments)?;
        if path.jump_times() != declared {
            return Err(Error::Parse {
                line: 1,
                reason: "declared jump times disagree with segment boundaries".into(),
            });
        }
        Ok(path)
    }
}

/// A piecewise-linear increasing bijection of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDistortion {
    horizon: f64,
    knots: Vec<(f64, f64)>,
}

impl TimeDistortion {
    pub fn new(horizon: f64, knots: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidDistortion(m));
        if knots.len() < 2 {
            return bad("need at least two knots".into());
        }
        if knots.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return bad("non-finite knot".into());
        }
        if knots[0] != (0.0, 0.0) || *knots.last().unwrap() != (horizon, horizon) {
            return bad(format!("must map 0 to 0 and {horizon} to itself"));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad(format!("knot times not increasing at {}", w[1].0));
            }
            if w[1].1 <= w[0].1 {
                return bad(format!("knot images not increasing at t = {}", w[1].0));
            }
        }
        Ok(Self { horizon, knots })
    }

    pub fn identity(horizon: f64) -> Self {
        Self {
            horizon,
            knots: vec![(0.0, 0.0), (horizon, horizon)],
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        interp(&self.knots, t, |k| k.0, |k| k.1)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        interp(&self.knots, u, |k| k.1, |k| k.0)
    }

    /// Slopes on the knot intervals; these are the Jacobian values.
    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.knots.iter().all(|(a, b)| a == b)
    }

    /// `sup |log((λ(t) - λ(s)) / (t - s))|`. Chord slopes are convex
    /// combinations of segment slopes, so the max over segments suffices.
    pub fn cost(&self) -> f64 {
        self.slopes().into_iter().map(|s| s.ln().abs()).fold(0.0, f64::max)
    }

    /// `sup |λ'(t) - 1|`.
    pub fn max_jacobian_deviation(&self) -> f64 {
        self.slopes().into_iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn interp<K, FX, FY>(knots: &[K], x: f64, fx: FX, fy: FY) -> f64
where
    FX: Fn(&K) -> f64,
    FY: Fn(&K) -> f64,
{
    let n = knots.len();
    if x <= fx(&knots[0]) {
        return fy(&knots[0]);
    }
    if x >= fx(&knots[n - 1]) {
        return fy(&knots[n - 1]);
    }
    let hi = knots.partition_point(|k| fx(k) <= x).min(n - 1);
    let (a, b) = (&knots[hi - 1], &knots[hi]);
    let w = (x - fx(a)) / (fx(b) - fx(a));
    fy(a) + w * (fy(b) - fy(a))
}

pub fn distortion_cost(lambda: &TimeDistortion) -> f64 {
    lambda.cost()
}

fn check_compatible(x1: &CadlagPath, x2: &CadlagPath) -> Result<()> {
    if x1.horizon != x2.horizon {
        return Err(Error::Shape(format!(
            "horizons differ: {} vs {}",
            x1.horizon, x2.horizon
        )));
    }
    if x1.dim != x2.dim {
        return Err(Error::Shape(format!("dimensions differ: {} vs {}", x1.dim, x2.dim)));
    }
    Ok(())
}

/// `sup_t |x1(t) - x2(λ(t))|` in the Euclidean norm.
pub fn sup_after_distortion(x1: &CadlagPath, x2: &CadlagPath, lambda: &TimeDistortion) -> Result<f64> {
    check_compatible(x1, x2)?;
    if lambda.horizon != x1.horizon {
        return Err(Error::Shape("distortion horizon differs from path horizon".into()));
    }
    let horizon = x1.horizon;
    let tol = 1e-12 * horizon.max(1.0);
    let dim = x1.dim;

    let mut bounds = vec![0.0, horizon];
    bounds.extend(x1.jump_times());
    bounds.extend(x2.jump_times().into_iter().map(|u| lambda.inverse(u)));
    bounds.sort_by(f64::total_cmp);
    bounds.dedup_by(|b, a| *b - *a <= tol);

    let mut breaks: Vec<f64> = Vec::new();
    for seg in &x1.segments {
        breaks.extend_from_slice(&seg.times);
    }
    for seg in &x2.segments {
        breaks.extend(seg.times.iter().map(|&u| lambda.inverse(u)));
    }
    breaks.extend(lambda.knots.iter().map(|k| k.0));
    breaks.sort_by(f64::total_cmp);

    let mut v1 = vec![0.0; dim];
    let mut v2 = vec![0.0; dim];
    let mut sup = 0.0f64;
    let mut dist = |v1: &[f64], v2: &[f64]| {
        let d = v1.iter().zip(v2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        sup = sup.max(d);
    };

    // point values at every boundary, jumps snapped within tolerance
    for &b in &bounds {
        let k1 = x1.segment_index_at(b, tol);
        let u = lambda.eval(b);
        let k2 = x2.segment_index_at(u, tol);
        x1.segments[k1].eval_clamped(dim, b, &mut v1);
        x2.segments[k2].eval_clamped(dim, u, &mut v2);
        dist(&v1, &v2);
    }
    // both functions are linear between merged breakpoints inside a piece
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= tol {
            continue;
        }
        let mid = 0.5 * (a + b);
        let s1 = &x1.segments[x1.segment_index_at(mid, 0.0)];
        let s2 = &x2.segments[x2.segment_index_at(lambda.eval(mid), 0.0)];
        let lo = breaks.partition_point(|&t| t <= a);
        let hi = breaks.partition_point(|&t| t < b);
        for &t in std::iter::once(&a).chain(&breaks[lo..hi]).chain(std::iter::once(&b)) {
            s1.eval_clamped(dim, t, &mut v1);
            s2.eval_clamped(dim, lambda.eval(t), &mut v2);
            dist(&v1, &v2);
        }
    }
    Ok(sup)
}

/// `γ_T(λ) ∨ sup_t |x1(t) - x2(λ(t))|`, an upper bound for the Skorohod distance.
pub fn skorohod_upper(x1: &CadlagPath, x2: &CadlagPath, lambda: &TimeDistortion) -> Result<f64> {
    let sup = sup_after_distortion(x1, x2, lambda)?;
    Ok(lambda.cost().max(sup))
}

pub fn uniform_distance(x1: &CadlagPath, x2: &CadlagPath) -> Result<f64> {
    sup_after_distortion(x1, x2, &TimeDistortion::identity(x1.horizon))
}

/// Brute-force search over piecewise-linear distortions with knots at the
/// jump times of `x1` and images drawn from a dyadic grid around the jump
/// times of `x2` (plus a uniform grid over the horizon). Candidate sets are
/// nested in the resolution, so the result never increases with it.
pub fn skorohod_oracle(x1: &CadlagPath, x2: &CadlagPath, resolution: usize) -> Result<f64> {
    check_compatible(x1, x2)?;
    if resolution < 8 {
        return Err(Error::param("resolution", format!("must be >= 8, got {resolution}")));
    }
    let j1 = x1.jump_times();
    let j2 = x2.jump_times();
    let found = j1.len().max(j2.len());
    if found > ORACLE_MAX_JUMPS {
        return Err(Error::ComplexityGuard {
            limit: ORACLE_MAX_JUMPS,
            found,
        });
    }
    let horizon = x1.horizon;
    let level = usize::BITS - 1 - resolution.leading_zeros();
    let cells = 1usize << level;
    let window = horizon / 4.0;

    let mut candidates: Vec<f64> = (1..cells).map(|m| horizon * m as f64 / cells as f64).collect();
    for &j in &j2 {
        for m in 0..=2 * cells {
            let off = window * (m as f64 - cells as f64) / cells as f64;
            candidates.push(j + off);
        }
    }
    candidates.extend_from_slice(&j1);
    candidates.retain(|&u| u > 0.0 && u < horizon);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best = uniform_distance(x1, x2)?;
    let mut images = Vec::with_capacity(j1.len());
    search(x1, x2, &j1, &candidates, &mut images, &mut best)?;
    Ok(best)
}

fn search(
    x1: &CadlagPath,
    x2: &CadlagPath,
    times: &[f64],
    candidates: &[f64],
    images: &mut Vec<f64>,
    best: &mut f64,
) -> Result<()> {
    let horizon = x1.horizon;
    let depth = images.len();
    // cost of the slopes fixed so far only grows as knots are added
    let (pt, pu) = if depth == 0 {
        (0.0, 0.0)
    } else {
        (times[depth - 1], images[depth - 1])
    };
    if depth == times.len() {
        let last = ((horizon - pu) / (horizon - pt)).ln().abs();
        if last >= *best {
            return Ok(());
        }
        let mut knots = vec![(0.0, 0.0)];
        knots.extend(times.iter().copied().zip(images.iter().copied()));
        knots.push((horizon, horizon));
        let lambda = TimeDistortion::new(horizon, knots)?;
        let value = skorohod_upper(x1, x2, &lambda)?;
        if value < *best {
            *best = value;
        }
        return Ok(());
    }
    let start = candidates.partition_point(|&u| u <= pu);
    // cheapest slopes first, so the bound tightens early and the scan can stop
    let mut order: Vec<(f64, f64)> = candidates[start..]
        .iter()
        .map(|&u| (((u - pu) / (times[depth] - pt)).ln().abs(), u))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (slope_cost, u) in order {
        if slope_cost >= *best {
            break;
        }
        images.push(u);
        search(x1, x2, times, candidates, images, best)?;
        images.pop();
    }
    Ok(())
}

/// The jump-aligning distortion: `λ(t_k) = τ_k` for every listed pair,
/// `λ(T) = T`, linear in between. The identity when `good` is false.
pub fn build_aligning_distortion(
    deterministic: &[f64],
    stochastic: &[f64],
    horizon: f64,
    good: bool,
) -> Result<TimeDistortion> {
    if !good {
        return Ok(TimeDistortion::identity(horizon));
    }
    if deterministic.len() != stochastic.len() {
        return Err(Error::InvalidInput(format!(
            "{} deterministic times but {} stochastic times",
            deterministic.len(),
            stochastic.len()
        )));
    }
    for (name, ts) in [("deterministic", deterministic), ("stochastic", stochastic)] {
        let mut prev = 0.0;
        for &t in ts {
            if !(t > prev) {
                return Err(Error::InvalidInput(format!("{name} times must be positive and strictly increasing")));
            }
            prev = t;
        }
        if prev >= horizon {
            return Err(Error::InvalidInput(format!(
                "last {name} time {prev} is not before the horizon {horizon}"
            )));
        }
    }
    let mut knots = Vec::with_capacity(deterministic.len() + 2);
    knots.push((0.0, 0.0));
    knots.extend(deterministic.iter().copied().zip(stochastic.iter().copied()));
    knots.push((horizon, horizon));
    TimeDistortion::new(horizon, knots)
}
