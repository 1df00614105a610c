//! The perturbed system: Euler-Maruyama between impacts, linear
//! interpolation of `Θ` to locate the crossing of `α`, exact resets.

use std::fmt;
use std::sync::Arc;

use crate::cadlag::{CadlagPath, PathBuilder};
use crate::error::{Error, Result};
use crate::fpt::tail_constant;
use crate::rng::{BrownianRecord, ReplicaSeed};
use crate::system::{ImpulseSchedule, SystemSpec};

/// Bounded angular drift `f(r, θ)`.
pub type AngularDrift = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct NoiseParams {
    epsilon: f64,
    p: f64,
    sigma: bool,
    zeta: f64,
    angular_drift: Option<AngularDrift>,
}

impl fmt::Debug for NoiseParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseParams")
            .field("epsilon", &self.epsilon)
            .field("p", &self.p)
            .field("sigma", &self.sigma)
            .field("zeta", &self.zeta)
            .field("angular_drift", &self.angular_drift.is_some())
            .finish()
    }
}

impl NoiseParams {
    /// `ε` in `[0, 1)` (zero gives the noiseless control), `p > 1`,
    /// `σ ∈ {0, 1}`, `ζ >= 0`. The angular drift starts out as `f ≡ 0`.
    pub fn new(epsilon: f64, p: f64, sigma: u8, zeta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::param("epsilon", format!("must lie in [0, 1), got {epsilon}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::param("p", format!("must exceed 1, got {p}")));
        }
        if sigma > 1 {
            return Err(Error::param("sigma", format!("must be 0 or 1, got {sigma}")));
        }
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::param("zeta", format!("must be nonnegative, got {zeta}")));
        }
        Ok(Self {
            epsilon,
            p,
            sigma: sigma == 1,
            zeta,
            angular_drift: None,
        })
    }

    /// The regime the limit theorems cover: `f ≡ 0`, `σ = 1`.
    pub fn theorem_regime(epsilon: f64, p: f64) -> Result<Self> {
        Self::new(epsilon, p, 1, 0.0)
    }

    /// Installs `f`, checking `‖f‖∞ < 1` on a sample grid of the wedge.
    pub fn with_angular_drift(mut self, f: AngularDrift, alpha: f64, radius: f64) -> Result<Self> {
        for i in 0..=40 {
            for j in 0..=40 {
                let r = -radius + 2.0 * radius * i as f64 / 40.0;
                let th = alpha * j as f64 / 40.0;
                let v = f(r, th);
                if !(v.abs() < 1.0) {
                    return Err(Error::param("f", format!("|f({r}, {th})| = {} is not below 1", v.abs())));
                }
            }
        }
        self.angular_drift = Some(f);
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigma(&self) -> u8 {
        self.sigma as u8
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Angular noise scale `ε^p`.
    pub fn eps_p(&self) -> f64 {
        self.epsilon.powf(self.p)
    }

    pub fn is_theorem_regime(&self) -> bool {
        self.sigma && (self.zeta == 0.0 || self.angular_drift.is_none())
    }

    fn f(&self, r: f64, th: f64) -> f64 {
        self.angular_drift.as_ref().map_or(0.0, |f| f(r, th))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimulationOptions {
    /// Impulses allowed before the run is declared runaway; `None` means
    /// `10 ⌈T/α⌉`.
    pub max_impulses: Option<usize>,
}

/// Draws a Brownian record for `seed` and simulates one path on it.
pub fn simulate_path(
    spec: &SystemSpec,
    noise: &NoiseParams,
    horizon: f64,
    dt: f64,
    seed: impl Into<ReplicaSeed>,
) -> Result<(CadlagPath, ImpulseSchedule, BrownianRecord)> {
    check_resolution(spec, horizon, dt)?;
    let record = BrownianRecord::generate(dt, horizon, seed)?;
    let (path, schedule) = simulate_with_record(spec, noise, &record, SimulationOptions::default())?;
    Ok((path, schedule, record))
}

fn check_resolution(spec: &SystemSpec, horizon: f64, dt: f64) -> Result<()> {
    spec.horizon_index(horizon)?;
    let max = spec.alpha() / 200.0;
    if !(dt > 0.0 && dt <= max) {
        return Err(Error::Resolution { dt, max });
    }
    Ok(())
}

/// Simulates on a given Brownian record. Between grid points each step uses
/// its share of the grid increments:
/// `R += b(R) h + ε ΔW`, `Θ += (1 + ζ f(R, Θ)) h + ε^p σ ΔB`.
/// When `Θ` reaches `α` inside a step the crossing time is found by linear
/// interpolation, `R` is taken at that time, reset through `h`, `Θ` restarts
/// at 0 and the rest of the step is integrated from the reset state.
pub fn simulate_with_record(
    spec: &SystemSpec,
    noise: &NoiseParams,
    record: &BrownianRecord,
    options: SimulationOptions,
) -> Result<(CadlagPath, ImpulseSchedule)> {
    let grid = record.grid();
    let horizon = grid.horizon;
    check_resolution(spec, horizon, grid.dt)?;
    let alpha = spec.alpha();
    let limit = options
        .max_impulses
        .unwrap_or(10 * (horizon / alpha).ceil() as usize);
    let eps = noise.epsilon;
    let ang = if noise.sigma { noise.eps_p() } else { 0.0 };

    let mut builder = PathBuilder::new(2);
    let mut schedule = ImpulseSchedule::default();
    let (mut r, mut th) = (spec.r0(), spec.theta0());
    builder.start_segment(0.0, &[r, th]);

    for i in 0..grid.intervals {
        let (a, g) = (grid.time(i), grid.time(i + 1));
        let len = g - a;
        let (dw, db) = (record.w_increments()[i], record.b_increments()[i]);
        let mut s = a;
        loop {
            let h = g - s;
            if h <= 0.0 {
                break;
            }
            let share = h / len;
            let r_next = r + spec.b(r) * h + eps * dw * share;
            let th_next = th + (1.0 + noise.zeta * noise.f(r, th)) * h + ang * db * share;
            if th_next >= alpha {
                let w = ((alpha - th) / (th_next - th)).clamp(0.0, 1.0);
                let tau = (s + w * h).min(g);
                let pre = r + w * (r_next - r);
                if tau > s {
                    builder.push(tau, &[pre, alpha]);
                } else {
                    return Err(Error::Runaway { limit });
                }
                let post = spec.h(pre);
                schedule.push(tau, pre, post);
                if schedule.len() > limit {
                    return Err(Error::Runaway { limit });
                }
                r = post;
                th = 0.0;
                s = tau;
                builder.start_segment(tau, &[r, th]);
            } else {
                r = r_next;
                th = th_next;
                s = g;
                builder.push(g, &[r, th]);
            }
        }
    }
    Ok((builder.finish(horizon)?, schedule))
}

/// Membership in the good set `G^{ε,δ}_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodSetRecord {
    pub delta: f64,
    pub n: usize,
    pub is_good: bool,
    /// `|τ_k - kα|` for the first `min(N, #impulses)` impulses.
    pub deviations: Vec<f64>,
}

/// Good iff exactly `N` impulses occurred and each is within `δ` of `kα`.
pub fn classify_good_set(schedule: &ImpulseSchedule, alpha: f64, n: usize, delta: f64) -> GoodSetRecord {
    let deviations: Vec<f64> = schedule
        .times
        .iter()
        .take(n)
        .enumerate()
        .map(|(k, &tau)| (tau - (k + 1) as f64 * alpha).abs())
        .collect();
    let is_good = schedule.len() == n && deviations.iter().all(|&d| d <= delta);
    GoodSetRecord {
        delta,
        n,
        is_good,
        deviations,
    }
}

/// `C (ε^p/δ) exp(-δ²/(4αε^{2p}))` for an arbitrary constant `C`.
pub fn bad_set_bound(constant: f64, alpha: f64, eps_p: f64, delta: f64) -> Result<f64> {
    let top = 1f64.min(alpha / 2.0);
    if !(delta > 0.0 && delta < top) {
        return Err(Error::param("delta", format!("must lie in (0, {top}), got {delta}")));
    }
    if !(eps_p > 0.0 && eps_p < 1.0) {
        return Err(Error::param("eps_p", format!("must lie in (0, 1), got {eps_p}")));
    }
    Ok(constant * (eps_p / delta) * (-delta * delta / (4.0 * alpha * eps_p * eps_p)).exp())
}

/// Bound on the probability of leaving the good set by the `n`-th impact,
/// with constant `K n (n + 1)` and `K` from [`tail_constant`].
pub fn good_set_probability_bound(n: u32, alpha: f64, epsilon: f64, p: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    let n = f64::from(n);
    bad_set_bound(tail_constant(alpha) * n * (n + 1.0), alpha, epsilon.powf(p), delta)
}

/// `Q_t = max{k : τ_k <= t}`.
pub fn impulse_count(schedule: &ImpulseSchedule, t: f64) -> usize {
    schedule.times.partition_point(|&tau| tau <= t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cadlag::{build_aligning_distortion, skorohod_upper};
    use crate::system::{deterministic_trajectory, Drift, Reset};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn exemplar() -> SystemSpec {
        SystemSpec::builtin(Drift::Constant(0.2), Reset::Linear(0.5), PI / 2.0, 1.0).unwrap()
    }

    #[test]
    fn zero_noise_reproduces_the_deterministic_path() {
        let spec = exemplar();
        let noise = NoiseParams::theorem_regime(0.0, 2.0).unwrap();
        let (path, sched, _) = simulate_path(&spec, &noise, 4.0, 1e-4, 3).unwrap();
        let (det, dsched) = deterministic_trajectory(&spec, 4.0, 1e-4).unwrap();
        assert_eq!(sched.len(), 2);
        for (tau, t) in sched.times.iter().zip(&dsched.times) {
            assert!((tau - t).abs() <= 1e-4);
        }
        let lambda = build_aligning_distortion(&dsched.times, &sched.times, 4.0, true).unwrap();
        assert!(skorohod_upper(&det, &path, &lambda).unwrap() <= 1e-6);
    }

    #[test]
    fn no_angular_noise_gives_deterministic_impacts() {
        let spec = exemplar();
        let noise = NoiseParams::new(0.3, 2.0, 0, 0.0).unwrap();
        for seed in 0..5 {
            let (_, sched, _) = simulate_path(&spec, &noise, 4.0, 1e-3, seed).unwrap();
            assert_eq!(sched.len(), 2);
            for (k, tau) in sched.times.iter().enumerate() {
                assert!((tau - (k + 1) as f64 * PI / 2.0).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn resets_are_exact_and_theta_stays_in_the_wedge() {
        let spec = exemplar();
        let noise = NoiseParams::theorem_regime(0.3, 1.5).unwrap();
        let (path, sched, _) = simulate_path(&spec, &noise, 4.0, 1e-3, 17).unwrap();
        assert_eq!(path.jump_times(), sched.times);
        for (k, &tau) in sched.times.iter().enumerate() {
            assert_eq!(sched.post_values[k], 0.5 * sched.pre_values[k]);
            assert_eq!(path.left_limit(tau)[0], sched.pre_values[k]);
            assert_eq!(path.value_at(tau), vec![sched.post_values[k], 0.0]);
        }
        for seg in path.segments() {
            for v in seg.values().chunks(2) {
                assert!(v[1] <= PI / 2.0);
            }
        }
    }

    #[test]
    fn reproducible_for_a_seed() {
        let spec = exemplar();
        let noise = NoiseParams::theorem_regime(0.2, 2.0).unwrap();
        let a = simulate_path(&spec, &noise, 4.0, 1e-3, 99).unwrap();
        let b = simulate_path(&spec, &noise, 4.0, 1e-3, 99).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn runaway_and_resolution_guards() {
        let spec = exemplar();
        let noise = NoiseParams::theorem_regime(0.2, 2.0).unwrap();
        let record = BrownianRecord::generate(1e-3, 4.0, 1).unwrap();
        let opts = SimulationOptions { max_impulses: Some(1) };
        assert!(matches!(
            simulate_with_record(&spec, &noise, &record, opts),
            Err(Error::Runaway { limit: 1 })
        ));
        assert!(matches!(
            simulate_path(&spec, &noise, 4.0, 0.01, 1),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn angular_drift_validation() {
        let ok = NoiseParams::new(0.1, 2.0, 1, 0.1)
            .unwrap()
            .with_angular_drift(Arc::new(|r: f64, _| 0.5 * r.tanh()), 1.0, 5.0);
        assert!(ok.is_ok());
        let bad = NoiseParams::new(0.1, 2.0, 1, 0.1)
            .unwrap()
            .with_angular_drift(Arc::new(|_, _| 1.0), 1.0, 5.0);
        assert!(bad.is_err());
        assert!(NoiseParams::new(0.1, 1.0, 1, 0.0).is_err());
        assert!(NoiseParams::new(1.0, 2.0, 1, 0.0).is_err());
        assert!(NoiseParams::new(0.1, 2.0, 2, 0.0).is_err());
    }

    #[test]
    fn good_set_classification() {
        let mut s = ImpulseSchedule::default();
        s.push(1.02, 1.0, 0.5);
        s.push(2.03, 1.0, 0.5);
        let g = classify_good_set(&s, 1.0, 2, 0.05);
        assert!(g.is_good);
        assert_abs_diff_eq!(g.deviations[0], 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(g.deviations[1], 0.03, epsilon = 1e-12);

        let mut s = ImpulseSchedule::default();
        s.push(1.02, 1.0, 0.5);
        s.push(2.06, 1.0, 0.5);
        assert!(!classify_good_set(&s, 1.0, 2, 0.05).is_good);

        let mut s = ImpulseSchedule::default();
        s.push(1.0, 1.0, 0.5);
        let g = classify_good_set(&s, 1.0, 2, 0.05);
        assert!(!g.is_good);
        assert_eq!(g.deviations.len(), 1);
    }

    #[test]
    fn bad_set_bound_values() {
        let v = bad_set_bound(1.0, 1.0, 0.05, 0.3).unwrap();
        assert_abs_diff_eq!(v, (0.05 / 0.3) * (-9.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 2.057e-5, epsilon = 1e-8);
        assert!(bad_set_bound(1.0, 1.0, 0.05, 0.6).is_err());
        let small = good_set_probability_bound(2, 1.0, 0.01, 2.0, 0.3).unwrap();
        assert!(small < 1e-300);
    }

    #[test]
    fn counting_impulses() {
        let mut s = ImpulseSchedule::default();
        s.push(1.0, 0.0, 0.0);
        s.push(2.2, 0.0, 0.0);
        assert_eq!(impulse_count(&s, 0.5), 0);
        assert_eq!(impulse_count(&s, 1.0), 1);
        assert_eq!(impulse_count(&s, 3.0), 2);
    }
}
