//! Monte Carlo estimation of distance moments across an `ε` grid, rate
//! fitting and Kolmogorov-Smirnov checks.

use rayon::prelude::*;

use crate::cadlag::{build_aligning_distortion, skorohod_oracle, skorohod_upper, uniform_distance, CadlagPath};
use crate::error::{Error, Result};
use crate::fluctuation::{first_order_approximation, fluctuation_path};
use crate::rng::ReplicaSeed;
use crate::stochastic::{classify_good_set, simulate_path, NoiseParams};
use crate::system::{deterministic_trajectory, ImpulseSchedule, SystemSpec};

/// Grid resolution used when the oracle calibration is requested.
pub const CALIBRATION_ORACLE_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Lln,
    Clt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lln => "lln",
            Mode::Clt => "clt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub eps_grid: Vec<f64>,
    pub replicas: usize,
    pub beta: u32,
    pub nu: f64,
    pub p: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Also report the uniform distance and, on small instances, the
    /// brute-force oracle.
    pub calibrate: bool,
    /// CLT only: replace `Z` by zero.
    pub zero_fluctuation: bool,
}

impl ExperimentConfig {
    /// The desk-scale defaults: `ε ∈ {0.02, 0.05, 0.1, 0.2}`, `M = 2000`,
    /// `β = 1`, `p = 2`, `ν = 1.5`, `Δt = 1e-3`, `T = 4`.
    pub fn standard(seed: u64) -> Self {
        Self {
            eps_grid: vec![0.02, 0.05, 0.1, 0.2],
            replicas: 2000,
            beta: 1,
            nu: 1.5,
            p: 2.0,
            dt: 1e-3,
            horizon: 4.0,
            seed,
            calibrate: false,
            zero_fluctuation: false,
        }
    }

    pub fn validate(&self, spec: &SystemSpec) -> Result<usize> {
        if self.eps_grid.is_empty() {
            return Err(Error::param("eps_grid", "must not be empty"));
        }
        for &e in &self.eps_grid {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::param("eps_grid", format!("every value must lie in (0, 1), got {e}")));
            }
        }
        if self.replicas == 0 {
            return Err(Error::param("replicas", "must be positive"));
        }
        if !(self.beta == 1 || self.beta == 2) {
            return Err(Error::param("beta", format!("must be 1 or 2, got {}", self.beta)));
        }
        if !(self.p > 1.0) {
            return Err(Error::param("p", format!("must exceed 1, got {}", self.p)));
        }
        if !(self.nu > 1.0 && self.nu < self.p) {
            return Err(Error::param("nu", format!("must satisfy 1 < nu < p = {}, got {}", self.p, self.nu)));
        }
        spec.horizon_index(self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSummary {
    pub epsilon: f64,
    /// Mean of `d̂^β`.
    pub mean_distance: f64,
    pub stderr: f64,
    pub bad_freq: f64,
    pub replicas: usize,
    pub uniform_mean: Option<f64>,
    pub oracle_mean: Option<f64>,
    /// CLT runs: the LLN mean on the same seeds.
    pub lln_mean: Option<f64>,
    pub lln_stderr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub beta: u32,
    pub nu: f64,
    pub p: f64,
    pub seed: u64,
    pub rows: Vec<EpsilonSummary>,
    /// `None` with fewer than three `ε` values.
    pub fit: Option<RateFit>,
    /// CLT runs: the LLN fit on the same seeds.
    pub lln_fit: Option<RateFit>,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    distance: f64,
    lln: f64,
    good: bool,
    uniform: f64,
    oracle: f64,
}

struct Setup<'a> {
    spec: &'a SystemSpec,
    config: &'a ExperimentConfig,
    det: CadlagPath,
    det_times: Vec<f64>,
    n: usize,
}

impl Setup<'_> {
    fn replica(&self, mode: Mode, noise: &NoiseParams, index: usize) -> Result<Outcome> {
        let c = self.config;
        let eps = noise.epsilon();
        let seed = ReplicaSeed::new(c.seed, index as u64);
        let (path, schedule, record) = simulate_path(self.spec, noise, c.horizon, c.dt, seed)?;
        let delta = eps.powf(c.nu);
        let good = classify_good_set(&schedule, self.spec.alpha(), self.n, delta).is_good;
        let lambda = build_aligning_distortion(&self.det_times, &schedule.times, c.horizon, good)?;
        let lln = skorohod_upper(&self.det, &path, &lambda)?;
        let (target, distance) = match mode {
            Mode::Lln => (None, lln),
            Mode::Clt => {
                let z = fluctuation_path(self.spec, &self.det, &record, c.horizon, c.dt)?;
                let scale = if c.zero_fluctuation { 0.0 } else { eps };
                let target = first_order_approximation(&self.det, &z, scale)?;
                let d = skorohod_upper(&target, &path, &lambda)?;
                (Some(target), d)
            }
        };
        let (mut uniform, mut oracle) = (f64::NAN, f64::NAN);
        if c.calibrate {
            let reference = target.as_ref().unwrap_or(&self.det);
            uniform = uniform_distance(reference, &path)?;
            oracle = match skorohod_oracle(reference, &path, CALIBRATION_ORACLE_RESOLUTION) {
                Ok(v) => v,
                Err(Error::ComplexityGuard { .. }) => f64::NAN,
                Err(e) => return Err(e),
            };
        }
        let b = c.beta as i32;
        Ok(Outcome {
            distance: distance.powi(b),
            lln: lln.powi(b),
            good,
            uniform: uniform.powi(b),
            oracle: oracle.powi(b),
        })
    }
}

fn mean_and_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run(mode: Mode, config: &ExperimentConfig, spec: &SystemSpec) -> Result<ExperimentReport> {
    let n = config.validate(spec)?;
    let (det, schedule) = deterministic_trajectory(spec, config.horizon, config.dt)?;
    let setup = Setup {
        spec,
        config,
        det,
        det_times: schedule.times,
        n,
    };
    let mut rows = Vec::with_capacity(config.eps_grid.len());
    for &eps in &config.eps_grid {
        let noise = NoiseParams::theorem_regime(eps, config.p)?;
        let outcomes = (0..config.replicas)
            .into_par_iter()
            .map(|i| setup.replica(mode, &noise, i))
            .collect::<Result<Vec<_>>>()?;
        let (mean, stderr) = mean_and_stderr(outcomes.iter().map(|o| o.distance));
        let bad = outcomes.iter().filter(|o| !o.good).count();
        let (uniform_mean, oracle_mean) = if config.calibrate {
            let oracle: Vec<f64> = outcomes.iter().map(|o| o.oracle).filter(|v| v.is_finite()).collect();
            let om = (!oracle.is_empty()).then(|| oracle.iter().sum::<f64>() / oracle.len() as f64);
            (Some(mean_and_stderr(outcomes.iter().map(|o| o.uniform)).0), om)
        } else {
            (None, None)
        };
        let (lln_mean, lln_stderr) = match mode {
            Mode::Lln => (None, None),
            Mode::Clt => {
                let (m, s) = mean_and_stderr(outcomes.iter().map(|o| o.lln));
                (Some(m), Some(s))
            }
        };
        rows.push(EpsilonSummary {
            epsilon: eps,
            mean_distance: mean,
            stderr,
            bad_freq: bad as f64 / config.replicas as f64,
            replicas: outcomes.len(),
            uniform_mean,
            oracle_mean,
            lln_mean,
            lln_stderr,
        });
    }
    let fit = if rows.len() >= 3 {
        Some(fit_rate(&rows.iter().map(|r| (r.epsilon, r.mean_distance)).collect::<Vec<_>>())?)
    } else {
        None
    };
    let lln_fit = match (mode, rows.len() >= 3) {
        (Mode::Clt, true) => Some(fit_rate(
            &rows.iter().map(|r| (r.epsilon, r.lln_mean.unwrap_or(f64::NAN))).collect::<Vec<_>>(),
        )?),
        _ => None,
    };
    Ok(ExperimentReport {
        mode,
        beta: config.beta,
        nu: config.nu,
        p: config.p,
        seed: config.seed,
        rows,
        fit,
        lln_fit,
    })
}

/// Mean of `d̂(X^ε, x)^β` where `d̂` is the aligning upper bound with
/// `δ = ε^ν`. Paths outside the good set use the identity distortion.
pub fn lln_experiment(config: &ExperimentConfig, spec: &SystemSpec) -> Result<ExperimentReport> {
    run(Mode::Lln, config, spec)
}

/// Mean of `d̂(X^ε, x + εZ)^β` with `Z` driven by each replica's own `W`.
/// The LLN numbers for the same seeds are reported alongside.
pub fn clt_experiment(config: &ExperimentConfig, spec: &SystemSpec) -> Result<ExperimentReport> {
    run(Mode::Clt, config, spec)
}

/// Least squares of `ln mean` on `ln ε`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Data(format!("need at least 3 points, got {}", points.len())));
    }
    for &(e, m) in points {
        if !(m > 0.0) {
            return Err(Error::Data(format!("mean at epsilon {e} is not positive: {m}")));
        }
        if !(e > 0.0) {
            return Err(Error::Data(format!("epsilon must be positive, got {e}")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("all epsilon values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr: (rss / (n - 2.0) / sxx).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Asymptotic critical constant `c(a) = sqrt(-ln(a/2) / 2)`.
pub fn ks_critical_constant(level: f64) -> f64 {
    (-0.5 * (level / 2.0).ln()).sqrt()
}

/// One-sample Kolmogorov-Smirnov test; passes iff `D < c(level)/√n`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<KsOutcome> {
    if sample.len() < 100 {
        return Err(Error::Data(format!("need at least 100 observations, got {}", sample.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param("level", format!("must lie in (0, 1), got {level}")));
    }
    let mut xs = sample.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Data("sample contains NaN".into()));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let critical = ks_critical_constant(level) / n.sqrt();
    Ok(KsOutcome {
        statistic: d,
        critical,
        pass: d < critical,
    })
}

/// Two-sample statistic `sup |F_a - F_b|`.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Two-sample test; passes iff `D < c(level) sqrt((n + m)/(n m))`.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KsOutcome> {
    let statistic = ks_two_sample_statistic(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let critical = ks_critical_constant(level) * ((n + m) / (n * m)).sqrt();
    Ok(KsOutcome {
        statistic,
        critical,
        pass: statistic < critical,
    })
}

/// Impulse schedules of `replicas` independent paths, in replica order.
pub fn sample_schedules(
    spec: &SystemSpec,
    noise: &NoiseParams,
    horizon: f64,
    dt: f64,
    master: u64,
    replicas: usize,
) -> Result<Vec<ImpulseSchedule>> {
    (0..replicas)
        .into_par_iter()
        .map(|i| simulate_path(spec, noise, horizon, dt, ReplicaSeed::new(master, i as u64)).map(|r| r.1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpt::FptParams;
    use crate::system::{Drift, Reset};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn exemplar() -> SystemSpec {
        SystemSpec::builtin(Drift::Constant(0.2), Reset::Linear(0.5), PI / 2.0, 1.0).unwrap()
    }

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [0.02, 0.05, 0.1, 0.2].iter().map(|&e| (e, e * e)).collect();
        let f = fit_rate(&pts).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-12);
        let pts: Vec<(f64, f64)> = [0.02, 0.05, 0.1, 0.2].iter().map(|&e| (e, 3.0 * e)).collect();
        let f = fit_rate(&pts).unwrap();
        assert_abs_diff_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
        assert!(fit_rate(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
        assert!(fit_rate(&[(0.1, 1.0), (0.2, 1.0)]).is_err());
    }

    #[test]
    fn jittered_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let e = 0.01 * 1.5f64.powi(i);
                (e, e.powf(1.5) * (1.0 + rng.random_range(-0.05..0.05)))
            })
            .collect();
        assert!((fit_rate(&pts).unwrap().slope - 1.5).abs() < 0.05);
    }

    #[test]
    fn ks_null_and_power() {
        let ig = FptParams::new(PI / 2.0, 0.04).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sample: Vec<f64> = (0..5000)
            .map(|_| ig.quantile(rng.random::<f64>()).unwrap())
            .collect();
        assert!(ks_test(&sample, |c| ig.cdf(c), 0.01).unwrap().pass);
        let shifted: Vec<f64> = sample.iter().map(|x| x + 0.2).collect();
        assert!(!ks_test(&shifted, |c| ig.cdf(c), 0.01).unwrap().pass);
        assert!(ks_test(&sample[..50], |c| ig.cdf(c), 0.01).is_err());
        assert!(ks_two_sample(&sample[..2500], &sample[2500..], 0.01).unwrap().pass);
        assert!(!ks_two_sample(&sample[..2500], &shifted[2500..], 0.01).unwrap().pass);
    }

    #[test]
    fn ks_critical_value() {
        assert_abs_diff_eq!(ks_critical_constant(0.01), 1.62762, epsilon = 1e-5);
        assert_abs_diff_eq!(ks_critical_constant(0.05), 1.35810, epsilon = 1e-5);
    }

    #[test]
    fn single_replica_is_reproducible() {
        let spec = exemplar();
        let mut cfg = ExperimentConfig::standard(5);
        cfg.eps_grid = vec![0.1];
        cfg.replicas = 1;
        let a = lln_experiment(&cfg, &spec).unwrap();
        let b = lln_experiment(&cfg, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.fit.is_none());
        assert_eq!(a.rows[0].replicas, 1);
        assert!(a.rows[0].mean_distance > 0.0);
    }

    #[test]
    fn zero_noise_control() {
        let spec = exemplar();
        let mut cfg = ExperimentConfig::standard(5);
        cfg.eps_grid = vec![1e-8];
        cfg.replicas = 4;
        let r = lln_experiment(&cfg, &spec).unwrap();
        assert!(r.rows[0].mean_distance <= 1e-6, "{}", r.rows[0].mean_distance);
        assert_eq!(r.rows[0].bad_freq, 0.0);
    }

    #[test]
    fn zero_fluctuation_reduces_to_lln() {
        let spec = exemplar();
        let mut cfg = ExperimentConfig::standard(9);
        cfg.eps_grid = vec![0.05, 0.1, 0.2];
        cfg.replicas = 16;
        cfg.zero_fluctuation = true;
        let clt = clt_experiment(&cfg, &spec).unwrap();
        let lln = lln_experiment(&cfg, &spec).unwrap();
        for (c, l) in clt.rows.iter().zip(&lln.rows) {
            assert_eq!(c.mean_distance, l.mean_distance);
            assert_eq!(c.lln_mean, Some(l.mean_distance));
            assert_eq!(c.replicas, 16);
        }
        assert_eq!(clt.fit, lln.fit);
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let spec = exemplar();
        let mut cfg = ExperimentConfig::standard(3);
        cfg.eps_grid = vec![0.1];
        cfg.replicas = 12;
        cfg.calibrate = true;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| clt_experiment(&cfg, &spec)).unwrap();
        let b = four.install(|| clt_experiment(&cfg, &spec)).unwrap();
        assert_eq!(a, b);
        let row = &a.rows[0];
        assert!(row.uniform_mean.is_some());
        if let Some(o) = row.oracle_mean {
            assert!(o >= 0.0);
        }
    }

    #[test]
    fn validation() {
        let spec = exemplar();
        let mut cfg = ExperimentConfig::standard(1);
        cfg.nu = 2.0;
        assert!(cfg.validate(&spec).is_err());
        cfg.nu = 1.5;
        cfg.horizon = PI;
        assert!(matches!(cfg.validate(&spec), Err(Error::Horizon { .. })));
        cfg.horizon = 4.0;
        cfg.beta = 3;
        assert!(cfg.validate(&spec).is_err());
    }
}
