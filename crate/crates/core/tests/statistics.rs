use std::f64::consts::FRAC_PI_2;

use skorolab::experiments::{clt_experiment, ks_two_sample, ks_two_sample_statistic, sample_schedules, ExperimentConfig};
use skorolab::stochastic::{classify_good_set, good_set_probability_bound, NoiseParams};
use skorolab::system::{Drift, Reset, SystemSpec};

fn exemplar() -> SystemSpec {
    SystemSpec::builtin(Drift::Constant(0.2), Reset::Linear(0.5), FRAC_PI_2, 1.0).unwrap()
}

#[test]
fn inter_impact_times_are_identically_distributed() {
    let spec = exemplar();
    let noise = NoiseParams::theorem_regime(0.2, 2.0).unwrap();
    let scheds = sample_schedules(&spec, &noise, 2.6 * FRAC_PI_2, FRAC_PI_2 / 1000.0, 31, 3000).unwrap();
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for s in &scheds {
        if s.len() >= 2 {
            first.push(s.times[0]);
            second.push(s.times[1] - s.times[0]);
        }
    }
    assert!(first.len() > 2900);
    let ks = ks_two_sample(&first, &second, 0.01).unwrap();
    assert!(ks.pass, "D = {} > {}", ks.statistic, ks.critical);
}

#[test]
fn first_impact_law_stable_under_step_halving() {
    let spec = exemplar();
    let noise = NoiseParams::theorem_regime(0.2, 2.0).unwrap();
    let horizon = 1.5 * FRAC_PI_2;
    let coarse = sample_schedules(&spec, &noise, horizon, FRAC_PI_2 / 400.0, 41, 20000).unwrap();
    let fine = sample_schedules(&spec, &noise, horizon, FRAC_PI_2 / 800.0, 43, 20000).unwrap();
    let a: Vec<f64> = coarse.iter().map(|s| s.times[0]).collect();
    let b: Vec<f64> = fine.iter().map(|s| s.times[0]).collect();
    let d = ks_two_sample_statistic(&a, &b).unwrap();
    assert!(d < 0.02, "D = {d}");
}

#[test]
fn bad_set_frequency_below_bound() {
    let spec = exemplar();
    let (eps, p, delta, n) = (0.2, 2.0, 0.25, 2);
    let noise = NoiseParams::theorem_regime(eps, p).unwrap();
    let replicas = 10000;
    let scheds = sample_schedules(&spec, &noise, 4.0, 1e-3, 51, replicas).unwrap();
    let bad = scheds
        .iter()
        .filter(|s| !classify_good_set(s, FRAC_PI_2, n, delta).is_good)
        .count();
    let freq = bad as f64 / replicas as f64;
    let bound = good_set_probability_bound(n as u32, FRAC_PI_2, eps, p, delta).unwrap();
    // one-sided binomial allowance at the bound, z = 3.09
    let slack = 3.09 * (bound.min(1.0) * (1.0 - bound.min(1.0)) / replicas as f64).sqrt();
    assert!(freq <= bound + slack, "frequency {freq} above bound {bound}");
}

#[test]
fn fluctuation_correction_does_not_hurt() {
    let mut cfg = ExperimentConfig::standard(61);
    cfg.replicas = 500;
    let report = clt_experiment(&cfg, &exemplar()).unwrap();
    for row in &report.rows {
        let (lln, lln_se) = (row.lln_mean.unwrap(), row.lln_stderr.unwrap());
        let tol = 2.0 * (row.stderr.powi(2) + lln_se.powi(2)).sqrt();
        assert!(
            row.mean_distance <= lln + tol,
            "eps {}: {} vs {lln}",
            row.epsilon,
            row.mean_distance
        );
    }
}
