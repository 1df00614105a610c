//! Browser demo: sample paths, the passage-time law and a Skorohod toy.
//!
//! The `*_data` functions hold the logic and run natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use std::f64::consts::FRAC_PI_2;

use skorolab::cadlag::{build_aligning_distortion, skorohod_oracle, skorohod_upper, uniform_distance, CadlagPath};
use skorolab::fpt::FptParams;
use skorolab::rng::ReplicaSeed;
use skorolab::stochastic::{simulate_path, NoiseParams};
use skorolab::system::{deterministic_trajectory, Drift, Reset, SystemSpec};
use wasm_bindgen::prelude::*;

const HORIZON: f64 = 4.0;
const DT: f64 = 2e-3;

fn exemplar() -> Result<SystemSpec, String> {
    SystemSpec::builtin(Drift::Constant(0.2), Reset::Linear(0.5), FRAC_PI_2, 1.0).map_err(|e| e.to_string())
}

/// Radius against time, NaN between segments so a polyline breaks at jumps.
fn radius_polyline(path: &CadlagPath, out: &mut Vec<f64>) {
    for (k, seg) in path.segments().iter().enumerate() {
        if k > 0 {
            out.extend([f64::NAN, f64::NAN]);
        }
        for (t, v) in seg.times().iter().zip(seg.values().chunks(path.dim())) {
            out.extend([*t, v[0]]);
        }
    }
}

/// Flattened `(t, r)` pairs: the deterministic path first, then `count`
/// perturbed paths, each terminated by an `(∞, ∞)` pair.
pub fn paths_data(epsilon: f64, p: f64, count: u32, seed: u64) -> Result<Vec<f64>, String> {
    let spec = exemplar()?;
    let noise = NoiseParams::theorem_regime(epsilon, p).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    let (det, _) = deterministic_trajectory(&spec, HORIZON, DT).map_err(|e| e.to_string())?;
    radius_polyline(&det, &mut out);
    out.extend([f64::INFINITY, f64::INFINITY]);
    for i in 0..count {
        let (path, _, _) = simulate_path(&spec, &noise, HORIZON, DT / 2.0, ReplicaSeed::new(seed, u64::from(i)))
            .map_err(|e| e.to_string())?;
        radius_polyline(&path, &mut out);
        out.extend([f64::INFINITY, f64::INFINITY]);
    }
    Ok(out)
}

/// `[t, pdf, cdf]` triples on `n` points of `(0, α + 8 ε^p √α]`, followed
/// by `samples` simulated first passage times (prefixed by their count).
pub fn fpt_data(epsilon: f64, p: f64, n: u32, samples: u32, seed: u64) -> Result<Vec<f64>, String> {
    let spec = exemplar()?;
    let alpha = spec.alpha();
    let params = FptParams::from_noise(alpha, epsilon, p).map_err(|e| e.to_string())?;
    let top = alpha + 8.0 * params.eps_p() * alpha.sqrt();
    let bottom = (alpha - 8.0 * params.eps_p() * alpha.sqrt()).max(0.0);
    let mut out = Vec::with_capacity(3 * n as usize + samples as usize + 1);
    for i in 1..=n {
        let t = bottom + (top - bottom) * f64::from(i) / f64::from(n);
        out.extend([t, params.density_or_zero(t), params.cdf(t)]);
    }
    out.push(f64::from(samples));
    let noise = NoiseParams::theorem_regime(epsilon, p).map_err(|e| e.to_string())?;
    for i in 0..samples {
        let (_, sched, _) = simulate_path(&spec, &noise, 1.5 * alpha, alpha / 400.0, ReplicaSeed::new(seed, u64::from(i)))
            .map_err(|e| e.to_string())?;
        out.push(sched.times.first().copied().unwrap_or(f64::NAN));
    }
    Ok(out)
}

/// Unit step at `a` against a step of height `height` at `b` on `[0, 1]`:
/// `[uniform, aligned upper bound, oracle]`.
pub fn step_data(a: f64, b: f64, height: f64) -> Result<Vec<f64>, String> {
    let x1 = CadlagPath::step(1.0, &[a], &[vec![0.0], vec![1.0]]).map_err(|e| e.to_string())?;
    let x2 = CadlagPath::step(1.0, &[b], &[vec![0.0], vec![height]]).map_err(|e| e.to_string())?;
    let lambda = build_aligning_distortion(&[a], &[b], 1.0, true).map_err(|e| e.to_string())?;
    let uniform = uniform_distance(&x1, &x2).map_err(|e| e.to_string())?;
    let upper = skorohod_upper(&x1, &x2, &lambda).map_err(|e| e.to_string())?;
    let oracle = skorohod_oracle(&x1, &x2, 128).map_err(|e| e.to_string())?;
    Ok(vec![uniform, upper, oracle])
}

#[wasm_bindgen]
pub fn simulate_paths(epsilon: f64, p: f64, count: u32, seed: u64) -> Result<Vec<f64>, JsError> {
    paths_data(epsilon, p, count, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fpt_curve(epsilon: f64, p: f64, n: u32, samples: u32, seed: u64) -> Result<Vec<f64>, JsError> {
    fpt_data(epsilon, p, n, samples, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn skorohod_step_demo(a: f64, b: f64, height: f64) -> Result<Vec<f64>, JsError> {
    step_data(a, b, height).map_err(|e| JsError::new(&e))
}
