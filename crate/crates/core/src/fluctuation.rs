//! First-order fluctuation process `Z = (R¹, Θ¹)` linearised along the
//! deterministic trajectory and driven by the same `W` as the simulation.

use crate::cadlag::CadlagPath;
use crate::error::{Error, Result};
use crate::rng::{BrownianRecord, ReplicaSeed};
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationPath {
    pub r1: CadlagPath,
    /// Identically zero; kept as a path so `Z` has the shape of the state.
    pub theta1: CadlagPath,
    /// Seed of the Brownian record that drove `R¹`.
    pub seed: ReplicaSeed,
}

/// Euler-Maruyama for `dR¹ = b'(r(t)) R¹ dt + dW` on the sample times of
/// `det`, with `R¹(0) = 0` and `R¹(t_k) = h'(r(t_k⁻)) R¹(t_k⁻)` at impacts.
/// `W` is read from `record` at grid time, so `Z` and the simulated path
/// share one driver.
pub fn fluctuation_path(
    spec: &SystemSpec,
    det: &CadlagPath,
    record: &BrownianRecord,
    horizon: f64,
    dt: f64,
) -> Result<FluctuationPath> {
    record.check_grid(dt, horizon)?;
    if det.horizon() != horizon {
        return Err(Error::Alignment(format!(
            "deterministic path ends at {} but the horizon is {horizon}",
            det.horizon()
        )));
    }
    if det.dim() != 2 {
        return Err(Error::Alignment(format!("expected an (r, θ) path, got dimension {}", det.dim())));
    }
    let grid = record.grid();
    let segs = det.segments();
    let mut r1_segments = Vec::with_capacity(segs.len());
    let mut theta_segments = Vec::with_capacity(segs.len());
    let mut z = 0.0;
    for (k, seg) in segs.iter().enumerate() {
        let times = seg.times();
        let vals = seg.values();
        if k > 0 {
            let prev = &segs[k - 1];
            let pre = prev.values()[(prev.len() - 1) * 2];
            z *= spec.h_prime(pre);
        }
        for &t in &times[1..times.len().saturating_sub(1)] {
            if grid.time(grid.interval_of(t)) != t {
                return Err(Error::Alignment(format!("sample time {t} is not on the dt = {dt} grid")));
            }
        }
        let mut out = Vec::with_capacity(times.len());
        out.push(z);
        for j in 1..times.len() {
            let h = times[j] - times[j - 1];
            let r = vals[(j - 1) * 2];
            z += spec.b_prime(r) * z * h + (record.w_at(times[j]) - record.w_at(times[j - 1]));
            out.push(z);
        }
        r1_segments.push((times.to_vec(), out));
        theta_segments.push((times.to_vec(), vec![0.0; times.len()]));
    }
    Ok(FluctuationPath {
        r1: CadlagPath::from_segments(horizon, 1, r1_segments)?,
        theta1: CadlagPath::from_segments(horizon, 1, theta_segments)?,
        seed: record.seed(),
    })
}

/// `x(t) + ε Z(t)` on the samples of `det`.
pub fn first_order_approximation(det: &CadlagPath, z: &FluctuationPath, epsilon: f64) -> Result<CadlagPath> {
    let zs = z.r1.segments();
    let ds = det.segments();
    let aligned = det.horizon() == z.r1.horizon()
        && ds.len() == zs.len()
        && ds.iter().zip(zs).all(|(a, b)| a.times() == b.times());
    if !aligned {
        return Err(Error::Alignment("fluctuation and deterministic paths use different samples".into()));
    }
    det.map_samples(det.dim(), |k, i, _, v| {
        let mut out = v.to_vec();
        out[0] += epsilon * zs[k].values()[i];
        out
    })
}
