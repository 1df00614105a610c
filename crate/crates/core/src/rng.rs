//! Seeded Brownian drivers.
//!
//! Every replica draws from ChaCha8 keyed by the master seed, with the
//! replica index selecting the stream: stream `2r` feeds `W`, stream `2r+1`
//! feeds `B`. ChaCha is counter based, so streams never overlap and a
//! replica's numbers do not depend on which thread produced them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ReplicaSeed {
    pub master: u64,
    pub replica: u64,
}

impl ReplicaSeed {
    pub fn new(master: u64, replica: u64) -> Self {
        Self { master, replica }
    }

    fn stream(&self, which: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.replica.wrapping_mul(2).wrapping_add(which));
        rng
    }
}

impl From<u64> for ReplicaSeed {
    fn from(master: u64) -> Self {
        Self { master, replica: 0 }
    }
}

/// Time grid shared by every simulator: `t_i = i dt` for `i < n`, `t_n = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dt: f64,
    pub horizon: f64,
    pub intervals: usize,
}

impl Grid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        let intervals = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            dt,
            horizon,
            intervals,
        })
    }

    pub fn time(&self, i: usize) -> f64 {
        if i >= self.intervals {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }

    /// Index of the grid interval containing `t` (the last one for `t = T`).
    pub fn interval_of(&self, t: f64) -> usize {
        let i = (t / self.dt).floor();
        let mut i = if i < 0.0 { 0 } else { i as usize };
        i = i.min(self.intervals - 1);
        // guard against floor landing one cell off at exact grid points
        while i + 1 < self.intervals && self.time(i + 1) <= t {
            i += 1;
        }
        while i > 0 && self.time(i) > t {
            i -= 1;
        }
        i
    }
}

/// Grid increments of the two independent Brownian motions `W` (radial) and
/// `B` (angular). Between grid points both are linearly interpolated, so any
/// sub-step uses exactly its share of the grid increment and nothing is
/// reused across an impulse.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianRecord {
    grid: Grid,
    seed: ReplicaSeed,
    w_increments: Vec<f64>,
    b_increments: Vec<f64>,
    w_cumulative: Vec<f64>,
    b_cumulative: Vec<f64>,
}

impl BrownianRecord {
    pub fn generate(dt: f64, horizon: f64, seed: impl Into<ReplicaSeed>) -> Result<Self> {
        let seed = seed.into();
        let grid = Grid::new(dt, horizon)?;
        let mut w_rng = seed.stream(0);
        let mut b_rng = seed.stream(1);
        let mut w = Vec::with_capacity(grid.intervals);
        let mut b = Vec::with_capacity(grid.intervals);
        for i in 0..grid.intervals {
            let sd = (grid.time(i + 1) - grid.time(i)).sqrt();
            let zw: f64 = StandardNormal.sample(&mut w_rng);
            let zb: f64 = StandardNormal.sample(&mut b_rng);
            w.push(sd * zw);
            b.push(sd * zb);
        }
        Ok(Self::from_parts(grid, seed, w, b))
    }

    /// Builds a record from explicit increments (one per grid interval).
    pub fn from_increments(dt: f64, horizon: f64, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(dt, horizon)?;
        if w.len() != grid.intervals || b.len() != grid.intervals {
            return Err(Error::Alignment(format!(
                "expected {} increments, got {} and {}",
                grid.intervals,
                w.len(),
                b.len()
            )));
        }
        Ok(Self::from_parts(grid, ReplicaSeed::default(), w, b))
    }

    fn from_parts(grid: Grid, seed: ReplicaSeed, w: Vec<f64>, b: Vec<f64>) -> Self {
        let cumulate = |inc: &[f64]| {
            let mut c = Vec::with_capacity(inc.len() + 1);
            c.push(0.0);
            let mut acc = 0.0;
            for x in inc {
                acc += x;
                c.push(acc);
            }
            c
        };
        Self {
            grid,
            seed,
            w_cumulative: cumulate(&w),
            b_cumulative: cumulate(&b),
            w_increments: w,
            b_increments: b,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn seed(&self) -> ReplicaSeed {
        self.seed
    }

    pub fn w_increments(&self) -> &[f64] {
        &self.w_increments
    }

    pub fn b_increments(&self) -> &[f64] {
        &self.b_increments
    }

    pub fn w_at(&self, t: f64) -> f64 {
        self.interpolate(&self.w_cumulative, t)
    }

    pub fn b_at(&self, t: f64) -> f64 {
        self.interpolate(&self.b_cumulative, t)
    }

    fn interpolate(&self, cumulative: &[f64], t: f64) -> f64 {
        let i = self.grid.interval_of(t);
        let (a, b) = (self.grid.time(i), self.grid.time(i + 1));
        let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
        cumulative[i] + w * (cumulative[i + 1] - cumulative[i])
    }

    /// Same record with every increment of `W` multiplied by `c`.
    pub fn scaled_w(&self, c: f64) -> Self {
        let w = self.w_increments.iter().map(|x| c * x).collect();
        Self::from_parts(self.grid, self.seed, w, self.b_increments.clone())
    }

    /// Ensures the record was drawn on the grid `(dt, horizon)`.
    pub fn check_grid(&self, dt: f64, horizon: f64) -> Result<()> {
        if self.grid.dt != dt || self.grid.horizon != horizon {
            return Err(Error::Alignment(format!(
                "Brownian record is on grid (dt={}, T={}) but (dt={dt}, T={horizon}) was requested",
                self.grid.dt, self.grid.horizon
            )));
        }
        Ok(())
    }
}
