//! Simulation and analysis of a planar system with impulse effects under
//! small Brownian perturbation.
//!
//! The deterministic system evolves in polar coordinates with `dr/dt = b(r)`
//! and `dθ/dt = 1`; when `θ` reaches the wedge angle `α` the state resets to
//! `(h(r), 0)`. The perturbed system adds `ε dW` radially and `ε^p dB`
//! angularly. The crate compares the two in Skorohod space.

pub mod cadlag;
pub mod error;
pub mod experiments;
pub mod fluctuation;
pub mod format;
pub mod fpt;
pub mod rng;
pub mod stochastic;
pub mod system;

pub use error::{Error, Result};
