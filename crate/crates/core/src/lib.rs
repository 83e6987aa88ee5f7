//! Numerical laboratory for branching Brownian motion with selection.
//!
//! * [`theta`]: killed-Brownian-motion kernels built on a Jacobi theta function.
//! * [`absorbed`]: branching Brownian motion absorbed at a line, its absorbed
//!   counts and the travelling wave they are dual to.
//! * [`selection`]: N-BBM, N-BRW, the cutoff front and monotone couplings.
//! * [`levy`]: the Lévy process describing the front's fluctuations and the
//!   mesoscopic breakout model converging to it.
//! * [`stable_pp`]: decorated Poisson point processes and their superposability.
//! * [`harness`]: seeded, parallel experiment runner with CSV/JSON output.

pub mod absorbed;
pub mod error;
pub mod harness;
pub mod levy;
pub mod quad;
pub mod seed;
pub mod selection;
pub mod stable_pp;
pub mod stats;
pub mod theta;

pub use error::{Error, Result};
