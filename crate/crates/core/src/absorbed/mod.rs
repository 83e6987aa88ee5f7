//! Branching Brownian motion absorbed at a line.
//!
//! With drift 1 towards a barrier at distance `y` and branching rate
//! `β₀ = 1/(2m)`, the number `N_y` of absorbed particles is a continuous-time
//! Galton–Watson process in `y` with `E[N_y] = e^y`, and `W_y = y e^{-y} N_y`
//! converges to a limit with tail `P(W > x) ~ 1/x`. Its Laplace transform is the
//! critical travelling wave, solved in [`wave`].

mod experiments;
mod law;
mod sim;
pub mod wave;

pub use experiments::*;
pub use law::ReproductionLaw;
pub use sim::{simulate_absorbed, simulate_with, AbsorptionRun, Caps, Dynamics};
pub use wave::{travelling_wave, TravellingWave, WaveGrid};
