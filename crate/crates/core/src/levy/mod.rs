//! The Lévy process `L` with jump measure `π² Λ`, where `Λ` is the image of
//! `x^{-2} dx` on `(0, ∞)` under `x ↦ log(1 + x)`, and the mesoscopic
//! breakout model whose barrier converges to it.
//!
//! The tail of `Λ` is `1/(e^y - 1)` and its moments are `∫ y^n Λ(dy) = n! ζ(n)`:
//!
//! ```
//! use bbm_lab::levy::{levy_tail, moment_n};
//!
//! assert!((levy_tail(2f64.ln()).unwrap() - 1.0).abs() < 1e-15);
//! let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
//! assert!((moment_n(2).unwrap().value - 2.0 * zeta2).abs() < 1e-9);
//! ```

mod compare;
mod measure;
mod meso;
mod path;

pub use compare::{centered, distribution_compare, DistributionComparison};
pub use measure::{cumulant_n, levy_charfn, levy_density, levy_tail, moment_n, sampled_charfn, LevySpec};
pub use meso::{meso_front_run, MesoParams, MesoRun, WSource, RELAXATION};
pub use path::{levy_increments, sample_levy_path, PathSample};
