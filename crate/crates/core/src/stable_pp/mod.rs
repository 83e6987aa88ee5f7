//! Superposable point processes. A point process `Z` is superposable when
//! `T_α Z + T_β Z'` has the law of `Z` for every `e^α + e^β = 1`; the
//! decorated Poisson processes with intensity `e^{-x} dx` are exactly these
//! (for finite intensity), and their cumulants obey `K(f(· + x)) = e^x K(f)`.
//!
//! ```
//! use bbm_lab::stable_pp::{sample_dppp, DecorationSpec, PointConfiguration};
//!
//! let z = sample_dppp(&DecorationSpec::fixed(vec![0.0, -1.0]), (-2.0, 10.0), 7).unwrap();
//! assert!(z.atoms().iter().all(|x| (-2.0..=10.0).contains(x)));
//! let shifted: PointConfiguration = z.translate(0.5);
//! assert!(shifted.len() <= z.len());
//! ```

mod functional;
mod process;

pub use functional::{
    cumulant_two_sample, empirical_cumulant, exp_shift_test, intensity_profile, Estimate, IntensityProfile, ShiftTest,
    TestFunction,
};
pub use process::{rightmost, sample_dppp, superpose, Decoration, DecorationSpec, PointConfiguration};
