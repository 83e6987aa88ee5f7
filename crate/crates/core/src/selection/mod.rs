//! Particle systems with selection.
//!
//! * N-BBM: branching Brownian motion keeping the `N` rightmost particles,
//!   simulated exactly in continuous time ([`nbbm_run`]).
//! * N-BRW on the integer lattice, by explicit positions or by site counts
//!   for populations up to `10⁶⁰` ([`nbrw_run`]).
//! * The deterministic front with a `1/N` cutoff ([`cutoff_front_speed`]).
//! * Front functionals: `med_α`, speeds and increment cumulants.
//! * The monotone coupling between selection rules ([`coupled_ordering_run`]).

mod coupling;
mod cumulants;
mod front;
mod nbbm;
mod nbrw;

pub use coupling::{
    coupled_ordering_run, coupled_pair, dominated_brute_force, dominated_sorted, CoupledTrace, CouplingHorizon,
    CouplingOutcome, PlusPolicy, SelectionRule,
};
pub use cumulants::{cumulants_of, front_cumulants, lag_increments, FrontCumulants};
pub use front::{
    a_n, median_alpha, mu_n, sample_initial, sample_initial_counted, x_alpha, Atoms, FrontState, FrontTrace,
    SiteCounts,
};
pub use nbbm::{nbbm_run, Initial, Nbbm, NbbmConfig};
pub use nbrw::{cutoff_front_speed, nbrw_run, BrwMode, BrwParams, CountSampler, CutoffOptions, Nbrw, NbrwConfig};
