use thiserror::Error;

/// Errors raised by the kernels, simulators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration file or parameter table is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// A simulation exceeded its event cap. The run is not a bug: it signals an
    /// atypically large family. `partial` holds what was counted so far.
    #[error("event cap of {cap} exceeded (partial count {partial})")]
    CapExceeded { cap: u64, partial: u64 },

    /// A statistic cannot be estimated from the available sample.
    #[error("insufficient statistical power: {0}")]
    StatisticalPower(String),

    /// A numerical solver (quadrature, ODE, root finder) failed.
    #[error("solver failure: {0}")]
    Solver(String),

    /// An internal invariant of a coupling construction was violated.
    #[error("construction error: {0}")]
    Construction(String),

    /// The lattice front outgrew its window.
    #[error("window overflow: {0}")]
    WindowOverflow(String),

    /// One or more built-in checks failed.
    #[error("self-test failed: {0}")]
    SelfTest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
