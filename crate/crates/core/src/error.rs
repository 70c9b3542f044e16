use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("quaternion norm deviates from 1 by {deviation:e}")]
    NonUnitQuaternion { deviation: f64 },
    #[error("integration step {dt} s outside (0, 1]")]
    StepOutOfRange { dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("bearing undefined: goal within {distance:e} m of the airship")]
    BearingUndefined { distance: f64 },
    #[error(
        "unstable gains: requires k_rho > 0, k_epsilon < 0 and k_zeta > k_rho (got k_rho={k_rho}, k_zeta={k_zeta}, k_epsilon={k_epsilon})"
    )]
    UnstableGains { k_rho: f64, k_zeta: f64, k_epsilon: f64 },
    #[error("trim table is empty")]
    EmptyTrimTable,
    #[error("invalid trim table: {0}")]
    InvalidTrimTable(String),
    #[error("sampling time {0} s must be positive")]
    SamplingTime(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("rule needs at least two members, swarm has {0}")]
    SwarmTooSmall(usize),
}

/// Everything that can go wrong while loading or running a scenario.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("simulation aborted at step {step}: {reason}")]
    Aborted { step: u64, reason: String },
    #[error("{path}: bad trace: {message}")]
    Trace { path: PathBuf, message: String },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Swarm(#[from] SwarmError),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), reason: reason.into() }
    }

    /// True for errors caused by bad input rather than by a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. } | Error::Invalid { .. } | Error::Trace { .. })
            || matches!(self, Error::Guidance(GuidanceError::UnstableGains { .. }))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
