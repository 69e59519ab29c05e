//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("state has no term with nonzero amplitude")]
    EmptyState,
    #[error("duplicate subsystem `{0}` in basis label")]
    DuplicateSubsystem(String),
    #[error("subsystem `{0}` appears on both sides of a tensor product")]
    SubsystemClash(String),
    #[error("cannot normalize a state with zero norm")]
    ZeroNorm,
    #[error("element addresses modes absent from the state: {0}")]
    ModeMissing(String),
    #[error("element output would merge into an occupied mode: {0}")]
    ModeClash(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid partition: {0}")]
    BadPartition(String),
    #[error("outcome `{0}` has zero probability")]
    ImpossibleOutcome(String),
    #[error("no outcome supplied for subsystem `{0}`")]
    MissingOutcome(String),
    #[error("conditional remainder is still entangled with subsystem `{0}`")]
    EntangledRemainder(String),
    #[error("mixture weights sum to {0}, expected 1")]
    BadWeights(f64),
    #[error("intensity map is empty or identically zero")]
    ZeroIntensity,
    #[error("photon splits into {0} packets; the detector chain supports at most 2")]
    UnsupportedTopology(usize),
    #[error("detector pool exhausted at amplification step {step}")]
    PoolExhausted { step: u64 },
    #[error("no branch has reached the macroscopic threshold")]
    NotMacroscopic,
    #[error("non-physical stochastic step at step {step}")]
    NonPhysical { step: usize },
    #[error("trajectory did not converge within {0} steps")]
    MaxStepsExceeded(usize),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown parameter `{param}` for scenario `{scenario}`")]
    UnknownParameter { scenario: String, param: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
