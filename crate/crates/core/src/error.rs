use thiserror::Error;

use crate::ranks::Key;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("success probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: u64, hi: u64 },

    #[error("no weight defined for key {0}")]
    MissingWeight(Key),

    #[error("weight of key {0} must be a positive integer")]
    ZeroWeight(Key),

    #[error("rank exponent c must be at least 1")]
    InvalidExponent,

    #[error("secondary ranks are not tied: one bit string must be a prefix of the other")]
    NotTied,

    #[error("duplicate key {0}")]
    DuplicateKey(Key),

    #[error("keys must be strictly increasing (saw {prev} before {next})")]
    UnsortedKeys { prev: Key, next: Key },

    #[error("skip-list isomorphism needs geometric primary ranks; {0} policy does not draw them")]
    NonGeometricPolicy(&'static str),

    #[error("unknown version {version} (newest is {newest})")]
    UnknownVersion { version: usize, newest: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("harmonic numbers are defined for m >= 1")]
    ZeroHarmonic,

    #[error("position {j} out of range for n = {n}")]
    PositionOutOfRange { j: u64, n: u64 },

    #[error("line fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("log-scale fit needs positive values, got {0}")]
    NonPositive(f64),

    #[error("cannot summarize an empty set of runs")]
    NoRuns,

    #[error("all runs must share n = {expected}, found a run with {found} keys")]
    MixedSizes { expected: usize, found: usize },
}
