use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input (bad class, wrong word length, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A model or sampler configuration that cannot be run.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Random graph generation gave up before finding a connected graph.
    #[error("no connected graph after {attempts} attempts (n={n}, q={q}); q is likely too small")]
    GraphGeneration { n: usize, q: f64, attempts: usize },

    /// A sampler exceeded its horizon cap without detecting coalescence.
    #[error("no coalescence within horizon cap {cap}")]
    HorizonExceeded { cap: u64 },

    /// An enumeration would exceed the configured state-space cap.
    #[error("state space of size {size} exceeds cap {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
