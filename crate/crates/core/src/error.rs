use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the numeric layers (sieve, oracles, pseudo-inverses).
///
/// Formula parsing and evaluation have their own error types in
/// [`crate::formula`]; they wrap this one when an oracle call fails.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("prime index {index} out of range: the sieve up to {limit} holds {count} primes")]
    PrimeIndex { index: u64, limit: u64, count: u64 },

    #[error("argument {arg} outside the evaluable range of {oracle} (from {start}{})",
        match .end { Some(e) => format!(" to {e}"), None => String::new() })]
    OracleRange {
        oracle: String,
        arg: u64,
        start: u64,
        end: Option<u64>,
    },

    #[error("unbounded search exhausted: no m <= {limit} with f(m+1) > {n}")]
    SearchExhausted { n: u64, limit: u64 },

    #[error("{oracle} is bounded by {sup}; f^-1({n}) is undefined")]
    BoundedOracle { oracle: String, sup: u64, n: u64 },

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("prime table cache: {0}")]
    Cache(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
