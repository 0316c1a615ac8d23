use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid root of unity: N={n}, m={m} ({reason})")]
    InvalidRoot { n: u32, m: u32, reason: &'static str },
    #[error("q - 1/q vanishes, q-numbers are undefined")]
    DegenerateQ,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("interpolation failed: {0}")]
    Interpolation(String),
    #[error("root finder did not converge after {iterations} iterations ({found} of {degree} roots settled)")]
    RootsNotConverged { iterations: usize, found: usize, degree: usize },
    #[error("eigenvector check failed: {0}")]
    NotEigenvector(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("linear system: {0}")]
    LinearSystem(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
