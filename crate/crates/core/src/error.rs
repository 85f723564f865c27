use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet size mismatch: expected {expected}, found {found}")]
    AlphabetMismatch { expected: usize, found: usize },

    #[error("symbol {symbol} out of range for alphabet of size {r}")]
    SymbolOutOfRange { symbol: usize, r: usize },

    #[error("depth mismatch: expected {expected}, found {found}")]
    DepthMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no truncation certificate: K' = {kprime} must exceed mu = {mu}")]
    NoCertificate { kprime: f64, mu: f64 },

    #[error("summand exponent {exponent} at N = {n}, word {word:?} exceeds the overflow limit")]
    Overflow { n: usize, word: Vec<u8>, exponent: f64 },

    #[error("family is not monotone in N: A_{next}(w) < A_{n}(w) at word {word:?}", next = n + 1)]
    NotMonotone { n: usize, word: Vec<u8> },

    #[error("non-positive weight {value} at row {row}, branch {branch}")]
    NonPositiveWeight { row: usize, branch: usize, value: f64 },

    #[error(
        "power iteration did not converge after {iterations} iterations \
         (primal residual {primal_residual:e}, dual residual {dual_residual:e})"
    )]
    NotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("measure is not a dual fixed point (residual {residual:e} > {tol:e})")]
    DualNotConverged { residual: f64, tol: f64 },

    #[error("constraint level {alpha} lies outside the open range ({min}, {max})")]
    MaxEntBoundary { alpha: f64, min: f64, max: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("cost budget exceeded: {0}")]
    Budget(String),
}
