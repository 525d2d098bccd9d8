use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least {min}, got {d}")]
    InvalidDimension { d: usize, min: usize },

    #[error("norm m must be at least 1, got {0}")]
    InvalidNorm(u64),

    #[error("norm m = {m} exceeds the supported maximum {max}")]
    NormTooLarge { m: u64, max: u64 },

    #[error("no lattice points with |x|² = {m} in dimension {d}")]
    NoLatticePoints { d: usize, m: u64 },

    #[error("strict mode requires odd m in dimension 4, got m = {0}")]
    EvenNormInDimensionFour(u64),

    #[error("unknown equidistribution test function index {0}")]
    UnknownTestFunction(usize),

    #[error("table would hold {entries} entries, above the cap of {cap}")]
    TableTooLarge { entries: u64, cap: u64 },

    #[error("estimated work {needed} exceeds the budget {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("moment order k = {0} is outside the supported range 1..=8")]
    MomentOrderOutOfRange(u32),

    #[error("moment limit requires an even k >= 2, got {0}")]
    OddMomentLimit(u32),

    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("inconsistent input: {0}")]
    Mismatch(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
