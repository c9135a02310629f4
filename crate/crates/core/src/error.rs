use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid machine: {0}")]
    InvalidMachine(String),
    #[error("machine is nondeterministic: commands {0} and {1} overlap")]
    NondeterministicMachine(usize, usize),
    #[error("index out of range: {0}")]
    IndexError(String),
    #[error("power conjugacy ({yi}, {yj}) violates lower-triangularity")]
    TriangularityViolation { yi: usize, yj: usize },
    #[error("brute force over 2^{bits} assignments exceeds the 2^20 limit")]
    TooLarge { bits: usize },
    #[error("rewriting closure exceeded the node cap of {cap}")]
    CoxeterCapExceeded { cap: usize },
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("relator violated: {0}")]
    RelatorViolation(String),
    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("strategy is not good: {0}")]
    NotGoodStrategy(String),
    #[error("{r} is not a primitive root modulo {p}")]
    NotPrimitiveRoot { r: u64, p: u64 },
    #[error("trace constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("operator is not unitary: {0}")]
    NotUnitary(String),
    #[error("eigenvalue {eigenvalue} of operator {index} lies within 1e-8 of the 1/2 threshold")]
    SpectralGapFailure { index: usize, eigenvalue: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
