use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("x = {x} lies outside the domain [0, {end})")]
    Domain { x: f64, end: f64 },

    #[error("{name} = {value} is out of range: {expected}")]
    Range {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("step size underflow at x = {x}; the system is stiff here, try trace normalization")]
    StepUnderflow { x: f64 },

    #[error("step budget of {steps} exhausted at x = {x}; try trace normalization")]
    StepBudget { x: f64, steps: u64 },

    #[error("non-finite state at x = {x}")]
    NonFinite { x: f64 },

    #[error("every probe was inconclusive: {0}")]
    AllInconclusive(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Wronskian p'q - q'p = {value} at x = {x}, expected 1")]
    Wronskian { x: f64, value: f64 },

    #[error("det H = {value} at x = {x}, expected 1")]
    Determinant { x: f64, value: f64 },

    #[error("the zero vector has no direction")]
    ZeroVector,

    #[error("solution vanishes in [{a}, {b}]")]
    SolutionVanishes { a: f64, b: f64 },

    #[error("inputs come from different systems: `{0}` vs `{1}`")]
    MismatchedField(String, String),

    #[error("tail integral appears divergent: {0}")]
    Divergent(String),

    #[error("parse error: {0}")]
    Parse(String),
}
