use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A representation change left imaginary parts above tolerance.
    #[error("imaginary residue {residue:e} exceeds tolerance (inconsistent SLH input?)")]
    ImaginaryResidue { residue: f64 },

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },

    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("channel partition mismatch: {0}")]
    ChannelPartition(String),

    #[error("lower bound is only defined for order-2 plant and controller, got {0}")]
    WrongOrder(String),

    #[error("coordinate change violates Sigma*Xi^T = I - X*Y (residual {residual:e})")]
    ConstraintViolated { residual: f64 },

    #[error("singular transform: {0}")]
    SingularTransform(String),

    #[error("genome length {got} does not match search space length {expected}")]
    GenomeLength { expected: usize, got: usize },

    #[error("no feasible individual found in any generation")]
    NoFeasible,

    /// Carries the best candidate found.
    #[error("no verified candidate after {iterations} iterations")]
    MaxIterations { iterations: usize, best: Box<crate::lmi::CandidateSolution> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
