use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("no convergence: {what} after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("point ({0}, {1}) is outside the domain")]
    OutsideDomain(f64, f64),
    #[error("insufficient ladder: {usable} usable levels, need {needed}")]
    InsufficientLadder { usable: usize, needed: usize },
    #[error("pinching violated: det range [{lo}, {hi}] not inside [{lambda}, {big_lambda}]")]
    PinchingViolated {
        lo: f64,
        hi: f64,
        lambda: f64,
        big_lambda: f64,
    },
    #[error("non-convex iterate: {0}")]
    NonConvexIterate(String),
    #[error("cofactor not positive semidefinite at node {node} (eigenvalue {eig:e})")]
    NotPsd { node: usize, eig: f64 },
    #[error("singular operator: {0}")]
    SingularOperator(String),
    #[error("pole {0} is not interior to the subdomain")]
    PoleOnBoundary(usize),
    #[error("exponent out of range: {0}")]
    ExponentOutOfRange(String),
    #[error("section too small: {0}")]
    SectionTooSmall(String),
    #[error("empty section at height {0}")]
    EmptySection(f64),
    #[error("not a subsolution: residual {0:e}")]
    NotSubsolution(f64),
    #[error("negative solution: min {0:e}")]
    NegativeSolution(f64),
    #[error("minimizer of the potential lies on the boundary")]
    MinimizerOnBoundary,
    #[error("comparison solve failed: {0}")]
    ComparisonSolveFailed(String),
    #[error("side condition violated: {0}")]
    SideConditionViolated(String),
    #[error("geometry check failed: {0}")]
    GeometryCheckFailed(String),
    #[error("geometry unsupported: {0}")]
    GeometryUnsupported(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing outputs: {0}")]
    MissingOutputs(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateDomain(_) => "DegenerateDomain",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::OutsideDomain(..) => "OutsideDomain",
            Error::InsufficientLadder { .. } => "InsufficientLadder",
            Error::PinchingViolated { .. } => "PinchingViolated",
            Error::NonConvexIterate(_) => "NonConvexIterate",
            Error::NotPsd { .. } => "NotPSD",
            Error::SingularOperator(_) => "SingularOperator",
            Error::PoleOnBoundary(_) => "PoleOnBoundary",
            Error::ExponentOutOfRange(_) => "ExponentOutOfRange",
            Error::SectionTooSmall(_) => "SectionTooSmall",
            Error::EmptySection(_) => "EmptySection",
            Error::NotSubsolution(_) => "NotSubsolution",
            Error::NegativeSolution(_) => "NegativeSolution",
            Error::MinimizerOnBoundary => "MinimizerOnBoundary",
            Error::ComparisonSolveFailed(_) => "ComparisonSolveFailed",
            Error::SideConditionViolated(_) => "SideConditionViolated",
            Error::GeometryCheckFailed(_) => "GeometryCheckFailed",
            Error::GeometryUnsupported(_) => "GeometryUnsupported",
            Error::UnknownSuite(_) => "UnknownSuite",
            Error::Config(_) => "ConfigError",
            Error::Parse(_) => "ParseError",
            Error::MissingOutputs(_) => "MissingOutputs",
            Error::Io(_) => "IoError",
        }
    }

    /// True for errors raised by input validation before any compute.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ExponentOutOfRange(_)
                | Error::Config(_)
                | Error::Parse(_)
                | Error::UnknownSuite(_)
                | Error::PinchingViolated { .. }
                | Error::DegenerateDomain(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
