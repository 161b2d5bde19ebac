use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by estimation, inference and landscape routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("point {point:?} lies outside the parameter domain")]
    Domain { point: Vec<f64> },
    #[error("non-finite log-density at observation {index}")]
    Evaluation { index: usize },
    #[error("non-finite objective after {} recorded iterates", trajectory.len())]
    Divergence { trajectory: Vec<Vec<f64>> },
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("landscape error: {0}")]
    Landscape(String),
    #[error("ill-conditioned matrix, eigenvalues {eigenvalues:?}")]
    Conditioning { eigenvalues: Vec<f64> },
    #[error("confidence region has no member cells")]
    EmptyRegion,
    #[error("{dropped} of {total} bootstrap replicates dropped")]
    Bootstrap { dropped: usize, total: usize },
    #[error("mixture component {component} has vanishing responsibility")]
    DegenerateComponent { component: usize },
    #[error("point is isolated from every observation")]
    Isolation,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("two-sample test failed: {0}")]
    TwoSample(String),
    #[error("non-finite value propagated: {0}")]
    Propagation(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
