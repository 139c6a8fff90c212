//! Exact and asymptotic counting of integer 2×2 matrices with fixed
//! determinant in a box, with the exponential sums, smooth cutoffs and
//! oscillatory integrals used to study the error term.

pub mod arith;
pub mod count;
pub mod decompose;
pub mod experiments;
pub mod expsum;
pub mod oscillatory;
pub mod quad;
pub mod smooth;

pub use arith::ArithError;
pub use count::CountError;
pub use decompose::DecomposeError;
pub use experiments::ExperimentError;
pub use expsum::ExpSumError;
pub use oscillatory::OscError;
pub use quad::QuadError;
pub use smooth::SmoothError;

/// Any error raised by the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    ExpSum(#[from] ExpSumError),
    #[error(transparent)]
    Osc(#[from] OscError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Smooth(#[from] SmoothError),
}
