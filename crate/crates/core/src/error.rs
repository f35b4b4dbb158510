use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = MmtError> = std::result::Result<T, E>;

/// Every failure mode of the library. The CLI maps variants onto exit codes.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum MmtError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measure has zero mass")]
    ZeroMass,

    #[error("quantile level {level} outside (0, {mass}]")]
    OutOfRange { level: f64, mass: f64 },

    #[error("subtrahend exceeds minuend by {excess:e} near x = {at}")]
    NotDominated { at: f64, excess: f64 },

    #[error("source is not dominated in the extended order: violation {slack:e} at k = {point}")]
    NotDominatedE { point: f64, slack: f64 },

    #[error("marginals not in convex order{}: {reason}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    NotInConvexOrder {
        index: Option<usize>,
        point: f64,
        slack: f64,
        reason: String,
    },

    #[error("second measure has an atom at component endpoint {at}")]
    AtomAtComponentEndpoint { at: f64 },

    #[error("marginal mismatch: discrepancy {discrepancy:e}")]
    MarginalMismatch { discrepancy: f64 },

    #[error("coupling is not a martingale: link at {source_x} has barycenter deviation {deviation:e}")]
    NotMartingale { source_x: f64, deviation: f64 },

    #[error("second marginal has an atom at {at}")]
    AtomicSecondMarginal { at: f64 },

    #[error("parts do not sum to the total: discrepancy {discrepancy:e}")]
    NotDecomposition { discrepancy: f64 },

    #[error("input measure has an atom at {at}")]
    AtomicInput { at: f64 },

    #[error("no convergence after {iterations} iterations, residual mass {residual_mass:e}")]
    NoConvergence { iterations: usize, residual_mass: f64 },

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("optimality certificate rejected: {0}")]
    CertificateRejected(String),

    #[error("size cap exceeded: {what} = {got} > {cap}")]
    SizeCap {
        what: &'static str,
        got: usize,
        cap: usize,
    },
}
