use crate::prelude::*;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("eigensolver did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("operator is degenerate: min |eigenvalue| = {min_abs:e} below gap {gap:e}")]
    DegenerateOperator { min_abs: f64, gap: f64 },
    #[error("sign operators differ (window signs or tail flags)")]
    MismatchedJ,
    #[error("operator kinds differ along a path")]
    KindMismatch,
    #[error("could not isolate a crossing in [{lo}, {hi}]")]
    UnresolvedCrossing { lo: f64, hi: f64 },
    #[error("path endpoints do not match (distance {distance:e})")]
    EndpointMismatch { distance: f64 },
    #[error("homotopy slice s = {s} has a degenerate endpoint (margin {margin:e})")]
    EndpointDegenerateInHomotopy { s: f64, margin: f64 },
    #[error("hessian is not symmetric (asymmetry {asymmetry:e})")]
    NonSymmetricHessian { asymmetry: f64 },
    #[error("path endpoint at t = {t} is degenerate (margin {margin:e})")]
    DegenerateEndpoint { t: f64, margin: f64 },
    #[error("newton iteration did not converge (residual {residual:e})")]
    NewtonNoConvergence { best: Vec<f64>, residual: f64 },
    #[error("unknown family or geometry `{0}`")]
    UnknownFamily(String),
    #[error("basepoint lies in the bifurcation mask")]
    MaskedBasepoint,
    #[error("seam witness on axis {axis} does not reproduce the lower edge (error {error:e})")]
    SeamMismatch { axis: usize, error: f64 },
    #[error("metric is singular at the requested point")]
    SingularMetric,
    #[error("geodesic left the chart at t = {t}")]
    ChartExit { t: f64 },
    #[error("transverse frame construction failed: {0}")]
    TangentialDegeneracy(String),
}

pub type Result<T> = core::result::Result<T, Error>;
