//! Error types. Diagnostics carry `f64` copies of the offending values so
//! the enums stay independent of the scalar parameter.

use thiserror::Error;

/// Errors from point-geometry operations on a surface model.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("points coincide: distance {dist:e} is below the singularity guard {guard:e}")]
    CoincidentPoints { dist: f64, guard: f64 },
    #[error("tangent step of length {len:e} exceeds the injectivity bound {bound:e}")]
    StepTooLarge { len: f64, bound: f64 },
}

/// Errors from spectral solves.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectralError {
    #[error("right-hand side has mean {mean:e}, above the compatibility tolerance {tol:e}")]
    NonZeroMean { mean: f64, tol: f64 },
}

/// Errors from problem-data construction and derivations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProblemError {
    #[error("conical order alpha[{index}] = {alpha} violates alpha > -1")]
    OrderOutOfRange { index: usize, alpha: f64 },
    #[error("conical order alpha[{index}] = 0 carries no singular part")]
    ZeroOrder { index: usize },
    #[error("singular points {i} and {j} coincide (distance {dist:e})")]
    DuplicateSingularPoints { i: usize, j: usize, dist: f64 },
    #[error("singular point {index} lies within {dist:e} of the sampled zero level set of K (tolerance {tol:e})")]
    OnNodalLine { index: usize, dist: f64, tol: f64 },
    #[error("evaluation point coincides with singular point {index}")]
    AtSingularPoint { index: usize },
    #[error("component topology unstable under refinement: {coarse} components at base resolution, {fine} after refining")]
    GridTooCoarse { coarse: usize, fine: usize },
    #[error("curvature family {family} is only defined on the {surface}")]
    SurfaceMismatch {
        family: &'static str,
        surface: &'static str,
    },
}

/// Errors from the reduced-energy functionals.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnergyError {
    #[error("configuration lies outside the admissible domain: {reason}")]
    OutOfDomain { reason: String },
    #[error("order parameter s[{index}] = {value} outside the box [{lo}, {hi}]")]
    SOutOfBox {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("the configuration ball of radius {needed:e} around the base point leaves the domain: {reason}")]
    BallNotInDomain { needed: f64, reason: String },
}

/// Errors from critical-point search and the min-max scheme.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SearchError {
    #[error("gradient norm {grad_norm:e} exceeds the stationarity threshold {tol:e}")]
    NotCritical { grad_norm: f64, tol: f64 },
    #[error("every start escaped the barrier set during {mode} search")]
    DomainEscape { mode: &'static str },
    #[error("retraction case {case} does not match the surface topology: {reason}")]
    TopologyMismatch { case: &'static str, reason: String },
    #[error("no feasible splitting: N = {n} exceeds l + sum of lower integer parts = {capacity}")]
    NoFeasibleSplit { n: usize, capacity: i64 },
    #[error("min-max setup infeasible: {reason}")]
    SetupInfeasible { reason: String },
}

/// Errors from the blow-up verification suite.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum VerifyError {
    #[error("concentration scale {scale:e} exceeds the bound {bound:e}")]
    ScaleTooLarge { scale: f64, bound: f64 },
    #[error("concentration balls {i} and {j} overlap: centre distance {dist:e} < 2r = {two_r:e}")]
    BallsOverlap {
        i: usize,
        j: usize,
        dist: f64,
        two_r: f64,
    },
    #[error("integral of K-tilde * exp(v) is {value:e}, outside the admissible domain (must be positive)")]
    DomainX { value: f64 },
    #[error("ansatz normalisation failed: {reason}")]
    NormalizationFailed { reason: String },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}
