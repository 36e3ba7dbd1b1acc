//! Numerical laboratory for the finite-dimensional reduction of the
//! singular prescribed-Gauss-curvature problem on closed surfaces.
//!
//! The crate evaluates the reduced point-configuration energies (Ψ, Φ,
//! D_s) and the sign functional 𝒜 built from Green's functions of -Δ_g,
//! locates and classifies their stable critical points (including a
//! retraction-based max-min scheme), certifies the hypotheses of the
//! associated existence theorems, and verifies the resulting bubble
//! ansatz (mass quantization, Gauss–Bonnet balance, PDE residual) at
//! quadrature scale.
//!
//! All numerical kernels are generic over the scalar type via
//! [`scalar::Real`]; the `*64` aliases below fix the default `f64`
//! instantiation used by the CLI and the acceptance suite.

pub mod classes;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod green;
pub mod hypotheses;
pub mod linalg;
pub mod minmax;
pub mod problem;
pub mod quadrature;
pub mod scalar;
pub mod search;
pub mod special;
pub mod spectral;
pub mod verify;

pub use geometry::{Resolution, SurfaceKind, SurfaceModel, SurfacePoint, TangentVec};
pub use scalar::Real;

/// Default-precision surface model.
pub type SurfaceModel64 = SurfaceModel<f64>;
/// Default-precision surface point.
pub type SurfacePoint64 = SurfacePoint<f64>;
/// Default-precision tangent vector.
pub type TangentVec64 = TangentVec<f64>;
/// Default-precision problem instance.
pub type ProblemData64 = problem::ProblemData<f64>;
/// Default-precision curvature family.
pub type CurvatureField64 = problem::CurvatureField<f64>;
/// Default-precision configuration of N points.
pub type Configuration64 = energy::Configuration<f64>;
/// Default-precision search knobs.
pub type SearchConfig64 = search::SearchConfig<f64>;
/// Default-precision critical-point report.
pub type CriticalPointReport64 = search::CriticalPointReport<f64>;
/// Default-precision hypothesis report.
pub type HypothesisReport64 = hypotheses::HypothesisReport<f64>;
