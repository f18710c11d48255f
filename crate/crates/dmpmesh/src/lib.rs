//! Galerkin finite elements for linear anisotropic advection-diffusion-reaction
//! equations on T3/Q4 meshes, with verification of discrete maximum/comparison
//! principles and the non-negative constraint, mesh-restriction checkers
//! (anisotropic non-obtuse and generalized Delaunay-type angle conditions),
//! and iterative metric-driven mesh adaptation.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//!   mesh  ->  problem  ->  assembly  ->  principles
//!     |           \            \
//!     v            v            v
//!   adapt  <-  restrictions   postprocess
//! ```
//!
//! * [`mesh`] -- triangulations, quad meshes, element geometry, mesh I/O.
//! * [`problem`] -- coefficient fields, element-averaged diffusivity, sup-norms.
//! * [`assembly`] -- local/global stiffness, Dirichlet partitioning, sparse solve.
//! * [`principles`] -- matrix-level and solution-level DMP/DCP/NC verification.
//! * [`restrictions`] -- angle conditions, T3/Q4 feasibility, Peclet/Damkohler numbers.
//! * [`adapt`] -- metric tensor construction and the adaptation loop.
//! * [`postprocess`] -- flux recovery, species-balance errors, VTK/CSV export.

pub mod adapt;
pub mod assembly;
pub mod error;
pub mod linalg2;
pub mod mesh;
pub mod postprocess;
pub mod principles;
pub mod problem;
pub mod quadrature;
pub mod restrictions;

pub use error::Error;

/// 2D vector (also used for points).
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2x2 matrix (diffusivity tensors, metrics, edge matrices).
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
