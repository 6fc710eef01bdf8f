//! Shape reconstruction of penetrable scatterers in the unit disk from
//! Neumann-to-Dirichlet data of the Helmholtz equation
//! `Δu + k² q u = 0`.
//!
//! The pipeline:
//!
//! 1. [`mesh`] builds fine (forward) and coarse (inversion) disk meshes.
//! 2. [`forward`] simulates the measurement matrix `V = F(q) − F(q0)` with P1
//!    finite elements, the per-pixel sensitivity matrices `S_m`, and noise.
//! 3. [`monotonicity`] turns `(V^δ, S_m)` into per-pixel upper bounds `β_m`.
//! 4. [`reconstruct`] minimizes the positive-eigenvalue sum of
//!    `V^δ − Σ a_m S_m` over the box `0 ≤ a_m ≤ min(q_min − q0, β_m)`.
//!
//! Numerical kernels are generic over [`Real`]; the `*64` aliases below fix
//! the scalar to `f64`, which is what the pipeline and file formats use.

pub mod error;
pub mod fem;
pub mod forward;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod monotonicity;
pub mod pipeline;
pub mod reconstruct;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SymMatrix64 = linalg::SymMatrix<f64>;
pub type SparseSym64 = linalg::SparseSym<f64>;
pub type TriMesh64 = mesh::TriMesh<f64>;
pub type CoefficientField64 = fem::CoefficientField<f64>;
pub type SensitivityStack64 = forward::SensitivityStack<f64>;
pub type BetaMap64 = monotonicity::BetaMap<f64>;
pub type ReconProblem64 = reconstruct::ReconProblem<f64>;
pub type ReconResult64 = reconstruct::ReconResult<f64>;
