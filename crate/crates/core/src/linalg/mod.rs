//! Dense symmetric matrix kernel and sparse symmetric LDLᵀ.
//!
//! The dense path serves the `N × N` measurement-sized matrices (eigensystems,
//! Cholesky, inertia); the sparse path in [`sparse`] serves finite-element
//! systems.

mod dense;
pub mod sparse;

pub use dense::{
    cholesky, congruence_eigs, count_negative, eigh, sum_positive_eigs, Eigh, LowerTriangular,
    POSITIVE_EIG_REL,
    SymMatrix,
};
pub use sparse::{LdltFactor, SparseSym};
