//! Quasimorphisms from equivariant moment maps on Domic-Toledo spaces.
//!
//! Two instances are provided: Sp(2n,R) acting on the Siegel upper half-space
//! ([`spqm`]) and Hamiltonian flows of a 2D torus or disk acting on fields of
//! compatible complex structures ([`ham2d`]). Both feed the generic
//! construction in [`engine`].

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod expr;
pub mod ham2d;
pub mod quadrature;
pub mod sampling;
pub mod siegel;
pub mod spqm;
pub mod symplectic;

pub use error::{QmError, Result};
