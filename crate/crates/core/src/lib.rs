//! Numerical verification of the basic and elliptic Chaundy-Bullard
//! identities and the structures around them: theta functions, weighted
//! lattice paths, Bezout cofactors and elliptic commuting variables.

pub mod error;
pub mod scalar;
pub mod special_fn;
pub mod weights;
pub mod lattice;
pub mod identities;
pub mod sampling;
pub mod bezout;
pub mod noncomm;
pub mod campaign;

pub use error::{Error, Result};
pub use scalar::{Complex64, MpComplex, Scalar};
pub use special_fn::{IdentitySize, ParamPoint, Shift};
