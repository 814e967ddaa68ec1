//! Numerical machinery for vector-valued functions in quasi-normed `L^p`
//! lattices over finite atomic measure spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`spaces`]: discretised lattices, exponents and vector functions.
//! * [`reducing`]: reducing matrices, i.e. ellipsoidal approximations
//!   `|A e| ~ ||x . e||` of the directional quasi-norm of a vector function.
//! * [`tensor`]: iterated, injective and fixed-length projective norms of
//!   tensor dot products, and their comparison with `|[x][y]|`.
//! * [`bilinear`]: splitting of bilinear operators with two-term bounds and
//!   the bootstrapping of scalar inequalities to vector-valued ones.
//! * [`spectral`]: periodic fractional derivatives for Kato-Ponce type
//!   experiments.

pub mod bilinear;
mod error;
pub mod linalg;
pub mod random;
pub mod reducing;
pub mod spaces;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use reducing::{reducing_matrix, reducing_product, ReduceOptions, ReducingMatrix};
pub use spaces::{quasi_norm, DiscreteMeasureSpace, Exponent, SpaceDescriptor, VectorFunction};
