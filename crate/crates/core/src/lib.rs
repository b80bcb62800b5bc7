//! Exterior calculus for generalized electromagnetic fields of r-vectors in
//! (k,n) space-time: multivector algebra, the stress-energy-momentum and
//! angular-momentum tensors, and the normal-mode flux decomposition into
//! centre-of-motion, orbital and spin parts.

pub mod angular_momentum;
pub mod error;
pub mod estimators;
pub mod field_config;
pub mod index_algebra;
pub mod multivector;
pub mod reduce;
pub mod sampling;
pub mod tensor_algebra;

pub use error::{Error, Result};
pub use index_algebra::{IndexList, Signature, SymIndexList};
pub use multivector::Multivector;
pub use num_complex::Complex64 as C64;
