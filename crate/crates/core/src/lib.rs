//! Exact and numeric constructions around constant-sized synchronous
//! correlations: cyclotomic arithmetic, Minsky machines and their group words,
//! solution-group presentations, Coxeter rewriting, the dihedral correlation
//! family, correlation checkers, and rounding of approximate measurements.

pub mod correlations;
pub mod coxeter;
pub mod cyclotomic;
pub mod dihedral;
pub mod error;
pub mod fnfamily;
pub mod kms;
pub mod linalg;
pub mod minsky;
pub mod numerics;
pub mod presentations;
pub mod word;

pub use cyclotomic::CyclotomicNumber;
pub use error::{Error, Result};
pub use linalg::{Mat, Scalar};
