//! Polynomial eigenvalue problems `P(x) = Σ P_j x^j` solved by the
//! Ehrlich–Aberth iteration applied implicitly to `det P(x)`.
//!
//! The determinant is never formed: each Newton correction comes from one LU
//! factorization of `P(x)` through `p'(x)/p(x) = tr(P(x)⁻¹ P'(x))`.

pub mod bounds;
pub mod eai;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod matpoly;
pub mod matrix;
pub mod oracle;
pub mod starting;
pub mod structured;

pub use eai::{solve, EigenEstimate, Eigenvalue, SolverConfig, SpectrumResult, Status, Variant};
pub use error::{PepError, Result};
pub use matpoly::{MatrixPolynomial, MobiusMap};
pub use matrix::CMatrix;
pub use num_complex::Complex64;
pub use structured::StructureSpec;
