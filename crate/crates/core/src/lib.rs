//! Numerical Berezin–Toeplitz quantization on magnetic tori and the plane.

pub mod bergman;
pub mod cache;
pub mod config;
pub mod eigensolve;
pub mod error;
pub mod fit;
pub mod fock;
pub mod geometry;
pub mod lattice;
pub mod linalg;
pub mod runner;
pub mod scalar;
pub mod semiclassics;
pub mod sparse;
pub mod symbol;
pub mod toeplitz;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type Model = geometry::SymplecticModel<f64>;
pub type Matrix = linalg::DenseMatrix<f64>;
pub type Sym = symbol::Symbol<f64>;
