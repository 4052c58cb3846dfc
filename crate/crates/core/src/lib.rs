//! Construction and analysis of intertwining (Darboux) operators for
//! one-dimensional matrix Schrödinger Hamiltonians `H = -I d²/dx² + V(x)`.
//!
//! Given chains of formal associated vector-functions of an initial
//! Hamiltonian, the crate builds the matrix differential operator `Q` of
//! order `N` annihilating them, derives the transformed potential, and
//! analyses the result three ways:
//!
//! * [`minimize`]: strip polynomial-in-`H` factors off `Q`,
//! * [`conjugate`]: build the conjugate operator `Q⁺` and check the
//!   polynomial SUSY algebra it closes with `Q`,
//! * [`reduce`]: decide whether `Q` splits into lower-order intertwiners.
//!
//! Coefficients of built operators are evaluated pointwise as ratios of
//! Wronskian-type determinants; nothing is expanded symbolically.

pub mod config;
pub mod conjugate;
pub mod error;
pub mod expr;
pub mod function;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod minimize;
pub mod operator;
pub mod reduce;

#[cfg(test)]
pub(crate) mod testutil;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use expr::Expr;
pub use grid::Grid;
pub use linalg::CMatrix;

pub use num_complex::Complex64;
