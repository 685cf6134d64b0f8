//! Lattice Markov generators for one-dimensional diffusions joined with
//! Abelian path functionals (stochastic integrals, the running maximum and
//! discrete-time sums), their Fourier block-diagonalised transition kernels,
//! and the convergence diagnostics used to check them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abelian_ext;
pub mod analysis;
pub mod coefficients;
pub mod error;
pub mod generators;
pub mod lattice;
pub mod linalg;
pub mod oracles;
pub mod propagation;

pub use coefficients::{CoefficientField, CoefficientRecipe, Profile};
pub use error::{Error, Result};
pub use generators::{FourierSlice, GeneratorMatrix, Representation};
pub use lattice::{FrequencyGrid, GridFunction, SpatialGrid};
pub use num_complex::Complex64;
