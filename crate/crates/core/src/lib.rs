//! qaclab: a numerical laboratory for energy-filtered operators,
//! quasi-adiabatic continuation, flux insertion, and Hall-conductance loop
//! experiments on exactly diagonalizable lattice models.

pub mod error;
pub mod grid;
pub mod linalg;
pub mod filters;

pub use error::{QlError, Result};
