//! Hausdorff-content Choquet integrals, dyadic maximal operators and Riesz
//! potentials on finite dyadic grids.

pub mod choquet;
pub mod content;
pub mod czpack;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod operators;
pub mod riesz;

pub use error::{HctError, Result};
pub use grid::{build_root, shifted_lattices, CellSet, DyadicCube, DyadicTree, Grid, Lattice, RootSpec, ShiftId};
