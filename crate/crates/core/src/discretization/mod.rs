//! Quadrature grids, the Nyström kernel matrix and its reusable solve.

mod grid;
mod kernel;
mod lu;

pub use grid::{build_grid, Grid, DEFAULT_NODES, MAX_NODES};
pub use kernel::{assemble_kernel, KernelMatrix, SINGULAR_CONDITION};

pub(crate) use kernel::dot;
