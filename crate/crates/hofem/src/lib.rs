//! High-order finite element kernels on structured quad/hex meshes.
//!
//! The crate is organized around the operator decomposition
//! `A = P^T G^T B^T D B G P`: meshes carry the geometry (`mesh`), 1D bases
//! provide the tabulated `B` and `G` (`basis`), finite element spaces own the
//! dof maps `P` and `G` (`fespace`), and partially assembled operators store
//! only the quadrature-point data `D` (`operators`). On top of that sit a
//! matrix-free solver stack (`solvers`, `pmg`, `lor`), mesh-quality
//! optimization (`tmop`), and a discontinuous Galerkin integrator for
//! first-order conservation laws (`hyperbolic`).
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `hofem` binary for the benchmark harness.

pub mod basis;
pub mod cli;
mod error;
pub mod fespace;
pub mod gfmt;
pub mod hyperbolic;
pub mod lor;
pub mod mesh;
pub mod operators;
pub mod pmg;
pub mod rng;
pub mod solvers;
pub mod sparse;
pub mod tensor;
#[cfg(test)]
pub(crate) mod test_oracles;
pub mod tmop;
pub mod vtk;

pub use error::{Error, Result};
