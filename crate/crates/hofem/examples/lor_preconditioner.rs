//! Low-order-refined preconditioning: CG on the degree-p Poisson operator,
//! preconditioned by the assembled degree-1 discretization on the
//! Gauss-Lobatto refined mesh. Iteration counts stay flat in both the
//! polynomial degree and the mesh size - the observable form of spectral
//! equivalence.

use hofem::fespace::{Continuity, EssentialBc, FESpace};
use hofem::lor::lor_preconditioned_cg;
use hofem::mesh::CartesianMesh;
use hofem::operators::{constant_coefficient, linear_form, OperatorKind, PAOperator};
use std::sync::Arc;

fn poisson_iterations(n: usize, p: usize) -> hofem::Result<usize> {
    let mesh = Arc::new(CartesianMesh::unit_square(n, n, 1)?);
    let fes = Arc::new(FESpace::new(&mesh, p, Continuity::H1, 1)?);
    let mut op = PAOperator::new(&fes, OperatorKind::Diffusion, constant_coefficient(1.0), None)?;
    op.set_essential_dofs(fes.essential_dofs(EssentialBc::AllBoundaries)?);
    let mut b = linear_form(&fes, p + 2, &|_| 1.0)?;
    op.eliminate_bc(&vec![0.0; op.size()], &mut b)?;
    let (_, stats, _) = lor_preconditioned_cg(&op, &b, 1e-8, 100)?;
    assert!(stats.converged);
    Ok(stats.iterations)
}

fn main() -> hofem::Result<()> {
    println!("fixed 4x4 mesh, varying degree (tol 1e-8):");
    println!("  p   dofs  iterations");
    for p in [1usize, 2, 3, 4, 6, 8] {
        let dofs = (4 * p + 1) * (4 * p + 1);
        println!("  {p}  {dofs:5}  {:10}", poisson_iterations(4, p)?);
    }
    println!("fixed degree 3, varying mesh:");
    println!("  mesh   dofs  iterations");
    for n in [4usize, 8, 16] {
        let dofs = (3 * n + 1) * (3 * n + 1);
        println!("  {n:2}x{n:<2} {dofs:6}  {:10}", poisson_iterations(n, 3)?);
    }
    Ok(())
}
