//! p-multigrid V-cycles as a CG preconditioner: a halving degree hierarchy
//! on one mesh with Chebyshev-Jacobi smoothing and an exact degree-1 coarse
//! solve.

use hofem::fespace::EssentialBc;
use hofem::mesh::CartesianMesh;
use hofem::operators::{constant_coefficient, linear_form, OperatorKind};
use hofem::pmg::{degree_schedule, PMGHierarchy, PMGOptions};
use hofem::solvers::cg;
use std::sync::Arc;

fn main() -> hofem::Result<()> {
    let mesh = Arc::new(CartesianMesh::unit_square(8, 8, 1)?);
    println!("8x8 Poisson, CG preconditioned by one V(2,2) cycle, tol 1e-8:");
    println!("  p  levels          dofs  iterations");
    for p in [2usize, 4, 8] {
        let hierarchy = PMGHierarchy::new(
            &mesh,
            OperatorKind::Diffusion,
            constant_coefficient(1.0),
            p,
            EssentialBc::AllBoundaries,
            PMGOptions::default(),
        )?;
        let op = hierarchy.fine_op();
        let n = op.size();
        let mut b = linear_form(op.fes(), p + 2, &|_| 1.0)?;
        op.eliminate_bc(&vec![0.0; n], &mut b)?;
        let (_, stats) = cg(
            |x, y| op.apply(x, y).unwrap(),
            |r, z| hierarchy.precondition(r, z),
            &b,
            &vec![0.0; n],
            1e-8,
            100,
        )?;
        assert!(stats.converged);
        println!(
            "  {p}  {:?}  {n:6}  {:10}",
            degree_schedule(p),
            stats.iterations
        );
    }
    Ok(())
}
