//! Linear advection of a sine wave once around a periodic square with the
//! DG integrator and SSP-RK3: the final state should reproduce the initial
//! condition up to the discretization error, and total mass is conserved to
//! roundoff.

use hofem::hyperbolic::{DGOperator, LinearAdvection};
use hofem::mesh::CartesianMesh;
use std::f64::consts::TAU;
use std::sync::Arc;

fn main() -> hofem::Result<()> {
    println!("  p  mesh      dofs   steps  l2 error    mass drift");
    for (n, p) in [(16usize, 2usize), (16, 3), (32, 3)] {
        let mesh = Arc::new(CartesianMesh::unit_square_periodic(n, n, 1)?);
        let op = DGOperator::new(
            Arc::new(LinearAdvection { velocity: [1.0, 0.0] }),
            &mesh,
            p,
        )?;
        let mut u = op.project(&|x| vec![(TAU * x[0]).sin()]);
        let mass0 = op.mass_integral(&u)[0];
        let dt0 = op.stable_dt(&u, 0.25);
        let mut t = 0.0;
        let mut steps = 0;
        while t < 1.0 - 1e-12 {
            let dt = dt0.min(1.0 - t);
            u = op.ssp_rk3_step(&u, t, dt)?;
            t += dt;
            steps += 1;
        }
        let err = op.l2_error_component(&u, 0, &|x| (TAU * x[0]).sin());
        let drift = op.mass_integral(&u)[0] - mass0;
        println!(
            "  {p}  {n:2}x{n:<2}  {:7}  {steps:5}  {err:.4e}  {drift:+.4e}",
            op.size()
        );
    }
    Ok(())
}
