//! Poisson convergence study: -Laplace u = f with the manufactured solution
//! u = sin(pi x) sin(pi y), solved with LOR-preconditioned CG across uniform
//! refinements. L2 errors contract at h^(p+1).

use hofem::cli::{run_converge, Manufactured, RunConfig, SolverChoice, CONVERGE_HEADER};

fn main() -> hofem::Result<()> {
    for p in 1..=3 {
        println!("# order {p}");
        println!("{CONVERGE_HEADER}");
        let cfg = RunConfig {
            counts: vec![4, 4],
            dim: 2,
            order: p,
            quad: None,
            levels: 3,
            solver: SolverChoice::Lor,
            tol: Some(1e-12),
            max_iter: 200,
            cfl: 0.25,
            seed: 0,
            out: None,
            vtk: None,
        };
        for row in run_converge(&cfg, Manufactured::SineProduct)? {
            println!("{}", row.csv());
        }
    }
    Ok(())
}
