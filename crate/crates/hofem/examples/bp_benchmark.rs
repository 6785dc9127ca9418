//! Operator throughput sweep: mass (bp1) and diffusion (bp3) operators
//! driven by 100 iterations of unpreconditioned CG, one CSV row per degree.
//! Only dofs and iteration counts are deterministic; throughput depends on
//! the machine.

use hofem::cli::{run_bp, RunConfig, SolverChoice, BP_HEADER};
use hofem::operators::OperatorKind;

fn main() -> hofem::Result<()> {
    println!("{BP_HEADER}");
    for kind in [OperatorKind::Mass, OperatorKind::Diffusion] {
        for p in 1..=8 {
            let cfg = RunConfig {
                counts: vec![8, 8],
                dim: 2,
                order: p,
                quad: None,
                levels: 0,
                solver: SolverChoice::None,
                tol: None,
                max_iter: 100,
                cfl: 0.25,
                seed: 1,
                out: None,
                vtk: None,
            };
            let report = run_bp(kind, &cfg)?;
            println!("{}", report.row.csv());
        }
    }
    Ok(())
}
