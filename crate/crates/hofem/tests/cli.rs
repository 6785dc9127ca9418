//! End-to-end checks of the `hofem` binary and the CSV-emitting drivers.

use hofem::cli::{
    hyperbolic_header, run_converge, run_hyperbolic, run_tmop, Manufactured, RunConfig,
    SolverChoice, BP_HEADER, CONVERGE_HEADER, TMOP_HEADER,
};
use hofem::solvers::IterStats;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hofem"))
}

fn cfg(counts: Vec<usize>, order: usize) -> RunConfig {
    RunConfig {
        counts,
        dim: 2,
        order,
        quad: None,
        levels: 2,
        solver: SolverChoice::None,
        tol: None,
        max_iter: 100,
        cfl: 0.25,
        seed: 0,
        out: None,
        vtk: None,
    }
}

#[test]
fn csv_headers_are_stable() {
    assert_eq!(BP_HEADER, "benchmark,p,q,elements,dofs,iterations,seconds,throughput");
    assert_eq!(CONVERGE_HEADER, "level,h,dofs,l2_error,rate,iterations");
    assert_eq!(
        IterStats::csv_header(),
        "solver,p,elements,dofs,iterations,rel_res,seconds"
    );
    assert_eq!(TMOP_HEADER, "iter,objective,grad_inf,step");
    assert_eq!(hyperbolic_header(1), "step,t,dt,mass_0,l2_norm");
    assert_eq!(hyperbolic_header(3), "step,t,dt,mass_0,mass_1,mass_2,l2_norm");
}

#[test]
fn converge_linear_solution_marked_exact() {
    // u = x is reproduced exactly at any level; the rate column switches to
    // the "exact" marker instead of a meaningless ratio.
    let mut c = cfg(vec![4, 4], 1);
    c.solver = SolverChoice::Lor;
    c.tol = Some(1e-12);
    let rows = run_converge(&c, Manufactured::Linear).unwrap();
    for (i, row) in rows.iter().enumerate() {
        assert!(row.l2_error <= 1e-12, "level {i}: error {:e}", row.l2_error);
        let want = if i == 0 { "-" } else { "exact" };
        assert_eq!(row.rate, want);
    }
}

#[test]
fn converge_3d_rates() {
    let cfg = RunConfig {
        counts: vec![2, 2, 2],
        dim: 3,
        order: 2,
        quad: None,
        levels: 2,
        solver: SolverChoice::Lor,
        tol: Some(1e-11),
        max_iter: 200,
        cfl: 0.25,
        seed: 0,
        out: None,
        vtk: None,
    };
    let rows = run_converge(&cfg, Manufactured::SineProduct).unwrap();
    assert!(rows.iter().all(|r| r.converged));
    for w in rows.windows(2) {
        let rate = (w[0].l2_error / w[1].l2_error).log2();
        assert!(rate >= 2.5, "3D p=2 rate {rate}");
    }
}

#[test]
fn tmop_zero_perturbation_exits_immediately() {
    let run = run_tmop(&cfg(vec![4, 4], 2), 0.0, false).unwrap();
    assert!(run.converged);
    assert_eq!(run.iterations, 0);
}

#[test]
fn hyperbolic_step_count_and_mass_drift() {
    let mut c = cfg(vec![16, 16], 3);
    c.cfl = 0.25;
    let run = run_hyperbolic(&c, "advection", 1.0).unwrap();
    // ceil(T / dt) rows: the last step is clipped to land exactly on T.
    let first: Vec<&str> = run.rows[0].split(',').collect();
    let dt: f64 = first[2].parse().unwrap();
    assert_eq!(run.rows.len(), (1.0 / dt).ceil() as usize);
    assert_eq!(run.steps, run.rows.len());
    for d in &run.mass_drift {
        assert!(d.abs() <= 1e-12);
    }
    let last: Vec<&str> = run.rows.last().unwrap().split(',').collect();
    let t_end: f64 = last[1].parse().unwrap();
    assert!((t_end - 1.0).abs() <= 1e-12);
}

#[test]
fn binary_emits_bp_schema() {
    let out = bin()
        .args(["bp1", "--mesh", "2,2", "--order", "1", "--deterministic"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), BP_HEADER);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "bp1");
    assert_eq!(row[4], "9"); // dofs on a 2x2 bilinear mesh
    assert_eq!(row[5], "100");
}

#[test]
fn binary_rejects_unknown_flags_and_bad_values() {
    let out = bin().args(["bp1", "--frobnicate"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["bp1", "--mesh", "0,4"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error:"), "stderr: {err}");
    let out = bin().args(["bp1", "--mesh", "4,4", "--order", "0"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin()
        .args(["solve", "--mesh", "4,4", "--solver", "sor"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = bin()
        .args(["bp1", "--mesh", "4,4,4", "--dim", "2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn binary_nonzero_exit_on_nonconvergence() {
    let out = bin()
        .args([
            "solve", "--mesh", "8,8", "--order", "3", "--solver", "jacobi", "--tol", "1e-12",
            "--max-iter", "3",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("error:"), "stderr: {err}");
    // The CSV row is still emitted before the failure is reported.
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(IterStats::csv_header()));
}

#[test]
fn binary_deterministic_outputs() {
    let run = |extra: &[&str]| {
        let mut args = vec![
            "converge", "--mesh", "4,4", "--order", "2", "--levels", "2", "--seed", "5",
        ];
        args.extend_from_slice(extra);
        let out = bin().args(&args).output().unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let sequential = run(&["--deterministic"]);
    assert_eq!(sequential, run(&["--deterministic"]));
    // Worker count must not change any output bit: element loops write
    // disjoint slices and all reductions are sequential.
    assert_eq!(sequential, run(&["--threads", "4"]));
}

#[test]
fn binary_writes_csv_and_vtk_files() {
    let dir = std::env::temp_dir().join("hofem_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("tmop.csv");
    let vtk = dir.join("demo");
    let out = bin()
        .args([
            "tmop",
            "--mesh",
            "4,4",
            "--order",
            "2",
            "--seed",
            "42",
            "--max-iter",
            "50",
            "--out",
            csv.to_str().unwrap(),
            "--vtk",
            vtk.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(TMOP_HEADER));
    assert!(dir.join("demo_initial.vtk").exists());
    assert!(dir.join("demo_optimized.vtk").exists());
}
