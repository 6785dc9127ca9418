//! Benchmark and demonstration harness behind the `hofem` binary: operator
//! throughput runs (bp1/bp3), Poisson convergence tables, preconditioned solver
//! studies, mesh-optimization demos, and periodic DG runs. Every subcommand
//! is deterministic in its non-timing outputs given the seed; numeric CSV
//! fields are printed with %.17g.

use crate::error::{Error, Result};
use crate::fespace::{Continuity, EssentialBc, FESpace};
use crate::gfmt::g17;
use crate::hyperbolic::{ConservationLaw, DGOperator, LinearAdvection, ShallowWater};
use crate::lor::LorPreconditioner;
use crate::mesh::CartesianMesh;
use crate::operators::{constant_coefficient, l2_error, linear_form, OperatorKind, PAOperator};
use crate::pmg::{PMGHierarchy, PMGOptions};
use crate::rng::SplitMix64;
use crate::solvers::{cg, power_method_lmax, IterStats};
use crate::tmop::{interface_nodes, FittingData, Metric, TargetSpec, TmopProblem};
use crate::vtk::{self, VtkField};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "hofem",
    version,
    about = "High-order finite element kernel benchmarks and demos"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Mass-operator throughput benchmark: fixed-iteration unpreconditioned CG.
    Bp1(RunArgs),
    /// Diffusion-operator throughput benchmark (same protocol as bp1).
    Bp3(RunArgs),
    /// Poisson convergence table with the manufactured sine solution.
    Converge(RunArgs),
    /// One preconditioned Poisson solve, reported as a solver-study CSV row.
    Solve(RunArgs),
    /// Mesh-quality optimization demo (perturbation recovery or circle fit).
    Tmop(TmopArgs),
    /// Periodic DG conservation-law run with a time-series CSV.
    Hyperbolic(HyperbolicArgs),
}

#[derive(Args, Clone)]
pub struct RunArgs {
    /// Elements per axis: NX,NY or NX,NY,NZ.
    #[arg(long, default_value = "8,8")]
    pub mesh: String,
    /// Space dimension; must match the --mesh axis count.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Polynomial degree.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Quadrature points per direction (default: order + 2).
    #[arg(long)]
    pub quad: Option<usize>,
    /// Uniform refinement levels for convergence studies.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Preconditioner: none | jacobi | chebyshev | lor | pmg.
    #[arg(long)]
    pub solver: Option<String>,
    /// Relative CG tolerance; bp runs switch from fixed-iteration to
    /// tolerance-based solves when this is set.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap (and the fixed bp iteration count).
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// CFL number for time-dependent runs.
    #[arg(long, default_value_t = 0.25)]
    pub cfl: f64,
    /// RNG seed (splitmix64).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// VTK output path prefix.
    #[arg(long)]
    pub vtk: Option<PathBuf>,
    /// Worker threads (default: rayon's choice).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Force sequential, bit-reproducible execution.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Args, Clone)]
pub struct TmopArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Interior-node perturbation amplitude in units of h.
    #[arg(long, default_value_t = 0.2)]
    pub perturb: f64,
    /// Fit the mesh to a circular interface instead of recovering the
    /// uniform mesh.
    #[arg(long)]
    pub fit_circle: bool,
}

#[derive(Args, Clone)]
pub struct HyperbolicArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Conservation law: advection | shallow-water.
    #[arg(long, default_value = "advection")]
    pub law: String,
    /// Final time (advection default covers one period).
    #[arg(long, default_value_t = 1.0)]
    pub t_final: f64,
    /// Steps between VTK snapshots (default: about a tenth of the run).
    #[arg(long)]
    pub vtk_stride: Option<usize>,
}

/// Parsed and validated run configuration shared by the drivers.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub counts: Vec<usize>,
    pub dim: usize,
    pub order: usize,
    pub quad: Option<usize>,
    pub levels: usize,
    pub solver: SolverChoice,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub cfl: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub vtk: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    None,
    Jacobi,
    Chebyshev,
    Lor,
    Pmg,
}

impl SolverChoice {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "jacobi" => Ok(Self::Jacobi),
            "chebyshev" => Ok(Self::Chebyshev),
            "lor" => Ok(Self::Lor),
            "pmg" => Ok(Self::Pmg),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Jacobi => "jacobi",
            Self::Chebyshev => "chebyshev",
            Self::Lor => "lor",
            Self::Pmg => "pmg",
        }
    }
}

impl RunArgs {
    pub fn config(&self, default_solver: SolverChoice) -> Result<RunConfig> {
        let counts: Vec<usize> = self
            .mesh
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad mesh count '{t}'")))
            })
            .collect::<Result<_>>()?;
        if counts.len() != self.dim {
            return Err(Error::Config(format!(
                "--mesh lists {} axes but --dim is {}",
                counts.len(),
                self.dim
            )));
        }
        if counts.contains(&0) {
            return Err(Error::Config("mesh counts must be positive".into()));
        }
        if self.order == 0 {
            return Err(Error::Config("--order must be at least 1".into()));
        }
        if self.quad == Some(0) {
            return Err(Error::Config("--quad must be at least 1".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Config("--tol must be positive".into()));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::Config("--max-iter must be positive".into()));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::Config("--cfl must be positive".into()));
        }
        let solver = match &self.solver {
            None => default_solver,
            Some(s) => SolverChoice::parse(s)?,
        };
        Ok(RunConfig {
            counts,
            dim: self.dim,
            order: self.order,
            quad: self.quad,
            levels: self.levels,
            solver,
            tol: self.tol,
            max_iter: self.max_iter,
            cfl: self.cfl,
            seed: self.seed,
            out: self.out.clone(),
            vtk: self.vtk.clone(),
        })
    }
}

fn unit_box_mesh(cfg: &RunConfig, periodic: bool) -> Result<CartesianMesh> {
    let lo = vec![0.0; cfg.dim];
    let hi = vec![1.0; cfg.dim];
    let per = vec![periodic; cfg.dim];
    CartesianMesh::new(cfg.dim, &cfg.counts, cfg.order.max(1), &lo, &hi, &per)
}

fn scalar_space(mesh: CartesianMesh, p: usize) -> Result<Arc<FESpace>> {
    let mesh = Arc::new(mesh);
    Ok(Arc::new(FESpace::new(&mesh, p, Continuity::H1, 1)?))
}

/// Manufactured Poisson solutions for the convergence and bp sanity runs.
#[derive(Clone, Copy, Debug)]
pub enum Manufactured {
    /// u = prod sin(pi x_a); f = dim pi^2 u; zero on the boundary.
    SineProduct,
    /// u = x: reproduced exactly by any degree on affine meshes.
    Linear,
}

impl Manufactured {
    pub fn solution(&self, dim: usize) -> impl Fn(&[f64]) -> f64 + Copy {
        let kind = *self;
        move |x: &[f64]| match kind {
            Manufactured::SineProduct => x[..dim]
                .iter()
                .map(|&v| (std::f64::consts::PI * v).sin())
                .product(),
            Manufactured::Linear => x[0],
        }
    }

    pub fn forcing(&self, dim: usize) -> impl Fn(&[f64]) -> f64 + Copy {
        let kind = *self;
        move |x: &[f64]| match kind {
            Manufactured::SineProduct => {
                let pi = std::f64::consts::PI;
                dim as f64
                    * pi
                    * pi
                    * x[..dim].iter().map(|&v| (pi * v).sin()).product::<f64>()
            }
            Manufactured::Linear => 0.0,
        }
    }
}

/// Apply the selected preconditioned CG to an operator with its RHS.
fn run_preconditioned_cg(
    op: &PAOperator,
    choice: SolverChoice,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, IterStats)> {
    let n = op.size();
    let x0 = vec![0.0; n];
    let apply = |x: &[f64], y: &mut [f64]| op.apply(x, y).expect("operator sizes fixed");
    match choice {
        SolverChoice::None => cg(apply, |r, z| z.copy_from_slice(r), b, &x0, tol, max_iter),
        SolverChoice::Jacobi => {
            let diag = op.diagonal();
            cg(
                apply,
                |r, z| {
                    for i in 0..r.len() {
                        z[i] = r[i] / diag[i];
                    }
                },
                b,
                &x0,
                tol,
                max_iter,
            )
        }
        SolverChoice::Chebyshev => {
            let diag = op.diagonal();
            let lmax = power_method_lmax(apply, &diag, 20);
            cg(
                apply,
                |r, z| {
                    z.fill(0.0);
                    crate::solvers::chebyshev_smooth(apply, &diag, lmax, 2, r, z)
                        .expect("positive diagonal");
                },
                b,
                &x0,
                tol,
                max_iter,
            )
        }
        SolverChoice::Lor => {
            let pc = LorPreconditioner::new(op)?;
            cg(apply, |r, z| pc.apply(r, z), b, &x0, tol, max_iter)
        }
        SolverChoice::Pmg => {
            let bc = if op.essential_dofs().is_empty() {
                EssentialBc::None
            } else {
                EssentialBc::AllBoundaries
            };
            let h = PMGHierarchy::new(
                op.fes().mesh(),
                op.kind(),
                op.coefficient(),
                op.fes().degree(),
                bc,
                PMGOptions::default(),
            )?;
            cg(apply, |r, z| h.precondition(r, z), b, &x0, tol, max_iter)
        }
    }
}

/// Unpreconditioned CG run for exactly `iterations` sweeps, one operator
/// application each. Small problems hit the roundoff floor early; the
/// recurrence is then restarted from zero so every sweep performs the same
/// work, which is what the throughput number measures.
fn fixed_iteration_cg(apply: impl Fn(&[f64], &mut [f64]), b: &[f64], iterations: usize) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = crate::solvers::dot(&r, &r);
    for _ in 0..iterations {
        apply(&p, &mut ap);
        let pap = crate::solvers::dot(&p, &ap);
        if pap <= 0.0 || rr <= 0.0 {
            x.fill(0.0);
            r.copy_from_slice(b);
            p.copy_from_slice(b);
            rr = crate::solvers::dot(&r, &r);
            continue;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = crate::solvers::dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
}

#[derive(Clone, Debug)]
pub struct BpRow {
    pub benchmark: &'static str,
    pub p: usize,
    pub q: usize,
    pub elements: usize,
    pub dofs: usize,
    pub iterations: usize,
    pub seconds: f64,
    pub throughput: f64,
}

impl BpRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.benchmark,
            self.p,
            self.q,
            self.elements,
            self.dofs,
            self.iterations,
            g17(self.seconds),
            g17(self.throughput)
        )
    }
}

pub const BP_HEADER: &str = "benchmark,p,q,elements,dofs,iterations,seconds,throughput";

#[derive(Debug)]
pub struct BpReport {
    pub row: BpRow,
    /// L2 error against the manufactured solution (tolerance mode only).
    pub l2_error: Option<f64>,
    pub converged: bool,
}

/// One benchmark point: set up the operator, run CG, report throughput.
/// Without --tol this is the fixed-iteration protocol (no convergence
/// check); with --tol it solves the manufactured problem.
pub fn run_bp(kind: OperatorKind, cfg: &RunConfig) -> Result<BpReport> {
    let benchmark = match kind {
        OperatorKind::Mass => "bp1",
        OperatorKind::Diffusion => "bp3",
    };
    let fes = scalar_space(unit_box_mesh(cfg, false)?, cfg.order)?;
    let mut op = PAOperator::new(&fes, kind, constant_coefficient(1.0), cfg.quad)?;
    if kind == OperatorKind::Diffusion {
        op.set_essential_dofs(fes.essential_dofs(EssentialBc::AllBoundaries)?);
    }
    let n = op.size();
    let q = cfg.quad.unwrap_or(cfg.order + 2);
    let start = Instant::now();
    let (report_iterations, l2err, converged) = match cfg.tol {
        None => {
            // Fixed-iteration throughput protocol on a seeded random RHS.
            let mut b = SplitMix64::new(cfg.seed).vector(n);
            op.eliminate_bc(&vec![0.0; n], &mut b)?;
            fixed_iteration_cg(
                |x, y| op.apply(x, y).expect("operator sizes fixed"),
                &b,
                cfg.max_iter,
            );
            (cfg.max_iter, None, true)
        }
        Some(tol) => {
            let exact = Manufactured::SineProduct.solution(cfg.dim);
            let mut b = match kind {
                OperatorKind::Mass => linear_form(&fes, q, &exact)?,
                OperatorKind::Diffusion => {
                    linear_form(&fes, q, &Manufactured::SineProduct.forcing(cfg.dim))?
                }
            };
            op.eliminate_bc(&vec![0.0; n], &mut b)?;
            let (x, stats) = run_preconditioned_cg(&op, cfg.solver, &b, tol, cfg.max_iter)?;
            let err = l2_error(&fes, &x, &exact, cfg.order + 3)?;
            (stats.iterations, Some(err), stats.converged)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let row = BpRow {
        benchmark,
        p: cfg.order,
        q,
        elements: fes.num_elements(),
        dofs: n,
        iterations: report_iterations,
        seconds,
        throughput: (n * report_iterations) as f64 / seconds,
    };
    Ok(BpReport {
        row,
        l2_error: l2err,
        converged,
    })
}

pub const CONVERGE_HEADER: &str = "level,h,dofs,l2_error,rate,iterations";

#[derive(Clone, Debug)]
pub struct ConvergeRow {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub l2_error: f64,
    /// "-" on the first level, "exact" when both errors hit roundoff,
    /// otherwise log2(e_prev / e).
    pub rate: String,
    pub iterations: usize,
    pub converged: bool,
}

impl ConvergeRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.level,
            g17(self.h),
            self.dofs,
            g17(self.l2_error),
            self.rate,
            self.iterations
        )
    }
}

/// Poisson convergence study across uniform refinements.
pub fn run_converge(cfg: &RunConfig, manufactured: Manufactured) -> Result<Vec<ConvergeRow>> {
    let tol = cfg.tol.unwrap_or(1e-10);
    let mut mesh = unit_box_mesh(cfg, false)?;
    let mut rows: Vec<ConvergeRow> = Vec::new();
    for level in 0..=cfg.levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let fes = scalar_space(mesh.clone(), cfg.order)?;
        let mut op = PAOperator::new(
            &fes,
            OperatorKind::Diffusion,
            constant_coefficient(1.0),
            cfg.quad,
        )?;
        op.set_essential_dofs(fes.essential_dofs(EssentialBc::AllBoundaries)?);
        let n = op.size();
        let q = cfg.quad.unwrap_or(cfg.order + 2);
        let exact = manufactured.solution(cfg.dim);
        let mut b = linear_form(&fes, q, &manufactured.forcing(cfg.dim))?;
        // Inhomogeneous boundary values come from the exact solution.
        let coords = fes.dof_coords();
        let x_bc: Vec<f64> = (0..n).map(|i| exact(&coords[cfg.dim * i..cfg.dim * (i + 1)])).collect();
        op.eliminate_bc(&x_bc, &mut b)?;
        let (x, stats) = run_preconditioned_cg(&op, cfg.solver, &b, tol, cfg.max_iter)?;
        let err = l2_error(&fes, &x, &exact, cfg.order + 3)?;
        let rate = if level == 0 {
            "-".to_string()
        } else {
            let prev = rows[level - 1].l2_error;
            if prev <= 1e-12 && err <= 1e-12 {
                "exact".to_string()
            } else {
                g17((prev / err).log2())
            }
        };
        let counts_max = cfg.counts.iter().max().copied().unwrap_or(1) << level;
        rows.push(ConvergeRow {
            level,
            h: 1.0 / counts_max as f64,
            dofs: n,
            l2_error: err,
            rate,
            iterations: stats.iterations,
            converged: stats.converged,
        });
    }
    Ok(rows)
}

/// One preconditioned Poisson solve reported in the solver-study schema.
pub fn run_solve(cfg: &RunConfig) -> Result<(IterStats, String)> {
    let fes = scalar_space(unit_box_mesh(cfg, false)?, cfg.order)?;
    let mut op = PAOperator::new(
        &fes,
        OperatorKind::Diffusion,
        constant_coefficient(1.0),
        cfg.quad,
    )?;
    op.set_essential_dofs(fes.essential_dofs(EssentialBc::AllBoundaries)?);
    let n = op.size();
    let q = cfg.quad.unwrap_or(cfg.order + 2);
    let mut b = linear_form(&fes, q, &|_| 1.0)?;
    op.eliminate_bc(&vec![0.0; n], &mut b)?;
    let tol = cfg.tol.unwrap_or(1e-8);
    let start = Instant::now();
    let (_, stats) = run_preconditioned_cg(&op, cfg.solver, &b, tol, cfg.max_iter)?;
    let seconds = start.elapsed().as_secs_f64();
    let row = stats.csv_row(
        cfg.solver.label(),
        cfg.order,
        fes.num_elements(),
        n,
        seconds,
    );
    Ok((stats, row))
}

pub const TMOP_HEADER: &str = "iter,objective,grad_inf,step";

#[derive(Debug)]
pub struct TmopRun {
    pub rows: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub max_misfit: Option<f64>,
    pub node_error_vs_uniform: Option<f64>,
}

/// Mesh-optimization demo: perturb the interior of a uniform mesh and
/// recover it (shape metric), or pull interface nodes onto a circular level
/// set (compound metric with the fitting penalty).
pub fn run_tmop(cfg: &RunConfig, perturb: f64, fit_circle: bool) -> Result<TmopRun> {
    if cfg.dim != 2 {
        return Err(Error::Config("tmop demo is 2D only".into()));
    }
    let order = cfg.order;
    let base = Arc::new(CartesianMesh::unit_square(cfg.counts[0], cfg.counts[1], order)?);
    let fes = Arc::new(FESpace::new(&base, order, Continuity::H1, 2)?);
    let problem: TmopProblem = if fit_circle {
        let sfes = Arc::new(FESpace::new(&base, order, Continuity::H1, 1)?);
        let coords = sfes.dof_coords();
        let sigma: Vec<f64> = (0..sfes.size())
            .map(|i| {
                let dx = coords[2 * i] - 0.5;
                let dy = coords[2 * i + 1] - 0.5;
                (dx * dx + dy * dy).sqrt() - 0.3
            })
            .collect();
        let node_set = interface_nodes(&sfes, &sigma);
        let fitting = FittingData::new(&base, order, sigma, node_set, 1e4)?;
        TmopProblem::new(
            &fes,
            Metric::ShapeSize { gamma: 1.5 },
            &TargetSpec::ideal_uniform(),
            cfg.quad,
            &[],
        )?
        .with_fitting(fitting)
    } else {
        TmopProblem::new(&fes, Metric::Shape, &TargetSpec::ideal_uniform(), cfg.quad, &[])?
    };
    // Seeded interior perturbation, backed off until valid.
    let uniform = problem.initial_nodes();
    let h = 1.0 / cfg.counts[0] as f64;
    let mut mask = vec![false; fes.size()];
    for d in fes.boundary_dofs(None)? {
        mask[d] = true;
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let offsets: Vec<f64> = (0..fes.size())
        .map(|i| if mask[i] { 0.0 } else { perturb * h * rng.symmetric() })
        .collect();
    let mut scale = 1.0;
    let x0 = loop {
        let x: Vec<f64> = uniform.iter().zip(&offsets).map(|(u, o)| u + scale * o).collect();
        if base.with_nodes(x.clone())?.is_valid() {
            break x;
        }
        scale *= 0.5;
        if scale < 1e-8 {
            return Err(Error::Config("could not build a valid perturbed mesh".into()));
        }
    };
    if let Some(prefix) = &cfg.vtk {
        let initial = base.with_nodes(x0.clone())?;
        vtk::write_mesh(&with_suffix(prefix, "_initial.vtk"), &initial)?;
    }
    let tol = cfg.tol.unwrap_or(1e-12);
    let (x, report) = problem.newton_solve(&x0, tol, cfg.max_iter)?;
    if let Some(prefix) = &cfg.vtk {
        let optimized = base.with_nodes(x.clone())?;
        vtk::write_mesh(&with_suffix(prefix, "_optimized.vtk"), &optimized)?;
    }
    let rows: Vec<String> = report
        .history
        .iter()
        .enumerate()
        .map(|(i, it)| {
            format!(
                "{},{},{},{}",
                i,
                g17(it.objective),
                g17(it.grad_inf),
                g17(it.step)
            )
        })
        .collect();
    let final_objective = problem.objective(&x)?;
    let node_error = (!fit_circle).then(|| {
        x.iter()
            .zip(&uniform)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    });
    let misfit = fit_circle.then(|| problem.max_fitting_misfit(&x));
    Ok(TmopRun {
        rows,
        iterations: report.iterations,
        converged: report.converged,
        final_objective,
        max_misfit: misfit,
        node_error_vs_uniform: node_error,
    })
}

#[derive(Debug)]
pub struct HyperbolicRun {
    pub header: String,
    pub rows: Vec<String>,
    pub steps: usize,
    pub mass_drift: Vec<f64>,
    pub final_l2: f64,
}

/// Time-series CSV header for an m-component law.
pub fn hyperbolic_header(m: usize) -> String {
    let masses: Vec<String> = (0..m).map(|c| format!("mass_{c}")).collect();
    format!("step,t,dt,{},l2_norm", masses.join(","))
}

/// Periodic DG run: advection of a sine for one period by default, or a
/// shallow-water splash; emits one CSV row per step and optional VTK
/// snapshots at a stride of about a tenth of the run.
pub fn run_hyperbolic(cfg: &RunConfig, law_name: &str, t_final: f64) -> Result<HyperbolicRun> {
    run_hyperbolic_with_stride(cfg, law_name, t_final, None)
}

/// [`run_hyperbolic`] with an explicit VTK snapshot stride.
pub fn run_hyperbolic_with_stride(
    cfg: &RunConfig,
    law_name: &str,
    t_final: f64,
    vtk_stride: Option<usize>,
) -> Result<HyperbolicRun> {
    if cfg.dim != 2 {
        return Err(Error::Config("hyperbolic runs are 2D only".into()));
    }
    if !(t_final > 0.0) {
        return Err(Error::Config("--t-final must be positive".into()));
    }
    let mesh = Arc::new(CartesianMesh::new(
        2,
        &cfg.counts,
        1,
        &[0.0, 0.0],
        &[1.0, 1.0],
        &[true, true],
    )?);
    let law: Arc<dyn ConservationLaw> = match law_name {
        "advection" => Arc::new(LinearAdvection { velocity: [1.0, 0.0] }),
        "shallow-water" | "swe" => Arc::new(ShallowWater { gravity: 9.81 }),
        other => return Err(Error::Config(format!("unknown law '{other}'"))),
    };
    let op = DGOperator::new(Arc::clone(&law), &mesh, cfg.order)?;
    let tau = std::f64::consts::TAU;
    let mut u = match law_name {
        "advection" => op.project(&|x| vec![(tau * x[0]).sin()]),
        _ => op.project(&|x| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            vec![1.0 + 0.2 * (-r2 / 0.01).exp(), 0.0, 0.0]
        }),
    };
    let m = law.num_components();
    let mass0 = op.mass_integral(&u);
    let dt0 = op.stable_dt(&u, cfg.cfl);
    let total_steps = (t_final / dt0).ceil() as usize;
    let snap_stride = vtk_stride.unwrap_or(total_steps / 10).max(1);
    let mut rows = Vec::with_capacity(total_steps);
    let mut t = 0.0;
    let mut step = 0usize;
    if let Some(prefix) = &cfg.vtk {
        write_snapshot(prefix, 0, &op, &u)?;
    }
    while t < t_final - 1e-12 {
        let dt = dt0.min(t_final - t);
        u = op.ssp_rk3_step(&u, t, dt)?;
        t += dt;
        step += 1;
        let masses = op.mass_integral(&u);
        let l2 = op.l2_norm(&u);
        let mass_cols: Vec<String> = masses.iter().map(|v| g17(*v)).collect();
        rows.push(format!(
            "{},{},{},{},{}",
            step,
            g17(t),
            g17(dt),
            mass_cols.join(","),
            g17(l2)
        ));
        if let Some(prefix) = &cfg.vtk {
            if step % snap_stride == 0 || t >= t_final - 1e-12 {
                write_snapshot(prefix, step, &op, &u)?;
            }
        }
    }
    let mass1 = op.mass_integral(&u);
    let drift: Vec<f64> = mass0.iter().zip(&mass1).map(|(a, b)| b - a).collect();
    Ok(HyperbolicRun {
        header: hyperbolic_header(m),
        rows,
        steps: step,
        mass_drift: drift,
        final_l2: op.l2_norm(&u),
    })
}

fn write_snapshot(prefix: &Path, step: usize, op: &DGOperator, u: &[f64]) -> Result<()> {
    let fes = op.fes();
    let path = with_suffix(prefix, &format!("_{step:06}.vtk"));
    // L2 state vectors are already element-ordered at the solution lattice.
    let field = VtkField {
        name: "u",
        components: fes.vdim(),
        values: u,
    };
    vtk::write_fields(&path, fes.mesh(), fes.degree(), &[field])
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn emit_csv(out: Option<&Path>, header: &str, rows: &[String]) -> Result<()> {
    match out {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            writeln!(lock, "{header}")?;
            for row in rows {
                writeln!(lock, "{row}")?;
            }
        }
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            writeln!(f, "{header}")?;
            for row in rows {
                writeln!(f, "{row}")?;
            }
        }
    }
    Ok(())
}

fn configure_threads(args: &RunArgs) {
    let threads = if args.deterministic { Some(1) } else { args.threads };
    if let Some(n) = threads {
        // Ignore the error when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Entry point of the `hofem` binary. Returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bp1(args) => bp_command(OperatorKind::Mass, &args),
        Command::Bp3(args) => bp_command(OperatorKind::Diffusion, &args),
        Command::Converge(args) => {
            configure_threads(&args);
            let cfg = args.config(SolverChoice::Lor)?;
            let rows = run_converge(&cfg, Manufactured::SineProduct)?;
            let csv: Vec<String> = rows.iter().map(|r| r.csv()).collect();
            emit_csv(cfg.out.as_deref(), CONVERGE_HEADER, &csv)?;
            if let Some(bad) = rows.iter().find(|r| !r.converged) {
                return Err(Error::Config(format!(
                    "solver did not converge at level {}",
                    bad.level
                )));
            }
            Ok(())
        }
        Command::Solve(args) => {
            configure_threads(&args);
            let cfg = args.config(SolverChoice::Lor)?;
            let (stats, row) = run_solve(&cfg)?;
            emit_csv(cfg.out.as_deref(), IterStats::csv_header(), &[row])?;
            if !stats.converged {
                return Err(Error::Config("solver did not converge".into()));
            }
            Ok(())
        }
        Command::Tmop(args) => {
            configure_threads(&args.run);
            let cfg = args.run.config(SolverChoice::None)?;
            let run = run_tmop(&cfg, args.perturb, args.fit_circle)?;
            emit_csv(cfg.out.as_deref(), TMOP_HEADER, &run.rows)?;
            if !run.converged && run.max_misfit.is_none() {
                return Err(Error::Config("newton iteration did not converge".into()));
            }
            if let Some(misfit) = run.max_misfit {
                eprintln!("max |sigma(x_s)| = {}", g17(misfit));
            }
            Ok(())
        }
        Command::Hyperbolic(args) => {
            configure_threads(&args.run);
            let cfg = args.run.config(SolverChoice::None)?;
            let run = run_hyperbolic_with_stride(&cfg, &args.law, args.t_final, args.vtk_stride)?;
            emit_csv(cfg.out.as_deref(), &run.header, &run.rows)?;
            Ok(())
        }
    }
}

fn bp_command(kind: OperatorKind, args: &RunArgs) -> Result<()> {
    configure_threads(args);
    let cfg = args.config(SolverChoice::None)?;
    let report = run_bp(kind, &cfg)?;
    emit_csv(cfg.out.as_deref(), BP_HEADER, &[report.row.csv()])?;
    if !report.converged {
        return Err(Error::Config("solver did not converge".into()));
    }
    Ok(())
}
