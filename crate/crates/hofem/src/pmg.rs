//! p-multigrid: a hierarchy of nodal spaces of decreasing polynomial degree
//! on one mesh, nodal interpolation as prolongation (restriction is its
//! exact transpose), Chebyshev–Jacobi smoothing on every level, and an exact
//! sparse Cholesky solve on the degree-1 coarse level.
//!
//! The degree schedule halves: p, ceil(p/2), ..., 1.

use crate::basis;
use crate::error::{Error, Result};
use crate::fespace::{Continuity, EssentialBc, FESpace};
use crate::mesh::CartesianMesh;
use crate::operators::{Coefficient, OperatorKind, PAOperator};
use crate::solvers::{chebyshev_smooth, power_method_lmax};
use crate::sparse::SkylineCholesky;
use crate::tensor::{self, Scratch};
use std::sync::Arc;

#[derive(Clone, Copy, Debug)]
pub struct PMGOptions {
    pub smoother_order: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub power_iters: usize,
}

impl Default for PMGOptions {
    fn default() -> Self {
        Self {
            smoother_order: 2,
            pre_sweeps: 2,
            post_sweeps: 2,
            power_iters: 20,
        }
    }
}

/// Nodal interpolation between two degrees on the same mesh. Prolongation
/// evaluates the coarse basis at the fine Gauss–Lobatto nodes element by
/// element; restriction is the exact transpose through an owner mask that
/// picks one element slot per shared fine dof.
pub struct Transfer {
    fes_coarse: Arc<FESpace>,
    fes_fine: Arc<FESpace>,
    /// (p_f + 1) x (p_c + 1), row-major.
    interp: Vec<f64>,
    owner: Vec<bool>,
}

impl Transfer {
    pub fn new(fes_coarse: &Arc<FESpace>, fes_fine: &Arc<FESpace>) -> Result<Self> {
        let pc = fes_coarse.degree();
        let pf = fes_fine.degree();
        let coarse_nodes = basis::gll_nodes(pc)?;
        let bary = basis::barycentric_weights(&coarse_nodes);
        let fine_nodes = basis::gll_nodes(pf)?;
        let mut interp = vec![0.0; (pf + 1) * (pc + 1)];
        for (h, &x) in fine_nodes.iter().enumerate() {
            basis::eval_lagrange(
                &coarse_nodes,
                &bary,
                x,
                &mut interp[h * (pc + 1)..(h + 1) * (pc + 1)],
            );
        }
        // First element slot touching each fine dof owns it.
        let map = fes_fine.l_to_e_map();
        let mut seen = vec![false; fes_fine.ndofs_scalar()];
        let mut owner = vec![false; map.len()];
        for (s, &l) in map.iter().enumerate() {
            if !seen[l] {
                seen[l] = true;
                owner[s] = true;
            }
        }
        Ok(Self {
            fes_coarse: Arc::clone(fes_coarse),
            fes_fine: Arc::clone(fes_fine),
            interp,
            owner,
        })
    }

    /// Fine-space image of a coarse vector (exact on coarse polynomials).
    pub fn prolongate(&self, coarse: &[f64], fine: &mut [f64]) {
        let dim = self.fes_coarse.mesh().dim();
        let nc = self.fes_coarse.degree() + 1;
        let nf = self.fes_fine.degree() + 1;
        let npe_c = self.fes_coarse.dofs_per_element();
        let npe_f = self.fes_fine.dofs_per_element();
        let tables: Vec<&[f64]> = vec![&self.interp; dim];
        let mut e_c = vec![0.0; npe_c];
        let mut e_f = vec![0.0; npe_f];
        let mut scratch = Scratch::default();
        fine.fill(0.0);
        for el in 0..self.fes_coarse.num_elements() {
            for (slot, v) in e_c.iter_mut().enumerate() {
                *v = coarse[self.fes_coarse.element_dof(el, slot)];
            }
            tensor::apply_tensor(&tables, nf, nc, dim, &e_c, &mut e_f, &mut scratch);
            for (slot, v) in e_f.iter().enumerate() {
                if self.owner[el * npe_f + slot] {
                    fine[self.fes_fine.element_dof(el, slot)] = *v;
                }
            }
        }
    }

    /// Exact transpose of [`Transfer::prolongate`].
    pub fn restrict(&self, fine: &[f64], coarse: &mut [f64]) {
        let dim = self.fes_coarse.mesh().dim();
        let nc = self.fes_coarse.degree() + 1;
        let nf = self.fes_fine.degree() + 1;
        let npe_c = self.fes_coarse.dofs_per_element();
        let npe_f = self.fes_fine.dofs_per_element();
        let tables: Vec<&[f64]> = vec![&self.interp; dim];
        let mut e_f = vec![0.0; npe_f];
        let mut e_c = vec![0.0; npe_c];
        let mut scratch = Scratch::default();
        coarse.fill(0.0);
        for el in 0..self.fes_coarse.num_elements() {
            for (slot, v) in e_f.iter_mut().enumerate() {
                *v = if self.owner[el * npe_f + slot] {
                    fine[self.fes_fine.element_dof(el, slot)]
                } else {
                    0.0
                };
            }
            tensor::apply_tensor_transpose(&tables, nf, nc, dim, &e_f, &mut e_c, &mut scratch);
            for (slot, v) in e_c.iter().enumerate() {
                coarse[self.fes_coarse.element_dof(el, slot)] += *v;
            }
        }
    }
}

struct Level {
    op: PAOperator,
    essential: Vec<usize>,
    diag: Vec<f64>,
    lambda_max: f64,
}

/// Degrees-descending multigrid hierarchy over a fixed mesh.
pub struct PMGHierarchy {
    /// Ascending degree; last entry is the fine level.
    levels: Vec<Level>,
    transfers: Vec<Transfer>,
    coarse_solver: SkylineCholesky,
    opts: PMGOptions,
}

/// The halving degree schedule p, ceil(p/2), ..., 1 in ascending order.
pub fn degree_schedule(p_fine: usize) -> Vec<usize> {
    let mut degrees = vec![p_fine];
    let mut p = p_fine;
    while p > 1 {
        p = p.div_ceil(2);
        degrees.push(p);
    }
    degrees.reverse();
    degrees
}

impl PMGHierarchy {
    pub fn new(
        mesh: &Arc<CartesianMesh>,
        kind: OperatorKind,
        coeff: Coefficient,
        p_fine: usize,
        bc: EssentialBc,
        opts: PMGOptions,
    ) -> Result<Self> {
        let degrees = degree_schedule(p_fine);
        if degrees.len() < 2 {
            return Err(Error::HierarchyTooShallow);
        }
        let mut spaces = Vec::with_capacity(degrees.len());
        let mut levels = Vec::with_capacity(degrees.len());
        for &p in &degrees {
            let fes = Arc::new(FESpace::new(mesh, p, Continuity::H1, 1)?);
            let essential = fes.essential_dofs(bc)?;
            let mut op = PAOperator::new(&fes, kind, Arc::clone(&coeff), None)?;
            op.set_essential_dofs(essential.clone());
            let diag = op.diagonal();
            let lambda_max = power_method_lmax(
                |x, y| op.apply(x, y).expect("sizes fixed by hierarchy"),
                &diag,
                opts.power_iters,
            );
            spaces.push(fes);
            levels.push(Level {
                op,
                essential,
                diag,
                lambda_max,
            });
        }
        let mut transfers = Vec::with_capacity(levels.len() - 1);
        for l in 0..levels.len() - 1 {
            transfers.push(Transfer::new(&spaces[l], &spaces[l + 1])?);
        }
        let coarse_solver = SkylineCholesky::factor(&levels[0].op.full_assemble())?;
        Ok(Self {
            levels,
            transfers,
            coarse_solver,
            opts,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn fine_op(&self) -> &PAOperator {
        &self.levels.last().expect("nonempty").op
    }

    pub fn fine_essential(&self) -> &[usize] {
        &self.levels.last().expect("nonempty").essential
    }

    pub fn transfer(&self, level: usize) -> &Transfer {
        &self.transfers[level]
    }

    /// One V-cycle for A x = b on the finest level, refining `x` in place.
    pub fn vcycle(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(self.levels.len() - 1, b, x);
    }

    /// Preconditioner action: one V-cycle from a zero initial guess.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.fill(0.0);
        self.cycle(self.levels.len() - 1, r, z);
    }

    fn smooth(&self, level: &Level, sweeps: usize, b: &[f64], x: &mut [f64]) {
        for _ in 0..sweeps {
            chebyshev_smooth(
                |v, w| level.op.apply(v, w).expect("sizes fixed by hierarchy"),
                &level.diag,
                level.lambda_max,
                self.opts.smoother_order,
                b,
                x,
            )
            .expect("positive diagonal");
        }
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l == 0 {
            let mut rhs = b.to_vec();
            for &d in &self.levels[0].essential {
                rhs[d] = 0.0;
            }
            let sol = self.coarse_solver.solve(&rhs);
            x.copy_from_slice(&sol);
            return;
        }
        let level = &self.levels[l];
        let n = level.op.size();
        self.smooth(level, self.opts.pre_sweeps, b, x);
        // Residual, zeroed on essential dofs so the coarse problem is the
        // homogeneous correction equation.
        let mut r = vec![0.0; n];
        level.op.apply(x, &mut r).expect("sizes fixed by hierarchy");
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        for &d in &level.essential {
            r[d] = 0.0;
        }
        let transfer = &self.transfers[l - 1];
        let nc = self.levels[l - 1].op.size();
        let mut rc = vec![0.0; nc];
        transfer.restrict(&r, &mut rc);
        for &d in &self.levels[l - 1].essential {
            rc[d] = 0.0;
        }
        let mut ec = vec![0.0; nc];
        self.cycle(l - 1, &rc, &mut ec);
        let mut e = vec![0.0; n];
        transfer.prolongate(&ec, &mut e);
        for &d in &level.essential {
            e[d] = 0.0;
        }
        for i in 0..n {
            x[i] += e[i];
        }
        self.smooth(level, self.opts.post_sweeps, b, x);
    }
}

/// Degenerate-hierarchy guard used by the drivers: a single degree cannot
/// form a hierarchy.
pub fn validate_levels(p_fine: usize) -> Result<()> {
    if degree_schedule(p_fine).len() < 2 {
        return Err(Error::HierarchyTooShallow);
    }
    Ok(())
}
