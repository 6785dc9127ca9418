//! Mass and diffusion bilinear forms at every assembly level: partial
//! assembly (quadrature-point data only), element assembly (dense local
//! matrices), full sparse assembly, and a fully matrix-free mass apply that
//! recomputes geometry on the fly.
//!
//! The partially assembled operator realizes `A = G^T B^T D B G` with
//! sum-factorized tensor contractions; only `D` is stored. Essential dofs
//! follow the "identity row + moved column" convention so constrained
//! operators stay symmetric: the constrained apply zeroes essential entries
//! of the input, applies the raw operator, and then copies the essential
//! input entries through.

use crate::basis::Basis1D;
use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::sparse::CsrMatrix;
use crate::tensor::{self, Scratch};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Mass,
    Diffusion,
}

/// Scalar coefficient evaluated at physical points.
pub type Coefficient = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub fn constant_coefficient(c: f64) -> Coefficient {
    Arc::new(move |_| c)
}

/// Symmetric-packed component count of the diffusion qdata.
fn sym_comps(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Index into the packed symmetric matrix, a <= b.
fn sym_index(dim: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * dim - a * (a + 1) / 2 + b
}

/// Partially assembled operator: stores per-element, per-quadrature-point
/// data only (structure-of-arrays: one plane per component, element-major
/// within each plane).
pub struct PAOperator {
    kind: OperatorKind,
    fes: Arc<FESpace>,
    basis: Basis1D,
    geom_basis: Basis1D,
    coeff: Coefficient,
    qdata: Vec<f64>,
    nq: usize,
    qcomps: usize,
    essential: Vec<usize>,
    matrix_free: bool,
}

impl PAOperator {
    /// Set up qdata from the geometric factors at the q-point tensor Gauss
    /// rule (default q = p + 2). No global matrix is formed.
    pub fn new(fes: &Arc<FESpace>, kind: OperatorKind, coeff: Coefficient, q: Option<usize>) -> Result<Self> {
        let p = fes.degree();
        let q = q.unwrap_or(p + 2);
        let basis = Basis1D::new(p, q)?;
        let geom_basis = Basis1D::new(fes.mesh().geom_order(), q)?;
        let mut op = Self {
            kind,
            fes: Arc::clone(fes),
            basis,
            geom_basis,
            coeff,
            qdata: Vec::new(),
            nq: q.pow(fes.mesh().dim() as u32),
            qcomps: match kind {
                OperatorKind::Mass => 1,
                OperatorKind::Diffusion => sym_comps(fes.mesh().dim()),
            },
            essential: Vec::new(),
            matrix_free: false,
        };
        op.compute_qdata()?;
        Ok(op)
    }

    fn compute_qdata(&mut self) -> Result<()> {
        let dim = self.fes.mesh().dim();
        let ne = self.fes.num_elements();
        let gf = self.fes.mesh().geometric_factors(self.basis.q)?;
        let nq = self.nq;
        let mut qdata = vec![0.0; self.qcomps * ne * nq];
        match self.kind {
            OperatorKind::Mass => {
                for el in 0..ne {
                    for k in 0..nq {
                        let c = (self.coeff)(gf.point(el, k));
                        qdata[el * nq + k] = gf.weights[k] * gf.det(el, k) * c;
                    }
                }
            }
            OperatorKind::Diffusion => {
                let plane = ne * nq;
                for el in 0..ne {
                    for k in 0..nq {
                        let c = (self.coeff)(gf.point(el, k));
                        let s = gf.weights[k] * gf.det(el, k) * c;
                        let jt = gf.jinv_t(el, k);
                        for a in 0..dim {
                            for b in a..dim {
                                // (J^{-1} J^{-T})_{ab} = sum_r JT[r][a] JT[r][b]
                                let mut m = 0.0;
                                for r in 0..dim {
                                    m += jt[r * dim + a] * jt[r * dim + b];
                                }
                                qdata[sym_index(dim, a, b) * plane + el * nq + k] = s * m;
                            }
                        }
                    }
                }
            }
        }
        self.qdata = qdata;
        Ok(())
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn fes(&self) -> &Arc<FESpace> {
        &self.fes
    }

    pub fn basis(&self) -> &Basis1D {
        &self.basis
    }

    pub fn coefficient(&self) -> Coefficient {
        Arc::clone(&self.coeff)
    }

    pub fn size(&self) -> usize {
        self.fes.true_size()
    }

    /// Stored qdata scalars (elements * q^dim * components).
    pub fn qdata_len(&self) -> usize {
        self.qdata.len()
    }

    pub fn qdata(&self) -> &[f64] {
        &self.qdata
    }

    pub fn essential_dofs(&self) -> &[usize] {
        &self.essential
    }

    /// Constrain T-dofs; rows and columns are treated by the
    /// eliminate-keep-identity convention in every assembly level.
    pub fn set_essential_dofs(&mut self, mut dofs: Vec<usize>) {
        dofs.sort_unstable();
        dofs.dedup();
        self.essential = dofs;
    }

    /// Switch the mass operator to the fully matrix-free level: qdata is
    /// dropped and geometry is recomputed during every apply.
    pub fn set_matrix_free(&mut self, on: bool) -> Result<()> {
        if on && self.kind != OperatorKind::Mass {
            return Err(Error::MatrixFreeUnsupported);
        }
        if on {
            self.qdata = Vec::new();
            self.matrix_free = true;
        } else if self.matrix_free {
            self.matrix_free = false;
            self.compute_qdata()?;
        }
        Ok(())
    }

    /// y = A x with essential-dof identity rows.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.size();
        if x.len() != n || y.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: if x.len() != n { x.len() } else { y.len() },
            });
        }
        if self.essential.is_empty() {
            self.apply_raw(x, y)?;
            return Ok(());
        }
        let mut z = x.to_vec();
        for &d in &self.essential {
            z[d] = 0.0;
        }
        self.apply_raw(&z, y)?;
        for &d in &self.essential {
            y[d] = x[d];
        }
        Ok(())
    }

    pub fn apply_owned(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.size()];
        self.apply(x, &mut y)?;
        Ok(y)
    }

    /// The unconstrained G^T B^T D B G action.
    pub fn apply_raw(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let fes = &self.fes;
        let vd = fes.vdim();
        let npe = fes.dofs_per_element();
        let mut e_in = vec![0.0; fes.e_size()];
        fes.gather(x, &mut e_in)?;
        let mut e_out = vec![0.0; fes.e_size()];
        let chunk = npe * vd;
        e_out
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each_init(ElementWork::default, |work, (el, out)| {
                let xin = &e_in[el * chunk..(el + 1) * chunk];
                if vd == 1 {
                    self.element_apply(el, xin, out, work);
                } else {
                    let mut xs = vec![0.0; npe];
                    let mut ys = vec![0.0; npe];
                    for c in 0..vd {
                        for i in 0..npe {
                            xs[i] = xin[i * vd + c];
                        }
                        self.element_apply(el, &xs, &mut ys, work);
                        for i in 0..npe {
                            out[i * vd + c] = ys[i];
                        }
                    }
                }
            });
        y.fill(0.0);
        fes.scatter_add(&e_out, y)?;
        Ok(())
    }

    /// Scalar element kernel: sum-factorized B^T D B on one element.
    fn element_apply(&self, el: usize, x_e: &[f64], y_e: &mut [f64], work: &mut ElementWork) {
        let dim = self.fes.mesh().dim();
        let q = self.basis.q;
        let n1 = self.basis.p + 1;
        let nq = self.nq;
        let ne = self.fes.num_elements();
        work.resize(nq, x_e.len());
        match self.kind {
            OperatorKind::Mass => {
                let tables: Vec<&[f64]> = vec![&self.basis.b; dim];
                tensor::apply_tensor(&tables, q, n1, dim, x_e, &mut work.uq, &mut work.scratch);
                if self.matrix_free {
                    let mut uq = std::mem::take(&mut work.uq);
                    self.pointwise_geometry_mass(el, &mut uq, work);
                    work.uq = uq;
                } else {
                    let qd = &self.qdata[el * nq..(el + 1) * nq];
                    for (u, d) in work.uq.iter_mut().zip(qd) {
                        *u *= d;
                    }
                }
                let uq = std::mem::take(&mut work.uq);
                tensor::apply_tensor_transpose(&tables, q, n1, dim, &uq, y_e, &mut work.scratch);
                work.uq = uq;
            }
            OperatorKind::Diffusion => {
                for a in 0..dim {
                    let tables: Vec<&[f64]> = (0..dim)
                        .map(|b| if b == a { &self.basis.g[..] } else { &self.basis.b[..] })
                        .collect();
                    let mut ta = std::mem::take(&mut work.tq[a]);
                    tensor::apply_tensor(&tables, q, n1, dim, x_e, &mut ta, &mut work.scratch);
                    work.tq[a] = ta;
                }
                let plane = ne * nq;
                for k in 0..nq {
                    let mut g = [0.0f64; 3];
                    for (a, ga) in g.iter_mut().enumerate().take(dim) {
                        *ga = work.tq[a][k];
                    }
                    for a in 0..dim {
                        let mut acc = 0.0;
                        for (b, gb) in g.iter().enumerate().take(dim) {
                            acc += self.qdata[sym_index(dim, a, b) * plane + el * nq + k] * gb;
                        }
                        work.tq[a][k] = acc;
                    }
                }
                y_e.fill(0.0);
                for a in 0..dim {
                    let tables: Vec<&[f64]> = (0..dim)
                        .map(|b| if b == a { &self.basis.g[..] } else { &self.basis.b[..] })
                        .collect();
                    tensor::apply_tensor_transpose(
                        &tables,
                        q,
                        n1,
                        dim,
                        &work.tq[a],
                        &mut work.out,
                        &mut work.scratch,
                    );
                    for (y, o) in y_e.iter_mut().zip(&work.out) {
                        *y += o;
                    }
                }
            }
        }
    }

    /// Matrix-free mass pointwise stage: recompute w det J and the
    /// coefficient from the element geometry at apply time.
    fn pointwise_geometry_mass(&self, el: usize, uq: &mut [f64], work: &mut ElementWork) {
        let mesh = self.fes.mesh();
        let dim = mesh.dim();
        let q = self.basis.q;
        let gn1 = mesh.geom_order() + 1;
        let nq = self.nq;
        let mut enodes = Vec::new();
        mesh.element_nodes(el, &mut enodes);
        let npe_g = gn1.pow(dim as u32);
        let mut comp = vec![0.0; npe_g];
        let mut jall = vec![0.0; nq * dim * dim];
        let mut coords = vec![0.0; nq * dim];
        let mut vals = vec![0.0; nq];
        for r in 0..dim {
            for (i, v) in comp.iter_mut().enumerate() {
                *v = enodes[i * dim + r];
            }
            let tables: Vec<&[f64]> = vec![&self.geom_basis.b; dim];
            tensor::apply_tensor(&tables, q, gn1, dim, &comp, &mut vals, &mut work.scratch);
            for k in 0..nq {
                coords[k * dim + r] = vals[k];
            }
            for c in 0..dim {
                let tables: Vec<&[f64]> = (0..dim)
                    .map(|b| {
                        if b == c {
                            &self.geom_basis.g[..]
                        } else {
                            &self.geom_basis.b[..]
                        }
                    })
                    .collect();
                tensor::apply_tensor(&tables, q, gn1, dim, &comp, &mut vals, &mut work.scratch);
                for k in 0..nq {
                    jall[k * dim * dim + r * dim + c] = vals[k];
                }
            }
        }
        for (k, u) in uq.iter_mut().enumerate() {
            let j = &jall[k * dim * dim..(k + 1) * dim * dim];
            let det = match dim {
                2 => j[0] * j[3] - j[1] * j[2],
                _ => {
                    j[0] * (j[4] * j[8] - j[5] * j[7]) - j[1] * (j[3] * j[8] - j[5] * j[6])
                        + j[2] * (j[3] * j[7] - j[4] * j[6])
                }
            };
            let mut w = 1.0;
            let mut rem = k;
            for _ in 0..dim {
                w *= self.basis.quad_weights[rem % q];
                rem /= q;
            }
            let c = (self.coeff)(&coords[k * dim..(k + 1) * dim]);
            *u *= w * det * c;
        }
    }

    /// Exact diagonal of the assembled operator, element-wise through the
    /// squared basis tables; essential rows report exactly 1.
    pub fn diagonal(&self) -> Vec<f64> {
        let fes = &self.fes;
        let dim = fes.mesh().dim();
        let q = self.basis.q;
        let n1 = self.basis.p + 1;
        let nq = self.nq;
        let ne = fes.num_elements();
        let npe = fes.dofs_per_element();
        let bsq: Vec<f64> = self.basis.b.iter().map(|v| v * v).collect();
        let gsq: Vec<f64> = self.basis.g.iter().map(|v| v * v).collect();
        let bg: Vec<f64> = self
            .basis
            .b
            .iter()
            .zip(&self.basis.g)
            .map(|(b, g)| b * g)
            .collect();
        let mut e_diag = vec![0.0; ne * npe];
        let plane = ne * nq;
        e_diag
            .par_chunks_mut(npe)
            .enumerate()
            .for_each_init(
                || (Scratch::default(), vec![0.0; npe], vec![0.0; nq]),
                |(scratch, tmp, qbuf), (el, out)| match self.kind {
                    OperatorKind::Mass => {
                        let qd = if self.matrix_free {
                            let mut work = ElementWork::default();
                            work.resize(nq, npe);
                            qbuf.fill(1.0);
                            self.pointwise_geometry_mass(el, qbuf, &mut work);
                            &qbuf[..]
                        } else {
                            qbuf.copy_from_slice(&self.qdata[el * nq..(el + 1) * nq]);
                            &qbuf[..]
                        };
                        let tables: Vec<&[f64]> = vec![&bsq; dim];
                        tensor::apply_tensor_transpose(&tables, q, n1, dim, qd, out, scratch);
                    }
                    OperatorKind::Diffusion => {
                        out.fill(0.0);
                        for a in 0..dim {
                            for b in a..dim {
                                let comp = sym_index(dim, a, b);
                                let factor = if a == b { 1.0 } else { 2.0 };
                                for k in 0..nq {
                                    qbuf[k] = factor * self.qdata[comp * plane + el * nq + k];
                                }
                                let tables: Vec<&[f64]> = (0..dim)
                                    .map(|c| {
                                        if c == a && c == b {
                                            &gsq[..]
                                        } else if c == a || c == b {
                                            &bg[..]
                                        } else {
                                            &bsq[..]
                                        }
                                    })
                                    .collect();
                                tensor::apply_tensor_transpose(&tables, q, n1, dim, qbuf, tmp, scratch);
                                for (o, t) in out.iter_mut().zip(tmp.iter()) {
                                    *o += t;
                                }
                            }
                        }
                    }
                },
            );
        let vd = fes.vdim();
        let mut diag = vec![0.0; fes.size()];
        // Expand the scalar element diagonals across vector components.
        if vd == 1 {
            fes.scatter_add(&e_diag, &mut diag).expect("layout");
        } else {
            let mut e_full = vec![0.0; fes.e_size()];
            for s in 0..ne * npe {
                for c in 0..vd {
                    e_full[s * vd + c] = e_diag[s];
                }
            }
            fes.scatter_add(&e_full, &mut diag).expect("layout");
        }
        for &d in &self.essential {
            diag[d] = 1.0;
        }
        diag
    }

    /// Dense per-element matrices A_e = B_e^T D_e B_e (scalar component);
    /// columns are obtained by running the element kernel on unit vectors.
    pub fn element_assemble(&self) -> ElementMatrices {
        let npe = self.fes.dofs_per_element();
        let ne = self.fes.num_elements();
        let mut mats = vec![0.0; ne * npe * npe];
        mats.par_chunks_mut(npe * npe)
            .enumerate()
            .for_each_init(
                || (ElementWork::default(), vec![0.0; npe], vec![0.0; npe]),
                |(work, unit, col), (el, mat)| {
                    for j in 0..npe {
                        unit.fill(0.0);
                        unit[j] = 1.0;
                        self.element_apply(el, unit, col, work);
                        for i in 0..npe {
                            mat[i * npe + j] = col[i];
                        }
                    }
                },
            );
        ElementMatrices {
            ndofs: npe,
            mats,
        }
    }

    /// Assembled global CSR with essential rows/columns eliminated to the
    /// identity.
    pub fn full_assemble(&self) -> CsrMatrix {
        self.full_assemble_unconstrained().constrained(&self.essential)
    }

    /// Assembled global CSR without boundary-condition elimination.
    pub fn full_assemble_unconstrained(&self) -> CsrMatrix {
        let em = self.element_assemble();
        let fes = &self.fes;
        let npe = em.ndofs;
        let vd = fes.vdim();
        let n = fes.size();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for el in 0..fes.num_elements() {
            let mat = em.element(el);
            for i in 0..npe {
                let gi = fes.element_dof(el, i);
                for j in 0..npe {
                    let gj = fes.element_dof(el, j);
                    let v = mat[i * npe + j];
                    if v != 0.0 {
                        for c in 0..vd {
                            rows[gi * vd + c].push((gj * vd + c, v));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_rows(n, rows)
    }

    /// Move prescribed essential values to the right-hand side:
    /// `b <- b - A (x_bc on essential dofs)`, then `b[ess] = x_bc[ess]`.
    pub fn eliminate_bc(&self, x_bc: &[f64], b: &mut [f64]) -> Result<()> {
        let n = self.size();
        for &d in &self.essential {
            if d >= n {
                return Err(Error::IndexOutOfRange { index: d, size: n });
            }
        }
        let mut xe = vec![0.0; n];
        for &d in &self.essential {
            xe[d] = x_bc[d];
        }
        let mut axe = vec![0.0; n];
        self.apply_raw(&xe, &mut axe)?;
        for (bi, ai) in b.iter_mut().zip(&axe) {
            *bi -= ai;
        }
        for &d in &self.essential {
            b[d] = x_bc[d];
        }
        Ok(())
    }
}

/// Inner-loop iterations of one element apply; the structural cost model
/// behind the O(p^(dim+1)) scaling assertion.
pub fn apply_workload(kind: OperatorKind, p: usize, q: usize, dim: usize) -> usize {
    let sweep = tensor::tensor_workload(q, p + 1, dim);
    let nq = q.pow(dim as u32);
    match kind {
        OperatorKind::Mass => 2 * sweep + nq,
        OperatorKind::Diffusion => 2 * dim * sweep + dim * dim * nq,
    }
}

#[derive(Default)]
struct ElementWork {
    scratch: Scratch,
    uq: Vec<f64>,
    tq: [Vec<f64>; 3],
    out: Vec<f64>,
}

impl ElementWork {
    fn resize(&mut self, nq: usize, npe: usize) {
        if self.uq.len() != nq {
            self.uq.resize(nq, 0.0);
            for t in &mut self.tq {
                t.resize(nq, 0.0);
            }
        }
        if self.out.len() != npe {
            self.out.resize(npe, 0.0);
        }
    }
}

/// Element-assembled operator level: dense local matrices applied through
/// the same gather/scatter maps.
pub struct ElementMatrices {
    pub ndofs: usize,
    mats: Vec<f64>,
}

impl ElementMatrices {
    pub fn element(&self, el: usize) -> &[f64] {
        let n2 = self.ndofs * self.ndofs;
        &self.mats[el * n2..(el + 1) * n2]
    }

    /// y = A x via per-element dense mat-vecs, honoring the same
    /// essential-dof convention as the PA apply.
    pub fn apply(&self, fes: &FESpace, essential: &[usize], x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = fes.size();
        if x.len() != n || y.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: if x.len() != n { x.len() } else { y.len() },
            });
        }
        let mut z = x.to_vec();
        for &d in essential {
            z[d] = 0.0;
        }
        let vd = fes.vdim();
        let npe = self.ndofs;
        let mut e_in = vec![0.0; fes.e_size()];
        fes.gather(&z, &mut e_in)?;
        let mut e_out = vec![0.0; fes.e_size()];
        for el in 0..fes.num_elements() {
            let mat = self.element(el);
            let xin = &e_in[el * npe * vd..(el + 1) * npe * vd];
            let out = &mut e_out[el * npe * vd..(el + 1) * npe * vd];
            for c in 0..vd {
                for i in 0..npe {
                    let mut acc = 0.0;
                    for j in 0..npe {
                        acc += mat[i * npe + j] * xin[j * vd + c];
                    }
                    out[i * vd + c] = acc;
                }
            }
        }
        y.fill(0.0);
        fes.scatter_add(&e_out, y)?;
        for &d in essential {
            y[d] = x[d];
        }
        Ok(())
    }
}

/// Right-hand side of a scalar linear form: b_i = integral f phi_i, using a
/// q-point tensor Gauss rule.
pub fn linear_form(fes: &FESpace, q: usize, f: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let mesh = fes.mesh();
    let dim = mesh.dim();
    let basis = Basis1D::new(fes.degree(), q)?;
    let gf = mesh.geometric_factors(q)?;
    let nq = q.pow(dim as u32);
    let n1 = fes.degree() + 1;
    let npe = fes.dofs_per_element();
    let ne = fes.num_elements();
    let mut e_vec = vec![0.0; ne * npe];
    let mut scratch = Scratch::default();
    let mut fq = vec![0.0; nq];
    let tables: Vec<&[f64]> = vec![&basis.b; dim];
    for el in 0..ne {
        for (k, fk) in fq.iter_mut().enumerate() {
            *fk = gf.weights[k] * gf.det(el, k) * f(gf.point(el, k));
        }
        tensor::apply_tensor_transpose(
            &tables,
            q,
            n1,
            dim,
            &fq,
            &mut e_vec[el * npe..(el + 1) * npe],
            &mut scratch,
        );
    }
    let mut b = vec![0.0; fes.size()];
    fes.scatter_add(&e_vec, &mut b)?;
    Ok(b)
}

/// L2 norm of (u_h - exact) over the mesh at a q-point rule.
pub fn l2_error(fes: &FESpace, u: &[f64], exact: &dyn Fn(&[f64]) -> f64, q: usize) -> Result<f64> {
    let mesh = fes.mesh();
    let dim = mesh.dim();
    let basis = Basis1D::new(fes.degree(), q)?;
    let gf = mesh.geometric_factors(q)?;
    let nq = q.pow(dim as u32);
    let n1 = fes.degree() + 1;
    let npe = fes.dofs_per_element();
    let e_vec = fes.gather_owned(u)?;
    let mut scratch = Scratch::default();
    let mut uq = vec![0.0; nq];
    let tables: Vec<&[f64]> = vec![&basis.b; dim];
    let mut total = 0.0;
    for el in 0..fes.num_elements() {
        tensor::apply_tensor(
            &tables,
            q,
            n1,
            dim,
            &e_vec[el * npe..(el + 1) * npe],
            &mut uq,
            &mut scratch,
        );
        for k in 0..nq {
            let diff = uq[k] - exact(gf.point(el, k));
            total += gf.weights[k] * gf.det(el, k) * diff * diff;
        }
    }
    Ok(total.sqrt())
}

/// L2 norm of a grid function.
pub fn l2_norm(fes: &FESpace, u: &[f64], q: usize) -> Result<f64> {
    l2_error(fes, u, &|_| 0.0, q)
}
