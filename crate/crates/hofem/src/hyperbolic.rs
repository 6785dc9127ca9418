//! Discontinuous Galerkin integrator for first-order hyperbolic systems on
//! fully periodic 2D quad meshes: element-wise weak divergence plus an
//! interface Rusanov flux, block-diagonal mass solves by per-element dense
//! Cholesky, and SSP-RK3 time stepping with a CFL-based step size.
//!
//! Jump convention: the jump of v is v- minus v+ with the face normal
//! pointing from the minus to the plus element (the lower element index).

use crate::basis::Basis1D;
use crate::error::{Error, Result};
use crate::fespace::{Continuity, FESpace};
use crate::mesh::GeometricFactors;
use crate::tensor::{self, Scratch};
use rayon::prelude::*;
use std::sync::Arc;

/// A first-order conservation law u_t + div F(u) = 0 with m components.
pub trait ConservationLaw: Send + Sync {
    fn num_components(&self) -> usize;
    /// Flux matrix, row-major: out[c*2 + a] is the flux of component c
    /// along axis a.
    fn flux(&self, u: &[f64], out: &mut [f64]);
    /// Maximal signal speed for a unit normal.
    fn max_speed(&self, u: &[f64], n: &[f64; 2]) -> f64;
    fn is_admissible(&self, _u: &[f64]) -> bool {
        true
    }
    fn name(&self) -> &'static str;
}

/// Scalar advection u_t + div(b u) = 0.
pub struct LinearAdvection {
    pub velocity: [f64; 2],
}

impl ConservationLaw for LinearAdvection {
    fn num_components(&self) -> usize {
        1
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = self.velocity[0] * u[0];
        out[1] = self.velocity[1] * u[0];
    }

    fn max_speed(&self, _u: &[f64], n: &[f64; 2]) -> f64 {
        (self.velocity[0] * n[0] + self.velocity[1] * n[1]).abs()
    }

    fn name(&self) -> &'static str {
        "advection"
    }
}

/// Shallow water equations with state (h, hu, hv) over a flat bottom.
pub struct ShallowWater {
    pub gravity: f64,
}

impl ConservationLaw for ShallowWater {
    fn num_components(&self) -> usize {
        3
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let (h, hu, hv) = (u[0], u[1], u[2]);
        let vx = hu / h;
        let vy = hv / h;
        let p = 0.5 * self.gravity * h * h;
        out[0] = hu;
        out[1] = hv;
        out[2] = hu * vx + p;
        out[3] = hu * vy;
        out[4] = hv * vx;
        out[5] = hv * vy + p;
    }

    fn max_speed(&self, u: &[f64], n: &[f64; 2]) -> f64 {
        let h = u[0];
        let vn = (u[1] * n[0] + u[2] * n[1]) / h;
        vn.abs() + (self.gravity * h).sqrt()
    }

    fn is_admissible(&self, u: &[f64]) -> bool {
        u[0] > 0.0
    }

    fn name(&self) -> &'static str {
        "shallow-water"
    }
}

/// Rusanov (local Lax-Friedrichs) numerical flux:
/// 0.5 (F(u-) + F(u+)) . n - 0.5 max(lambda-, lambda+) (u+ - u-).
pub fn rusanov_flux(
    law: &dyn ConservationLaw,
    n: &[f64; 2],
    u_minus: &[f64],
    u_plus: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if !law.is_admissible(u_minus) || !law.is_admissible(u_plus) {
        return Err(Error::InadmissibleState {
            face: None,
            stage: None,
        });
    }
    let m = law.num_components();
    let mut fm = vec![0.0; m * 2];
    let mut fp = vec![0.0; m * 2];
    law.flux(u_minus, &mut fm);
    law.flux(u_plus, &mut fp);
    let lam = law.max_speed(u_minus, n).max(law.max_speed(u_plus, n));
    for c in 0..m {
        let central = 0.5
            * ((fm[c * 2] + fp[c * 2]) * n[0] + (fm[c * 2 + 1] + fp[c * 2 + 1]) * n[1]);
        out[c] = central - 0.5 * lam * (u_plus[c] - u_minus[c]);
    }
    Ok(())
}

/// Per-element dense Cholesky of the DG mass matrix.
struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    fn factor(a: &[f64], n: usize) -> Result<Self> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut sum = x[i];
            for k in 0..i {
                sum -= self.l[i * n + k] * x[k];
            }
            x[i] = sum / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in i + 1..n {
                sum -= self.l[k * n + i] * x[k];
            }
            x[i] = sum / self.l[i * n + i];
        }
    }
}

struct Face {
    minus: usize,
    plus: usize,
    /// 0: the face is the minus element's xi_0 = 1 edge; 1: xi_1 = 1 edge.
    axis: usize,
    /// Unit normals at the face quadrature points.
    normals: Vec<[f64; 2]>,
    /// Quadrature weight times surface element per point.
    weights: Vec<f64>,
}

/// DG spatial operator for one conservation law on a periodic 2D quad mesh.
pub struct DGOperator {
    law: Arc<dyn ConservationLaw>,
    fes: Arc<FESpace>,
    basis: Basis1D,
    gf: GeometricFactors,
    faces: Vec<Face>,
    mass: Vec<DenseCholesky>,
}

impl DGOperator {
    /// `p` is the polynomial degree of the L2 state space; face and volume
    /// rules both use q = p + 2 Gauss points per direction.
    pub fn new(law: Arc<dyn ConservationLaw>, mesh: &Arc<crate::mesh::CartesianMesh>, p: usize) -> Result<Self> {
        if mesh.dim() != 2 {
            return Err(Error::BadDimension(mesh.dim()));
        }
        if !mesh.periodic().iter().all(|&p| p) {
            return Err(Error::Config(
                "the DG integrator requires a fully periodic mesh".into(),
            ));
        }
        let m = law.num_components();
        let fes = Arc::new(FESpace::new(mesh, p, Continuity::L2, m)?);
        let q = p + 2;
        let basis = Basis1D::new(p, q)?;
        let gf = mesh.geometric_factors(q)?;
        let counts = mesh.counts();
        let (nx, ny) = (counts[0], counts[1]);
        // Interior faces of the periodic lattice: one x-face and one y-face
        // per element, owned by the lower element index (the minus side).
        let mut faces = Vec::with_capacity(2 * nx * ny);
        let mut jac = [0.0f64; 4];
        for axis in 0..2 {
            for ey in 0..ny {
                for ex in 0..nx {
                    let minus = ex + nx * ey;
                    let plus = if axis == 0 {
                        (ex + 1) % nx + nx * ey
                    } else {
                        ex + nx * ((ey + 1) % ny)
                    };
                    let mut normals = Vec::with_capacity(q);
                    let mut weights = Vec::with_capacity(q);
                    for (k, &t) in basis.quad_points.iter().enumerate() {
                        let xi = if axis == 0 { [1.0, t] } else { [t, 1.0] };
                        mesh.eval_jacobian(minus, &xi, &mut jac);
                        let det = jac[0] * jac[3] - jac[1] * jac[2];
                        // Vector area element det J * J^{-T} e_axis.
                        let raw = if axis == 0 {
                            [jac[3], -jac[2]]
                        } else {
                            [-jac[1], jac[0]]
                        };
                        let len = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
                        if det <= 0.0 || len == 0.0 {
                            return Err(Error::InvalidMesh {
                                element: minus,
                                point: k,
                                det,
                            });
                        }
                        normals.push([raw[0] / len, raw[1] / len]);
                        weights.push(basis.quad_weights[k] * len);
                    }
                    faces.push(Face {
                        minus,
                        plus,
                        axis,
                        normals,
                        weights,
                    });
                }
            }
        }
        // Per-element mass matrices from the volume rule.
        let npe = fes.dofs_per_element();
        let nq = gf.nq;
        let n1 = p + 1;
        let mass: Result<Vec<DenseCholesky>> = (0..mesh.num_elements())
            .map(|el| {
                let mut a = vec![0.0; npe * npe];
                for k in 0..nq {
                    let w = gf.weights[k] * gf.det(el, k);
                    let (kx, ky) = (k % q, k / q);
                    for j in 0..npe {
                        let (jx, jy) = (j % n1, j / n1);
                        let bj = basis.b[kx * n1 + jx] * basis.b[ky * n1 + jy];
                        for i in 0..npe {
                            let (ix, iy) = (i % n1, i / n1);
                            let bi = basis.b[kx * n1 + ix] * basis.b[ky * n1 + iy];
                            a[i * npe + j] += w * bi * bj;
                        }
                    }
                }
                DenseCholesky::factor(&a, npe)
            })
            .collect();
        Ok(Self {
            law,
            fes,
            basis,
            gf,
            faces,
            mass: mass?,
        })
    }

    pub fn fes(&self) -> &Arc<FESpace> {
        &self.fes
    }

    pub fn law(&self) -> &Arc<dyn ConservationLaw> {
        &self.law
    }

    pub fn size(&self) -> usize {
        self.fes.size()
    }

    /// Nodal interpolant of an initial condition.
    pub fn project(&self, f: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let m = self.law.num_components();
        let coords = self.fes.dof_coords();
        let mut u = vec![0.0; self.fes.size()];
        for s in 0..self.fes.ndofs_scalar() {
            let vals = f(&coords[2 * s..2 * s + 2]);
            u[s * m..(s + 1) * m].copy_from_slice(&vals);
        }
        u
    }

    /// du/dt = M^{-1} (volume divergence - interface fluxes).
    pub fn residual(&self, u: &[f64], _t: f64) -> Result<Vec<f64>> {
        let n = self.fes.size();
        if u.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let m = self.law.num_components();
        let p = self.fes.degree();
        let n1 = p + 1;
        let npe = self.fes.dofs_per_element();
        let q = self.basis.q;
        let nq = self.gf.nq;
        let chunk = npe * m;

        // Volume term, element-parallel.
        let mut weak = vec![0.0; n];
        let vol_err: Vec<Option<usize>> = weak
            .par_chunks_mut(chunk)
            .enumerate()
            .map_init(
                || VolumeWork::new(npe, nq, m),
                |work, (el, out)| {
                    let ue = &u[el * chunk..(el + 1) * chunk];
                    // Interpolate each component to the quadrature points.
                    let tables: Vec<&[f64]> = vec![&self.basis.b; 2];
                    for c in 0..m {
                        for i in 0..npe {
                            work.comp[i] = ue[i * m + c];
                        }
                        tensor::apply_tensor(&tables, q, n1, 2, &work.comp, &mut work.uq, &mut work.scratch);
                        for k in 0..nq {
                            work.state[k * m + c] = work.uq[k];
                        }
                    }
                    // Pull back the flux: t_{c,a} = w det J (J^{-1} F_c)_a.
                    for k in 0..nq {
                        let uk = &work.state[k * m..(k + 1) * m];
                        if !self.law.is_admissible(uk) {
                            return Some(el);
                        }
                        self.law.flux(uk, &mut work.flux);
                        let jt = self.gf.jinv_t(el, k);
                        let w = self.gf.weights[k] * self.gf.det(el, k);
                        for c in 0..m {
                            for a in 0..2 {
                                // (J^{-1})_{ab} = (J^{-T})_{ba}
                                let val = jt[a] * work.flux[c * 2]
                                    + jt[2 + a] * work.flux[c * 2 + 1];
                                work.tq[(c * 2 + a) * nq + k] = w * val;
                            }
                        }
                    }
                    out.fill(0.0);
                    for c in 0..m {
                        for a in 0..2 {
                            let tables: Vec<&[f64]> = (0..2)
                                .map(|b| if b == a { &self.basis.g[..] } else { &self.basis.b[..] })
                                .collect();
                            tensor::apply_tensor_transpose(
                                &tables,
                                q,
                                n1,
                                2,
                                &work.tq[(c * 2 + a) * nq..(c * 2 + a + 1) * nq],
                                &mut work.comp,
                                &mut work.scratch,
                            );
                            for i in 0..npe {
                                out[i * m + c] += work.comp[i];
                            }
                        }
                    }
                    None
                },
            )
            .collect();
        if vol_err.into_iter().flatten().next().is_some() {
            return Err(Error::InadmissibleState {
                face: None,
                stage: None,
            });
        }

        // Interface fluxes, sequential over faces.
        let mut um = vec![0.0; m];
        let mut up = vec![0.0; m];
        let mut fhat = vec![0.0; m];
        let mut trace_m = vec![0.0; n1 * m];
        let mut trace_p = vec![0.0; n1 * m];
        let mut accum_m = vec![0.0; n1 * m];
        let mut accum_p = vec![0.0; n1 * m];
        for (fi, face) in self.faces.iter().enumerate() {
            let em = &u[face.minus * chunk..(face.minus + 1) * chunk];
            let ep = &u[face.plus * chunk..(face.plus + 1) * chunk];
            // Trace layers: the minus element's high face and the plus
            // element's low face along `axis`; the dof layer is nodal at the
            // endpoints of the Gauss-Lobatto basis.
            for j in 0..n1 {
                for c in 0..m {
                    let (slot_m, slot_p) = if face.axis == 0 {
                        (p + j * n1, j * n1)
                    } else {
                        (j + p * n1, j)
                    };
                    trace_m[j * m + c] = em[slot_m * m + c];
                    trace_p[j * m + c] = ep[slot_p * m + c];
                }
            }
            accum_m.fill(0.0);
            accum_p.fill(0.0);
            for k in 0..q {
                for c in 0..m {
                    let mut vm = 0.0;
                    let mut vp = 0.0;
                    for j in 0..n1 {
                        let b = self.basis.b[k * n1 + j];
                        vm += b * trace_m[j * m + c];
                        vp += b * trace_p[j * m + c];
                    }
                    um[c] = vm;
                    up[c] = vp;
                }
                rusanov_flux(self.law.as_ref(), &face.normals[k], &um, &up, &mut fhat)
                    .map_err(|e| e.face_context(fi))?;
                let w = face.weights[k];
                for j in 0..n1 {
                    let b = self.basis.b[k * n1 + j];
                    for c in 0..m {
                        accum_m[j * m + c] += w * b * fhat[c];
                        accum_p[j * m + c] += w * b * fhat[c];
                    }
                }
            }
            // [[v]] = v- - v+: the flux leaves minus and enters plus.
            let weak_m = &mut weak[face.minus * chunk..(face.minus + 1) * chunk];
            for j in 0..n1 {
                let slot = if face.axis == 0 { p + j * n1 } else { j + p * n1 };
                for c in 0..m {
                    weak_m[slot * m + c] -= accum_m[j * m + c];
                }
            }
            let weak_p = &mut weak[face.plus * chunk..(face.plus + 1) * chunk];
            for j in 0..n1 {
                let slot = if face.axis == 0 { j * n1 } else { j };
                for c in 0..m {
                    weak_p[slot * m + c] += accum_p[j * m + c];
                }
            }
        }

        // Block-diagonal mass solve per element and component.
        weak.par_chunks_mut(chunk)
            .enumerate()
            .for_each_init(
                || vec![0.0; npe],
                |comp, (el, we)| {
                    for c in 0..m {
                        for i in 0..npe {
                            comp[i] = we[i * m + c];
                        }
                        self.mass[el].solve_in_place(comp);
                        for i in 0..npe {
                            we[i * m + c] = comp[i];
                        }
                    }
                },
            );
        Ok(weak)
    }

    /// CFL step: cfl * min over elements of (width / signal speed) / (2p+1).
    pub fn stable_dt(&self, u: &[f64], cfl: f64) -> f64 {
        let m = self.law.num_components();
        let npe = self.fes.dofs_per_element();
        let mesh = self.fes.mesh();
        let mut enodes = Vec::new();
        let mut dt = f64::INFINITY;
        for el in 0..self.fes.num_elements() {
            mesh.element_nodes(el, &mut enodes);
            let mut width = [f64::INFINITY; 2];
            for a in 0..2 {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for node in enodes.chunks(2) {
                    lo = lo.min(node[a]);
                    hi = hi.max(node[a]);
                }
                width[a] = hi - lo;
            }
            let ue = &u[el * npe * m..(el + 1) * npe * m];
            for a in 0..2 {
                let n = if a == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
                let mut lam: f64 = 0.0;
                for i in 0..npe {
                    lam = lam.max(self.law.max_speed(&ue[i * m..(i + 1) * m], &n));
                }
                if lam > 0.0 {
                    dt = dt.min(width[a] / lam);
                }
            }
        }
        cfl * dt / (2.0 * self.fes.degree() as f64 + 1.0)
    }

    /// One SSP-RK3 step in incremental Shu-Osher form (a zero residual
    /// leaves the state bitwise unchanged).
    pub fn ssp_rk3_step(&self, u: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
        let n = u.len();
        let r0 = self.residual(u, t).map_err(|e| e.stage_context(0))?;
        let mut u1 = vec![0.0; n];
        for i in 0..n {
            u1[i] = u[i] + dt * r0[i];
        }
        let r1 = self.residual(&u1, t + dt).map_err(|e| e.stage_context(1))?;
        let mut u2 = vec![0.0; n];
        for i in 0..n {
            u2[i] = u[i] + 0.25 * ((u1[i] - u[i]) + dt * r1[i]);
        }
        let r2 = self
            .residual(&u2, t + 0.5 * dt)
            .map_err(|e| e.stage_context(2))?;
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = u[i] + (2.0 / 3.0) * ((u2[i] - u[i]) + dt * r2[i]);
        }
        Ok(out)
    }

    /// Integral of every component over the domain.
    pub fn mass_integral(&self, u: &[f64]) -> Vec<f64> {
        let m = self.law.num_components();
        let p = self.fes.degree();
        let n1 = p + 1;
        let npe = self.fes.dofs_per_element();
        let q = self.basis.q;
        let nq = self.gf.nq;
        let mut totals = vec![0.0; m];
        let mut comp = vec![0.0; npe];
        let mut uq = vec![0.0; nq];
        let mut scratch = Scratch::default();
        let tables: Vec<&[f64]> = vec![&self.basis.b; 2];
        for el in 0..self.fes.num_elements() {
            let ue = &u[el * npe * m..(el + 1) * npe * m];
            for c in 0..m {
                for i in 0..npe {
                    comp[i] = ue[i * m + c];
                }
                tensor::apply_tensor(&tables, q, n1, 2, &comp, &mut uq, &mut scratch);
                for k in 0..nq {
                    totals[c] += self.gf.weights[k] * self.gf.det(el, k) * uq[k];
                }
            }
        }
        totals
    }

    /// L2 norm over all components.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let m = self.law.num_components();
        (0..m)
            .map(|c| {
                let e = self.l2_error_component(u, c, &|_| 0.0);
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }

    /// L2 norm of (component c of u) - exact.
    pub fn l2_error_component(&self, u: &[f64], c: usize, exact: &dyn Fn(&[f64]) -> f64) -> f64 {
        let m = self.law.num_components();
        let p = self.fes.degree();
        let n1 = p + 1;
        let npe = self.fes.dofs_per_element();
        let q = self.basis.q;
        let nq = self.gf.nq;
        let mut comp = vec![0.0; npe];
        let mut uq = vec![0.0; nq];
        let mut scratch = Scratch::default();
        let tables: Vec<&[f64]> = vec![&self.basis.b; 2];
        let mut total = 0.0;
        for el in 0..self.fes.num_elements() {
            let ue = &u[el * npe * m..(el + 1) * npe * m];
            for i in 0..npe {
                comp[i] = ue[i * m + c];
            }
            tensor::apply_tensor(&tables, q, n1, 2, &comp, &mut uq, &mut scratch);
            for k in 0..nq {
                let d = uq[k] - exact(self.gf.point(el, k));
                total += self.gf.weights[k] * self.gf.det(el, k) * d * d;
            }
        }
        total.sqrt()
    }
}

impl Error {
    fn face_context(self, face: usize) -> Error {
        match self {
            Error::InadmissibleState { stage, .. } => Error::InadmissibleState {
                face: Some(face),
                stage,
            },
            other => other,
        }
    }

    fn stage_context(self, stage: usize) -> Error {
        match self {
            Error::InadmissibleState { face, .. } => Error::InadmissibleState {
                face,
                stage: Some(stage),
            },
            other => other,
        }
    }
}

struct VolumeWork {
    scratch: Scratch,
    comp: Vec<f64>,
    uq: Vec<f64>,
    state: Vec<f64>,
    flux: Vec<f64>,
    tq: Vec<f64>,
}

impl VolumeWork {
    fn new(npe: usize, nq: usize, m: usize) -> Self {
        Self {
            scratch: Scratch::default(),
            comp: vec![0.0; npe],
            uq: vec![0.0; nq],
            state: vec![0.0; nq * m],
            flux: vec![0.0; m * 2],
            tq: vec![0.0; nq * m * 2],
        }
    }
}
