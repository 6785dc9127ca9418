//! Target-matrix mesh optimization for 2D quadrilateral meshes.
//!
//! Element quality is measured through T = A W^{-1}, where A is the Jacobian
//! of the reference-to-physical map defined by the movable node field and W
//! is a target Jacobian composed from size, rotation, skewness and aspect
//! ratio. The objective sums mu(T) over target elements; node positions are
//! optimized with a Newton–Krylov iteration (finite-difference Hessian
//! action on the analytic gradient) under a barrier line search that never
//! accepts an inverted element. An optional penalty term pulls a selected
//! node set onto the zero level set of a fixed background field.

use crate::basis::{self, Basis1D};
use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::mesh::CartesianMesh;
use crate::tensor::{self, Scratch};
use rayon::prelude::*;
use std::sync::Arc;

/// 2D barrier quality metrics; T is row-major [t00, t01, t10, t11].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    /// |T|^2 / (2 det T) - 1: measures skew/aspect deviation, size-invariant.
    Shape,
    /// (tau - 1/tau)^2 / 2: measures size deviation.
    Size,
    /// Compound shape + gamma * size.
    ShapeSize { gamma: f64 },
}

impl Metric {
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        let tau = t[0] * t[3] - t[1] * t[2];
        if tau <= 0.0 {
            return Err(Error::MetricBarrier(tau));
        }
        Ok(match *self {
            Metric::Shape => shape_mu(t, tau),
            Metric::Size => size_mu(tau),
            Metric::ShapeSize { gamma } => shape_mu(t, tau) + gamma * size_mu(tau),
        })
    }

    /// Closed-form d mu / d T.
    pub fn grad(&self, t: &[f64]) -> Result<[f64; 4]> {
        let tau = t[0] * t[3] - t[1] * t[2];
        if tau <= 0.0 {
            return Err(Error::MetricBarrier(tau));
        }
        // d tau / dT is the adjugate transpose.
        let dtau = [t[3], -t[2], -t[1], t[0]];
        let mut g = [0.0; 4];
        match *self {
            Metric::Shape => {
                shape_grad(t, tau, &dtau, 1.0, &mut g);
            }
            Metric::Size => {
                size_grad(tau, &dtau, 1.0, &mut g);
            }
            Metric::ShapeSize { gamma } => {
                shape_grad(t, tau, &dtau, 1.0, &mut g);
                size_grad(tau, &dtau, gamma, &mut g);
            }
        }
        Ok(g)
    }
}

fn shape_mu(t: &[f64], tau: f64) -> f64 {
    let frob2 = t.iter().map(|v| v * v).sum::<f64>();
    frob2 / (2.0 * tau) - 1.0
}

fn shape_grad(t: &[f64], tau: f64, dtau: &[f64; 4], scale: f64, g: &mut [f64; 4]) {
    let frob2 = t.iter().map(|v| v * v).sum::<f64>();
    for i in 0..4 {
        g[i] += scale * (t[i] / tau - frob2 / (2.0 * tau * tau) * dtau[i]);
    }
}

fn size_mu(tau: f64) -> f64 {
    let d = tau - 1.0 / tau;
    0.5 * d * d
}

fn size_grad(tau: f64, dtau: &[f64; 4], scale: f64, g: &mut [f64; 4]) {
    let dmu = (tau - 1.0 / tau) * (1.0 + 1.0 / (tau * tau));
    for i in 0..4 {
        g[i] += scale * dmu * dtau[i];
    }
}

/// How the target size factor is chosen.
#[derive(Clone, Debug)]
pub enum TargetKind {
    /// zeta = sqrt(domain measure / elements): the mean element size.
    IdealUniform,
    /// zeta = prescribed h.
    IdealEqualSize(f64),
    /// Explicit W, one 2x2 row-major matrix shared by all points.
    GivenMatrix([f64; 4]),
}

/// Target Jacobian specification W = zeta * R(angle) * Q(skew) * D(aspect).
#[derive(Clone, Debug)]
pub struct TargetSpec {
    pub kind: TargetKind,
    /// Rotation angle of R (radians).
    pub rotation: f64,
    /// Shear entry of the unit-determinant upper-triangular Q.
    pub skew: f64,
    /// Aspect factor of D = diag(a, 1/a).
    pub aspect: f64,
}

impl TargetSpec {
    pub fn ideal_uniform() -> Self {
        Self {
            kind: TargetKind::IdealUniform,
            rotation: 0.0,
            skew: 0.0,
            aspect: 1.0,
        }
    }

    pub fn ideal_equal_size(h: f64) -> Self {
        Self {
            kind: TargetKind::IdealEqualSize(h),
            ..Self::ideal_uniform()
        }
    }

    /// Compose W for one point. `zeta` must already be resolved.
    fn compose(&self, zeta: f64) -> [f64; 4] {
        if let TargetKind::GivenMatrix(w) = &self.kind {
            return *w;
        }
        let (s, c) = self.rotation.sin_cos();
        let r = [c, -s, s, c];
        let q = [1.0, self.skew, 0.0, 1.0];
        let a = self.aspect;
        let d = [a, 0.0, 0.0, 1.0 / a];
        let qd = mat2_mul(&q, &d);
        let rqd = mat2_mul(&r, &qd);
        [
            zeta * rqd[0],
            zeta * rqd[1],
            zeta * rqd[2],
            zeta * rqd[3],
        ]
    }
}

fn mat2_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn mat2_det(a: &[f64; 4]) -> f64 {
    a[0] * a[3] - a[1] * a[2]
}

fn mat2_inv(a: &[f64; 4]) -> [f64; 4] {
    let d = mat2_det(a);
    [a[3] / d, -a[1] / d, -a[2] / d, a[0] / d]
}

/// Per-quadrature-point resolved targets: W^{-1} and det W.
pub struct Targets {
    pub w_inv: Vec<f64>,
    pub det_w: Vec<f64>,
    pub nq: usize,
}

/// Resolve a target spec on a mesh at the q^2 tensor rule.
pub fn resolve_targets(mesh: &CartesianMesh, spec: &TargetSpec, q: usize) -> Result<Targets> {
    if mesh.dim() != 2 {
        return Err(Error::BadDimension(mesh.dim()));
    }
    let ne = mesh.num_elements();
    let nq = q * q;
    let zeta = match spec.kind {
        TargetKind::IdealUniform => {
            let gf = mesh.geometric_factors(mesh.geom_order() + 2)?;
            (gf.integrate_det() / ne as f64).sqrt()
        }
        TargetKind::IdealEqualSize(h) => h,
        TargetKind::GivenMatrix(_) => 1.0,
    };
    let w = spec.compose(zeta);
    let det = mat2_det(&w);
    if det <= 0.0 {
        return Err(Error::MetricBarrier(det));
    }
    let w_inv_1 = mat2_inv(&w);
    let mut w_inv = vec![0.0; ne * nq * 4];
    let mut det_w = vec![0.0; ne * nq];
    for e in 0..ne {
        for k in 0..nq {
            w_inv[(e * nq + k) * 4..(e * nq + k + 1) * 4].copy_from_slice(&w_inv_1);
            det_w[e * nq + k] = det;
        }
    }
    Ok(Targets { w_inv, det_w, nq })
}

/// Level-set fitting data: a fixed scalar field on the background (initial)
/// mesh, a node set to pull onto its zero level set, and the penalty weight.
pub struct FittingData {
    background: Arc<CartesianMesh>,
    sigma_nodes_1d: Vec<f64>,
    sigma_bary_1d: Vec<f64>,
    sigma_degree: usize,
    /// Nodal values of sigma on the background node lattice.
    sigma: Vec<f64>,
    /// Scalar node indices to align.
    pub node_set: Vec<usize>,
    pub weight: f64,
    lo: [f64; 2],
    h: [f64; 2],
}

impl FittingData {
    /// The background must be an axis-aligned box mesh (the initial mesh of
    /// the optimization); sigma is given by its nodal values on the degree
    /// `sigma_degree` lattice of that mesh.
    pub fn new(
        background: &Arc<CartesianMesh>,
        sigma_degree: usize,
        sigma: Vec<f64>,
        node_set: Vec<usize>,
        weight: f64,
    ) -> Result<Self> {
        let nodes_1d = basis::gll_nodes(sigma_degree)?;
        let bary = basis::barycentric_weights(&nodes_1d);
        let n = background.nodes();
        let lo = [n[0], n[1]];
        let counts = background.counts();
        let h = [
            background.axis_length(0) / counts[0] as f64,
            background.axis_length(1) / counts[1] as f64,
        ];
        Ok(Self {
            background: Arc::clone(background),
            sigma_nodes_1d: nodes_1d,
            sigma_bary_1d: bary,
            sigma_degree,
            sigma,
            node_set,
            weight,
            lo,
            h,
        })
    }

    /// Locate a physical point in the (axis-aligned) background mesh.
    /// Returns (element, reference coords, clamped flag).
    fn locate(&self, pt: &[f64]) -> (usize, [f64; 2], bool) {
        let counts = self.background.counts();
        let mut el = [0usize; 2];
        let mut xi = [0.0f64; 2];
        let mut clamped = false;
        for a in 0..2 {
            let mut u = (pt[a] - self.lo[a]) / self.h[a];
            if u < 0.0 {
                u = 0.0;
                clamped = true;
            }
            let max = counts[a] as f64;
            if u > max {
                u = max;
                clamped = true;
            }
            let e = (u.floor() as usize).min(counts[a] - 1);
            el[a] = e;
            xi[a] = u - e as f64;
        }
        (el[0] + counts[0] * el[1], xi, clamped)
    }

    /// sigma and its physical gradient at a point, interpolated through the
    /// fixed background field.
    pub fn eval(&self, pt: &[f64]) -> (f64, [f64; 2], bool) {
        let (el, xi, clamped) = self.locate(pt);
        let p = self.sigma_degree;
        let n1 = p + 1;
        let mut vx = vec![0.0; n1];
        let mut vy = vec![0.0; n1];
        let mut dx = vec![0.0; n1];
        let mut dy = vec![0.0; n1];
        basis::eval_lagrange(&self.sigma_nodes_1d, &self.sigma_bary_1d, xi[0], &mut vx);
        basis::eval_lagrange(&self.sigma_nodes_1d, &self.sigma_bary_1d, xi[1], &mut vy);
        basis::eval_lagrange_deriv(&self.sigma_nodes_1d, &self.sigma_bary_1d, xi[0], &mut dx);
        basis::eval_lagrange_deriv(&self.sigma_nodes_1d, &self.sigma_bary_1d, xi[1], &mut dy);
        let counts = self.background.counts();
        let ld = [p * counts[0] + 1, p * counts[1] + 1];
        let e = [el % counts[0], el / counts[0]];
        let mut val = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for j in 0..n1 {
            for i in 0..n1 {
                let gxi = p * e[0] + i;
                let gyi = p * e[1] + j;
                let s = self.sigma[gxi + ld[0] * gyi];
                val += s * vx[i] * vy[j];
                gx += s * dx[i] * vy[j];
                gy += s * vx[i] * dy[j];
            }
        }
        // Background is affine: the reference gradient scales by 1/h.
        (val, [gx / self.h[0], gy / self.h[1]], clamped)
    }
}

/// Nodes nearest the zero level set of `sigma`: each element is classified
/// by the sign of its mean nodal value, and the nodes shared by elements of
/// opposite sign (the interface faces) form the set. These are the nodes a
/// fitting penalty can actually place on the curve.
pub fn interface_nodes(fes: &FESpace, sigma: &[f64]) -> Vec<usize> {
    let npe = fes.dofs_per_element();
    let ne = fes.num_elements();
    let mut material = vec![false; ne];
    for el in 0..ne {
        let mean: f64 = (0..npe)
            .map(|slot| sigma[fes.element_dof(el, slot)])
            .sum::<f64>()
            / npe as f64;
        material[el] = mean < 0.0;
    }
    let nscalar = fes.ndofs_scalar();
    let mut inside = vec![false; nscalar];
    let mut outside = vec![false; nscalar];
    for el in 0..ne {
        for slot in 0..npe {
            let d = fes.element_dof(el, slot);
            if material[el] {
                inside[d] = true;
            } else {
                outside[d] = true;
            }
        }
    }
    (0..nscalar).filter(|&d| inside[d] && outside[d]).collect()
}

/// Nodes of elements cut by the zero level set of the nodal field `sigma`
/// on `fes` (scalar node indices, sorted).
pub fn cut_element_nodes(fes: &FESpace, sigma: &[f64]) -> Vec<usize> {
    let npe = fes.dofs_per_element();
    let mut selected = vec![false; fes.ndofs_scalar()];
    for el in 0..fes.num_elements() {
        let mut has_neg = false;
        let mut has_pos = false;
        for slot in 0..npe {
            let s = sigma[fes.element_dof(el, slot)];
            has_neg |= s < 0.0;
            has_pos |= s > 0.0;
        }
        if has_neg && has_pos {
            for slot in 0..npe {
                selected[fes.element_dof(el, slot)] = true;
            }
        }
    }
    selected
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect()
}

/// A mesh-optimization problem over the node field of a 2D mesh.
pub struct TmopProblem {
    fes: Arc<FESpace>,
    metric: Metric,
    targets: Targets,
    quad: Basis1D,
    fixed_mask: Vec<bool>,
    pub fitting: Option<FittingData>,
}

impl TmopProblem {
    /// `fes` must be the isoparametric node space of its mesh: H1, vdim 2,
    /// degree equal to the mesh geometry order. Boundary nodes are fixed by
    /// default; pass extra fixed dofs to pin more.
    pub fn new(
        fes: &Arc<FESpace>,
        metric: Metric,
        spec: &TargetSpec,
        q: Option<usize>,
        extra_fixed: &[usize],
    ) -> Result<Self> {
        let mesh = fes.mesh();
        if mesh.dim() != 2 || fes.vdim() != 2 {
            return Err(Error::Config(
                "mesh optimization requires a 2D mesh with a vdim-2 node space".into(),
            ));
        }
        if fes.degree() != mesh.geom_order() {
            return Err(Error::Config(
                "node space degree must match the mesh geometry order".into(),
            ));
        }
        let p = fes.degree();
        let q = q.unwrap_or(p + 2);
        let quad = Basis1D::new(p, q)?;
        let targets = resolve_targets(mesh, spec, q)?;
        let mut fixed_mask = vec![false; fes.size()];
        for d in fes.boundary_dofs(None)? {
            fixed_mask[d] = true;
        }
        for &d in extra_fixed {
            fixed_mask[d] = true;
        }
        Ok(Self {
            fes: Arc::clone(fes),
            metric,
            targets,
            quad,
            fixed_mask,
            fitting: None,
        })
    }

    pub fn with_fitting(mut self, fitting: FittingData) -> Self {
        self.fitting = Some(fitting);
        self
    }

    pub fn fes(&self) -> &Arc<FESpace> {
        &self.fes
    }

    pub fn fixed_mask(&self) -> &[bool] {
        &self.fixed_mask
    }

    /// Initial node vector: the mesh coordinate lattice.
    pub fn initial_nodes(&self) -> Vec<f64> {
        self.fes.mesh().nodes().to_vec()
    }

    fn nq(&self) -> usize {
        self.targets.nq
    }

    /// Jacobians of the coordinate map defined by `x` on one element.
    fn element_jacobians(&self, el: usize, x: &[f64], jac: &mut [f64], scratch: &mut Scratch) {
        let q = self.quad.q;
        let n1 = self.quad.p + 1;
        let npe = self.fes.dofs_per_element();
        let nq = self.nq();
        let mut comp = vec![0.0; npe];
        let mut vals = vec![0.0; nq];
        for r in 0..2 {
            for slot in 0..npe {
                comp[slot] = x[2 * self.fes.element_dof(el, slot) + r];
            }
            for c in 0..2 {
                let tables: Vec<&[f64]> = (0..2)
                    .map(|b| if b == c { &self.quad.g[..] } else { &self.quad.b[..] })
                    .collect();
                tensor::apply_tensor(&tables, q, n1, 2, &comp, &mut vals, scratch);
                for k in 0..nq {
                    jac[k * 4 + r * 2 + c] = vals[k];
                }
            }
        }
    }

    /// Quadrature weight (tensor product) for point k.
    fn weight(&self, k: usize) -> f64 {
        let q = self.quad.q;
        self.quad.quad_weights[k % q] * self.quad.quad_weights[k / q]
    }

    /// Objective F(x) = sum_E int mu(T) dx_t (+ fitting penalty).
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let ne = self.fes.num_elements();
        let nq = self.nq();
        let per_element: Vec<Result<f64>> = (0..ne)
            .into_par_iter()
            .map(|el| {
                let mut scratch = Scratch::default();
                let mut jac = vec![0.0; nq * 4];
                self.element_jacobians(el, x, &mut jac, &mut scratch);
                let mut total = 0.0;
                for k in 0..nq {
                    let a = &jac[k * 4..(k + 1) * 4];
                    let winv =
                        &self.targets.w_inv[(el * nq + k) * 4..(el * nq + k + 1) * 4];
                    let t = mat2_mul(
                        &[a[0], a[1], a[2], a[3]],
                        &[winv[0], winv[1], winv[2], winv[3]],
                    );
                    let mu = self.metric.eval(&t).map_err(|_| Error::InvertedElement {
                        element: el,
                        point: k,
                    })?;
                    total += self.weight(k) * self.targets.det_w[el * nq + k] * mu;
                }
                Ok(total)
            })
            .collect();
        let mut f = 0.0;
        for r in per_element {
            f += r?;
        }
        if let Some(fit) = &self.fitting {
            for &s in &fit.node_set {
                let pt = [x[2 * s], x[2 * s + 1]];
                let (sigma, _, _) = fit.eval(&pt);
                f += fit.weight * sigma * sigma;
            }
        }
        Ok(f)
    }

    /// Analytic gradient dF/dx (full vector; fixed dofs are not masked).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut grad = self.metric_gradient(x)?;
        if let Some(fit) = &self.fitting {
            for &s in &fit.node_set {
                let pt = [x[2 * s], x[2 * s + 1]];
                let (sigma, dsigma, _) = fit.eval(&pt);
                grad[2 * s] += fit.weight * 2.0 * sigma * dsigma[0];
                grad[2 * s + 1] += fit.weight * 2.0 * sigma * dsigma[1];
            }
        }
        Ok(grad)
    }

    /// Gradient of the mesh-quality term alone.
    fn metric_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ne = self.fes.num_elements();
        let nq = self.nq();
        let npe = self.fes.dofs_per_element();
        let q = self.quad.q;
        let n1 = self.quad.p + 1;
        let per_element: Vec<Result<Vec<f64>>> = (0..ne)
            .into_par_iter()
            .map(|el| {
                let mut scratch = Scratch::default();
                let mut jac = vec![0.0; nq * 4];
                self.element_jacobians(el, x, &mut jac, &mut scratch);
                // P = w det W (dmu/dT) W^{-T} per point, then one transpose
                // contraction per (component, axis) pair.
                let mut pfield = vec![0.0; nq * 4];
                for k in 0..nq {
                    let a = &jac[k * 4..(k + 1) * 4];
                    let winv =
                        &self.targets.w_inv[(el * nq + k) * 4..(el * nq + k + 1) * 4];
                    let wi = [winv[0], winv[1], winv[2], winv[3]];
                    let t = mat2_mul(&[a[0], a[1], a[2], a[3]], &wi);
                    let dmu = self.metric.grad(&t).map_err(|_| Error::InvertedElement {
                        element: el,
                        point: k,
                    })?;
                    let wit = [wi[0], wi[2], wi[1], wi[3]];
                    let p = mat2_mul(&dmu, &wit);
                    let scale = self.weight(k) * self.targets.det_w[el * nq + k];
                    for i in 0..4 {
                        pfield[k * 4 + i] = scale * p[i];
                    }
                }
                let mut grad_e = vec![0.0; npe * 2];
                let mut field = vec![0.0; nq];
                let mut out = vec![0.0; npe];
                for r in 0..2 {
                    for c in 0..2 {
                        for k in 0..nq {
                            field[k] = pfield[k * 4 + r * 2 + c];
                        }
                        let tables: Vec<&[f64]> = (0..2)
                            .map(|b| if b == c { &self.quad.g[..] } else { &self.quad.b[..] })
                            .collect();
                        tensor::apply_tensor_transpose(
                            &tables,
                            q,
                            n1,
                            2,
                            &field,
                            &mut out,
                            &mut scratch,
                        );
                        for slot in 0..npe {
                            grad_e[slot * 2 + r] += out[slot];
                        }
                    }
                }
                Ok(grad_e)
            })
            .collect();
        let mut grad = vec![0.0; self.fes.size()];
        for (el, res) in per_element.into_iter().enumerate() {
            let grad_e = res?;
            for slot in 0..npe {
                let dof = self.fes.element_dof(el, slot);
                grad[2 * dof] += grad_e[slot * 2];
                grad[2 * dof + 1] += grad_e[slot * 2 + 1];
            }
        }
        Ok(grad)
    }

    /// Max fitting misfit max |sigma(x_s)| over the node set.
    pub fn max_fitting_misfit(&self, x: &[f64]) -> f64 {
        match &self.fitting {
            None => 0.0,
            Some(fit) => fit
                .node_set
                .iter()
                .map(|&s| fit.eval(&[x[2 * s], x[2 * s + 1]]).0.abs())
                .fold(0.0, f64::max),
        }
    }

    fn masked_inf_norm(&self, g: &[f64]) -> f64 {
        g.iter()
            .zip(&self.fixed_mask)
            .filter(|(_, &fixed)| !fixed)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    }

    fn mask(&self, v: &mut [f64]) {
        for (vi, &fixed) in v.iter_mut().zip(&self.fixed_mask) {
            if fixed {
                *vi = 0.0;
            }
        }
    }

    /// Hessian action for the Newton system: central differences of the
    /// analytic gradient for the (smooth) quality term, plus the analytic
    /// Gauss-Newton term of the fitting penalty. The penalty is only C0
    /// across background element faces, so differencing it numerically
    /// would inject kink noise; its Gauss-Newton curvature 2 w grad-sigma
    /// grad-sigma^T is exact, smooth and positive semidefinite.
    fn hessian_action(
        &self,
        x: &[f64],
        v: &[f64],
        penalty: &[(usize, [f64; 2])],
    ) -> Result<Vec<f64>> {
        let nv = crate::solvers::norm2(v);
        if nv == 0.0 {
            return Ok(vec![0.0; v.len()]);
        }
        let eps = 1e-7 * crate::solvers::norm2(x).max(1.0) / nv;
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for i in 0..x.len() {
            xp[i] += eps * v[i];
            xm[i] -= eps * v[i];
        }
        let gp = self.metric_gradient(&xp)?;
        let gm = self.metric_gradient(&xm)?;
        let mut hv: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .map(|(p, m)| (p - m) / (2.0 * eps))
            .collect();
        if let Some(fit) = &self.fitting {
            for &(s, ds) in penalty {
                let proj = ds[0] * v[2 * s] + ds[1] * v[2 * s + 1];
                hv[2 * s] += 2.0 * fit.weight * proj * ds[0];
                hv[2 * s + 1] += 2.0 * fit.weight * proj * ds[1];
            }
        }
        self.mask(&mut hv);
        Ok(hv)
    }

    /// Cached level-set gradients at the fitted nodes for one outer iterate.
    fn penalty_directions(&self, x: &[f64]) -> Vec<(usize, [f64; 2])> {
        match &self.fitting {
            None => Vec::new(),
            Some(fit) => fit
                .node_set
                .iter()
                .map(|&s| {
                    let (_, ds, _) = fit.eval(&[x[2 * s], x[2 * s + 1]]);
                    (s, ds)
                })
                .collect(),
        }
    }

    /// Truncated CG on the (masked) Newton system H d = -g; returns a
    /// descent direction, falling back to steepest descent on immediate
    /// negative curvature.
    fn newton_direction(&self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let n = g.len();
        let mut d = vec![0.0; n];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        self.mask(&mut r);
        let g_norm = crate::solvers::norm2(&r);
        if g_norm == 0.0 {
            return Ok(d);
        }
        let mut p = r.clone();
        let mut rr = crate::solvers::dot(&r, &r);
        let penalty = self.penalty_directions(x);
        for it in 0..50 {
            let hp = self.hessian_action(x, &p, &penalty)?;
            let php = crate::solvers::dot(&p, &hp);
            if php <= 0.0 {
                if it == 0 {
                    d.copy_from_slice(&r);
                }
                break;
            }
            let alpha = rr / php;
            for i in 0..n {
                d[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            let rr_next = crate::solvers::dot(&r, &r);
            if rr_next.sqrt() <= 1e-2 * g_norm {
                break;
            }
            let beta = rr_next / rr;
            rr = rr_next;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        Ok(d)
    }

    /// Newton iteration with barrier backtracking: a step is accepted only
    /// if no quadrature-point Jacobian inverts and the objective decreases.
    pub fn newton_solve(&self, x0: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, TmopReport)> {
        let mut x = x0.to_vec();
        let mut f = self.objective(&x)?;
        let mut report = TmopReport::default();
        report.history.push(TmopIterate {
            objective: f,
            grad_inf: f64::NAN,
            step: 0.0,
        });
        for _it in 1..=max_iter {
            let g = self.gradient(&x)?;
            let g_inf = self.masked_inf_norm(&g);
            report.history.last_mut().expect("nonempty").grad_inf = g_inf;
            if g_inf <= tol {
                report.converged = true;
                break;
            }
            let dir = self.newton_direction(&x, &g)?;
            let mut alpha = 1.0;
            let mut accepted = false;
            let mut trial = x.clone();
            for _ls in 0..30 {
                for i in 0..x.len() {
                    trial[i] = x[i] + alpha * dir[i];
                }
                match self.objective(&trial) {
                    Ok(ft) if ft < f => {
                        x.copy_from_slice(&trial);
                        f = ft;
                        accepted = true;
                        break;
                    }
                    _ => alpha *= 0.5,
                }
            }
            if !accepted {
                report.line_search_failed = true;
                break;
            }
            report.iterations += 1;
            report.history.push(TmopIterate {
                objective: f,
                grad_inf: f64::NAN,
                step: alpha,
            });
        }
        if !report.converged && !report.line_search_failed {
            // Ran out of iterations; record the final gradient norm.
            let g = self.gradient(&x)?;
            let g_inf = self.masked_inf_norm(&g);
            report.history.last_mut().expect("nonempty").grad_inf = g_inf;
            report.converged = g_inf <= tol;
        }
        Ok((x, report))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TmopIterate {
    pub objective: f64,
    pub grad_inf: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TmopReport {
    pub iterations: usize,
    pub converged: bool,
    pub line_search_failed: bool,
    pub history: Vec<TmopIterate>,
}
