//! Structured quadrilateral and hexahedral meshes with high-order nodal
//! coordinates.
//!
//! The reference element is the unit box and every lattice (coordinate nodes,
//! dofs, quadrature points) is enumerated lexicographically with the x axis
//! fastest. The coordinate field is a nodal field of degree `geom_order`
//! placed at Gauss–Lobatto points inside each element, so meshes can carry
//! curved geometry. Periodic axes drop the duplicated node layer; the wrap
//! offset is reapplied when an element on the seam asks for its node
//! coordinates.

use crate::basis::{self, Basis1D};
use crate::error::{Error, Result};
use crate::tensor::{self, Scratch};
use rayon::prelude::*;

/// Lattice extents per axis for a nodal field of degree `r`.
pub(crate) fn lattice_dims(counts: &[usize; 3], periodic: &[bool; 3], dim: usize, r: usize) -> [usize; 3] {
    let mut ld = [1usize; 3];
    for a in 0..dim {
        ld[a] = r * counts[a] + usize::from(!periodic[a]);
    }
    ld
}

#[derive(Clone, Debug)]
pub struct CartesianMesh {
    dim: usize,
    counts: [usize; 3],
    geom_order: usize,
    periodic: [bool; 3],
    axis_lengths: [f64; 3],
    boundary_attrs: [u32; 6],
    /// Coordinate lattice, dim-interleaved per node.
    nodes: Vec<f64>,
    /// Gauss–Lobatto reference nodes of the coordinate field.
    gll: Vec<f64>,
    bary: Vec<f64>,
}

impl CartesianMesh {
    /// Axis-aligned box mesh: `counts[a]` elements along axis `a`, coordinate
    /// field of degree `geom_order` with nodes at the image of the reference
    /// Gauss–Lobatto points under the affine box map.
    pub fn new(
        dim: usize,
        counts: &[usize],
        geom_order: usize,
        lo: &[f64],
        hi: &[f64],
        periodic: &[bool],
    ) -> Result<Self> {
        if dim < 2 || dim > 3 {
            return Err(Error::BadDimension(dim));
        }
        if geom_order == 0 {
            return Err(Error::ZeroDegree);
        }
        if counts.len() < dim || lo.len() < dim || hi.len() < dim || periodic.len() < dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: counts.len().min(lo.len()).min(hi.len()).min(periodic.len()),
            });
        }
        let mut c = [1usize; 3];
        let mut per = [false; 3];
        let mut lengths = [0.0f64; 3];
        for a in 0..dim {
            if counts[a] == 0 {
                return Err(Error::ZeroElementCount(a));
            }
            c[a] = counts[a];
            per[a] = periodic[a];
            lengths[a] = hi[a] - lo[a];
            if !(lengths[a] > 0.0) {
                return Err(Error::DegenerateExtents {
                    axis: a,
                    length: lengths[a],
                });
            }
        }
        let gll = basis::gll_nodes(geom_order)?;
        let bary = basis::barycentric_weights(&gll);
        let ld = lattice_dims(&c, &per, dim, geom_order);
        let num_nodes: usize = ld[..dim].iter().product();
        let mut nodes = vec![0.0; num_nodes * dim];
        // 1D lattice coordinates per axis.
        let mut coords_1d: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for a in 0..dim {
            let h = lengths[a] / c[a] as f64;
            coords_1d[a] = (0..ld[a])
                .map(|g| {
                    let e = (g / geom_order).min(c[a] - 1);
                    let i = g - e * geom_order;
                    lo[a] + h * (e as f64 + gll[i])
                })
                .collect();
        }
        for idx in 0..num_nodes {
            let mut rem = idx;
            for a in 0..dim {
                let g = rem % ld[a];
                rem /= ld[a];
                nodes[idx * dim + a] = coords_1d[a][g];
            }
        }
        let mut boundary_attrs = [0u32; 6];
        for (side, attr) in boundary_attrs.iter_mut().enumerate().take(2 * dim) {
            *attr = side as u32 + 1;
        }
        Ok(Self {
            dim,
            counts: c,
            geom_order,
            periodic: per,
            axis_lengths: lengths,
            boundary_attrs,
            nodes,
            gll,
            bary,
        })
    }

    pub fn unit_square(nx: usize, ny: usize, geom_order: usize) -> Result<Self> {
        Self::new(2, &[nx, ny], geom_order, &[0.0, 0.0], &[1.0, 1.0], &[false, false])
    }

    pub fn unit_square_periodic(nx: usize, ny: usize, geom_order: usize) -> Result<Self> {
        Self::new(2, &[nx, ny], geom_order, &[0.0, 0.0], &[1.0, 1.0], &[true, true])
    }

    pub fn unit_cube(nx: usize, ny: usize, nz: usize, geom_order: usize) -> Result<Self> {
        Self::new(
            3,
            &[nx, ny, nz],
            geom_order,
            &[0.0; 3],
            &[1.0; 3],
            &[false; 3],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub(crate) fn counts_arr(&self) -> &[usize; 3] {
        &self.counts
    }

    pub(crate) fn periodic_arr(&self) -> &[bool; 3] {
        &self.periodic
    }

    pub fn geom_order(&self) -> usize {
        self.geom_order
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic[..self.dim]
    }

    pub fn num_elements(&self) -> usize {
        self.counts[..self.dim].iter().product()
    }

    /// Scalar coordinate-lattice node count.
    pub fn num_nodes(&self) -> usize {
        lattice_dims(&self.counts, &self.periodic, self.dim, self.geom_order)[..self.dim]
            .iter()
            .product()
    }

    /// Coordinate lattice, dim-interleaved per node.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Boundary attribute of an axis side: sides are ordered
    /// (xmin, xmax, ymin, ymax, zmin, zmax) with default attributes 1..=2*dim.
    pub fn boundary_attr(&self, side: usize) -> u32 {
        self.boundary_attrs[side]
    }

    pub fn set_boundary_attr(&mut self, side: usize, attr: u32) {
        self.boundary_attrs[side] = attr;
    }

    /// Domain extent along an axis (hi - lo of the construction box).
    pub fn axis_length(&self, axis: usize) -> f64 {
        self.axis_lengths[axis]
    }

    /// Same mesh with a replacement coordinate lattice.
    pub fn with_nodes(&self, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::LengthMismatch {
                expected: self.nodes.len(),
                got: nodes.len(),
            });
        }
        let mut mesh = self.clone();
        mesh.nodes = nodes;
        Ok(mesh)
    }

    pub fn element_multi_index(&self, el: usize) -> [usize; 3] {
        let mut e = [0usize; 3];
        let mut rem = el;
        for a in 0..self.dim {
            e[a] = rem % self.counts[a];
            rem /= self.counts[a];
        }
        e
    }

    /// Nodes per element of the coordinate field.
    pub fn nodes_per_element(&self) -> usize {
        (self.geom_order + 1).pow(self.dim as u32)
    }

    /// Physical coordinates of one element's nodes, dim-interleaved in
    /// lexicographic slot order. Periodic wraps are unfolded so the element
    /// is geometrically contiguous.
    pub fn element_nodes(&self, el: usize, out: &mut Vec<f64>) {
        let r = self.geom_order;
        let ld = lattice_dims(&self.counts, &self.periodic, self.dim, r);
        let e = self.element_multi_index(el);
        let npe = self.nodes_per_element();
        out.resize(npe * self.dim, 0.0);
        let n1 = r + 1;
        for slot in 0..npe {
            let mut rem = slot;
            let mut idx = 0usize;
            let mut stride = 1usize;
            let mut shift = [0.0f64; 3];
            for a in 0..self.dim {
                let i = rem % n1;
                rem /= n1;
                let mut g = r * e[a] + i;
                if self.periodic[a] && g == ld[a] {
                    g = 0;
                    shift[a] = self.axis_lengths[a];
                }
                idx += g * stride;
                stride *= ld[a];
            }
            for c in 0..self.dim {
                out[slot * self.dim + c] = self.nodes[idx * self.dim + c] + shift[c];
            }
        }
    }

    /// Evaluate the coordinate map of element `el` at reference point `xi`.
    pub fn eval_coords(&self, el: usize, xi: &[f64], out: &mut [f64]) {
        let n1 = self.geom_order + 1;
        let mut vals = [[0.0f64; 33]; 3];
        for a in 0..self.dim {
            basis::eval_lagrange(&self.gll, &self.bary, xi[a], &mut vals[a][..n1]);
        }
        let mut enodes = Vec::new();
        self.element_nodes(el, &mut enodes);
        out[..self.dim].fill(0.0);
        let npe = self.nodes_per_element();
        for slot in 0..npe {
            let mut rem = slot;
            let mut w = 1.0;
            for a in 0..self.dim {
                w *= vals[a][rem % n1];
                rem /= n1;
            }
            for c in 0..self.dim {
                out[c] += w * enodes[slot * self.dim + c];
            }
        }
    }

    /// Jacobian of the coordinate map at a reference point, row-major
    /// `J[r][c] = d x_r / d xi_c`.
    pub fn eval_jacobian(&self, el: usize, xi: &[f64], jac: &mut [f64]) {
        let dim = self.dim;
        let n1 = self.geom_order + 1;
        let mut vals = [[0.0f64; 33]; 3];
        let mut ders = [[0.0f64; 33]; 3];
        for a in 0..dim {
            basis::eval_lagrange(&self.gll, &self.bary, xi[a], &mut vals[a][..n1]);
            basis::eval_lagrange_deriv(&self.gll, &self.bary, xi[a], &mut ders[a][..n1]);
        }
        let mut enodes = Vec::new();
        self.element_nodes(el, &mut enodes);
        jac[..dim * dim].fill(0.0);
        let npe = self.nodes_per_element();
        for slot in 0..npe {
            let mut idx = [0usize; 3];
            let mut rem = slot;
            for a in 0..dim {
                idx[a] = rem % n1;
                rem /= n1;
            }
            for c in 0..dim {
                let mut w = 1.0;
                for a in 0..dim {
                    w *= if a == c { ders[a][idx[a]] } else { vals[a][idx[a]] };
                }
                for r in 0..dim {
                    jac[r * dim + c] += w * enodes[slot * self.dim + r];
                }
            }
        }
    }

    /// Uniform refinement: element counts double along every axis and the
    /// coordinate field is re-interpolated so the geometry map is unchanged.
    pub fn refine_uniform(&self) -> Self {
        let r = self.geom_order;
        let mut counts2 = [1usize; 3];
        for a in 0..self.dim {
            counts2[a] = 2 * self.counts[a];
        }
        let ld2 = lattice_dims(&counts2, &self.periodic, self.dim, r);
        let num_nodes: usize = ld2[..self.dim].iter().product();
        let mut nodes = vec![0.0; num_nodes * self.dim];
        let mut xi = [0.0f64; 3];
        let mut pe = [0usize; 3];
        let mut out = [0.0f64; 3];
        for idx in 0..num_nodes {
            let mut rem = idx;
            for a in 0..self.dim {
                let g = rem % ld2[a];
                rem /= ld2[a];
                let ce = (g / r).min(counts2[a] - 1);
                let i = g - ce * r;
                // Position in parent-element units, then split into parent
                // element and reference coordinate.
                let u = (ce as f64 + self.gll[i]) / 2.0;
                let p = (u.floor() as usize).min(self.counts[a] - 1);
                pe[a] = p;
                xi[a] = u - p as f64;
            }
            let parent = pe[0] + self.counts[0] * (pe[1] + self.counts[1] * pe[2]);
            self.eval_coords(parent, &xi[..self.dim], &mut out);
            nodes[idx * self.dim..(idx + 1) * self.dim].copy_from_slice(&out[..self.dim]);
        }
        let mut mesh = self.clone();
        mesh.counts = counts2;
        mesh.nodes = nodes;
        mesh
    }

    /// Low-order-refined mesh: each element splits into p^dim first-order
    /// sub-elements whose vertices sit at the degree-p Gauss–Lobatto points
    /// of the parent element, mapped through the parent coordinate field.
    /// The vertex lattice matches the degree-p dof lattice one-to-one.
    pub fn lor_refined(&self, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::ZeroDegree);
        }
        let gll_p = basis::gll_nodes(p)?;
        let mut counts_lor = [1usize; 3];
        for a in 0..self.dim {
            counts_lor[a] = p * self.counts[a];
        }
        let ld = lattice_dims(&counts_lor, &self.periodic, self.dim, 1);
        let num_nodes: usize = ld[..self.dim].iter().product();
        let mut nodes = vec![0.0; num_nodes * self.dim];
        let mut xi = [0.0f64; 3];
        let mut pe = [0usize; 3];
        let mut out = [0.0f64; 3];
        for idx in 0..num_nodes {
            let mut rem = idx;
            for a in 0..self.dim {
                let g = rem % ld[a];
                rem /= ld[a];
                let e = (g / p).min(self.counts[a] - 1);
                let j = g - e * p;
                pe[a] = e;
                xi[a] = gll_p[j];
            }
            let parent = pe[0] + self.counts[0] * (pe[1] + self.counts[1] * pe[2]);
            self.eval_coords(parent, &xi[..self.dim], &mut out);
            nodes[idx * self.dim..(idx + 1) * self.dim].copy_from_slice(&out[..self.dim]);
        }
        let mut lor = self.clone();
        lor.counts = counts_lor;
        lor.geom_order = 1;
        lor.gll = basis::gll_nodes(1)?;
        lor.bary = basis::barycentric_weights(&lor.gll);
        lor.nodes = nodes;
        // A LOR mesh must be valid; report the parent of any inverted
        // sub-element.
        if let Err(Error::InvalidMesh { element, .. }) = lor.geometric_factors(3) {
            let le = lor.element_multi_index(element);
            let parent = le[0] / p
                + self.counts[0] * (le[1] / p + self.counts[1] * (le[2] / p.max(1)));
            return Err(Error::LorInverted { parent });
        }
        Ok(lor)
    }

    /// Jacobians, determinants and inverse transposes of the coordinate map
    /// at every point of the q^dim tensor Gauss rule of every element.
    pub fn geometric_factors(&self, q: usize) -> Result<GeometricFactors> {
        let dim = self.dim;
        let geom_basis = Basis1D::new(self.geom_order, q)?;
        let ne = self.num_elements();
        let nq = q.pow(dim as u32);
        let dd = dim * dim;
        let mut jac = vec![0.0; ne * nq * dd];
        let mut det = vec![0.0; ne * nq];
        let mut jinv_t = vec![0.0; ne * nq * dd];
        let mut coords = vec![0.0; ne * nq * dim];
        let mut first_bad: Vec<Option<(usize, f64)>> = vec![None; ne];

        let n1 = self.geom_order + 1;
        let npe = n1.pow(dim as u32);
        jac.par_chunks_mut(nq * dd)
            .zip(det.par_chunks_mut(nq))
            .zip(jinv_t.par_chunks_mut(nq * dd))
            .zip(coords.par_chunks_mut(nq * dim))
            .zip(first_bad.par_iter_mut())
            .enumerate()
            .for_each(|(el, ((((jac_e, det_e), jinv_e), coords_e), bad))| {
                let mut enodes = Vec::new();
                self.element_nodes(el, &mut enodes);
                let mut comp = vec![0.0; npe];
                let mut vals = vec![0.0; nq];
                let mut scratch = Scratch::default();
                let mut tables: Vec<&[f64]> = vec![&geom_basis.b; dim];
                for r in 0..dim {
                    for (i, v) in comp.iter_mut().enumerate() {
                        *v = enodes[i * dim + r];
                    }
                    // Physical coordinates of the quadrature points.
                    tensor::apply_tensor(&tables, q, n1, dim, &comp, &mut vals, &mut scratch);
                    for k in 0..nq {
                        coords_e[k * dim + r] = vals[k];
                    }
                    for c in 0..dim {
                        for (a, t) in tables.iter_mut().enumerate() {
                            *t = if a == c { &geom_basis.g } else { &geom_basis.b };
                        }
                        tensor::apply_tensor(&tables, q, n1, dim, &comp, &mut vals, &mut scratch);
                        for k in 0..nq {
                            jac_e[k * dd + r * dim + c] = vals[k];
                        }
                        for t in tables.iter_mut() {
                            *t = &geom_basis.b;
                        }
                    }
                }
                for k in 0..nq {
                    let j = &jac_e[k * dd..(k + 1) * dd];
                    let d = det_dim(j, dim);
                    det_e[k] = d;
                    if d <= 0.0 && bad.is_none() {
                        *bad = Some((k, d));
                    }
                    if d > 0.0 {
                        invert_transpose(j, dim, d, &mut jinv_e[k * dd..(k + 1) * dd]);
                    }
                }
            });

        for (el, bad) in first_bad.iter().enumerate() {
            if let Some((point, det)) = *bad {
                return Err(Error::InvalidMesh {
                    element: el,
                    point,
                    det,
                });
            }
        }

        // Tensor-product quadrature weights, shared by all elements.
        let mut weights = vec![0.0; nq];
        for k in 0..nq {
            let mut rem = k;
            let mut w = 1.0;
            for _ in 0..dim {
                w *= geom_basis.quad_weights[rem % q];
                rem /= q;
            }
            weights[k] = w;
        }

        Ok(GeometricFactors {
            dim,
            q,
            nq,
            num_elements: ne,
            points_1d: geom_basis.quad_points.clone(),
            weights,
            jac,
            det,
            jinv_t,
            coords,
        })
    }

    /// det J > 0 at every point of the default rule (q = geom_order + 2).
    pub fn is_valid(&self) -> bool {
        self.geometric_factors(self.geom_order + 2).is_ok()
    }

    /// Domain measure by quadrature at the default rule.
    pub fn measure(&self) -> Result<f64> {
        let gf = self.geometric_factors(self.geom_order + 2)?;
        Ok(gf.integrate_det())
    }
}

fn det_dim(j: &[f64], dim: usize) -> f64 {
    match dim {
        2 => j[0] * j[3] - j[1] * j[2],
        3 => {
            j[0] * (j[4] * j[8] - j[5] * j[7]) - j[1] * (j[3] * j[8] - j[5] * j[6])
                + j[2] * (j[3] * j[7] - j[4] * j[6])
        }
        _ => unreachable!(),
    }
}

fn invert_transpose(j: &[f64], dim: usize, det: f64, out: &mut [f64]) {
    match dim {
        2 => {
            // inv = [[d, -b], [-c, a]] / det; transpose it.
            out[0] = j[3] / det;
            out[1] = -j[2] / det;
            out[2] = -j[1] / det;
            out[3] = j[0] / det;
        }
        3 => {
            let c = [
                j[4] * j[8] - j[5] * j[7],
                j[5] * j[6] - j[3] * j[8],
                j[3] * j[7] - j[4] * j[6],
                j[2] * j[7] - j[1] * j[8],
                j[0] * j[8] - j[2] * j[6],
                j[1] * j[6] - j[0] * j[7],
                j[1] * j[5] - j[2] * j[4],
                j[2] * j[3] - j[0] * j[5],
                j[0] * j[4] - j[1] * j[3],
            ];
            // Cofactor matrix over det is exactly J^{-T}.
            for (o, v) in out.iter_mut().zip(c) {
                *o = v / det;
            }
        }
        _ => unreachable!(),
    }
}

/// Per-element, per-quadrature-point geometry data: the Q-vector of the
/// operator decomposition.
#[derive(Clone, Debug)]
pub struct GeometricFactors {
    pub dim: usize,
    pub q: usize,
    /// Points per element (q^dim).
    pub nq: usize,
    pub num_elements: usize,
    pub points_1d: Vec<f64>,
    /// Tensor quadrature weights (length nq, shared by all elements).
    pub weights: Vec<f64>,
    jac: Vec<f64>,
    det: Vec<f64>,
    jinv_t: Vec<f64>,
    coords: Vec<f64>,
}

impl GeometricFactors {
    pub fn jacobian(&self, el: usize, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.jac[(el * self.nq + k) * dd..(el * self.nq + k + 1) * dd]
    }

    pub fn det(&self, el: usize, k: usize) -> f64 {
        self.det[el * self.nq + k]
    }

    pub fn jinv_t(&self, el: usize, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.jinv_t[(el * self.nq + k) * dd..(el * self.nq + k + 1) * dd]
    }

    /// Physical coordinates of quadrature point k of element el.
    pub fn point(&self, el: usize, k: usize) -> &[f64] {
        &self.coords[(el * self.nq + k) * self.dim..(el * self.nq + k + 1) * self.dim]
    }

    /// Sum of weight * det J over all points: the domain measure.
    pub fn integrate_det(&self) -> f64 {
        let mut total = 0.0;
        for el in 0..self.num_elements {
            for k in 0..self.nq {
                total += self.weights[k] * self.det[el * self.nq + k];
            }
        }
        total
    }
}
