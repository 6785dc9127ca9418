//! Finite element spaces and the vector-layout ladder T -> L -> E.
//!
//! Runs are serial, so the true-dof map P is the identity and T-vectors and
//! L-vectors coincide; the slot is kept in the API (`true_size`) so a
//! distributed P could be added without interface changes. The element
//! gather G and its transpose are index maps built once at construction.
//!
//! Layouts: scalar dofs are lexicographic over the lattice (x fastest);
//! vector dofs interleave components by node ("xyxy"). E-vectors store, per
//! element, the (p+1)^dim lexicographic slots with the same interleaving.

use crate::error::{Error, Result};
use crate::mesh::{lattice_dims, CartesianMesh};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuity {
    /// Conforming: inter-element dofs are shared.
    H1,
    /// Fully discontinuous: every element owns its dofs.
    L2,
}

/// Which boundary faces carry essential (Dirichlet) conditions.
#[derive(Clone, Copy, Debug)]
pub enum EssentialBc<'a> {
    None,
    AllBoundaries,
    Attrs(&'a [u32]),
}

#[derive(Clone, Debug)]
pub struct FESpace {
    mesh: Arc<CartesianMesh>,
    p: usize,
    continuity: Continuity,
    vdim: usize,
    /// Scalar L-vector index of each element-local slot.
    l_to_e: Vec<usize>,
    ndofs_scalar: usize,
}

impl FESpace {
    pub fn new(mesh: &Arc<CartesianMesh>, p: usize, continuity: Continuity, vdim: usize) -> Result<Self> {
        if p == 0 || vdim == 0 {
            return Err(Error::ZeroDegree);
        }
        let dim = mesh.dim();
        let counts = *mesh.counts_arr();
        let periodic = *mesh.periodic_arr();
        let ne = mesh.num_elements();
        let n1 = p + 1;
        let npe = n1.pow(dim as u32);
        let mut l_to_e = vec![0usize; ne * npe];
        let ndofs_scalar = match continuity {
            Continuity::H1 => {
                let ld = lattice_dims(&counts, &periodic, dim, p);
                for el in 0..ne {
                    let e = mesh.element_multi_index(el);
                    for slot in 0..npe {
                        let mut rem = slot;
                        let mut idx = 0usize;
                        let mut stride = 1usize;
                        for a in 0..dim {
                            let i = rem % n1;
                            rem /= n1;
                            let mut g = p * e[a] + i;
                            if periodic[a] && g == ld[a] {
                                g = 0;
                            }
                            idx += g * stride;
                            stride *= ld[a];
                        }
                        l_to_e[el * npe + slot] = idx;
                    }
                }
                ld[..dim].iter().product()
            }
            Continuity::L2 => {
                for (i, v) in l_to_e.iter_mut().enumerate() {
                    *v = i;
                }
                ne * npe
            }
        };
        Ok(Self {
            mesh: Arc::clone(mesh),
            p,
            continuity,
            vdim,
            l_to_e,
            ndofs_scalar,
        })
    }

    pub fn mesh(&self) -> &Arc<CartesianMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn vdim(&self) -> usize {
        self.vdim
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    /// Scalar dofs (one vector component).
    pub fn ndofs_scalar(&self) -> usize {
        self.ndofs_scalar
    }

    /// L-vector length (scalar dofs times vdim).
    pub fn size(&self) -> usize {
        self.ndofs_scalar * self.vdim
    }

    /// T-vector length; P is the identity in this serial build.
    pub fn true_size(&self) -> usize {
        self.size()
    }

    /// Element dofs per scalar component.
    pub fn dofs_per_element(&self) -> usize {
        (self.p + 1).pow(self.mesh.dim() as u32)
    }

    /// E-vector length.
    pub fn e_size(&self) -> usize {
        self.num_elements() * self.dofs_per_element() * self.vdim
    }

    /// Scalar L index of a given element-local slot.
    pub fn element_dof(&self, el: usize, slot: usize) -> usize {
        self.l_to_e[el * self.dofs_per_element() + slot]
    }

    pub fn l_to_e_map(&self) -> &[usize] {
        &self.l_to_e
    }

    /// The gather G: copy (shared) L dofs into every owning element slot.
    pub fn gather(&self, l_vec: &[f64], e_vec: &mut [f64]) -> Result<()> {
        if l_vec.len() != self.size() {
            return Err(Error::LengthMismatch {
                expected: self.size(),
                got: l_vec.len(),
            });
        }
        if e_vec.len() != self.e_size() {
            return Err(Error::LengthMismatch {
                expected: self.e_size(),
                got: e_vec.len(),
            });
        }
        let vd = self.vdim;
        for (s, &l) in self.l_to_e.iter().enumerate() {
            for c in 0..vd {
                e_vec[s * vd + c] = l_vec[l * vd + c];
            }
        }
        Ok(())
    }

    pub fn gather_owned(&self, l_vec: &[f64]) -> Result<Vec<f64>> {
        let mut e = vec![0.0; self.e_size()];
        self.gather(l_vec, &mut e)?;
        Ok(e)
    }

    /// The transpose G^T: sum element contributions into the L-vector
    /// (deterministic sequential reduction).
    pub fn scatter_add(&self, e_vec: &[f64], l_vec: &mut [f64]) -> Result<()> {
        if e_vec.len() != self.e_size() {
            return Err(Error::LengthMismatch {
                expected: self.e_size(),
                got: e_vec.len(),
            });
        }
        if l_vec.len() != self.size() {
            return Err(Error::LengthMismatch {
                expected: self.size(),
                got: l_vec.len(),
            });
        }
        let vd = self.vdim;
        for (s, &l) in self.l_to_e.iter().enumerate() {
            for c in 0..vd {
                l_vec[l * vd + c] += e_vec[s * vd + c];
            }
        }
        Ok(())
    }

    /// Multiplicity of every scalar dof (G^T applied to all-ones).
    pub fn dof_multiplicity(&self) -> Vec<f64> {
        let mut mult = vec![0.0; self.ndofs_scalar];
        for &l in &self.l_to_e {
            mult[l] += 1.0;
        }
        mult
    }

    /// Sorted T-dof indices (vdim-expanded) whose node lies on a boundary
    /// face with an attribute in `attrs`; `None` selects every attribute.
    pub fn boundary_dofs(&self, attrs: Option<&[u32]>) -> Result<Vec<usize>> {
        if self.continuity != Continuity::H1 {
            return Err(Error::RequiresH1);
        }
        let dim = self.mesh.dim();
        let counts = *self.mesh.counts_arr();
        let periodic = *self.mesh.periodic_arr();
        let ld = lattice_dims(&counts, &periodic, dim, self.p);
        let selected = |side: usize| -> bool {
            match attrs {
                None => true,
                Some(list) => list.contains(&self.mesh.boundary_attr(side)),
            }
        };
        let nscalar = self.ndofs_scalar;
        let mut on_boundary = vec![false; nscalar];
        for idx in 0..nscalar {
            let mut rem = idx;
            for a in 0..dim {
                let g = rem % ld[a];
                rem /= ld[a];
                if periodic[a] {
                    continue;
                }
                if g == 0 && selected(2 * a) {
                    on_boundary[idx] = true;
                }
                if g == ld[a] - 1 && selected(2 * a + 1) {
                    on_boundary[idx] = true;
                }
            }
        }
        let mut dofs = Vec::new();
        for (idx, &on) in on_boundary.iter().enumerate() {
            if on {
                for c in 0..self.vdim {
                    dofs.push(idx * self.vdim + c);
                }
            }
        }
        Ok(dofs)
    }

    /// Essential dofs selected by a boundary-condition spec.
    pub fn essential_dofs(&self, bc: EssentialBc) -> Result<Vec<usize>> {
        match bc {
            EssentialBc::None => Ok(Vec::new()),
            EssentialBc::AllBoundaries => self.boundary_dofs(None),
            EssentialBc::Attrs(a) => self.boundary_dofs(Some(a)),
        }
    }

    /// Physical coordinates of every scalar dof (dim-interleaved), obtained
    /// by evaluating the mesh coordinate map at the dof's reference position.
    pub fn dof_coords(&self) -> Vec<f64> {
        let dim = self.mesh.dim();
        let mut coords = vec![0.0; self.ndofs_scalar * dim];
        let nodes_p = crate::basis::gll_nodes(self.p).expect("degree >= 1");
        match self.continuity {
            Continuity::H1 => {
                let counts = *self.mesh.counts_arr();
                let periodic = *self.mesh.periodic_arr();
                let ld = lattice_dims(&counts, &periodic, dim, self.p);
                let mut xi = [0.0f64; 3];
                let mut pe = [0usize; 3];
                let mut out = [0.0f64; 3];
                for idx in 0..self.ndofs_scalar {
                    let mut rem = idx;
                    for a in 0..dim {
                        let g = rem % ld[a];
                        rem /= ld[a];
                        let e = (g / self.p).min(counts[a] - 1);
                        pe[a] = e;
                        xi[a] = nodes_p[g - e * self.p];
                    }
                    let el = pe[0] + counts[0] * (pe[1] + counts[1] * pe[2]);
                    self.mesh.eval_coords(el, &xi[..dim], &mut out);
                    coords[idx * dim..(idx + 1) * dim].copy_from_slice(&out[..dim]);
                }
            }
            Continuity::L2 => {
                let npe = self.dofs_per_element();
                let n1 = self.p + 1;
                let mut xi = [0.0f64; 3];
                let mut out = [0.0f64; 3];
                for el in 0..self.num_elements() {
                    for slot in 0..npe {
                        let mut rem = slot;
                        for a in 0..dim {
                            xi[a] = nodes_p[rem % n1];
                            rem /= n1;
                        }
                        self.mesh.eval_coords(el, &xi[..dim], &mut out);
                        let idx = el * npe + slot;
                        coords[idx * dim..(idx + 1) * dim].copy_from_slice(&out[..dim]);
                    }
                }
            }
        }
        coords
    }
}
