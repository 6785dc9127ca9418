//! The same bilinear form at every assembly level: partial assembly applies
//! G^T B^T D B G with tensor contractions and stores only quadrature data;
//! element assembly stores dense local matrices; full assembly builds the
//! global CSR. All three must produce identical matvecs, and the matrix-free
//! diagonal must match the assembled one.

use hofem::fespace::{Continuity, FESpace};
use hofem::mesh::CartesianMesh;
use hofem::operators::{constant_coefficient, OperatorKind, PAOperator};
use hofem::rng::SplitMix64;
use std::sync::Arc;

fn main() -> hofem::Result<()> {
    let mesh = Arc::new(CartesianMesh::unit_square(4, 4, 2)?);
    println!("mesh: 4x4 quads, geometry order 2");
    for kind in [OperatorKind::Mass, OperatorKind::Diffusion] {
        for p in [1usize, 3] {
            let fes = Arc::new(FESpace::new(&mesh, p, Continuity::H1, 1)?);
            let op = PAOperator::new(&fes, kind, constant_coefficient(1.0), None)?;
            let csr = op.full_assemble();
            let elem = op.element_assemble();
            let mut rng = SplitMix64::new(7);
            let x = rng.vector(fes.size());
            let y_pa = op.apply_owned(&x)?;
            let mut y_fa = vec![0.0; fes.size()];
            csr.mul_vec(&x, &mut y_fa);
            let mut y_el = vec![0.0; fes.size()];
            elem.apply(&fes, &[], &x, &mut y_el)?;
            let dev = |a: &[f64], b: &[f64]| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max)
            };
            let d_diag = dev(&op.diagonal(), &csr.diagonal());
            println!(
                "{kind:?} p={p}: dofs {:5}  qdata {:6} scalars  csr nnz {:6}  \
                 |pa-full| {:.2e}  |pa-elem| {:.2e}  |diag-diag| {:.2e}",
                fes.size(),
                op.qdata_len(),
                csr.nnz(),
                dev(&y_pa, &y_fa),
                dev(&y_pa, &y_el),
                d_diag,
            );
        }
    }
    // The fully matrix-free level recomputes geometry on the fly (mass only).
    let fes = Arc::new(FESpace::new(&mesh, 4, Continuity::H1, 1)?);
    let pa = PAOperator::new(&fes, OperatorKind::Mass, constant_coefficient(1.0), None)?;
    let mut mf = PAOperator::new(&fes, OperatorKind::Mass, constant_coefficient(1.0), None)?;
    mf.set_matrix_free(true)?;
    let x = SplitMix64::new(9).vector(fes.size());
    let y_pa = pa.apply_owned(&x)?;
    let y_mf = mf.apply_owned(&x)?;
    let dev = y_pa
        .iter()
        .zip(&y_mf)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!(
        "matrix-free mass p=4: qdata {} scalars (was {}), |pa-mf| {:.2e}",
        mf.qdata_len(),
        pa.qdata_len(),
        dev
    );
    Ok(())
}
