//! Axis-by-axis contractions for tensor-product elements.
//!
//! A dim-dimensional element tensor is stored flat with axis 0 fastest. Any
//! 1D operator is applied one axis at a time, which is what turns an
//! O(p^2d) dense element application into the O(p^(d+1)) sum-factorized one.

/// Contract a 1D matrix `m` (rows x cols, row-major) along the middle index
/// of `x` viewed as (nfast, cols, nslow), writing (nfast, rows, nslow).
pub fn contract(
    m: &[f64],
    rows: usize,
    cols: usize,
    nfast: usize,
    nslow: usize,
    x: &[f64],
    y: &mut [f64],
) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), nfast * cols * nslow);
    debug_assert_eq!(y.len(), nfast * rows * nslow);
    y.fill(0.0);
    for s in 0..nslow {
        let xs = &x[s * nfast * cols..(s + 1) * nfast * cols];
        let ys = &mut y[s * nfast * rows..(s + 1) * nfast * rows];
        for k in 0..rows {
            let yk = &mut ys[k * nfast..(k + 1) * nfast];
            for i in 0..cols {
                let mki = m[k * cols + i];
                let xi = &xs[i * nfast..(i + 1) * nfast];
                for f in 0..nfast {
                    yk[f] += mki * xi[f];
                }
            }
        }
    }
}

/// Contract with the transpose of `m`: input has `rows` entries along the
/// middle index, output `cols`.
pub fn contract_transpose(
    m: &[f64],
    rows: usize,
    cols: usize,
    nfast: usize,
    nslow: usize,
    x: &[f64],
    y: &mut [f64],
) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), nfast * rows * nslow);
    debug_assert_eq!(y.len(), nfast * cols * nslow);
    y.fill(0.0);
    for s in 0..nslow {
        let xs = &x[s * nfast * rows..(s + 1) * nfast * rows];
        let ys = &mut y[s * nfast * cols..(s + 1) * nfast * cols];
        for k in 0..rows {
            let xk = &xs[k * nfast..(k + 1) * nfast];
            for i in 0..cols {
                let mki = m[k * cols + i];
                let yi = &mut ys[i * nfast..(i + 1) * nfast];
                for f in 0..nfast {
                    yi[f] += mki * xk[f];
                }
            }
        }
    }
}

/// Scratch buffers for a sequence of axis contractions.
#[derive(Default, Clone)]
pub struct Scratch {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Scratch {
    pub fn ensure(&mut self, len: usize) {
        if self.a.len() < len {
            self.a.resize(len, 0.0);
        }
        if self.b.len() < len {
            self.b.resize(len, 0.0);
        }
    }
}

/// Apply `tables[axis]` (each rows x cols) along every axis in turn,
/// mapping a cols^dim tensor to a rows^dim tensor.
pub fn apply_tensor(
    tables: &[&[f64]],
    rows: usize,
    cols: usize,
    dim: usize,
    x: &[f64],
    y: &mut [f64],
    scratch: &mut Scratch,
) {
    debug_assert_eq!(tables.len(), dim);
    let max = rows.max(cols).pow(dim as u32);
    scratch.ensure(max);
    let mut src: &mut [f64] = &mut scratch.a;
    let mut dst: &mut [f64] = &mut scratch.b;
    src[..x.len()].copy_from_slice(x);
    for axis in 0..dim {
        let nfast = rows.pow(axis as u32);
        let nslow = cols.pow((dim - 1 - axis) as u32);
        contract(
            tables[axis],
            rows,
            cols,
            nfast,
            nslow,
            &src[..nfast * cols * nslow],
            &mut dst[..nfast * rows * nslow],
        );
        std::mem::swap(&mut src, &mut dst);
    }
    y.copy_from_slice(&src[..rows.pow(dim as u32)]);
}

/// Transposed counterpart of [`apply_tensor`]: rows^dim down to cols^dim.
pub fn apply_tensor_transpose(
    tables: &[&[f64]],
    rows: usize,
    cols: usize,
    dim: usize,
    x: &[f64],
    y: &mut [f64],
    scratch: &mut Scratch,
) {
    debug_assert_eq!(tables.len(), dim);
    let max = rows.max(cols).pow(dim as u32);
    scratch.ensure(max);
    let mut src: &mut [f64] = &mut scratch.a;
    let mut dst: &mut [f64] = &mut scratch.b;
    src[..x.len()].copy_from_slice(x);
    for axis in (0..dim).rev() {
        let nfast = rows.pow(axis as u32);
        let nslow = cols.pow((dim - 1 - axis) as u32);
        contract_transpose(
            tables[axis],
            rows,
            cols,
            nfast,
            nslow,
            &src[..nfast * rows * nslow],
            &mut dst[..nfast * cols * nslow],
        );
        std::mem::swap(&mut src, &mut dst);
    }
    y.copy_from_slice(&src[..cols.pow(dim as u32)]);
}

/// Inner-loop iteration count of one [`apply_tensor`] sweep; the structural
/// cost model used by the scaling tests.
pub fn tensor_workload(rows: usize, cols: usize, dim: usize) -> usize {
    (0..dim)
        .map(|axis| {
            let nfast = rows.pow(axis as u32);
            let nslow = cols.pow((dim - 1 - axis) as u32);
            nslow * rows * cols * nfast
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    /// Dense Kronecker-product application, the oracle for the factorized path.
    fn dense_tensor_apply(tables: &[&[f64]], rows: usize, cols: usize, dim: usize, x: &[f64]) -> Vec<f64> {
        let nout = rows.pow(dim as u32);
        let nin = cols.pow(dim as u32);
        let mut y = vec![0.0; nout];
        for (ko, yo) in y.iter_mut().enumerate() {
            let mut kidx = [0usize; 3];
            let mut rem = ko;
            for a in 0..dim {
                kidx[a] = rem % rows;
                rem /= rows;
            }
            for ii in 0..nin {
                let mut iidx = [0usize; 3];
                let mut rem = ii;
                for a in 0..dim {
                    iidx[a] = rem % cols;
                    rem /= cols;
                }
                let mut prod = x[ii];
                for a in 0..dim {
                    prod *= tables[a][kidx[a] * cols + iidx[a]];
                }
                *yo += prod;
            }
        }
        y
    }

    #[test]
    fn factorized_matches_dense() {
        let mut rng = SplitMix64::new(3);
        for dim in [2usize, 3] {
            for (rows, cols) in [(3usize, 2usize), (4, 4), (5, 3)] {
                let t0: Vec<f64> = (0..rows * cols).map(|_| rng.symmetric()).collect();
                let t1: Vec<f64> = (0..rows * cols).map(|_| rng.symmetric()).collect();
                let t2: Vec<f64> = (0..rows * cols).map(|_| rng.symmetric()).collect();
                let tables: Vec<&[f64]> = [&t0, &t1, &t2][..dim].iter().map(|t| t.as_slice()).collect();
                let x: Vec<f64> = (0..cols.pow(dim as u32)).map(|_| rng.symmetric()).collect();
                let mut y = vec![0.0; rows.pow(dim as u32)];
                let mut scratch = Scratch::default();
                apply_tensor(&tables, rows, cols, dim, &x, &mut y, &mut scratch);
                let want = dense_tensor_apply(&tables, rows, cols, dim, &x);
                for (a, b) in y.iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-12, "dim={dim} rows={rows}");
                }
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let mut rng = SplitMix64::new(11);
        for dim in [2usize, 3] {
            let rows: usize = 4;
            let cols: usize = 3;
            let t0: Vec<f64> = (0..rows * cols).map(|_| rng.symmetric()).collect();
            let t1: Vec<f64> = (0..rows * cols).map(|_| rng.symmetric()).collect();
            let t2: Vec<f64> = (0..rows * cols).map(|_| rng.symmetric()).collect();
            let tables: Vec<&[f64]> = [&t0, &t1, &t2][..dim].iter().map(|t| t.as_slice()).collect();
            let x: Vec<f64> = (0..cols.pow(dim as u32)).map(|_| rng.symmetric()).collect();
            let z: Vec<f64> = (0..rows.pow(dim as u32)).map(|_| rng.symmetric()).collect();
            let mut ax = vec![0.0; rows.pow(dim as u32)];
            let mut atz = vec![0.0; cols.pow(dim as u32)];
            let mut scratch = Scratch::default();
            apply_tensor(&tables, rows, cols, dim, &x, &mut ax, &mut scratch);
            apply_tensor_transpose(&tables, rows, cols, dim, &z, &mut atz, &mut scratch);
            let lhs: f64 = ax.iter().zip(&z).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&atz).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn workload_formula_counts_loop_iterations() {
        // Shadow loop replicating the contraction loop nest.
        fn counted(rows: usize, cols: usize, dim: usize) -> usize {
            let mut count = 0usize;
            for axis in 0..dim {
                let nfast = rows.pow(axis as u32);
                let nslow = cols.pow((dim - 1 - axis) as u32);
                for _s in 0..nslow {
                    for _k in 0..rows {
                        for _i in 0..cols {
                            for _f in 0..nfast {
                                count += 1;
                            }
                        }
                    }
                }
            }
            count
        }
        for dim in [2usize, 3] {
            for (rows, cols) in [(3, 2), (6, 5), (10, 9)] {
                assert_eq!(tensor_workload(rows, cols, dim), counted(rows, cols, dim));
            }
        }
    }
}
