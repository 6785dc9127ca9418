//! Compressed sparse row matrices, MatrixMarket export, and a profile
//! (skyline) Cholesky factorization for the SPD systems of the solver stack.

use crate::error::{Error, Result};
use crate::gfmt::g17;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    /// Column indices, sorted within each row.
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row (column, value) lists; duplicates are summed.
    pub fn from_rows(n_cols: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// Zero essential rows and columns and put ones on their diagonal.
    /// `essential` must be sorted.
    pub fn constrained(&self, essential: &[usize]) -> CsrMatrix {
        let is_ess = |i: usize| essential.binary_search(&i).is_ok();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.n_rows);
        for i in 0..self.n_rows {
            if is_ess(i) {
                rows.push(vec![(i, 1.0)]);
                continue;
            }
            let (cols, vals) = self.row(i);
            rows.push(
                cols.iter()
                    .zip(vals)
                    .filter(|(c, _)| !is_ess(**c))
                    .map(|(c, v)| (*c, *v))
                    .collect(),
            );
        }
        CsrMatrix::from_rows(self.n_cols, rows)
    }

    /// Essential-value elimination on an unconstrained matrix:
    /// `b <- b - A * (x_bc on essential dofs, 0 elsewhere)`, then
    /// `b[essential] = x_bc[essential]`.
    pub fn eliminate_bc(&self, essential: &[usize], x_bc: &[f64], b: &mut [f64]) -> Result<()> {
        for &d in essential {
            if d >= self.n_cols {
                return Err(Error::IndexOutOfRange {
                    index: d,
                    size: self.n_cols,
                });
            }
        }
        let mut xe = vec![0.0; self.n_cols];
        for &d in essential {
            xe[d] = x_bc[d];
        }
        let mut axe = vec![0.0; self.n_rows];
        self.mul_vec(&xe, &mut axe);
        for (bi, ai) in b.iter_mut().zip(&axe) {
            *bi -= ai;
        }
        for &d in essential {
            b[d] = x_bc[d];
        }
        Ok(())
    }

    /// MatrixMarket coordinate format, 1-based indices, %.17g values.
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {}", i + 1, c + 1, g17(*v))?;
            }
        }
        Ok(())
    }
}

/// Cholesky factorization of an SPD matrix stored by its envelope: row `i`
/// keeps the contiguous range [first(i), i]. Fill-in stays inside the
/// envelope, which is tight for lexicographically numbered lattice matrices.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    ptr: Vec<usize>,
    vals: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows;
        let mut first = vec![0usize; n];
        for i in 0..n {
            let (cols, _) = a.row(i);
            first[i] = cols.first().copied().unwrap_or(i).min(i);
        }
        let mut ptr = vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0; ptr[n]];
        for i in 0..n {
            let (cols, row_vals) = a.row(i);
            for (c, v) in cols.iter().zip(row_vals) {
                if *c <= i {
                    vals[ptr[i] + (c - first[i])] = *v;
                }
            }
        }
        // Row-by-row factorization: L[i][j] over the envelope, then the pivot.
        for i in 0..n {
            for j in first[i]..i {
                let lo = first[i].max(first[j]);
                let mut sum = vals[ptr[i] + (j - first[i])];
                for k in lo..j {
                    sum -= vals[ptr[i] + (k - first[i])] * vals[ptr[j] + (k - first[j])];
                }
                vals[ptr[i] + (j - first[i])] = sum / vals[ptr[j] + (j - first[j])];
            }
            let mut diag = vals[ptr[i] + (i - first[i])];
            for k in first[i]..i {
                let l = vals[ptr[i] + (k - first[i])];
                diag -= l * l;
            }
            if diag <= 0.0 {
                return Err(Error::NotPositiveDefinite { row: i, pivot: diag });
            }
            vals[ptr[i] + (i - first[i])] = diag.sqrt();
        }
        Ok(Self { n, first, ptr, vals })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        // Forward: L y = b.
        for i in 0..self.n {
            let mut sum = x[i];
            for k in self.first[i]..i {
                sum -= self.vals[self.ptr[i] + (k - self.first[i])] * x[k];
            }
            x[i] = sum / self.vals[self.ptr[i] + (i - self.first[i])];
        }
        // Backward: L^T x = y, updating right-hand sides column-wise.
        for i in (0..self.n).rev() {
            x[i] /= self.vals[self.ptr[i] + (i - self.first[i])];
            let xi = x[i];
            for k in self.first[i]..i {
                x[k] -= self.vals[self.ptr[i] + (k - self.first[i])] * xi;
            }
        }
    }
}
