//! Compressed sparse row matrices used for all assembled operators.
//!
//! Column indices are sorted and unique within each row; explicit zeros are
//! permitted so that a fixed pattern can be reused across Newton iterations and
//! time steps.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut m = Self::zeros_from_pairs(nrows, ncols, triplets.iter().map(|&(i, j, _)| (i, j)));
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    /// Builds the zero matrix whose pattern is the set of the given positions.
    pub fn zeros_from_pairs(
        nrows: usize,
        ncols: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for (i, j) in pairs {
            assert!(i < nrows && j < ncols, "entry ({i}, {j}) out of shape");
            by_row[i].push(j);
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for cols in &mut by_row {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn pos(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| r.start + k)
    }

    /// Adds `v` to entry (i, j). The position must exist in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pos(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pos(i, j).map_or(0.0, |k| self.values[k])
    }

    /// y += s * A x
    pub fn matvec_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] += s * acc;
        }
    }

    /// y += s * A^T x
    pub fn matvec_transpose_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let sx = s * x[i];
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += sx * v;
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_add(1.0, x, &mut y);
        y
    }

    /// x^T A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut row_acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                row_acc += v * y[j];
            }
            acc += x[i] * row_acc;
        }
        acc
    }

    /// self[r0.., c0..] += s * other, entry by entry. All positions of `other`
    /// must exist in this matrix's pattern.
    pub fn add_block(&mut self, r0: usize, c0: usize, s: f64, other: &SparseMatrix) {
        for i in 0..other.nrows {
            let (cols, vals) = other.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                self.add(r0 + i, c0 + j, s * v);
            }
        }
    }

    /// self[r0.., c0..] += s * other^T.
    pub fn add_block_transpose(&mut self, r0: usize, c0: usize, s: f64, other: &SparseMatrix) {
        for i in 0..other.nrows {
            let (cols, vals) = other.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                self.add(r0 + j, c0 + i, s * v);
            }
        }
    }
}

/// Constrains `dofs` of the system `a x = rhs` to the given values by symmetric
/// elimination: the right-hand side absorbs the constrained columns, constrained
/// rows and columns are zeroed, the diagonal is set to one, and the right-hand
/// side entry becomes the prescribed value.
pub fn apply_dirichlet(a: &mut SparseMatrix, rhs: &mut [f64], bcs: &[(usize, f64)]) -> Result<()> {
    let n = a.nrows();
    for &(dof, _) in bcs {
        if dof >= n {
            return Err(Error::DofOutOfRange {
                index: dof,
                size: n,
            });
        }
    }
    let mut constrained = vec![false; n];
    let mut value = vec![0.0; n];
    for &(dof, v) in bcs {
        constrained[dof] = true;
        value[dof] = v;
    }
    for i in 0..n {
        let start = a.row_ptr[i];
        let end = a.row_ptr[i + 1];
        if constrained[i] {
            for k in start..end {
                a.values[k] = if a.col_idx[k] == i { 1.0 } else { 0.0 };
            }
            rhs[i] = value[i];
        } else {
            for k in start..end {
                let j = a.col_idx[k];
                if constrained[j] {
                    rhs[i] -= a.values[k] * value[j];
                    a.values[k] = 0.0;
                }
            }
        }
    }
    Ok(())
}
