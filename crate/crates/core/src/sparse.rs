//! Compressed sparse row matrices.
//!
//! This is the storage format for every linear map in the crate: Jacobians of
//! AD values, finite-volume discretization matrices and grid projections. Only
//! the handful of kernels the assembly path needs are provided.

use std::fmt;

/// Row-major compressed sparse matrix of `f64`.
///
/// Column indices within a row are strictly increasing and explicit zeros are
/// kept only when produced by arithmetic (they are harmless).
#[derive(Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for CsrMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CsrMatrix({}x{}, nnz={})", self.nrows, self.ncols, self.nnz())?;
        if self.nrows * self.ncols <= 64 {
            for row in self.to_dense() {
                write!(f, "\n  {row:?}")?;
            }
        }
        Ok(())
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: values.to_vec(),
        }
    }

    /// Identity block of size `n` placed at column `offset` of an `n x ncols` matrix.
    pub fn identity_block(n: usize, offset: usize, ncols: usize) -> Self {
        assert!(offset + n <= ncols, "identity block exceeds column count");
        Self {
            nrows: n,
            ncols,
            indptr: (0..=n).collect(),
            indices: (offset..offset + n).collect(),
            data: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut pos = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let p = pos[r];
            cols[p] = c;
            vals[p] = v;
            pos[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|p| (cols[p], vals[p])));
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                if indices.len() > indptr[r] && *indices.last().unwrap() == c {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense input");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] += v;
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut pos = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = pos[j];
                indices[p] = i;
                data[p] = v;
                pos[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows, "row scaling length mismatch");
        let mut out = self.clone();
        for i in 0..self.nrows {
            for p in out.indptr[i]..out.indptr[i + 1] {
                out.data[p] *= d[i];
            }
        }
        out
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.ncols, "column scaling length mismatch");
        let mut out = self.clone();
        for (p, &j) in out.indices.iter().enumerate() {
            out.data[p] *= d[j];
        }
        out
    }

    /// `alpha * self + beta * other`, requiring equal shapes.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "sparse add shape mismatch");
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let take_a = q >= cb.len() || (p < ca.len() && ca[p] < cb[q]);
                let take_b = p >= ca.len() || (q < cb.len() && cb[q] < ca[p]);
                if take_a {
                    indices.push(ca[p]);
                    data.push(alpha * va[p]);
                    p += 1;
                } else if take_b {
                    indices.push(cb[q]);
                    data.push(beta * vb[q]);
                    q += 1;
                } else {
                    indices.push(ca[p]);
                    data.push(alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_combination(1.0, other, -1.0)
    }

    /// Sparse-sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "sparse matmul dimension mismatch");
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                data.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&Self]) -> Self {
        let ncols = blocks.first().map_or(0, |b| b.ncols);
        let mut out = Self::zeros(0, ncols);
        for b in blocks {
            assert_eq!(b.ncols, ncols, "vstack column mismatch");
            let base = out.indices.len();
            out.indices.extend_from_slice(&b.indices);
            out.data.extend_from_slice(&b.data);
            out.indptr.extend(b.indptr[1..].iter().map(|p| p + base));
            out.nrows += b.nrows;
        }
        out
    }

    /// Block-diagonal concatenation.
    pub fn block_diag(blocks: &[&Self]) -> Self {
        let nrows = blocks.iter().map(|b| b.nrows).sum();
        let ncols = blocks.iter().map(|b| b.ncols).sum();
        let mut trip = Vec::with_capacity(blocks.iter().map(|b| b.nnz()).sum());
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            trip.extend(b.triplets().map(|(i, j, v)| (i + r0, j + c0, v)));
            r0 += b.nrows;
            c0 += b.ncols;
        }
        Self::from_triplets(nrows, ncols, &trip)
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(0, self.ncols);
        for &i in rows {
            let (cols, vals) = self.row(i);
            out.indices.extend_from_slice(cols);
            out.data.extend_from_slice(vals);
            out.indptr.push(out.indices.len());
            out.nrows += 1;
        }
        out
    }

    /// Returns the same pattern with `ncols` extended (new columns are empty).
    pub fn with_ncols(mut self, ncols: usize) -> Self {
        assert!(ncols >= self.ncols);
        self.ncols = ncols;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, 5.0)]);
        assert_eq!(m.to_dense(), vec![vec![2.0, 0.0, 4.0], vec![0.0, 5.0, 0.0]]);
        assert_eq!(m.row(0).0, &[0, 2]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let b = CsrMatrix::from_dense(&[vec![4.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);
        assert_eq!(a.matmul(&b).to_dense(), vec![vec![6.0, 2.0, 1.0], vec![3.0, 3.0, 0.0]]);
    }

    #[test]
    fn transpose_and_matvec() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 3.0, 4.0]]);
        assert_eq!(a.transpose().to_dense(), vec![vec![1.0, 0.0], vec![2.0, 3.0], vec![0.0, 4.0]]);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 7.0]);
    }

    #[test]
    fn stacking() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_dense(&[vec![0.0, 7.0]]);
        assert_eq!(
            CsrMatrix::vstack(&[&a, &b]).to_dense(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 7.0]]
        );
        let d = CsrMatrix::block_diag(&[&a, &b]);
        assert_eq!(d.shape(), (3, 4));
        assert_eq!(d.get(2, 3), 7.0);
    }

    #[test]
    fn elementwise_combination_merges_patterns() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let b = CsrMatrix::from_dense(&[vec![0.0, 3.0], vec![1.0, 2.0]]);
        assert_eq!(a.sub(&b).to_dense(), vec![vec![1.0, -3.0], vec![-1.0, 0.0]]);
    }
}
