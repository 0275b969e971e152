//! Matrix storage used by the solvers.
//!
//! `A` is held either as a dense row-major array or in compressed sparse row
//! form. Everything the iteration needs from `A` is a row access, a column
//! access (through a stored transpose), or a full product, so both layouts
//! expose the same small surface through [`Matrix`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Matrices with at most this many entries are stored densely.
pub const DENSE_ENTRY_LIMIT: usize = 4_000_000;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "dense matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let mut d = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                d.data[i * m.ncols() + j] = m[(i, j)];
            }
        }
        d
    }
}

/// Compressed sparse row matrix. Column indices within a row are sorted and unique.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indices.push(j);
            values.push(v);
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                let slot = next[j];
                indices[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr: counts,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                d.set(i, j, v);
            }
        }
        d
    }
}

/// The system matrix `A`.
#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl Matrix {
    /// Picks dense storage when `rows * cols` is at most [`DENSE_ENTRY_LIMIT`].
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let csr = CsrMatrix::from_triplets(rows, cols, triplets)?;
        if rows.saturating_mul(cols) <= DENSE_ENTRY_LIMIT {
            Ok(Matrix::Dense(csr.to_dense()))
        } else {
            Ok(Matrix::Sparse(csr))
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        DenseMatrix::from_rows(rows).map(Matrix::Dense)
    }

    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.rows(),
            Matrix::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.cols(),
            Matrix::Sparse(s) => s.cols(),
        }
    }

    /// Stored entries; for dense storage this counts nonzeros.
    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.data().iter().filter(|v| **v != 0.0).count(),
            Matrix::Sparse(s) => s.nnz(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Matrix::Dense(d) => d.data().iter().all(|v| v.is_finite()),
            Matrix::Sparse(s) => s.values.iter().all(|v| v.is_finite()),
        }
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            Matrix::Dense(d) => dot(d.row(i), x),
            Matrix::Sparse(s) => {
                let (idx, val) = s.row(i);
                idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum()
            }
        }
    }

    /// `y += alpha * A[i, :]`
    #[inline]
    pub fn row_axpy(&self, i: usize, alpha: f64, y: &mut [f64]) {
        match self {
            Matrix::Dense(d) => axpy(alpha, d.row(i), y),
            Matrix::Sparse(s) => {
                let (idx, val) = s.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    y[j] += alpha * v;
                }
            }
        }
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        match self {
            Matrix::Dense(d) => norm_sq(d.row(i)),
            Matrix::Sparse(s) => norm_sq(s.row(i).1),
        }
    }

    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        match self {
            Matrix::Dense(d) => d.row(i).to_vec(),
            Matrix::Sparse(s) => {
                let mut out = vec![0.0; s.cols()];
                let (idx, val) = s.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    out[j] = v;
                }
                out
            }
        }
    }

    /// `out = A x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.matvec_into(x, &mut out);
        out
    }

    /// `A^T y`
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                self.row_axpy(i, yi, &mut out);
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        match self {
            Matrix::Dense(d) => Matrix::Dense(d.transpose()),
            Matrix::Sparse(s) => Matrix::Sparse(s.transpose()),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(d) => d.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        match self {
            Matrix::Dense(d) => d.to_nalgebra(),
            Matrix::Sparse(s) => s.to_dense().to_nalgebra(),
        }
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match self {
            Matrix::Dense(d) => {
                let mut out = Vec::new();
                for i in 0..d.rows() {
                    for (j, &v) in d.row(i).iter().enumerate() {
                        if v != 0.0 {
                            out.push((i, j, v));
                        }
                    }
                }
                out
            }
            Matrix::Sparse(s) => {
                let mut out = Vec::with_capacity(s.nnz());
                for i in 0..s.rows() {
                    let (idx, val) = s.row(i);
                    out.extend(idx.iter().zip(val).map(|(&j, &v)| (i, j, v)));
                }
                out
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        (0..self.rows()).map(|i| self.row_norm_sq(i)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_sums_duplicates_and_transposes() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense().get(0, 2), 1.5);
        let t = m.transpose();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.to_dense(), m.to_dense().transpose());
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn dense_and_sparse_products_agree() {
        let trips = vec![(0, 0, 1.0), (0, 2, -2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 2, 5.0)];
        let dense = Matrix::Dense(CsrMatrix::from_triplets(3, 3, &trips).unwrap().to_dense());
        let sparse = Matrix::Sparse(CsrMatrix::from_triplets(3, 3, &trips).unwrap());
        let x = [1.0, -1.0, 2.0];
        assert_eq!(dense.matvec(&x), sparse.matvec(&x));
        assert_eq!(dense.matvec_t(&x), sparse.matvec_t(&x));
        assert_eq!(dense.triplets(), sparse.triplets());
    }

    #[test]
    fn storage_choice_follows_entry_limit() {
        assert!(matches!(Matrix::from_triplets(10, 10, &[]).unwrap(), Matrix::Dense(_)));
        assert!(matches!(
            Matrix::from_triplets(5000, 1000, &[(0, 0, 1.0)]).unwrap(),
            Matrix::Sparse(_)
        ));
    }
}
