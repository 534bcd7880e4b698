//! Design matrices stored column-wise, either dense or compressed-sparse-column.
//!
//! Coordinate descent and the screening tests both walk whole columns, so both
//! storage kinds expose a [`Column`] view with `dot`/`axpy` kernels. Multi-output
//! models keep their targets, predictions and dual points as `n × q` row-major
//! buffers; the `*_rows` kernels act on such buffers without ever forming the
//! Kronecker-expanded design.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Column-major values, `n * p` entries.
    Dense(Vec<f64>),
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    },
}

/// An `n × p` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    storage: Storage,
}

/// Read-only view of one column.
#[derive(Debug, Clone, Copy)]
pub enum Column<'a> {
    Dense(&'a [f64]),
    Sparse { rows: &'a [usize], vals: &'a [f64] },
}

impl<'a> Column<'a> {
    #[inline]
    pub fn dot(&self, v: &[f64]) -> f64 {
        match *self {
            Column::Dense(col) => col.iter().zip(v).map(|(a, b)| a * b).sum(),
            Column::Sparse { rows, vals } => {
                rows.iter().zip(vals).map(|(&i, &x)| x * v[i]).sum()
            }
        }
    }

    /// `v += alpha * column`
    #[inline]
    pub fn axpy(&self, alpha: f64, v: &mut [f64]) {
        match *self {
            Column::Dense(col) => {
                for (vi, &x) in v.iter_mut().zip(col) {
                    *vi += alpha * x;
                }
            }
            Column::Sparse { rows, vals } => {
                for (&i, &x) in rows.iter().zip(vals) {
                    v[i] += alpha * x;
                }
            }
        }
    }

    /// `out[k] = Σ_i x_i · v[i*q + k]` for an `n × q` row-major `v`.
    pub fn dot_rows(&self, v: &[f64], q: usize, out: &mut [f64]) {
        out[..q].iter_mut().for_each(|o| *o = 0.0);
        self.for_each(|i, x| {
            let row = &v[i * q..(i + 1) * q];
            for (o, &r) in out.iter_mut().zip(row) {
                *o += x * r;
            }
        });
    }

    /// `v[i*q + k] += x_i · coef[k]` for an `n × q` row-major `v`.
    pub fn axpy_rows(&self, coef: &[f64], q: usize, v: &mut [f64]) {
        self.for_each(|i, x| {
            let row = &mut v[i * q..(i + 1) * q];
            for (r, &c) in row.iter_mut().zip(coef) {
                *r += x * c;
            }
        });
    }

    #[inline]
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Column::Dense(col) => col.iter().enumerate().for_each(|(i, &x)| f(i, x)),
            Column::Sparse { rows, vals } => {
                rows.iter().zip(vals).for_each(|(&i, &x)| f(i, x))
            }
        }
    }

    pub fn norm_squared(&self) -> f64 {
        match *self {
            Column::Dense(col) => col.iter().map(|x| x * x).sum(),
            Column::Sparse { vals, .. } => vals.iter().map(|x| x * x).sum(),
        }
    }
}

impl DesignMatrix {
    /// Builds a dense matrix from column-major values.
    pub fn dense_col_major(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self {
            n,
            p,
            storage: Storage::Dense(values),
        })
    }

    /// Builds a dense matrix from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut values = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                values[j * n + i] = v;
            }
        }
        Self::dense_col_major(n, p, values)
    }

    /// Builds a CSC matrix. Row indices within each column must be strictly
    /// increasing and smaller than `n`.
    pub fn csc(
        n: usize,
        p: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != p + 1 {
            return Err(Error::DimensionMismatch {
                expected: p + 1,
                got: indptr.len(),
            });
        }
        if indices.len() != data.len() || indptr[0] != 0 || indptr[p] != indices.len() {
            return Err(Error::InvalidMatrix("inconsistent CSC arrays".into()));
        }
        for j in 0..p {
            let (start, end) = (indptr[j], indptr[j + 1]);
            if start > end {
                return Err(Error::InvalidMatrix(format!("column {j}: decreasing indptr")));
            }
            let rows = &indices[start..end];
            if rows.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMatrix(format!("column {j}: row index out of range")));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "column {j}: row indices not strictly increasing"
                )));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self {
            n,
            p,
            storage: Storage::Sparse {
                indptr,
                indices,
                data,
            },
        })
    }

    /// Builds a CSC matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, p: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
        for &(i, j, v) in triplets {
            if i >= n || j >= p {
                return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) out of range")));
            }
            cols[j].push((i, v));
        }
        let mut indptr = Vec::with_capacity(p + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut col in cols {
            col.sort_by_key(|&(i, _)| i);
            for (i, v) in col {
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == i {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(i);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self::csc(n, p, indptr, indices, data)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.len(),
            Storage::Sparse { data, .. } => data.len(),
        }
    }

    #[inline]
    pub fn column(&self, j: usize) -> Column<'_> {
        match &self.storage {
            Storage::Dense(v) => Column::Dense(&v[j * self.n..(j + 1) * self.n]),
            Storage::Sparse {
                indptr,
                indices,
                data,
            } => {
                let (s, e) = (indptr[j], indptr[j + 1]);
                Column::Sparse {
                    rows: &indices[s..e],
                    vals: &data[s..e],
                }
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.column(j) {
            Column::Dense(col) => col[i],
            Column::Sparse { rows, vals } => rows
                .binary_search(&i)
                .map(|k| vals[k])
                .unwrap_or(0.0),
        }
    }

    /// `X β` for `β` of shape `p × q` (row-major); returns an `n × q` buffer.
    pub fn matvec(&self, beta: &[f64], q: usize) -> Result<Vec<f64>> {
        if beta.len() != self.p * q {
            return Err(Error::DimensionMismatch {
                expected: self.p * q,
                got: beta.len(),
            });
        }
        let mut z = vec![0.0; self.n * q];
        for j in 0..self.p {
            let coef = &beta[j * q..(j + 1) * q];
            if coef.iter().all(|&c| c == 0.0) {
                continue;
            }
            if q == 1 {
                self.column(j).axpy(coef[0], &mut z);
            } else {
                self.column(j).axpy_rows(coef, q, &mut z);
            }
        }
        Ok(z)
    }

    /// `X^⊤ v` for `v` of shape `n × q`; returns a `p × q` buffer.
    pub fn transpose_matvec(&self, v: &[f64], q: usize) -> Result<Vec<f64>> {
        if v.len() != self.n * q {
            return Err(Error::DimensionMismatch {
                expected: self.n * q,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.p * q];
        for j in 0..self.p {
            if q == 1 {
                out[j] = self.column(j).dot(v);
            } else {
                self.column(j).dot_rows(v, q, &mut out[j * q..(j + 1) * q]);
            }
        }
        Ok(out)
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| self.column(j).norm_squared().sqrt())
            .collect()
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> Self {
        let mut values = vec![0.0; self.n * self.p];
        for j in 0..self.p {
            let col = &mut values[j * self.n..(j + 1) * self.n];
            self.column(j).for_each(|i, x| col[i] = x);
        }
        Self {
            n: self.n,
            p: self.p,
            storage: Storage::Dense(values),
        }
    }

    /// CSC copy, dropping explicit zeros.
    pub fn to_sparse(&self) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for j in 0..self.p {
            self.column(j).for_each(|i, x| {
                if x != 0.0 {
                    indices.push(i);
                    data.push(x);
                }
            });
            indptr.push(indices.len());
        }
        Self {
            n: self.n,
            p: self.p,
            storage: Storage::Sparse {
                indptr,
                indices,
                data,
            },
        }
    }

    /// Applies `f(j, column_values)` to every column in place.
    pub(crate) fn map_columns(&mut self, mut f: impl FnMut(usize, &mut [f64])) {
        match &mut self.storage {
            Storage::Dense(v) => {
                for (j, col) in v.chunks_mut(self.n.max(1)).enumerate().take(self.p) {
                    f(j, col);
                }
            }
            Storage::Sparse { indptr, data, .. } => {
                for j in 0..self.p {
                    f(j, &mut data[indptr[j]..indptr[j + 1]]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_matvec() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(x.matvec(&[3.0, 1.0], 1).unwrap(), vec![3.0, 2.0]);
        assert_eq!(x.matvec(&[0.0, 0.0], 1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(x.to_sparse().matvec(&[3.0, 1.0], 1).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn matvec_rejects_wrong_length() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            x.matvec(&[1.0], 1),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn csc_validation() {
        // unsorted rows
        assert!(DesignMatrix::csc(3, 1, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        // duplicate rows
        assert!(DesignMatrix::csc(3, 1, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        // out of range
        assert!(DesignMatrix::csc(3, 1, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(DesignMatrix::csc(3, 1, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let x = DesignMatrix::from_triplets(2, 2, &[(1, 0, 1.0), (1, 0, 2.0), (0, 1, 4.0)]).unwrap();
        assert_eq!(x.get(1, 0), 3.0);
        assert_eq!(x.get(0, 1), 4.0);
        assert_eq!(x.get(0, 0), 0.0);
        assert_eq!(x.nnz(), 2);
    }

    #[test]
    fn multi_output_products() {
        // X = [[1, 2], [3, 4], [0, 1]], B = [[1, 0], [0, 2]]
        let x = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, 1.0]]).unwrap();
        let z = x.matvec(&[1.0, 0.0, 0.0, 2.0], 2).unwrap();
        assert_eq!(z, vec![1.0, 4.0, 3.0, 8.0, 0.0, 2.0]);
        let g = x.transpose_matvec(&z, 2).unwrap();
        // X^T Z
        assert_eq!(g, vec![10.0, 28.0, 14.0, 42.0]);
        assert_eq!(x.to_sparse().transpose_matvec(&z, 2).unwrap(), g);
    }
}
