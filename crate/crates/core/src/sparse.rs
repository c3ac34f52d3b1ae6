//! Compressed sparse column matrices with the handful of operations the
//! sensitivity computations need.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that cancel to exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            cols[j].push((i, v));
        }
        Self::from_columns(nrows, cols)
    }

    pub fn from_columns(nrows: usize, mut cols: Vec<Vec<(usize, f64)>>) -> Self {
        let ncols = cols.len();
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowidx = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        for col in &mut cols {
            col.sort_unstable_by_key(|&(i, _)| i);
            let mut k = 0;
            while k < col.len() {
                let i = col[k].0;
                let mut v = 0.0;
                while k < col.len() && col[k].0 == i {
                    v += col[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    rowidx.push(i);
                    values.push(v);
                }
            }
            colptr.push(rowidx.len());
        }
        CscMatrix {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let cols = (0..a.ncols())
            .map(|j| {
                a.column(j)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect()
            })
            .collect();
        Self::from_columns(a.nrows(), cols)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.colptr[j]..self.colptr[j + 1];
        self.rowidx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.colptr[j]..self.colptr[j + 1];
        match self.rowidx[range.clone()].binary_search(&i) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.nrows + 1];
        for &i in &self.rowidx {
            count[i + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let colptr = count.clone();
        let mut next = count;
        let mut rowidx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                let k = next[i];
                rowidx[k] = j;
                values[k] = v;
                next[i] += 1;
            }
        }
        CscMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr,
            rowidx,
            values,
        }
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for (v, &i) in out.values.iter_mut().zip(&self.rowidx) {
            *v *= d[i];
        }
        out
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.ncols);
        let mut out = self.clone();
        for (j, &dj) in d.iter().enumerate() {
            for v in &mut out.values[self.colptr[j]..self.colptr[j + 1]] {
                *v *= dj;
            }
        }
        out
    }

    /// Sparse product `self * rhs` (Gustavson's algorithm).
    pub fn mul(&self, rhs: &CscMatrix) -> CscMatrix {
        assert_eq!(self.ncols, rhs.nrows, "inner dimensions differ");
        let mut acc = vec![0.0; self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut cols = Vec::with_capacity(rhs.ncols);
        for j in 0..rhs.ncols {
            let mut pattern = Vec::new();
            for (k, b) in rhs.col(j) {
                for (i, a) in self.col(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        pattern.push(i);
                    }
                    acc[i] += a * b;
                }
            }
            cols.push(pattern.into_iter().map(|i| (i, acc[i])).collect());
        }
        CscMatrix::from_columns(self.nrows, cols)
    }

    /// Dense product `self * rhs`.
    pub fn mul_dense(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.ncols, rhs.nrows(), "inner dimensions differ");
        let mut out = DMatrix::zeros(self.nrows, rhs.ncols());
        for c in 0..rhs.ncols() {
            let x = rhs.column(c);
            let mut y = out.column_mut(c);
            for j in 0..self.ncols {
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for (i, a) in self.col(j) {
                    y[i] += a * xj;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Copy with one row and/or one column removed; later indices shift down.
    pub fn without(&self, row: Option<usize>, col: Option<usize>) -> CscMatrix {
        let shift = |i: usize| match row {
            Some(r) if i > r => i - 1,
            _ => i,
        };
        let cols = (0..self.ncols)
            .filter(|&j| Some(j) != col)
            .map(|j| {
                self.col(j)
                    .filter(|&(i, _)| Some(i) != row)
                    .map(|(i, v)| (shift(i), v))
                    .collect()
            })
            .collect();
        let nrows = self.nrows - usize::from(row.is_some());
        CscMatrix::from_columns(nrows, cols)
    }

    /// Symmetric permutation `P A P^t` where `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> CscMatrix {
        assert_eq!(self.nrows, self.ncols);
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let cols = perm
            .iter()
            .map(|&old| self.col(old).map(|(i, v)| (inverse[i], v)).collect())
            .collect();
        CscMatrix::from_columns(self.nrows, cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CscMatrix {
        CscMatrix::from_triplets(
            3,
            2,
            [
                (0, 0, 1.0),
                (2, 0, 2.0),
                (1, 1, 3.0),
                (2, 1, -1.0),
                (2, 1, 0.5),
            ],
        )
    }

    #[test]
    fn duplicates_sum_and_cancellations_vanish() {
        let a = CscMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, -1.0), (1, 1, 2.0)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(1, 1), 2.0);
        assert_eq!(sample().get(2, 1), -0.5);
    }

    #[test]
    fn products_match_dense() {
        let a = sample();
        let b = CscMatrix::from_triplets(2, 3, [(0, 0, 1.0), (1, 0, 2.0), (1, 2, -4.0)]);
        let dense = a.to_dense() * b.to_dense();
        assert_eq!(a.mul(&b).to_dense(), dense);
        assert_eq!(a.mul_dense(&b.to_dense()), dense);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn remove_row_and_column() {
        let a = CscMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        ));
        let r = a.without(Some(1), Some(0));
        assert_eq!(
            r.to_dense(),
            DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 8.0, 9.0])
        );
    }

    #[test]
    fn symmetric_permutation() {
        let d = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 5.0, 2.0, 0.0, 2.0, 6.0]);
        let a = CscMatrix::from_dense(&d);
        let perm = [2, 0, 1];
        let p = a.permute_symmetric(&perm).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p[(i, j)], d[(perm[i], perm[j])]);
            }
        }
    }
}
