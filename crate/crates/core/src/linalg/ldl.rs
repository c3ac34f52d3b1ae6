//! Sparse `L D L^t` factorization of symmetric matrices with a
//! minimum-degree fill-reducing ordering.
//!
//! The numeric phase is the classic up-looking algorithm driven by the
//! elimination tree. No pivoting is done, so indefinite matrices factor as
//! long as no pivot vanishes.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::DMatrix;

use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseLdl {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroPivot {
    pub column: usize,
}

impl SparseLdl {
    /// Factors a symmetric matrix given in full (both triangles) CSC form.
    pub fn factor(a: &CscMatrix) -> Result<Self, ZeroPivot> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let perm = minimum_degree(a);
        let pa = a.permute_symmetric(&perm);
        let (ap, ai, ax) = (pa.colptr(), pa.rowidx(), pa.values());

        // Symbolic: elimination tree and column counts.
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &i0 in &ai[ap[k]..ap[k + 1]] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // Numeric.
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        flag.fill(NONE);
        lnz.fill(0);
        let scale = (0..n).map(|k| pa.get(k, k).abs()).fold(0.0, f64::max);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                if i > k {
                    continue;
                }
                y[i] += ax[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let end = lp[i] + lnz[i];
                for p in lp[i]..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
            }
            if !d[k].is_finite() || d[k].abs() <= 1e-14 * scale {
                return Err(ZeroPivot { column: perm[k] });
            }
        }

        Ok(SparseLdl {
            perm,
            colptr: lp,
            rowidx: li,
            values: lx,
            diag: d,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz_factor(&self) -> usize {
        self.values.len()
    }

    /// Number of negative pivots; zero exactly when the matrix is positive definite.
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|&&d| d < 0.0).count()
    }

    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = self
            .diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
                (lo.min(d.abs()), hi.max(d.abs()))
            });
        lo / hi
    }

    /// Solves one right-hand side in place.
    pub fn solve_vec(&self, b: &mut [f64], work: &mut [f64]) {
        let n = self.dim();
        for (new, &old) in self.perm.iter().enumerate() {
            work[new] = b[old];
        }
        for j in 0..n {
            let xj = work[j];
            if xj != 0.0 {
                for p in self.colptr[j]..self.colptr[j + 1] {
                    work[self.rowidx[p]] -= self.values[p] * xj;
                }
            }
        }
        for (w, d) in work.iter_mut().zip(&self.diag) {
            *w /= d;
        }
        for j in (0..n).rev() {
            let mut xj = work[j];
            for p in self.colptr[j]..self.colptr[j + 1] {
                xj -= self.values[p] * work[self.rowidx[p]];
            }
            work[j] = xj;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = work[new];
        }
    }

    pub fn solve_mut(&self, b: &mut DMatrix<f64>) {
        assert_eq!(b.nrows(), self.dim(), "right-hand side has wrong row count");
        let mut work = vec![0.0; self.dim()];
        for mut col in b.column_iter_mut() {
            self.solve_vec(col.as_mut_slice(), &mut work);
        }
    }
}

/// Minimum-degree ordering on the explicit elimination graph. Ties break
/// toward the lower index so the ordering is deterministic.
pub fn minimum_degree(a: &CscMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<HashSet<usize>> = (0..n)
        .map(|j| a.col(j).map(|(i, _)| i).filter(|&i| i != j).collect())
        .collect();
    // Make the pattern symmetric in case only one triangle was supplied.
    for j in 0..n {
        let nbrs: Vec<usize> = adj[j].iter().copied().collect();
        for i in nbrs {
            adj[i].insert(j);
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let mut nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        nbrs.sort_unstable();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (k, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[k + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_minor(n: usize, edges: &[(usize, usize, f64)], ground: usize) -> CscMatrix {
        let mut t = Vec::new();
        for &(i, j, b) in edges {
            t.extend([(i, i, b), (j, j, b), (i, j, -b), (j, i, -b)]);
        }
        CscMatrix::from_triplets(n, n, t).without(Some(ground), Some(ground))
    }

    #[test]
    fn ordering_is_a_permutation() {
        let edges: Vec<_> = (0..30).map(|i| (i, (i * 7 + 3) % 31, 1.0)).collect();
        let a = laplacian_minor(31, &edges, 0);
        let mut perm = minimum_degree(&a);
        perm.sort_unstable();
        assert_eq!(perm, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn star_center_is_eliminated_last() {
        // Eliminating the hub first would make everything else a clique.
        let edges: Vec<_> = (1..8).map(|i| (0, i, 1.0)).collect();
        let mut t = Vec::new();
        for &(i, j, b) in &edges {
            t.extend([(i, i, b), (j, j, b), (i, j, -b), (j, i, -b)]);
        }
        t.push((0, 0, 1.0));
        let a = CscMatrix::from_triplets(8, 8, t);
        let perm = minimum_degree(&a);
        // Once only one leaf remains the hub ties with it and wins on index.
        let hub = perm.iter().position(|&v| v == 0).unwrap();
        assert!(hub >= perm.len() - 2, "{perm:?}");
        assert_eq!(SparseLdl::factor(&a).unwrap().nnz_factor(), 7);
    }

    #[test]
    fn solves_grid_laplacian() {
        // 6x6 lattice, grounded at a corner.
        let side = 6;
        let mut edges = Vec::new();
        for r in 0..side {
            for c in 0..side {
                let v = r * side + c;
                if c + 1 < side {
                    edges.push((v, v + 1, 1.0 + (v % 3) as f64));
                }
                if r + 1 < side {
                    edges.push((v, v + side, 2.0 + (v % 5) as f64));
                }
            }
        }
        let a = laplacian_minor(side * side, &edges, 0);
        let ldl = SparseLdl::factor(&a).unwrap();
        assert_eq!(ldl.negative_pivots(), 0);
        let n = a.nrows();
        let b = DMatrix::from_fn(n, 3, |i, j| (i as f64 - 10.0) * (j as f64 + 1.0));
        let mut x = b.clone();
        ldl.solve_mut(&mut x);
        assert!((a.to_dense() * x - b).amax() < 1e-10);
    }

    #[test]
    fn indefinite_but_nonsingular() {
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 1.0, 1.0, 0.0, 1.0, 3.0]);
        let a = CscMatrix::from_dense(&d);
        let ldl = SparseLdl::factor(&a).unwrap();
        assert_eq!(ldl.negative_pivots(), 1);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let mut x = b.clone();
        ldl.solve_mut(&mut x);
        assert!((d * x - b).amax() < 1e-12);
    }

    #[test]
    fn singular_matrix_reports_zero_pivot() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SparseLdl::factor(&CscMatrix::from_dense(&d)).is_err());
    }
}
