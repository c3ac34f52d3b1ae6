//! Blocked dense Cholesky factorization. The trailing updates go through
//! `gemm`, which keeps large multi-right-hand-side solves close to matrix
//! multiplication speed.

use nalgebra::{DMatrix, LU};

const BLOCK: usize = 64;

#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DMatrix<f64>,
    lt: DMatrix<f64>,
}

impl DenseCholesky {
    /// Factors a symmetric positive definite matrix. Returns `None` if a
    /// pivot is not positive.
    pub fn factor(mut a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let mut k = 0;
        while k < n {
            let kb = BLOCK.min(n - k);
            let l11 = a.view((k, k), (kb, kb)).clone_owned().cholesky()?.unpack();
            a.view_mut((k, k), (kb, kb)).copy_from(&l11);
            let rest = n - k - kb;
            if rest > 0 {
                // L21 = A21 L11^-T, computed as the transpose of L11^-1 A21^t.
                let mut l21t = a.view((k + kb, k), (rest, kb)).transpose();
                if !l11.solve_lower_triangular_mut(&mut l21t) {
                    return None;
                }
                let l21 = l21t.transpose();
                a.view_mut((k + kb, k), (rest, kb)).copy_from(&l21);
                a.view_mut((k + kb, k + kb), (rest, rest))
                    .gemm(-1.0, &l21, &l21t, 1.0);
            }
            k += kb;
        }
        a.fill_upper_triangle(0.0, 1);
        let lt = a.transpose();
        Some(DenseCholesky { l: a, lt })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor_l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Overwrites `b` with `A^-1 b`.
    pub fn solve_mut(&self, b: &mut DMatrix<f64>) {
        let n = self.dim();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let blocks: Vec<(usize, usize)> = (0..n)
            .step_by(BLOCK)
            .map(|k| (k, BLOCK.min(n - k)))
            .collect();

        for &(k, kb) in &blocks {
            let mut yk = b.rows(k, kb).clone_owned();
            self.l
                .view((k, k), (kb, kb))
                .solve_lower_triangular_mut(&mut yk);
            b.rows_mut(k, kb).copy_from(&yk);
            let rest = n - k - kb;
            if rest > 0 {
                let l21 = self.l.view((k + kb, k), (rest, kb));
                b.rows_mut(k + kb, rest).gemm(-1.0, &l21, &yk, 1.0);
            }
        }

        for &(k, kb) in blocks.iter().rev() {
            let rest = n - k - kb;
            let mut xk = b.rows(k, kb).clone_owned();
            if rest > 0 {
                let l21t = self.lt.view((k, k + kb), (kb, rest));
                xk.gemm(-1.0, &l21t, &b.rows(k + kb, rest), 1.0);
            }
            self.l
                .view((k, k), (kb, kb))
                .tr_solve_lower_triangular_mut(&mut xk);
            b.rows_mut(k, kb).copy_from(&xk);
        }
    }

    /// Ratio of the smallest to the largest pivot `l_ii^2`.
    pub fn pivot_ratio(&self) -> f64 {
        let d = self.l.diagonal().map(|v| v * v);
        d.min() / d.max()
    }
}

/// Partially pivoted LU, used when a symmetric matrix is indefinite.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl DenseLu {
    pub fn factor(a: DMatrix<f64>) -> Self {
        let dim = a.nrows();
        DenseLu { lu: a.lu(), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_mut(&self, b: &mut DMatrix<f64>) -> bool {
        self.lu.solve_mut(b)
    }

    pub fn pivot_ratio(&self) -> f64 {
        let u = self.lu.u();
        let d = u.diagonal().map(f64::abs);
        if d.is_empty() {
            1.0
        } else {
            d.min() / d.max()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        // Diagonally dominant with a deterministic pseudo-random pattern.
        let mut a = DMatrix::from_fn(n, n, |i, j| {
            let h = (i * 31 + j * 17 + i * j) % 23;
            if h < 4 {
                -(h as f64 + 1.0) / 10.0
            } else {
                0.0
            }
        });
        a = &a + a.transpose();
        for i in 0..n {
            let off: f64 = a.row(i).iter().map(|v| v.abs()).sum();
            a[(i, i)] = off + 1.0 + i as f64 * 0.01;
        }
        a
    }

    #[test]
    fn matches_unblocked_factor() {
        for n in [1, 5, 64, 65, 150] {
            let a = spd(n);
            let ours = DenseCholesky::factor(a.clone()).unwrap();
            let reference = a.clone().cholesky().unwrap().unpack();
            assert!((ours.factor_l() - reference).amax() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn blocked_solve_has_small_residual() {
        let n = 200;
        let a = spd(n);
        let b = DMatrix::from_fn(n, 7, |i, j| ((i + 3 * j) % 11) as f64 - 5.0);
        let chol = DenseCholesky::factor(a.clone()).unwrap();
        let mut x = b.clone();
        chol.solve_mut(&mut x);
        assert!((&a * &x - &b).amax() < 1e-10);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(DenseCholesky::factor(a.clone()).is_none());
        let lu = DenseLu::factor(a.clone());
        let mut b = DMatrix::from_row_slice(2, 1, &[3.0, 3.0]);
        assert!(lu.solve_mut(&mut b));
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }
}
