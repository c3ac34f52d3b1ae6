//! Symmetric linear solves with many right-hand sides, behind one interface
//! for the dense and the sparse execution paths.

mod dense;
mod ldl;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use dense::{DenseCholesky, DenseLu};
pub use ldl::{minimum_degree, SparseLdl};

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

/// Smallest acceptable ratio between the extreme pivots of a factorization.
const PIVOT_RATIO_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    #[default]
    Dense,
    Sparse,
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutionMode::Dense => "dense",
            ExecutionMode::Sparse => "sparse",
        })
    }
}

impl FromStr for ExecutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(ExecutionMode::Dense),
            "sparse" => Ok(ExecutionMode::Sparse),
            _ => Err(Error::InvalidInput(format!("unknown mode '{s}'"))),
        }
    }
}

/// Instrumentation for one factor-and-solve step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Order of the factored matrix.
    pub dimension: usize,
    pub rhs_columns: usize,
    /// Wall time of factorization plus all solves.
    #[serde(with = "seconds")]
    pub elapsed: Duration,
}

mod seconds {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

/// A symmetric matrix in the storage that matches an execution mode.
#[derive(Debug, Clone)]
pub enum SymmetricMatrix {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl SymmetricMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SymmetricMatrix::Dense(a) => a.nrows(),
            SymmetricMatrix::Sparse(a) => a.nrows(),
        }
    }
}

/// An immutable factorization. It is `Send + Sync`, so one factorization may
/// serve solves from several threads.
#[derive(Debug, Clone)]
pub enum Factorization {
    Cholesky(DenseCholesky),
    Lu(DenseLu),
    Ldl(SparseLdl),
}

impl Factorization {
    pub fn new(a: SymmetricMatrix) -> Result<Self> {
        match a {
            SymmetricMatrix::Dense(a) => Self::dense(a),
            SymmetricMatrix::Sparse(a) => Self::sparse(&a),
        }
    }

    /// Dense Cholesky, falling back to pivoted LU for indefinite matrices.
    pub fn dense(a: DMatrix<f64>) -> Result<Self> {
        let dimension = a.nrows();
        if dimension == 0 {
            return Ok(Factorization::Lu(DenseLu::factor(a)));
        }
        let f = match DenseCholesky::factor(a.clone()) {
            Some(c) => Factorization::Cholesky(c),
            None => {
                log::debug!("matrix of order {dimension} is not positive definite; using LU");
                Factorization::Lu(DenseLu::factor(a))
            }
        };
        f.check_pivots()?;
        Ok(f)
    }

    pub fn sparse(a: &CscMatrix) -> Result<Self> {
        let dimension = a.nrows();
        let ldl = SparseLdl::factor(a).map_err(|z| Error::IllConditioned {
            dimension,
            reason: format!("zero pivot in column {}", z.column),
        })?;
        if ldl.negative_pivots() > 0 {
            log::debug!(
                "matrix of order {dimension} is indefinite ({} negative pivots)",
                ldl.negative_pivots()
            );
        }
        let f = Factorization::Ldl(ldl);
        f.check_pivots()?;
        Ok(f)
    }

    fn check_pivots(&self) -> Result<()> {
        if self.dim() == 0 {
            return Ok(());
        }
        let ratio = match self {
            Factorization::Cholesky(c) => c.pivot_ratio(),
            Factorization::Lu(l) => l.pivot_ratio(),
            Factorization::Ldl(l) => l.pivot_ratio(),
        };
        if ratio.is_nan() || ratio <= PIVOT_RATIO_FLOOR {
            return Err(Error::IllConditioned {
                dimension: self.dim(),
                reason: format!("pivot ratio {ratio:e}"),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Factorization::Cholesky(c) => c.dim(),
            Factorization::Lu(l) => l.dim(),
            Factorization::Ldl(l) => l.dim(),
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        match self {
            Factorization::Cholesky(_) => true,
            Factorization::Lu(_) => false,
            Factorization::Ldl(l) => l.negative_pivots() == 0,
        }
    }

    pub fn solve_mut(&self, b: &mut DMatrix<f64>) -> Result<()> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, system has order {}",
                b.nrows(),
                self.dim()
            )));
        }
        if self.dim() == 0 {
            return Ok(());
        }
        match self {
            Factorization::Cholesky(c) => c.solve_mut(b),
            Factorization::Ldl(l) => l.solve_mut(b),
            Factorization::Lu(l) => {
                if !l.solve_mut(b) {
                    return Err(Error::IllConditioned {
                        dimension: self.dim(),
                        reason: "singular LU factor".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, mut b: DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.solve_mut(&mut b)?;
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn factorization_is_shareable() {
        assert_send_sync::<Factorization>();
    }

    #[test]
    fn concurrent_solves_share_one_factorization() {
        let n = 40;
        let a = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 4.0,
            1 => -1.0,
            _ => 0.0,
        });
        for f in [
            Factorization::dense(a.clone()).unwrap(),
            Factorization::sparse(&CscMatrix::from_dense(&a)).unwrap(),
        ] {
            let results: Vec<DMatrix<f64>> = std::thread::scope(|s| {
                let handles: Vec<_> = (0..4)
                    .map(|t| {
                        let f = &f;
                        s.spawn(move || {
                            let b = DMatrix::from_fn(n, 2, |i, j| (i + j + t) as f64);
                            f.solve(b).unwrap()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            for (t, x) in results.iter().enumerate() {
                let b = DMatrix::from_fn(n, 2, |i, j| (i + j + t) as f64);
                assert!((&a * x - b).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_dense_matrix_is_ill_conditioned() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let err = Factorization::dense(a).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn mode_round_trips_through_strings() {
        for m in [ExecutionMode::Dense, ExecutionMode::Sparse] {
            assert_eq!(m.to_string().parse::<ExecutionMode>().unwrap(), m);
        }
    }
}
