//! Node-based sensitivities through the reduced nodal susceptance matrix.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{ExecutionMode, Factorization, SolveStats, SymmetricMatrix};
use crate::sensitivity::{SensitivityKind, SensitivityMatrix};
use crate::sparse::CscMatrix;
use crate::topology::IncidenceMatrix;

/// Below this distance from one, a PTDF' diagonal entry marks a line whose
/// outage would island the grid.
pub const BRIDGE_DIAGONAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub enum OperatorMatrix {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl OperatorMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            OperatorMatrix::Dense(a) => a.clone(),
            OperatorMatrix::Sparse(a) => a.to_dense(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            OperatorMatrix::Dense(a) => a.shape(),
            OperatorMatrix::Sparse(a) => (a.nrows(), a.ncols()),
        }
    }
}

/// Line susceptances and reactances, the incidence matrix `I`, the flow
/// operator `B_f = B_d I^t` and the nodal matrix `B = I B_f`, stored as the
/// execution mode prescribes.
#[derive(Debug, Clone)]
pub struct SusceptanceOperators {
    pub mode: ExecutionMode,
    pub slack: usize,
    pub susceptances: Vec<f64>,
    pub reactances: Vec<f64>,
    pub incidence: OperatorMatrix,
    pub flow: OperatorMatrix,
    pub nodal: OperatorMatrix,
}

pub fn assemble_operators(
    grid: &Grid,
    incidence: &IncidenceMatrix,
    mode: ExecutionMode,
) -> SusceptanceOperators {
    let susceptances: Vec<f64> = grid.branches().iter().map(|b| b.susceptance).collect();
    let reactances: Vec<f64> = grid.branches().iter().map(|b| b.reactance).collect();
    let (incidence, flow, nodal) = match mode {
        ExecutionMode::Dense => {
            let i = incidence.to_dense();
            let mut bf = i.transpose();
            for (mut row, &b) in bf.row_iter_mut().zip(&susceptances) {
                row *= b;
            }
            let b = &i * &bf;
            (
                OperatorMatrix::Dense(i),
                OperatorMatrix::Dense(bf),
                OperatorMatrix::Dense(b),
            )
        }
        ExecutionMode::Sparse => {
            let i = incidence.to_csc();
            let bf = i.transpose().scale_rows(&susceptances);
            let b = i.mul(&bf);
            (
                OperatorMatrix::Sparse(i),
                OperatorMatrix::Sparse(bf),
                OperatorMatrix::Sparse(b),
            )
        }
    };
    SusceptanceOperators {
        mode,
        slack: grid.slack(),
        susceptances,
        reactances,
        incidence,
        flow,
        nodal,
    }
}

impl SusceptanceOperators {
    pub fn n_nodes(&self) -> usize {
        self.nodal.shape().0
    }

    pub fn n_lines(&self) -> usize {
        self.susceptances.len()
    }

    /// Factorization of `B` with the slack row and column removed.
    pub fn factor_reduced(&self, slack: usize) -> Result<Factorization> {
        let n = self.n_nodes();
        if slack >= n {
            return Err(Error::InvalidInput(format!(
                "slack index {slack} out of range for {n} buses"
            )));
        }
        let reduced = match &self.nodal {
            OperatorMatrix::Dense(b) => {
                SymmetricMatrix::Dense(b.clone().remove_row(slack).remove_column(slack))
            }
            OperatorMatrix::Sparse(b) => {
                SymmetricMatrix::Sparse(b.without(Some(slack), Some(slack)))
            }
        };
        Factorization::new(reduced)
    }
}

/// PTDF for a unit transfer from `slack` to each bus. The slack column is zero.
pub fn ptdf_conventional(ops: &SusceptanceOperators, slack: usize) -> Result<SensitivityMatrix> {
    let (n, l) = (ops.n_nodes(), ops.n_lines());
    let start = Instant::now();
    let factor = ops.factor_reduced(slack)?;
    // B_red * Theta = B_f,red^t; the flows for a withdrawal at r are -Theta^t e_r.
    let mut theta = match &ops.flow {
        OperatorMatrix::Dense(bf) => bf.clone().remove_column(slack).transpose(),
        OperatorMatrix::Sparse(bf) => bf.without(None, Some(slack)).transpose().to_dense(),
    };
    factor.solve_mut(&mut theta)?;
    let elapsed = start.elapsed();

    let mut values = DMatrix::zeros(l, n);
    for (k, r) in (0..n).filter(|&r| r != slack).enumerate() {
        for line in 0..l {
            values[(line, r)] = -theta[(k, line)];
        }
    }
    let stats = SolveStats {
        dimension: n - 1,
        rhs_columns: l,
        elapsed,
    };
    Ok(SensitivityMatrix::new(
        SensitivityKind::Ptdf,
        values,
        Some(slack),
        stats,
    ))
}

/// PTDF' = `B_f B^+ I`, solved on the slack-reduced system.
pub fn ptdf_prime_conventional(ops: &SusceptanceOperators) -> Result<SensitivityMatrix> {
    let (n, l) = (ops.n_nodes(), ops.n_lines());
    let slack = ops.slack;
    let start = Instant::now();
    let factor = ops.factor_reduced(slack)?;
    let mut theta = match &ops.incidence {
        OperatorMatrix::Dense(i) => i.clone().remove_row(slack),
        OperatorMatrix::Sparse(i) => i.without(Some(slack), None).to_dense(),
    };
    factor.solve_mut(&mut theta)?;
    let elapsed = start.elapsed();
    let values = match &ops.flow {
        OperatorMatrix::Dense(bf) => bf.clone().remove_column(slack) * theta,
        OperatorMatrix::Sparse(bf) => bf.without(None, Some(slack)).mul_dense(&theta),
    };
    let stats = SolveStats {
        dimension: n - 1,
        rhs_columns: l,
        elapsed,
    };
    Ok(SensitivityMatrix::new(
        SensitivityKind::PtdfPrime,
        values,
        None,
        stats,
    ))
}

/// LODF from PTDF': column `l` is `PTDF'_{.,l} / (1 - PTDF'_{l,l})` with the
/// diagonal set to -1. Bridge columns are NaN and flagged as undefined.
pub fn lodf_from_ptdf_prime(
    prime: &SensitivityMatrix,
    bridges: &[bool],
) -> Result<SensitivityMatrix> {
    let l = prime.ncols();
    if prime.kind != SensitivityKind::PtdfPrime || prime.nrows() != l {
        return Err(Error::InvalidInput(
            "LODF needs a square PTDF' matrix".into(),
        ));
    }
    if bridges.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "{} bridge flags for {l} lines",
            bridges.len()
        )));
    }
    let mut values = DMatrix::from_element(l, l, f64::NAN);
    let mut undefined = vec![false; l];
    for out in 0..l {
        let denom = 1.0 - prime.values[(out, out)];
        let near_bridge = denom.abs() < BRIDGE_DIAGONAL_TOLERANCE;
        if near_bridge != bridges[out] {
            log::warn!(
                "line {out}: graph says bridge={}, but 1 - PTDF'_ll = {denom:e}",
                bridges[out]
            );
        }
        if bridges[out] {
            undefined[out] = true;
            continue;
        }
        for k in 0..l {
            values[(k, out)] = if k == out {
                -1.0
            } else {
                prime.values[(k, out)] / denom
            };
        }
    }
    let mut lodf = SensitivityMatrix::new(SensitivityKind::Lodf, values, None, prime.stats);
    lodf.undefined_columns = undefined;
    Ok(lodf)
}
