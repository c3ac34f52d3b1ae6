//! Cycle-based sensitivities. Flows are written as the spanning-tree path
//! flow plus a combination of fundamental cycle flows, so the only linear
//! system has one unknown per independent cycle.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conventional::lodf_from_ptdf_prime;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{ExecutionMode, Factorization, SolveStats, SymmetricMatrix};
use crate::sensitivity::{SensitivityKind, SensitivityMatrix};
use crate::sparse::CscMatrix;
use crate::topology::{CycleBasis, SpanningTreePaths};

/// Tolerance on the diagonal of the QR triangle, relative to its largest entry.
const QR_RANK_TOLERANCE: f64 = 1e-12;

/// The cycle reactance matrix `M = C^t X_d C`, factored once, together with
/// `C^t X_d` in the storage of the execution mode.
#[derive(Debug, Clone)]
pub struct CycleOperator {
    mode: ExecutionMode,
    cycles: CycleMatrix,
    weighted: CycleMatrix,
    factor: Factorization,
    factor_time: std::time::Duration,
}

#[derive(Debug, Clone)]
enum CycleMatrix {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl CycleMatrix {
    fn mul_dense(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            CycleMatrix::Dense(a) => a * rhs,
            CycleMatrix::Sparse(a) => a.mul_dense(rhs),
        }
    }
}

impl CycleOperator {
    pub fn new(grid: &Grid, cycles: &CycleBasis, mode: ExecutionMode) -> Result<Self> {
        if cycles.n_lines() != grid.n_lines() {
            return Err(Error::DimensionMismatch(format!(
                "cycle basis has {} rows, grid has {} lines",
                cycles.n_lines(),
                grid.n_lines()
            )));
        }
        let reactances: Vec<f64> = grid.branches().iter().map(|b| b.reactance).collect();
        let start = Instant::now();
        let (c, weighted, m) = match mode {
            ExecutionMode::Dense => {
                let c = cycles.matrix().to_dense();
                let mut xf = c.transpose();
                for (mut col, &x) in xf.column_iter_mut().zip(&reactances) {
                    col *= x;
                }
                let m = &xf * &c;
                (
                    CycleMatrix::Dense(c),
                    CycleMatrix::Dense(xf),
                    SymmetricMatrix::Dense(m),
                )
            }
            ExecutionMode::Sparse => {
                let c = cycles.matrix().to_csc();
                let xf = c.transpose().scale_cols(&reactances);
                let m = xf.mul(&c);
                (
                    CycleMatrix::Sparse(c),
                    CycleMatrix::Sparse(xf),
                    SymmetricMatrix::Sparse(m),
                )
            }
        };
        let factor = Factorization::new(m)?;
        Ok(CycleOperator {
            mode,
            cycles: c,
            weighted,
            factor,
            factor_time: start.elapsed(),
        })
    }

    pub fn mode(&self) -> ExecutionMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// `C^t X_d A`.
    pub fn weigh(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.weighted.mul_dense(a)
    }

    /// `C A`.
    pub fn expand(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.cycles.mul_dense(a)
    }

    pub fn solve_mut(&self, rhs: &mut DMatrix<f64>) -> Result<()> {
        self.factor.solve_mut(rhs)
    }

    /// `A - C M^-1 C^t X_d A`: removes the cycle-violating part of line
    /// flows `A` so that every cycle's angle drop sums to zero.
    pub fn close_cycles(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut temp = self.weigh(a);
        self.solve_mut(&mut temp)?;
        Ok(a - self.expand(&temp))
    }

    /// Splits the flow of a transfer of `power` from the tree root to bus
    /// `sink` into the tree path flow and the cycle flows.
    pub fn decompose(
        &self,
        tree: &SpanningTreePaths,
        sink: usize,
        power: f64,
    ) -> Result<FlowDecomposition> {
        let paths = tree.paths();
        if sink >= paths.ncols() {
            return Err(Error::InvalidInput(format!(
                "bus index {sink} out of range"
            )));
        }
        let l = paths.nrows();
        let mut direct = DMatrix::zeros(l, 1);
        for &(line, sign) in paths.column(sink) {
            direct[(line, 0)] = power * f64::from(sign);
        }
        let mut strengths = self.weigh(&direct);
        self.solve_mut(&mut strengths)?;
        strengths.neg_mut();
        let total = &direct + self.expand(&strengths);
        Ok(FlowDecomposition {
            source: tree.slack(),
            sink,
            power,
            direct: direct.column(0).iter().copied().collect(),
            cycle_flows: strengths.column(0).iter().copied().collect(),
            total: total.column(0).iter().copied().collect(),
        })
    }
}

/// Line flows of one transfer, split into the spanning-tree part and the
/// cycle part: `total = direct + C * cycle_flows`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowDecomposition {
    pub source: usize,
    pub sink: usize,
    pub power: f64,
    pub direct: Vec<f64>,
    pub cycle_flows: Vec<f64>,
    pub total: Vec<f64>,
}

/// Cycle flows of a transfer of `power` from `source` to `sink`. The tree
/// must be rooted at `source`.
pub fn cycle_flows(
    grid: &Grid,
    cycles: &CycleBasis,
    tree: &SpanningTreePaths,
    source: usize,
    sink: usize,
    power: f64,
) -> Result<FlowDecomposition> {
    if tree.slack() != source {
        return Err(Error::InvalidInput(format!(
            "spanning tree is rooted at bus {}, not at the source {}",
            grid.bus_id(tree.slack()),
            grid.bus_id(source)
        )));
    }
    CycleOperator::new(grid, cycles, ExecutionMode::Dense)?.decompose(tree, sink, power)
}

/// PTDF for transfers from the tree root to every bus:
/// `T - C M^-1 C^t X_d T`.
pub fn ptdf_dual(
    grid: &Grid,
    cycles: &CycleBasis,
    tree: &SpanningTreePaths,
    mode: ExecutionMode,
) -> Result<SensitivityMatrix> {
    let start = Instant::now();
    let op = CycleOperator::new(grid, cycles, mode)?;
    let t = tree.paths().to_dense();
    let mut temp = op.weigh(&t);
    let solve = Instant::now();
    op.solve_mut(&mut temp)?;
    let solve_time = solve.elapsed();
    let values = t - op.expand(&temp);
    log::debug!("dual PTDF: {:?} total", start.elapsed());
    let stats = SolveStats {
        dimension: op.dim(),
        rhs_columns: grid.n_nodes(),
        elapsed: op.factor_time + solve_time,
    };
    Ok(SensitivityMatrix::new(
        SensitivityKind::Ptdf,
        values,
        Some(tree.slack()),
        stats,
    ))
}

/// PTDF' = `1 - C M^-1 C^t X_d`.
pub fn ptdf_prime_dual(
    grid: &Grid,
    cycles: &CycleBasis,
    mode: ExecutionMode,
) -> Result<SensitivityMatrix> {
    let op = CycleOperator::new(grid, cycles, mode)?;
    let l = grid.n_lines();
    let mut temp = match &op.weighted {
        CycleMatrix::Dense(a) => a.clone(),
        CycleMatrix::Sparse(a) => a.to_dense(),
    };
    let solve = Instant::now();
    op.solve_mut(&mut temp)?;
    let solve_time = solve.elapsed();
    let values = DMatrix::identity(l, l) - op.expand(&temp);
    let stats = SolveStats {
        dimension: op.dim(),
        rhs_columns: l,
        elapsed: op.factor_time + solve_time,
    };
    Ok(SensitivityMatrix::new(
        SensitivityKind::PtdfPrime,
        values,
        None,
        stats,
    ))
}

/// PTDF' from an orthonormal basis of the scaled cycle space:
/// `1 - sqrt(B_d) Q Q^t sqrt(X_d)` where `Q` spans `sqrt(X_d) C`.
/// No linear system is solved. Needs positive reactances.
pub fn ptdf_prime_qr(grid: &Grid, cycles: &CycleBasis) -> Result<SensitivityMatrix> {
    if let Some(b) = grid.branches().iter().find(|b| b.reactance <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "the QR route needs positive reactances; line {}-{} has x = {}",
            grid.bus_id(b.tail),
            grid.bus_id(b.head),
            b.reactance
        )));
    }
    let l = grid.n_lines();
    let m = cycles.n_cycles();
    let start = Instant::now();
    let sqrt_x: Vec<f64> = grid.branches().iter().map(|b| b.reactance.sqrt()).collect();
    let sqrt_b: Vec<f64> = grid
        .branches()
        .iter()
        .map(|b| b.susceptance.sqrt())
        .collect();
    let mut values = DMatrix::identity(l, l);
    if m > 0 {
        let mut scaled = cycles.matrix().to_dense();
        for (mut row, &s) in scaled.row_iter_mut().zip(&sqrt_x) {
            row *= s;
        }
        let qr = scaled.qr();
        let r = qr.r();
        let largest = r.diagonal().amax();
        if r.diagonal()
            .iter()
            .any(|d| d.abs() <= QR_RANK_TOLERANCE * largest)
        {
            return Err(Error::Numerical("cycle matrix is rank deficient".into()));
        }
        let q = qr.q();
        let mut qt = q.transpose();
        for (mut col, &s) in qt.column_iter_mut().zip(&sqrt_x) {
            col *= s;
        }
        let mut projector = q * qt;
        for (mut row, &s) in projector.row_iter_mut().zip(&sqrt_b) {
            row *= s;
        }
        values -= projector;
    }
    let stats = SolveStats {
        dimension: m,
        rhs_columns: 0,
        elapsed: start.elapsed(),
    };
    Ok(SensitivityMatrix::new(
        SensitivityKind::PtdfPrime,
        values,
        None,
        stats,
    ))
}

/// PTDF from PTDF' by summing along tree paths: `PTDF = PTDF' T`.
pub fn ptdf_from_prime(
    prime: &SensitivityMatrix,
    tree: &SpanningTreePaths,
) -> Result<SensitivityMatrix> {
    if prime.kind != SensitivityKind::PtdfPrime {
        return Err(Error::InvalidInput("expected a PTDF' matrix".into()));
    }
    let values = tree
        .paths()
        .to_csc()
        .transpose()
        .mul_dense(&prime.values.transpose())
        .transpose();
    Ok(SensitivityMatrix::new(
        SensitivityKind::Ptdf,
        values,
        Some(tree.slack()),
        prime.stats,
    ))
}

pub fn lodf_dual(
    grid: &Grid,
    cycles: &CycleBasis,
    bridges: &[bool],
    mode: ExecutionMode,
) -> Result<SensitivityMatrix> {
    lodf_from_ptdf_prime(&ptdf_prime_dual(grid, cycles, mode)?, bridges)
}
