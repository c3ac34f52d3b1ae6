//! Brute-force reference values for small grids.
//!
//! Nothing here goes through the production paths: the nodal matrix is
//! assembled entry by entry from the branch list, the pseudo-inverse comes
//! from a symmetric eigendecomposition, and outages are handled by rebuilding
//! the network without the line.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{Branch, Grid};

pub const ORACLE_PTDF_MAX_NODES: usize = 500;
pub const ORACLE_LODF_MAX_NODES: usize = 300;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub ptdf: DMatrix<f64>,
    pub lodf: DMatrix<f64>,
    /// LODF columns of lines whose outage islands the grid.
    pub undefined: Vec<bool>,
}

pub fn oracle(grid: &Grid) -> Result<OracleResult> {
    let ptdf = oracle_ptdf(grid)?;
    let (lodf, undefined) = oracle_lodf(grid)?;
    Ok(OracleResult {
        ptdf,
        lodf,
        undefined,
    })
}

/// PTDF for the grid's slack, `b_ij (X_is - X_ir - X_js + X_jr)` with `X`
/// the Moore-Penrose pseudo-inverse of the nodal susceptance matrix.
pub fn oracle_ptdf(grid: &Grid) -> Result<DMatrix<f64>> {
    let n = grid.n_nodes();
    if n > ORACLE_PTDF_MAX_NODES {
        return Err(Error::InvalidInput(format!(
            "oracle PTDF is limited to {ORACLE_PTDF_MAX_NODES} buses, grid has {n}"
        )));
    }
    let x = pseudo_inverse(&nodal_matrix(n, grid.branches()));
    let s = grid.slack();
    Ok(DMatrix::from_fn(grid.n_lines(), n, |l, r| {
        let br = grid.branch(l);
        let (i, j) = (br.tail, br.head);
        br.susceptance * (x[(i, s)] - x[(i, r)] - x[(j, s)] + x[(j, r)])
    }))
}

/// LODF by explicit outage: remove each line, re-solve a base case and
/// divide each flow change by the pre-outage flow of the removed line.
/// The diagonal is -1; bridge columns are NaN and flagged.
pub fn oracle_lodf(grid: &Grid) -> Result<(DMatrix<f64>, Vec<bool>)> {
    let n = grid.n_nodes();
    if n > ORACLE_LODF_MAX_NODES {
        return Err(Error::InvalidInput(format!(
            "oracle LODF is limited to {ORACLE_LODF_MAX_NODES} buses, grid has {n}"
        )));
    }
    let lines = grid.branches();
    let count = lines.len();
    let x0 = pseudo_inverse(&nodal_matrix(n, lines));

    // A fixed balanced injection with distinct entries.
    let mut base = DVector::from_fn(n, |k, _| ((k + 1) as f64).sin());
    let mean = base.mean();
    base.add_scalar_mut(-mean);

    let mut lodf = DMatrix::from_element(count, count, f64::NAN);
    let mut undefined = vec![false; count];
    for out in 0..count {
        let remaining: Vec<Branch> = lines.iter().filter(|b| b.index != out).copied().collect();
        if !connected(n, &remaining) {
            undefined[out] = true;
            continue;
        }
        let mut injection = base.clone();
        let mut f0 = flows(lines, &(&x0 * &injection));
        if f0[out].abs() < 1e-9 {
            let b = &lines[out];
            injection.fill(0.0);
            injection[b.tail] = 1.0;
            injection[b.head] = -1.0;
            f0 = flows(lines, &(&x0 * &injection));
        }
        let x1 = pseudo_inverse(&nodal_matrix(n, &remaining));
        let f1 = flows(lines, &(&x1 * &injection));
        for k in 0..count {
            lodf[(k, out)] = if k == out {
                -1.0
            } else {
                (f1[k] - f0[k]) / f0[out]
            };
        }
    }
    Ok((lodf, undefined))
}

/// `B_nk = -sum b` over lines joining n and k, `B_nn = sum b` over lines at n.
fn nodal_matrix(n: usize, lines: &[Branch]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |row, col| {
        lines
            .iter()
            .map(|b| {
                let touches_row = b.tail == row || b.head == row;
                if row == col {
                    if touches_row {
                        b.susceptance
                    } else {
                        0.0
                    }
                } else if touches_row && (b.tail == col || b.head == col) {
                    -b.susceptance
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// Pseudo-inverse of a connected-graph Laplacian: invert every eigenvalue
/// except the one closest to zero.
fn pseudo_inverse(b: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(b.clone());
    let null = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .expect("non-empty matrix");
    let inverted = eig
        .eigenvalues
        .map_with_location(|k, _, lambda| if k == null { 0.0 } else { 1.0 / lambda });
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, w) in scaled.column_iter_mut().zip(inverted.iter()) {
        col *= *w;
    }
    scaled * eig.eigenvectors.transpose()
}

/// Flows for all listed lines given angles; lines not in the network still
/// get a value but callers ignore it.
fn flows(lines: &[Branch], theta: &DVector<f64>) -> Vec<f64> {
    lines
        .iter()
        .map(|b| b.susceptance * (theta[b.tail] - theta[b.head]))
        .collect()
}

fn connected(n: usize, lines: &[Branch]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for b in lines {
            let v = if b.tail == u {
                b.head
            } else if b.head == u {
                b.tail
            } else {
                continue;
            };
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
