use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::SolveStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityKind {
    /// Lines by buses; column `r` is the flow response to a unit transfer
    /// from the slack to bus `r`.
    Ptdf,
    /// Lines by lines; column `l` is the flow response to a unit transfer
    /// from the tail to the head of line `l`.
    PtdfPrime,
    /// Lines by lines; column `l` is the flow change per unit of
    /// pre-outage flow when line `l` trips.
    Lodf,
}

impl fmt::Display for SensitivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensitivityKind::Ptdf => "ptdf",
            SensitivityKind::PtdfPrime => "ptdf_prime",
            SensitivityKind::Lodf => "lodf",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    pub kind: SensitivityKind,
    pub values: DMatrix<f64>,
    /// Set for PTDF only.
    pub slack: Option<usize>,
    /// Columns with no defined value (LODF of bridge lines). Their entries
    /// are NaN.
    pub undefined_columns: Vec<bool>,
    pub stats: SolveStats,
}

impl SensitivityMatrix {
    pub fn new(
        kind: SensitivityKind,
        values: DMatrix<f64>,
        slack: Option<usize>,
        stats: SolveStats,
    ) -> Self {
        let undefined_columns = vec![false; values.ncols()];
        SensitivityMatrix {
            kind,
            values,
            slack,
            undefined_columns,
            stats,
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Largest absolute entrywise difference over the columns defined in
    /// both. Infinite when the undefined columns disagree.
    pub fn max_abs_diff(&self, other: &SensitivityMatrix) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.values.shape(),
                other.values.shape()
            )));
        }
        if self.undefined_columns != other.undefined_columns {
            return Ok(f64::INFINITY);
        }
        Ok(max_abs_diff_defined(
            &self.values,
            &other.values,
            &self.undefined_columns,
        ))
    }

    /// Writes `line,<column labels>` followed by one row per line. Undefined
    /// entries are left empty.
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["line".to_string()];
        header.extend(self.column_labels(grid));
        w.write_record(&header)?;
        for l in 0..self.nrows() {
            let mut row = vec![line_label(grid, l)];
            for j in 0..self.ncols() {
                let v = self.values[(l, j)];
                row.push(if v.is_nan() {
                    String::new()
                } else {
                    v.to_string()
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self, grid: &Grid) -> serde_json::Value {
        let rows: Vec<Vec<Option<f64>>> = (0..self.nrows())
            .map(|l| {
                (0..self.ncols())
                    .map(|j| Some(self.values[(l, j)]).filter(|v| !v.is_nan()))
                    .collect()
            })
            .collect();
        serde_json::json!({
            "kind": self.kind,
            "slack": self.slack.map(|s| grid.bus_id(s)),
            "rows": (0..self.nrows()).map(|l| line_label(grid, l)).collect::<Vec<_>>(),
            "columns": self.column_labels(grid),
            "undefined_columns": self.undefined_columns,
            "values": rows,
            "stats": self.stats,
        })
    }

    fn column_labels(&self, grid: &Grid) -> Vec<String> {
        match self.kind {
            SensitivityKind::Ptdf => grid.bus_ids().iter().map(|id| id.to_string()).collect(),
            _ => (0..self.ncols()).map(|l| line_label(grid, l)).collect(),
        }
    }
}

pub(crate) fn max_abs_diff_defined(a: &DMatrix<f64>, b: &DMatrix<f64>, undefined: &[bool]) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        if undefined.get(j).copied().unwrap_or(false) {
            continue;
        }
        for i in 0..a.nrows() {
            let d = (a[(i, j)] - b[(i, j)]).abs();
            if d.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(d);
        }
    }
    worst
}

fn line_label(grid: &Grid, l: usize) -> String {
    let b = grid.branch(l);
    format!("{}-{}", grid.bus_id(b.tail), grid.bus_id(b.head))
}
