//! Native JSON grid format:
//!
//! ```json
//! { "name": "case5", "slack": 4, "buses": [1, 2, 3, 4, 5],
//!   "branches": [{"from": 1, "to": 2, "x": 0.0281}] }
//! ```
//!
//! `slack` and branch endpoints are external bus ids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridOptions, RawBranch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeGrid {
    pub name: String,
    pub slack: i64,
    pub buses: Vec<i64>,
    pub branches: Vec<NativeBranch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeBranch {
    pub from: i64,
    pub to: i64,
    pub x: f64,
}

impl From<&Grid> for NativeGrid {
    fn from(grid: &Grid) -> Self {
        NativeGrid {
            name: grid.name().to_string(),
            slack: grid.bus_id(grid.slack()),
            buses: grid.bus_ids(),
            branches: grid
                .branches()
                .iter()
                .map(|b| NativeBranch {
                    from: grid.bus_id(b.tail),
                    to: grid.bus_id(b.head),
                    x: b.reactance,
                })
                .collect(),
        }
    }
}

impl NativeGrid {
    pub fn into_grid(self, options: GridOptions) -> Result<Grid> {
        let raw: Vec<RawBranch> = self
            .branches
            .iter()
            .map(|b| RawBranch {
                from: b.from,
                to: b.to,
                reactance: b.x,
            })
            .collect();
        Grid::from_raw(self.name, &self.buses, &raw, self.slack, options)
    }
}

pub fn load_native(text: &str) -> Result<Grid> {
    load_native_with(text, GridOptions::default())
}

pub fn load_native_with(text: &str, options: GridOptions) -> Result<Grid> {
    let native: NativeGrid =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    native.into_grid(options)
}

pub fn save_native(grid: &Grid) -> String {
    serde_json::to_string_pretty(&NativeGrid::from(grid)).expect("grid serializes to JSON")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_violations_are_descriptive() {
        let err = load_native(r#"{"name": "g", "slack": 1, "buses": [1, 2]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Schema(_)));
        assert!(msg.contains("branches"), "{msg}");

        let err = load_native(
            r#"{"name": "g", "slack": 1, "buses": [1, 2], "branches": [{"from": 1, "to": 2}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("`x`"), "{err}");
    }

    #[test]
    fn empty_branch_list_is_disconnected() {
        let err = load_native(r#"{"name": "g", "slack": 1, "buses": [1, 2], "branches": []}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }));
    }

    #[test]
    fn save_then_load_is_identity() {
        let text = r#"{"name": "tri", "slack": 2, "buses": [1, 2, 3],
            "branches": [{"from": 1, "to": 2, "x": 0.1}, {"from": 2, "to": 3, "x": 0.3},
                         {"from": 3, "to": 1, "x": 0.7}, {"from": 2, "to": 1, "x": 0.3}]}"#;
        let g = load_native(text).unwrap();
        assert_eq!(g.n_lines(), 3);
        let again = load_native(&save_native(&g)).unwrap();
        assert_eq!(g, again);
        assert_eq!(save_native(&again), save_native(&g));
    }
}
