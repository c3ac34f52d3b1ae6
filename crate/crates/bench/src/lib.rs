//! Grid sets shared by the criterion benchmarks.

use cycleflow::{generate, Grid, SynthSpec};

/// Synthetic grids of `nodes` buses, one per chord count, all from `seed`.
pub fn sweep(nodes: usize, chords: &[usize], seed: u64) -> Vec<Grid> {
    chords
        .iter()
        .map(|&k| generate(&SynthSpec::new(nodes, k, seed)).expect("valid synthetic spec"))
        .collect()
}

/// Short label used as the criterion parameter: `n<nodes>-k<cycles>`.
pub fn label(grid: &Grid) -> String {
    format!(
        "n{}-k{}",
        grid.n_nodes(),
        grid.n_lines() + 1 - grid.n_nodes()
    )
}
