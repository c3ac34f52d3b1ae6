#![allow(dead_code)]

use std::path::PathBuf;

use cycleflow::io::load_case;
use cycleflow::topology::find_bridges;
use cycleflow::{
    assemble_operators, build_cycle_basis, build_incidence, build_spanning_tree, lodf_dual,
    lodf_from_ptdf_prime, ptdf_conventional, ptdf_dual, ptdf_prime_conventional, ptdf_prime_dual,
    CycleBasis, ExecutionMode, Grid, GridOptions, SensitivityMatrix, SignedMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load(name: &str) -> Grid {
    let options = GridOptions {
        allow_negative_reactance: name == "case300.m",
    };
    load_case(fixture(name), options).unwrap()
}

pub const FIXTURES: [&str; 4] = [
    "case5.m",
    "five_bus_reversed_line6.json",
    "case14.m",
    "case300.m",
];

pub fn fixtures() -> Vec<Grid> {
    FIXTURES.iter().map(|f| load(f)).collect()
}

/// The reference two-cycle basis of the five-bus example, valid in the
/// orientation of `five_bus_reversed_line6.json`.
pub fn reference_basis(grid: &Grid) -> cycleflow::Result<CycleBasis> {
    let cols = vec![vec![0, 1, -1, 0, 0, -1], vec![1, -1, 0, 1, 1, 0]];
    CycleBasis::from_matrix(
        &build_incidence(grid),
        SignedMatrix::from_dense_columns(6, &cols)?,
    )
}

/// Random synthetic grids with N drawn from `nodes` and between 0 and N chords.
pub fn random_grids(count: usize, nodes: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(nodes.clone());
            let max = n * (n - 1) / 2 - (n - 1);
            let chords = rng.random_range(0..=n.min(max));
            cycleflow::generate(&cycleflow::SynthSpec::new(n, chords, rng.random())).unwrap()
        })
        .collect()
}

pub struct Sensitivities {
    pub ptdf: SensitivityMatrix,
    pub prime: SensitivityMatrix,
    pub lodf: SensitivityMatrix,
}

pub fn conventional(grid: &Grid, mode: ExecutionMode) -> Sensitivities {
    let ops = assemble_operators(grid, &build_incidence(grid), mode);
    let ptdf = ptdf_conventional(&ops, grid.slack()).unwrap();
    let prime = ptdf_prime_conventional(&ops).unwrap();
    let lodf = lodf_from_ptdf_prime(&prime, &find_bridges(grid)).unwrap();
    Sensitivities { ptdf, prime, lodf }
}

pub fn dual(grid: &Grid, mode: ExecutionMode) -> Sensitivities {
    let tree = build_spanning_tree(grid);
    let cycles = build_cycle_basis(grid, &tree);
    let ptdf = ptdf_dual(grid, &cycles, &tree, mode).unwrap();
    let prime = ptdf_prime_dual(grid, &cycles, mode).unwrap();
    let lodf = lodf_dual(grid, &cycles, &find_bridges(grid), mode).unwrap();
    Sensitivities { ptdf, prime, lodf }
}

/// Largest deviation over columns defined in both; infinite if the
/// undefined flags disagree.
pub fn defined_diff(a: &SensitivityMatrix, b: &nalgebra::DMatrix<f64>, undefined: &[bool]) -> f64 {
    if a.undefined_columns != undefined || a.values.shape() != b.shape() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for j in 0..b.ncols() {
        if undefined[j] {
            continue;
        }
        for i in 0..b.nrows() {
            let d = (a.values[(i, j)] - b[(i, j)]).abs();
            worst = if d.is_nan() {
                f64::INFINITY
            } else {
                worst.max(d)
            };
        }
    }
    worst
}
