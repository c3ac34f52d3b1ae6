use std::path::PathBuf;

use cycleflow::io::load_case;
use cycleflow::oracle::oracle_ptdf;
use cycleflow::topology::{cycle_space_equal, find_bridges};
use cycleflow::{
    build_cycle_basis, build_incidence, build_spanning_tree, cycle_flows, Branch, CycleBasis, Grid,
    GridOptions, SignedMatrix,
};
use nalgebra::DMatrix;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn load(name: &str) -> Grid {
    load_case(fixture(name), GridOptions::default()).unwrap()
}

const REFERENCE_INCIDENCE: [[i32; 6]; 5] = [
    [1, 1, 1, 0, 0, 0],
    [-1, 0, 0, 1, 0, 0],
    [0, 0, 0, -1, 1, 0],
    [0, -1, 0, 0, -1, -1],
    [0, 0, -1, 0, 0, 1],
];

/// The two cycles in reference form, one row per cycle.
const REFERENCE_CYCLES: [[i8; 6]; 2] = [[0, 1, -1, 0, 0, -1], [1, -1, 0, 1, 1, 0]];

fn reference_basis(grid: &Grid) -> cycleflow::Result<CycleBasis> {
    let cols: Vec<Vec<i8>> = REFERENCE_CYCLES.iter().map(|c| c.to_vec()).collect();
    let m = SignedMatrix::from_dense_columns(6, &cols)?;
    CycleBasis::from_matrix(&build_incidence(grid), m)
}

#[test]
fn case5_loads_from_both_formats() {
    let m = load("case5.m");
    let j = load("case5.json");
    assert_eq!(m.n_nodes(), 5);
    assert_eq!(m.n_lines(), 6);
    assert_eq!(m.n_cycles(), 2);
    assert_eq!(m.bus_id(m.slack()), 4);
    assert_eq!(m.branches(), j.branches());
    assert_eq!(m.bus_ids(), j.bus_ids());
}

#[test]
fn incidence_matches_the_reference_matrix() {
    let expected = DMatrix::from_fn(5, 6, |i, j| REFERENCE_INCIDENCE[i][j]);
    let reversed = build_incidence(&load("five_bus_reversed_line6.json")).to_dense_i32();
    assert_eq!(reversed, expected);

    // The MATPOWER file runs line 6 from bus 4 to bus 5.
    let mut file = build_incidence(&load("case5.m")).to_dense_i32();
    file.column_mut(5).neg_mut();
    assert_eq!(file, expected);
}

#[test]
fn reference_cycles_span_the_cycle_space() {
    let g = load("five_bus_reversed_line6.json");
    let reference = reference_basis(&g).unwrap();
    let ours = build_cycle_basis(&g, &build_spanning_tree(&g));
    assert!(cycle_space_equal(&reference, &ours).unwrap());
    // In the file's orientation the reference matrix is not a cycle basis.
    assert!(reference_basis(&load("case5.m")).is_err());
}

#[test]
fn adding_cycles_cancels_the_shared_line() {
    let g = load("five_bus_reversed_line6.json");
    let c = reference_basis(&g).unwrap().matrix().to_dense_i32();
    let sum: Vec<i32> = (0..6).map(|l| c[(l, 0)] + c[(l, 1)]).collect();
    assert_eq!(sum, vec![1, 0, -1, 1, 1, -1]);
}

#[test]
fn decomposition_reproduces_physical_flows() {
    let g = load("five_bus_reversed_line6.json");
    let cycles = reference_basis(&g).unwrap();
    let tree = build_spanning_tree(&g);
    let (s, r) = (g.require_bus(4).unwrap(), g.require_bus(1).unwrap());
    let d = cycle_flows(&g, &cycles, &tree, s, r, 1.0).unwrap();
    // The tree path from bus 4 to bus 1 is line 2 against its orientation.
    let mut direct = vec![0.0; 6];
    direct[1] = -1.0;
    assert_eq!(d.direct, direct);
    let p = oracle_ptdf(&g).unwrap();
    for l in 0..6 {
        assert!((d.total[l] - p[(l, r)]).abs() < 1e-10);
    }
}

#[test]
fn reference_cycle_flows_follow_from_reading_x_as_susceptance() {
    // The reference strengths come out when the reactance column is used as
    // line susceptance; with b = 1/x they differ (see acceptance output).
    let g = load("five_bus_reversed_line6.json");
    let swapped: Vec<Branch> = g
        .branches()
        .iter()
        .map(|b| Branch::new(b.index, b.tail, b.head, 1.0 / b.reactance))
        .collect();
    let g = Grid::from_branches("x-as-b", &g.bus_ids(), swapped, g.slack()).unwrap();
    let cycles = reference_basis(&g).unwrap();
    let tree = build_spanning_tree(&g);
    let d = cycle_flows(&g, &cycles, &tree, 3, 0, 1.0).unwrap();
    assert!(
        (d.cycle_flows[0] - 0.126).abs() < 5e-4,
        "{:?}",
        d.cycle_flows
    );
    assert!(
        (d.cycle_flows[1] + 0.148).abs() < 5e-4,
        "{:?}",
        d.cycle_flows
    );
}

#[test]
fn five_bus_has_no_bridges() {
    assert!(find_bridges(&load("case5.m")).iter().all(|&b| !b));
}

#[test]
fn case14_counts() {
    let g = load("case14.m");
    assert_eq!((g.n_nodes(), g.n_lines(), g.n_cycles()), (14, 20, 7));
}

#[test]
fn case300_counts_and_reactance_policy() {
    let err = load_case(fixture("case300.m"), GridOptions::default()).unwrap_err();
    assert!(err.to_string().contains("reactance"), "{err}");
    let g = load_case(
        fixture("case300.m"),
        GridOptions {
            allow_negative_reactance: true,
        },
    )
    .unwrap();
    assert_eq!(g.n_nodes(), 300);
    assert_eq!(g.n_cycles(), 110);
    assert_eq!(format!("{:.2}", g.cycles_per_node()), "0.37");
    assert_eq!(g.bus_id(g.slack()), 7049);
}
