//! DC power-flow sensitivities (PTDF, PTDF', LODF) computed two ways: the
//! node-based route through the reduced nodal susceptance matrix, and the
//! cycle-based route through a fundamental cycle basis.

pub mod applications;
pub mod bench;
pub mod conventional;
pub mod dual;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod sensitivity;
pub mod sparse;
pub mod synth;
pub mod topology;

pub use applications::{
    schedule_from_path, tie_switch_delta, unscheduled_flows, FlowSplit, TieSwitchDelta,
};
pub use bench::{fit_speedup_curve, run_bench, BenchReport, PowerLawFit};
pub use conventional::{
    assemble_operators, lodf_from_ptdf_prime, ptdf_conventional, ptdf_prime_conventional,
    SusceptanceOperators,
};
pub use dual::{
    cycle_flows, lodf_dual, ptdf_dual, ptdf_from_prime, ptdf_prime_dual, ptdf_prime_qr,
    CycleOperator, FlowDecomposition,
};
pub use error::{Error, Result};
pub use grid::{Branch, Bus, Grid, GridOptions, RawBranch};
pub use linalg::{ExecutionMode, SolveStats};
pub use sensitivity::{SensitivityKind, SensitivityMatrix};
pub use synth::{generate, SynthSpec};
pub use topology::{
    build_cycle_basis, build_incidence, build_spanning_tree, CycleBasis, IncidenceMatrix,
    SignedMatrix, SpanningTreePaths, Topology,
};
