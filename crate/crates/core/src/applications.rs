//! Closing a tie switch in a radial grid, and splitting a scheduled transfer
//! into its scheduled and unscheduled (loop) flows.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conventional::{assemble_operators, ptdf_conventional};
use crate::dual::CycleOperator;
use crate::error::{Error, Result};
use crate::grid::{Branch, Grid};
use crate::linalg::ExecutionMode;
use crate::topology::{build_incidence, build_spanning_tree, CycleBasis};

/// Agreement required between the closed form and a full recomputation.
pub const TIE_SWITCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct TieSwitchDelta {
    /// The grid with the new line appended as the last line.
    pub closed: Grid,
    /// The single cycle the new line closes, over the lines of `closed`.
    pub cycle: Vec<i8>,
    /// PTDF change from the one-cycle formula, lines of `closed` by buses.
    pub delta: DMatrix<f64>,
    /// PTDF of `closed` minus the radial PTDF padded with a zero row.
    pub recomputed: DMatrix<f64>,
    pub max_deviation: f64,
}

/// PTDF change when a line of reactance `reactance` is added between buses
/// `from` and `to` (indices) of a radial grid.
pub fn tie_switch_delta(
    grid: &Grid,
    from: usize,
    to: usize,
    reactance: f64,
) -> Result<TieSwitchDelta> {
    let n = grid.n_nodes();
    if from >= n || to >= n {
        return Err(Error::InvalidInput("bus index out of range".into()));
    }
    if from == to {
        return Err(Error::InvalidInput(
            "a line needs two distinct buses".into(),
        ));
    }
    if !grid.is_tree() {
        return Err(Error::InvalidInput(format!(
            "tie-switch analysis needs a radial grid; this one has {} independent cycles",
            grid.n_cycles()
        )));
    }
    if grid
        .branches()
        .iter()
        .any(|b| (b.tail == from && b.head == to) || (b.tail == to && b.head == from))
    {
        return Err(Error::InvalidInput(format!(
            "buses {} and {} are already connected",
            grid.bus_id(from),
            grid.bus_id(to)
        )));
    }
    if !(reactance.is_finite() && reactance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "reactance must be positive, got {reactance}"
        )));
    }

    let l = grid.n_lines();
    let tree = build_spanning_tree(grid);
    let paths = tree.paths().to_dense();

    // Closing the switch adds the chord itself plus the tree path back from
    // its head to its tail.
    let mut cycle = vec![0i8; l + 1];
    cycle[l] = 1;
    for line in 0..l {
        cycle[line] = (paths[(line, from)] - paths[(line, to)]) as i8;
    }
    let mut reactances: Vec<f64> = grid.branches().iter().map(|b| b.reactance).collect();
    reactances.push(reactance);

    let loop_reactance: f64 = cycle
        .iter()
        .zip(&reactances)
        .map(|(&c, &x)| f64::from(c * c) * x)
        .sum();
    let mut delta = DMatrix::zeros(l + 1, n);
    for r in 0..n {
        let drive: f64 = (0..l)
            .map(|line| f64::from(cycle[line]) * reactances[line] * paths[(line, r)])
            .sum();
        let strength = -drive / loop_reactance;
        for line in 0..=l {
            delta[(line, r)] = f64::from(cycle[line]) * strength;
        }
    }

    let mut branches = grid.branches().to_vec();
    branches.push(Branch::new(l, from, to, reactance));
    let closed = Grid::from_branches(
        format!("{}+tie", grid.name()),
        &grid.bus_ids(),
        branches,
        grid.slack(),
    )?;
    let before = ptdf_conventional(
        &assemble_operators(grid, &build_incidence(grid), ExecutionMode::Dense),
        grid.slack(),
    )?;
    let after = ptdf_conventional(
        &assemble_operators(&closed, &build_incidence(&closed), ExecutionMode::Dense),
        closed.slack(),
    )?;
    let mut recomputed = after.values;
    for line in 0..l {
        for r in 0..n {
            recomputed[(line, r)] -= before.values[(line, r)];
        }
    }
    let max_deviation = (&delta - &recomputed).amax();
    if max_deviation.is_nan() || max_deviation > TIE_SWITCH_TOLERANCE {
        return Err(Error::Numerical(format!(
            "closed form and recomputation differ by {max_deviation:e}"
        )));
    }
    Ok(TieSwitchDelta {
        closed,
        cycle,
        delta,
        recomputed,
        max_deviation,
    })
}

/// A scheduled transfer split into the flows along the contract path and
/// the loop flows the network adds to honour the cycle constraints.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSplit {
    pub source: usize,
    pub sink: usize,
    pub power: f64,
    pub scheduled: Vec<f64>,
    pub unscheduled: Vec<f64>,
    pub total: Vec<f64>,
}

/// `schedule` is a unit line-flow pattern that moves one unit from some bus
/// to another; the physical flows of `power` units are `power * schedule`
/// plus the unscheduled part `-power C M^-1 C^t X_d schedule`.
pub fn unscheduled_flows(
    grid: &Grid,
    cycles: &CycleBasis,
    schedule: &[f64],
    power: f64,
    mode: ExecutionMode,
) -> Result<FlowSplit> {
    let l = grid.n_lines();
    if schedule.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "schedule has {} entries, grid has {l} lines",
            schedule.len()
        )));
    }
    let (source, sink) = transfer_endpoints(grid, schedule)?;
    let op = CycleOperator::new(grid, cycles, mode)?;
    let scheduled = DMatrix::from_fn(l, 1, |line, _| power * schedule[line]);
    let total = op.close_cycles(&scheduled)?;
    let unscheduled = &total - &scheduled;
    Ok(FlowSplit {
        source,
        sink,
        power,
        scheduled: scheduled.iter().copied().collect(),
        unscheduled: unscheduled.iter().copied().collect(),
        total: total.iter().copied().collect(),
    })
}

/// Finds `(s, r)` with `I * schedule = e_s - e_r`.
fn transfer_endpoints(grid: &Grid, schedule: &[f64]) -> Result<(usize, usize)> {
    const TOL: f64 = 1e-9;
    let mut net = vec![0.0; grid.n_nodes()];
    for (b, &f) in grid.branches().iter().zip(schedule) {
        if !f.is_finite() {
            return Err(Error::InvalidInput(
                "schedule has a non-finite entry".into(),
            ));
        }
        net[b.tail] += f;
        net[b.head] -= f;
    }
    let mut source = None;
    let mut sink = None;
    for (k, &v) in net.iter().enumerate() {
        if (v - 1.0).abs() <= TOL && source.is_none() {
            source = Some(k);
        } else if (v + 1.0).abs() <= TOL && sink.is_none() {
            sink = Some(k);
        } else if v.abs() > TOL {
            return Err(Error::InvalidInput(format!(
                "schedule is not a unit transfer: bus {} has net outflow {v}",
                grid.bus_id(k)
            )));
        }
    }
    match (source, sink) {
        (Some(s), Some(r)) => Ok((s, r)),
        _ => Err(Error::InvalidInput(
            "schedule does not move a unit between two buses".into(),
        )),
    }
}

/// Unit schedule along a bus path given by bus indices.
pub fn schedule_from_path(grid: &Grid, path: &[usize]) -> Result<Vec<f64>> {
    if path.len() < 2 {
        return Err(Error::InvalidInput(
            "a path needs at least two buses".into(),
        ));
    }
    let mut schedule = vec![0.0; grid.n_lines()];
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let line = grid
            .branches()
            .iter()
            .find(|l| (l.tail == a && l.head == b) || (l.tail == b && l.head == a))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "no line between buses {} and {}",
                    grid.bus_id(a),
                    grid.bus_id(b)
                ))
            })?;
        schedule[line.index] += if line.tail == a { 1.0 } else { -1.0 };
    }
    Ok(schedule)
}
