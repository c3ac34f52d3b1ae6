//! Wall-clock comparison of the node-based and the cycle-based PTDF, and a
//! power-law fit of the speedup against the cycles-per-bus ratio.

use std::io::{Read, Write};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::conventional::{assemble_operators, ptdf_conventional};
use crate::dual::ptdf_dual;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::ExecutionMode;
use crate::sensitivity::SensitivityMatrix;
use crate::topology::{build_cycle_basis, build_incidence, build_spanning_tree};

/// Runs shorter than this many timer ticks are batched.
const MIN_TICKS_PER_RUN: u32 = 10;
/// Largest entrywise disagreement tolerated after a benchmark.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-8;

/// One row of benchmark output. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub grid: String,
    pub nodes: usize,
    pub lines: usize,
    pub cycles: usize,
    pub cycles_per_node: f64,
    pub mode: ExecutionMode,
    pub repetitions: usize,
    /// Executions timed together per run.
    pub batch: usize,
    pub conventional_dimension: usize,
    pub dual_dimension: usize,
    pub conventional_total_mean: f64,
    pub conventional_total_sd: f64,
    pub conventional_total_median_of_means: f64,
    pub conventional_solve_mean: f64,
    pub dual_total_mean: f64,
    pub dual_total_sd: f64,
    pub dual_total_median_of_means: f64,
    pub dual_solve_mean: f64,
    /// Conventional over dual mean total time.
    pub speedup: f64,
    pub max_abs_diff: f64,
}

/// The full conventional pipeline: incidence, operators, reduced solve.
pub fn conventional_pipeline(grid: &Grid, mode: ExecutionMode) -> Result<SensitivityMatrix> {
    let incidence = build_incidence(grid);
    let ops = assemble_operators(grid, &incidence, mode);
    ptdf_conventional(&ops, grid.slack())
}

/// The full cycle pipeline: spanning tree, cycle basis, cycle solve.
pub fn dual_pipeline(grid: &Grid, mode: ExecutionMode) -> Result<SensitivityMatrix> {
    let tree = build_spanning_tree(grid);
    let cycles = build_cycle_basis(grid, &tree);
    ptdf_dual(grid, &cycles, &tree, mode)
}

struct Samples {
    total: Vec<f64>,
    solve: Vec<f64>,
    last: SensitivityMatrix,
}

fn measure(
    repetitions: usize,
    batch: usize,
    run: &dyn Fn() -> Result<SensitivityMatrix>,
) -> Result<Samples> {
    let mut total = Vec::with_capacity(repetitions);
    let mut solve = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions {
        let mut solve_time = Duration::ZERO;
        let start = Instant::now();
        for _ in 0..batch {
            let result = run()?;
            solve_time += result.stats.elapsed;
            last = Some(result);
        }
        total.push(start.elapsed().as_secs_f64() / batch as f64);
        solve.push(solve_time.as_secs_f64() / batch as f64);
    }
    Ok(Samples {
        total,
        solve,
        last: last.expect("at least one repetition"),
    })
}

/// Smallest nonzero step of the monotonic clock seen in a short probe.
fn timer_tick() -> Duration {
    let mut best = Duration::from_millis(1);
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

fn batch_size(single: Duration, tick: Duration) -> usize {
    let floor = tick * MIN_TICKS_PER_RUN;
    if single >= floor {
        1
    } else {
        let per = single.as_nanos().max(1);
        floor.as_nanos().div_ceil(per) as usize
    }
}

/// Times both pipelines `repetitions` times each after one untimed warm-up
/// run, then checks that they agree.
pub fn run_bench(grid: &Grid, mode: ExecutionMode, repetitions: usize) -> Result<BenchReport> {
    if repetitions < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 repetitions, got {repetitions}"
        )));
    }
    let tick = timer_tick();
    let conventional = || conventional_pipeline(grid, mode);
    let dual = || dual_pipeline(grid, mode);

    let warm = Instant::now();
    conventional()?;
    let conventional_batch = batch_size(warm.elapsed(), tick);
    let warm = Instant::now();
    dual()?;
    let dual_batch = batch_size(warm.elapsed(), tick);
    let batch = conventional_batch.max(dual_batch);

    let conv = measure(repetitions, batch, &conventional)?;
    let cyc = measure(repetitions, batch, &dual)?;
    let max_abs_diff = conv.last.max_abs_diff(&cyc.last)?;
    if max_abs_diff.is_nan() || max_abs_diff > EQUIVALENCE_TOLERANCE {
        return Err(Error::Numerical(format!(
            "{}: conventional and dual PTDF differ by {max_abs_diff:e}",
            grid.name()
        )));
    }

    let (conv_mean, conv_sd) = mean_sd(&conv.total);
    let (dual_mean, dual_sd) = mean_sd(&cyc.total);
    Ok(BenchReport {
        grid: grid.name().to_string(),
        nodes: grid.n_nodes(),
        lines: grid.n_lines(),
        cycles: grid.n_cycles(),
        cycles_per_node: grid.cycles_per_node(),
        mode,
        repetitions,
        batch,
        conventional_dimension: conv.last.stats.dimension,
        dual_dimension: cyc.last.stats.dimension,
        conventional_total_mean: conv_mean,
        conventional_total_sd: conv_sd,
        conventional_total_median_of_means: median_of_means(&conv.total),
        conventional_solve_mean: mean_sd(&conv.solve).0,
        dual_total_mean: dual_mean,
        dual_total_sd: dual_sd,
        dual_total_median_of_means: median_of_means(&cyc.total),
        dual_solve_mean: mean_sd(&cyc.solve).0,
        speedup: conv_mean / dual_mean,
        max_abs_diff,
    })
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Median of the means of three consecutive, nearly equal groups.
pub fn median_of_means(xs: &[f64]) -> f64 {
    let groups = xs.len().min(3);
    let mut means: Vec<f64> = (0..groups)
        .map(|g| {
            let lo = g * xs.len() / groups;
            let hi = (g + 1) * xs.len() / groups;
            mean_sd(&xs[lo..hi]).0
        })
        .collect();
    means.sort_by(f64::total_cmp);
    means[means.len() / 2]
}

/// `speedup ~ coefficient * ratio^(-decay)`, fitted by least squares in
/// log-log space. A positive decay means sparser grids gain more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub coefficient: f64,
    pub decay: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn predict(&self, ratio: f64) -> f64 {
        self.coefficient * ratio.powf(-self.decay)
    }
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::DegenerateFit(format!("point {p:?} is not positive")));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi < 10.0 * lo {
        return Err(Error::DegenerateFit(format!(
            "ratios span [{lo}, {hi}], less than a decade"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(PowerLawFit {
        coefficient: intercept.exp(),
        decay: -slope,
        r_squared,
        points: points.len(),
    })
}

pub fn fit_speedup_curve(reports: &[BenchReport]) -> Result<PowerLawFit> {
    let points: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| (r.cycles_per_node, r.speedup))
        .collect();
    fit_power_law(&points)
}

pub fn write_reports_csv<W: Write>(reports: &[BenchReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<BenchReport>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
