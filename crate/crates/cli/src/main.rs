use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cycleflow::bench::{read_reports_csv, write_reports_csv};
use cycleflow::io::{load_case, save_native};
use cycleflow::oracle::oracle;
use cycleflow::topology::{build_spanning_tree_with, find_bridges, TreeStrategy};
use cycleflow::{
    assemble_operators, build_cycle_basis, build_incidence, fit_speedup_curve, generate,
    lodf_from_ptdf_prime, ptdf_conventional, ptdf_dual, ptdf_from_prime, ptdf_prime_conventional,
    ptdf_prime_dual, ptdf_prime_qr, run_bench, schedule_from_path, tie_switch_delta,
    unscheduled_flows, CycleOperator, Error, ExecutionMode, Grid, GridOptions, SensitivityMatrix,
    SynthSpec,
};
use serde::Deserialize;

#[derive(Parser)]
#[command(
    name = "cycleflow",
    version,
    about = "DC power-flow sensitivities by nodes or by cycles"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Matrix storage and solver family.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Dense)]
    mode: Mode,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for generated grids.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Accept lines with negative reactance (series capacitors).
    #[arg(long, global = true)]
    allow_negative_reactance: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dense,
    Sparse,
}

impl From<Mode> for ExecutionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Dense => ExecutionMode::Dense,
            Mode::Sparse => ExecutionMode::Sparse,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Conventional,
    Dual,
    Qr,
}

#[derive(Subcommand)]
enum Command {
    /// Bus, line and cycle counts.
    Info {
        #[arg(long)]
        case: PathBuf,
    },
    /// Power transfer distribution factors.
    Ptdf {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Dual)]
        method: Method,
        /// Transfers across each line instead of from the slack.
        #[arg(long)]
        prime: bool,
        /// Slack bus id; defaults to the case's reference bus.
        #[arg(long)]
        slack: Option<i64>,
    },
    /// Line outage distribution factors.
    Lodf {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Dual)]
        method: Method,
    },
    /// Split one transfer into tree-path flow and cycle flows.
    Decompose {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        from: i64,
        #[arg(long)]
        to: i64,
        #[arg(long, default_value_t = 1.0)]
        power: f64,
    },
    /// Compare conventional, cycle and reference results.
    Verify {
        #[arg(long)]
        case: PathBuf,
    },
    /// PTDF change from closing a new line in a radial grid.
    TieSwitch {
        #[arg(long)]
        case: PathBuf,
        /// New line as FROM:TO:X.
        #[arg(long)]
        add: String,
    },
    /// Scheduled and unscheduled flows of a contract path.
    Unscheduled {
        #[arg(long)]
        case: PathBuf,
        /// JSON file with {"path": [bus ids]} or {"flows": [{"from", "to", "flow"}]}.
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        power: f64,
    },
    /// Generate a random grid in the native JSON format.
    Synth {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        chords: usize,
        #[arg(long, default_value_t = 0.01)]
        x_min: f64,
        #[arg(long, default_value_t = 0.1)]
        x_max: f64,
    },
    /// Time both methods on each grid.
    Bench {
        #[arg(long)]
        case: Vec<PathBuf>,
        /// Synthetic grid as NODES:CHORDS; repeatable.
        #[arg(long)]
        synth: Vec<String>,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
    },
    /// Power-law fit of speedup against cycles per bus from a bench CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(default)]
    path: Option<Vec<i64>>,
    #[serde(default)]
    flows: Option<Vec<ScheduledFlow>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduledFlow {
    from: i64,
    to: i64,
    flow: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_numerical));
            ExitCode::from(if numerical { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let mode = ExecutionMode::from(g.mode);
    match &cli.command {
        Command::Info { case } => {
            let grid = load(g, case)?;
            let info = serde_json::json!({
                "name": grid.name(),
                "nodes": grid.n_nodes(),
                "lines": grid.n_lines(),
                "cycles": grid.n_cycles(),
                "cycles_per_node": grid.cycles_per_node(),
                "slack": grid.bus_id(grid.slack()),
            });
            emit(g, |w| match g.format {
                Format::Json => write_json(w, &info),
                Format::Csv => {
                    writeln!(w, "name,nodes,lines,cycles,cycles_per_node,slack")?;
                    writeln!(
                        w,
                        "{},{},{},{},{:.4},{}",
                        grid.name(),
                        grid.n_nodes(),
                        grid.n_lines(),
                        grid.n_cycles(),
                        grid.cycles_per_node(),
                        grid.bus_id(grid.slack())
                    )?;
                    Ok(())
                }
            })
        }
        Command::Ptdf {
            case,
            method,
            prime,
            slack,
        } => {
            let mut grid = load(g, case)?;
            if let Some(id) = slack {
                grid = grid.with_slack(grid.require_bus(*id)?)?;
            }
            let m = if *prime {
                ptdf_prime(&grid, *method, mode)?
            } else {
                ptdf(&grid, *method, mode)?
            };
            emit_matrix(g, &grid, &m)
        }
        Command::Lodf { case, method } => {
            let grid = load(g, case)?;
            let prime = ptdf_prime(&grid, *method, mode)?;
            let lodf = lodf_from_ptdf_prime(&prime, &find_bridges(&grid))?;
            emit_matrix(g, &grid, &lodf)
        }
        Command::Decompose {
            case,
            from,
            to,
            power,
        } => {
            let grid = load(g, case)?;
            let (s, r) = (grid.require_bus(*from)?, grid.require_bus(*to)?);
            let tree = build_spanning_tree_with(&grid, s, TreeStrategy::BreadthFirst);
            let cycles = build_cycle_basis(&grid, &tree);
            let d = CycleOperator::new(&grid, &cycles, mode)?.decompose(&tree, r, *power)?;
            let chords: Vec<String> = cycles
                .chords()
                .unwrap_or_default()
                .iter()
                .map(|&c| line_label(&grid, c))
                .collect();
            emit(g, |w| match g.format {
                Format::Json => write_json(
                    w,
                    &serde_json::json!({
                        "from": from,
                        "to": to,
                        "power": power,
                        "lines": (0..grid.n_lines()).map(|l| line_label(&grid, l)).collect::<Vec<_>>(),
                        "direct": d.direct,
                        "total": d.total,
                        "cycle_chords": chords,
                        "cycle_flows": d.cycle_flows,
                    }),
                ),
                Format::Csv => {
                    writeln!(w, "line,direct,loop,total")?;
                    for l in 0..grid.n_lines() {
                        let (direct, total) = (d.direct[l], d.total[l]);
                        writeln!(
                            w,
                            "{},{direct},{},{total}",
                            line_label(&grid, l),
                            total - direct
                        )?;
                    }
                    Ok(())
                }
            })
        }
        Command::Verify { case } => verify(g, case, mode),
        Command::TieSwitch { case, add } => {
            let grid = load(g, case)?;
            let (from, to, x) = parse_new_line(add)?;
            let t = tie_switch_delta(&grid, grid.require_bus(from)?, grid.require_bus(to)?, x)?;
            let m = SensitivityMatrix::new(
                cycleflow::SensitivityKind::Ptdf,
                t.delta.clone(),
                Some(t.closed.slack()),
                Default::default(),
            );
            log::info!(
                "closed form agrees with recomputation to {:e}",
                t.max_deviation
            );
            emit_matrix(g, &t.closed, &m)
        }
        Command::Unscheduled {
            case,
            schedule,
            power,
        } => {
            let grid = load(g, case)?;
            let text = std::fs::read_to_string(schedule)
                .with_context(|| format!("reading {}", schedule.display()))?;
            let spec: ScheduleFile =
                serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
            let pattern = schedule_pattern(&grid, spec)?;
            let tree = build_spanning_tree_with(&grid, grid.slack(), TreeStrategy::BreadthFirst);
            let cycles = build_cycle_basis(&grid, &tree);
            let split = unscheduled_flows(&grid, &cycles, &pattern, *power, mode)?;
            emit(g, |w| match g.format {
                Format::Json => write_json(
                    w,
                    &serde_json::json!({
                        "source": grid.bus_id(split.source),
                        "sink": grid.bus_id(split.sink),
                        "power": split.power,
                        "lines": (0..grid.n_lines()).map(|l| line_label(&grid, l)).collect::<Vec<_>>(),
                        "scheduled": split.scheduled,
                        "unscheduled": split.unscheduled,
                        "total": split.total,
                    }),
                ),
                Format::Csv => {
                    writeln!(w, "line,scheduled,unscheduled,total")?;
                    for l in 0..grid.n_lines() {
                        writeln!(
                            w,
                            "{},{},{},{}",
                            line_label(&grid, l),
                            split.scheduled[l],
                            split.unscheduled[l],
                            split.total[l]
                        )?;
                    }
                    Ok(())
                }
            })
        }
        Command::Synth {
            nodes,
            chords,
            x_min,
            x_max,
        } => {
            let spec = SynthSpec {
                nodes: *nodes,
                chords: *chords,
                reactance_min: *x_min,
                reactance_max: *x_max,
                seed: g.seed,
            };
            let grid = generate(&spec)?;
            emit(g, |w| {
                writeln!(w, "{}", save_native(&grid))?;
                Ok(())
            })
        }
        Command::Bench {
            case,
            synth,
            repetitions,
        } => {
            let mut grids = Vec::new();
            for c in case {
                grids.push(load(g, c)?);
            }
            for s in synth {
                let (n, k) = s
                    .split_once(':')
                    .and_then(|(n, k)| Some((n.parse().ok()?, k.parse().ok()?)))
                    .ok_or_else(|| {
                        anyhow!(Error::InvalidInput(format!(
                            "expected NODES:CHORDS, got '{s}'"
                        )))
                    })?;
                grids.push(generate(&SynthSpec::new(n, k, g.seed))?);
            }
            if grids.is_empty() {
                bail!(Error::InvalidInput(
                    "nothing to benchmark; pass --case or --synth".into()
                ));
            }
            let mut reports = Vec::new();
            for grid in &grids {
                log::info!("benchmarking {}", grid.name());
                reports.push(run_bench(grid, mode, *repetitions)?);
            }
            emit(g, |w| match g.format {
                Format::Json => write_json(w, &reports),
                Format::Csv => Ok(write_reports_csv(&reports, w)?),
            })
        }
        Command::Fit { input } => {
            let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
            let reports = read_reports_csv(file)?;
            let fit = fit_speedup_curve(&reports)?;
            emit(g, |w| match g.format {
                Format::Json => write_json(w, &fit),
                Format::Csv => {
                    writeln!(w, "coefficient,decay,r_squared,points")?;
                    writeln!(
                        w,
                        "{},{},{},{}",
                        fit.coefficient, fit.decay, fit.r_squared, fit.points
                    )?;
                    Ok(())
                }
            })
        }
    }
}

fn load(g: &Global, path: &Path) -> anyhow::Result<Grid> {
    let options = GridOptions {
        allow_negative_reactance: g.allow_negative_reactance,
    };
    load_case(path, options).with_context(|| format!("loading {}", path.display()))
}

fn ptdf(grid: &Grid, method: Method, mode: ExecutionMode) -> anyhow::Result<SensitivityMatrix> {
    Ok(match method {
        Method::Conventional => {
            let ops = assemble_operators(grid, &build_incidence(grid), mode);
            ptdf_conventional(&ops, grid.slack())?
        }
        Method::Dual => {
            let tree = build_spanning_tree_with(grid, grid.slack(), TreeStrategy::BreadthFirst);
            ptdf_dual(grid, &build_cycle_basis(grid, &tree), &tree, mode)?
        }
        Method::Qr => {
            let tree = build_spanning_tree_with(grid, grid.slack(), TreeStrategy::BreadthFirst);
            ptdf_from_prime(
                &ptdf_prime_qr(grid, &build_cycle_basis(grid, &tree))?,
                &tree,
            )?
        }
    })
}

fn ptdf_prime(
    grid: &Grid,
    method: Method,
    mode: ExecutionMode,
) -> anyhow::Result<SensitivityMatrix> {
    let tree = build_spanning_tree_with(grid, grid.slack(), TreeStrategy::BreadthFirst);
    Ok(match method {
        Method::Conventional => {
            ptdf_prime_conventional(&assemble_operators(grid, &build_incidence(grid), mode))?
        }
        Method::Dual => ptdf_prime_dual(grid, &build_cycle_basis(grid, &tree), mode)?,
        Method::Qr => ptdf_prime_qr(grid, &build_cycle_basis(grid, &tree))?,
    })
}

fn verify(g: &Global, case: &Path, mode: ExecutionMode) -> anyhow::Result<()> {
    let grid = load(g, case)?;
    let bridges = find_bridges(&grid);
    let conv = ptdf(&grid, Method::Conventional, mode)?;
    let dual = ptdf(&grid, Method::Dual, mode)?;
    let conv_prime = ptdf_prime(&grid, Method::Conventional, mode)?;
    let dual_prime = ptdf_prime(&grid, Method::Dual, mode)?;
    let conv_lodf = lodf_from_ptdf_prime(&conv_prime, &bridges)?;
    let dual_lodf = lodf_from_ptdf_prime(&dual_prime, &bridges)?;

    let mut rows: Vec<(&str, &str, f64, f64)> = vec![
        ("ptdf", "conventional-dual", conv.max_abs_diff(&dual)?, 1e-8),
        (
            "ptdf_prime",
            "conventional-dual",
            conv_prime.max_abs_diff(&dual_prime)?,
            1e-8,
        ),
        (
            "lodf",
            "conventional-dual",
            conv_lodf.max_abs_diff(&dual_lodf)?,
            1e-6,
        ),
    ];
    match ptdf_prime(&grid, Method::Qr, mode) {
        Ok(qr) => rows.push(("ptdf_prime", "qr-dual", qr.max_abs_diff(&dual_prime)?, 1e-8)),
        Err(e) => log::warn!("skipping the QR route: {e:#}"),
    }
    match oracle(&grid) {
        Ok(truth) => {
            let mut reference = SensitivityMatrix::new(
                cycleflow::SensitivityKind::Lodf,
                truth.lodf,
                None,
                Default::default(),
            );
            reference.undefined_columns = truth.undefined;
            rows.push((
                "ptdf",
                "oracle-conventional",
                (&truth.ptdf - &conv.values).amax(),
                1e-8,
            ));
            rows.push((
                "ptdf",
                "oracle-dual",
                (&truth.ptdf - &dual.values).amax(),
                1e-8,
            ));
            rows.push((
                "lodf",
                "oracle-conventional",
                reference.max_abs_diff(&conv_lodf)?,
                1e-6,
            ));
            rows.push((
                "lodf",
                "oracle-dual",
                reference.max_abs_diff(&dual_lodf)?,
                1e-6,
            ));
        }
        Err(e) => log::warn!("skipping the reference oracle: {e:#}"),
    }

    emit(g, |w| {
        match g.format {
        Format::Json => write_json(
            w,
            &rows
                .iter()
                .map(|(q, pair, d, tol)| serde_json::json!({"quantity": q, "pair": pair, "max_abs_diff": d, "tolerance": tol}))
                .collect::<Vec<_>>(),
        ),
        Format::Csv => {
            writeln!(w, "quantity,pair,max_abs_diff,tolerance")?;
            for (q, pair, d, tol) in &rows {
                writeln!(w, "{q},{pair},{d:e},{tol:e}")?;
            }
            Ok(())
        }
    }
    })?;
    if let Some((q, pair, d, tol)) = rows.iter().find(|r| r.2.is_nan() || r.2 > r.3) {
        bail!(Error::Numerical(format!(
            "{q} {pair} differs by {d:e}, tolerance {tol:e}"
        )));
    }
    Ok(())
}

fn parse_new_line(spec: &str) -> anyhow::Result<(i64, i64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parsed = match parts.as_slice() {
        [a, b, x] => a.parse().ok().zip(b.parse().ok()).zip(x.parse().ok()),
        _ => None,
    };
    let ((a, b), x) = parsed.ok_or_else(|| {
        anyhow!(Error::InvalidInput(format!(
            "expected FROM:TO:X, got '{spec}'"
        )))
    })?;
    Ok((a, b, x))
}

fn schedule_pattern(grid: &Grid, spec: ScheduleFile) -> anyhow::Result<Vec<f64>> {
    match (spec.path, spec.flows) {
        (Some(path), None) => {
            let idx = path
                .iter()
                .map(|&id| grid.require_bus(id))
                .collect::<cycleflow::Result<Vec<_>>>()?;
            Ok(schedule_from_path(grid, &idx)?)
        }
        (None, Some(flows)) => {
            let mut pattern = vec![0.0; grid.n_lines()];
            for f in flows {
                let (a, b) = (grid.require_bus(f.from)?, grid.require_bus(f.to)?);
                let line = grid
                    .branches()
                    .iter()
                    .find(|l| (l.tail, l.head) == (a, b) || (l.tail, l.head) == (b, a))
                    .ok_or_else(|| {
                        anyhow!(Error::InvalidInput(format!(
                            "no line between buses {} and {}",
                            f.from, f.to
                        )))
                    })?;
                pattern[line.index] += if line.tail == a { f.flow } else { -f.flow };
            }
            Ok(pattern)
        }
        _ => bail!(Error::Schema(
            "schedule needs exactly one of 'path' or 'flows'".into()
        )),
    }
}

fn line_label(grid: &Grid, l: usize) -> String {
    let b = grid.branch(l);
    format!("{}-{}", grid.bus_id(b.tail), grid.bus_id(b.head))
}

fn emit_matrix(g: &Global, grid: &Grid, m: &SensitivityMatrix) -> anyhow::Result<()> {
    emit(g, |w| match g.format {
        Format::Json => write_json(w, &m.to_json(grid)),
        Format::Csv => Ok(m.write_csv(grid, w)?),
    })
}

fn write_json<T: serde::Serialize>(w: &mut dyn Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn emit(g: &Global, body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let mut w: Box<dyn Write> = match &g.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    body(&mut *w)?;
    w.flush()?;
    Ok(())
}
