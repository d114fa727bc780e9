//! Command-line front end for grid analysis: file validation, single-event
//! nodal RoCoF reports, fleet-wide contingency screening, inertia dispatch
//! with nodal prices, and a time-domain cross-check of the algebraic model.
//!
//! Exit codes: 0 success (including an optimal dispatch), 1 usage or input
//! error, 2 infeasible dispatch, 3 breach of a model guarantee (an internal
//! certificate failed on data that parsed and validated cleanly).
//!
//! All artifacts are written atomically (temp file in the target directory,
//! then rename) and are byte-identical across repeated runs on the same
//! input. CSV floats carry 9 significant digits; JSON carries full
//! precision, so every CSV value round-trips through the JSON artifact.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use rocof_core::dispatch::{dispatch, DispatchError, DispatchOutcome, DispatchSolution};
use rocof_core::grid::{parse_grid, validate_grid, BusId, GridModel};
use rocof_core::rocof::{
    assemble_and_certify, nodal_rocof_report, screen_contingencies, ContingencySet, Disturbance,
    RocofError, RocofReport, ScreenResult,
};
use rocof_core::susceptance::SusceptanceError;
use rocof_core::swing::{simulate_swing, SimulationTrace, SwingError};
use serde::Serialize;
use tempfile::NamedTempFile;

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_MODEL_BREACH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rocof",
    version,
    about = "Nodal RoCoF screening and inertia dispatch for DC grid models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a grid file and report every validation problem found.
    Validate {
        /// Grid model JSON file.
        #[arg(long)]
        grid: PathBuf,
    },
    /// Nodal RoCoF report for a single load-step disturbance.
    Rocof {
        #[arg(long)]
        grid: PathBuf,
        /// Load bus where the disturbance hits.
        #[arg(long)]
        bus: String,
        /// Disturbance size in MW (load increase).
        #[arg(long)]
        mw: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also dump the assembled susceptance blocks as CSV files
        /// `<PREFIX>.b_gg.csv`, `.b_gb.csv`, `.b_bg.csv`, `.b_bb.csv`.
        #[arg(long, value_name = "PREFIX")]
        dump_blocks: Option<PathBuf>,
    },
    /// Run one disturbance per load bus (or per chosen bus) and summarise.
    Screen {
        #[arg(long)]
        grid: PathBuf,
        /// Disturbance size in MW applied at each screened bus.
        #[arg(long)]
        mw: f64,
        /// Screen only these load buses; defaults to every load bus.
        #[arg(long = "bus")]
        buses: Vec<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Buy the cheapest virtual inertia that caps post-contingency RoCoF,
    /// and price it per bus.
    Dispatch {
        #[arg(long)]
        grid: PathBuf,
        /// Guard against a disturbance at every load bus.
        #[arg(long)]
        all_load_buses: bool,
        /// Guard against disturbances at these buses only.
        #[arg(long = "bus")]
        buses: Vec<String>,
        /// Disturbance size in MW for every guarded bus.
        #[arg(long)]
        mw: f64,
        /// RoCoF magnitude cap in Hz/s.
        #[arg(long)]
        rocof_max: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Integrate the swing dynamics and dump frequency/RoCoF traces as CSV.
    Simulate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        bus: String,
        #[arg(long)]
        mw: f64,
        /// Simulation horizon in seconds.
        #[arg(long)]
        horizon: f64,
        /// Integration step in seconds.
        #[arg(long)]
        dt: f64,
        /// Frequency-trace CSV path; the RoCoF companion lands next to it
        /// with a `.rocof.csv` suffix.
        #[arg(long)]
        output: PathBuf,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, what: &str, err: std::io::Error) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: format!("cannot {what} {}: {err}", path.display()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Err(err) = configure_thread_pool() {
        eprintln!("error: {}", err.message);
        return ExitCode::from(err.code);
    }
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

/// Honours `ROCOF_DISPATCH_THREADS` as a cap on internal parallelism.
fn configure_thread_pool() -> Result<(), CliError> {
    let Some(raw) = std::env::var_os("ROCOF_DISPATCH_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .to_str()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CliError::usage(format!(
                "ROCOF_DISPATCH_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure thread pool: {e}")))
}

fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Validate { grid } => run_validate(&grid),
        Command::Rocof {
            grid,
            bus,
            mw,
            format,
            output,
            dump_blocks,
        } => run_rocof(&grid, &bus, mw, format, output.as_deref(), dump_blocks.as_deref()),
        Command::Screen {
            grid,
            mw,
            buses,
            format,
            output,
        } => run_screen(&grid, mw, &buses, format, output.as_deref()),
        Command::Dispatch {
            grid,
            all_load_buses,
            buses,
            mw,
            rocof_max,
            format,
            output,
        } => run_dispatch(
            &grid,
            all_load_buses,
            &buses,
            mw,
            rocof_max,
            format,
            output.as_deref(),
        ),
        Command::Simulate {
            grid,
            bus,
            mw,
            horizon,
            dt,
            output,
        } => run_simulate(&grid, &bus, mw, horizon, dt, &output),
    }
}

fn load_grid(path: &Path) -> Result<GridModel, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::io(path, "read", e))?;
    parse_grid(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn run_validate(path: &Path) -> Result<u8, CliError> {
    let grid = load_grid(path)?;
    let report = validate_grid(&grid);
    let rendered = report.render();
    if !rendered.is_empty() {
        eprint!("{rendered}");
    }
    if report.ok() {
        println!(
            "ok: {} machines, {} load buses, {} lines",
            grid.generators.len(),
            grid.load_buses.len(),
            grid.lines.len()
        );
        Ok(0)
    } else {
        Ok(EXIT_USAGE)
    }
}

fn run_rocof(
    path: &Path,
    bus: &str,
    mw: f64,
    format: Format,
    output: Option<&Path>,
    dump_blocks: Option<&Path>,
) -> Result<u8, CliError> {
    let grid = load_grid(path)?;
    if let Some(prefix) = dump_blocks {
        let blocks = assemble_and_certify(&grid).map_err(rocof_error)?;
        write_block_dumps(prefix, &blocks)?;
    }
    let disturbance = Disturbance {
        bus: BusId::from(bus),
        p_dis_mw: mw,
    };
    let report = nodal_rocof_report(&grid, &disturbance).map_err(rocof_error)?;
    let content = match format {
        Format::Json => rocof_json(&report),
        Format::Csv => rocof_csv(&report),
    };
    write_artifact(output, &content)?;
    Ok(0)
}

fn run_screen(
    path: &Path,
    mw: f64,
    buses: &[String],
    format: Format,
    output: Option<&Path>,
) -> Result<u8, CliError> {
    let grid = load_grid(path)?;
    let set = contingency_set(buses, mw, true)?;
    let result = screen_contingencies(&grid, &set).map_err(rocof_error)?;
    let content = match format {
        Format::Json => screen_json(&result),
        Format::Csv => screen_csv(&result),
    };
    write_artifact(output, &content)?;
    Ok(0)
}

fn run_dispatch(
    path: &Path,
    all_load_buses: bool,
    buses: &[String],
    mw: f64,
    rocof_max: f64,
    format: Format,
    output: Option<&Path>,
) -> Result<u8, CliError> {
    if all_load_buses && !buses.is_empty() {
        return Err(CliError::usage(
            "--all-load-buses and --bus are mutually exclusive",
        ));
    }
    if !all_load_buses && buses.is_empty() {
        return Err(CliError::usage(
            "choose --all-load-buses or at least one --bus",
        ));
    }
    let grid = load_grid(path)?;
    let set = contingency_set(buses, mw, all_load_buses)?;
    match dispatch(&grid, &set, rocof_max).map_err(dispatch_error)? {
        DispatchOutcome::Optimal(solution) => {
            let content = match format {
                Format::Json => dispatch_json(&grid, &solution),
                Format::Csv => dispatch_csv(&grid, &solution),
            };
            write_artifact(output, &content)?;
            Ok(0)
        }
        DispatchOutcome::Infeasible(infeasible) => {
            let content = match format {
                Format::Json => {
                    let doc = InfeasibleDoc {
                        status: "infeasible",
                        phase1_objective: infeasible.phase1_objective,
                        impossible_pairs: infeasible
                            .impossible_pairs
                            .iter()
                            .map(|p| PairDoc {
                                gen: p.gen.to_string(),
                                contingency_bus: p.contingency_bus.to_string(),
                                required_mws: p.required_mws,
                                available_mws: p.available_mws,
                            })
                            .collect(),
                    };
                    to_json(&doc)
                }
                Format::Csv => {
                    let mut out = String::from("gen,contingency_bus,required_mws,available_mws\n");
                    for p in &infeasible.impossible_pairs {
                        let _ = writeln!(
                            out,
                            "{},{},{},{}",
                            p.gen,
                            p.contingency_bus,
                            fmt9(p.required_mws),
                            fmt9(p.available_mws)
                        );
                    }
                    out
                }
            };
            write_artifact(output, &content)?;
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn run_simulate(
    path: &Path,
    bus: &str,
    mw: f64,
    horizon: f64,
    dt: f64,
    output: &Path,
) -> Result<u8, CliError> {
    let grid = load_grid(path)?;
    let disturbance = Disturbance {
        bus: BusId::from(bus),
        p_dis_mw: mw,
    };
    let trace = simulate_swing(&grid, &disturbance, horizon, dt).map_err(swing_error)?;
    atomic_write(output, &trace_csv(&trace, &trace.freq_dev_hz))?;
    atomic_write(&companion_path(output), &trace_csv(&trace, &trace.rocof_hz_per_s))?;
    Ok(0)
}

fn contingency_set(buses: &[String], mw: f64, all: bool) -> Result<ContingencySet, CliError> {
    if buses.is_empty() {
        if !all {
            return Err(CliError::usage("no contingency buses given"));
        }
        Ok(ContingencySet::AllLoadBuses { p_dis_mw: mw })
    } else {
        Ok(ContingencySet::Explicit(
            buses
                .iter()
                .map(|b| Disturbance {
                    bus: BusId::from(b.as_str()),
                    p_dis_mw: mw,
                })
                .collect(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Error classification

fn rocof_error(err: RocofError) -> CliError {
    let code = rocof_exit_code(&err);
    CliError {
        code,
        message: err.to_string(),
    }
}

fn rocof_exit_code(err: &RocofError) -> u8 {
    match err {
        // Bad or unusable input data.
        RocofError::Susceptance(SusceptanceError::InvalidGrid(_))
        | RocofError::DisturbanceNotALoadBus(_)
        | RocofError::BadDisturbanceSize(_)
        | RocofError::ZeroInertia { .. }
        | RocofError::EmptyContingencySet
        | RocofError::DimensionMismatch(_) => EXIT_USAGE,
        // The grid validated but a structural guarantee did not hold.
        RocofError::Susceptance(_)
        | RocofError::ConservationViolated { .. }
        | RocofError::RowSumViolated { .. }
        | RocofError::NegativeEntry { .. }
        | RocofError::WorstAtLoadBus { .. } => EXIT_MODEL_BREACH,
    }
}

fn dispatch_error(err: DispatchError) -> CliError {
    let code = match &err {
        DispatchError::Rocof(e) => rocof_exit_code(e),
        DispatchError::BadRocofMax(_) => EXIT_USAGE,
        DispatchError::Lp(_)
        | DispatchError::Unbounded
        | DispatchError::DualRouteMismatch { .. }
        | DispatchError::RouteFeasibilityMismatch(_)
        | DispatchError::KktViolation { .. }
        | DispatchError::AuditFailure { .. } => EXIT_MODEL_BREACH,
    };
    CliError {
        code,
        message: err.to_string(),
    }
}

fn swing_error(err: SwingError) -> CliError {
    let code = match &err {
        SwingError::Rocof(e) => rocof_exit_code(e),
        _ => EXIT_USAGE,
    };
    CliError {
        code,
        message: err.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Artifact rendering

/// Nine significant digits, the precision promise of CSV output.
fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("output documents always serialize");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct BusRowDoc {
    id: String,
    kind: &'static str,
    rocof_hz_per_s: f64,
}

#[derive(Serialize)]
struct DisturbanceDoc {
    bus: String,
    p_dis_mw: f64,
}

#[derive(Serialize)]
struct RocofDoc {
    disturbance: DisturbanceDoc,
    buses: Vec<BusRowDoc>,
    worst_bus: String,
    worst_rocof_hz_per_s: f64,
}

#[derive(Serialize)]
struct ContingencyDoc {
    bus: String,
    p_dis_mw: f64,
    buses: Vec<BusRowDoc>,
    worst_bus: String,
    worst_rocof_hz_per_s: f64,
}

#[derive(Serialize)]
struct SummaryDoc {
    gen: String,
    max_abs_delta_pg_mw: f64,
    binding_contingency: String,
}

#[derive(Serialize)]
struct ScreenDoc {
    contingencies: Vec<ContingencyDoc>,
    summary: Vec<SummaryDoc>,
}

#[derive(Serialize)]
struct AwardDoc {
    bus: String,
    h_v_mws: f64,
    price_per_mws: f64,
}

#[derive(Serialize)]
struct AuditDoc {
    worst_bus: String,
    worst_rocof_hz_per_s: f64,
}

#[derive(Serialize)]
struct DispatchDoc {
    status: &'static str,
    objective: f64,
    awards: Vec<AwardDoc>,
    audit: AuditDoc,
}

#[derive(Serialize)]
struct PairDoc {
    gen: String,
    contingency_bus: String,
    required_mws: f64,
    available_mws: f64,
}

#[derive(Serialize)]
struct InfeasibleDoc {
    status: &'static str,
    phase1_objective: f64,
    impossible_pairs: Vec<PairDoc>,
}

fn bus_rows(report: &RocofReport) -> Vec<BusRowDoc> {
    report
        .rows()
        .map(|(id, kind, rocof)| BusRowDoc {
            id: id.to_string(),
            kind: kind.as_str(),
            rocof_hz_per_s: rocof,
        })
        .collect()
}

fn rocof_json(report: &RocofReport) -> String {
    to_json(&RocofDoc {
        disturbance: DisturbanceDoc {
            bus: report.disturbance.bus.to_string(),
            p_dis_mw: report.disturbance.p_dis_mw,
        },
        buses: bus_rows(report),
        worst_bus: report.worst_bus.to_string(),
        worst_rocof_hz_per_s: report.worst_rocof_hz_per_s,
    })
}

fn rocof_csv(report: &RocofReport) -> String {
    let mut out = String::from("bus_id,bus_kind,rocof_hz_per_s\n");
    for (id, kind, rocof) in report.rows() {
        let _ = writeln!(out, "{id},{},{}", kind.as_str(), fmt9(rocof));
    }
    out
}

fn screen_json(result: &ScreenResult) -> String {
    to_json(&ScreenDoc {
        contingencies: result
            .reports
            .iter()
            .map(|report| ContingencyDoc {
                bus: report.disturbance.bus.to_string(),
                p_dis_mw: report.disturbance.p_dis_mw,
                buses: bus_rows(report),
                worst_bus: report.worst_bus.to_string(),
                worst_rocof_hz_per_s: report.worst_rocof_hz_per_s,
            })
            .collect(),
        summary: result
            .summary
            .iter()
            .map(|s| SummaryDoc {
                gen: s.gen.to_string(),
                max_abs_delta_pg_mw: s.max_abs_delta_pg_mw,
                binding_contingency: s.binding_contingency.to_string(),
            })
            .collect(),
    })
}

fn screen_csv(result: &ScreenResult) -> String {
    let mut out = String::from("contingency_bus,bus_id,bus_kind,rocof_hz_per_s\n");
    for report in &result.reports {
        for (id, kind, rocof) in report.rows() {
            let _ = writeln!(
                out,
                "{},{id},{},{}",
                report.disturbance.bus,
                kind.as_str(),
                fmt9(rocof)
            );
        }
    }
    out
}

fn dispatch_json(grid: &GridModel, solution: &DispatchSolution) -> String {
    to_json(&DispatchDoc {
        status: "optimal",
        objective: solution.objective,
        awards: grid
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| AwardDoc {
                bus: g.id.to_string(),
                h_v_mws: solution.h_v_mws[i],
                price_per_mws: solution.prices_per_mws[i],
            })
            .collect(),
        audit: AuditDoc {
            worst_bus: solution.audit.worst_bus.to_string(),
            worst_rocof_hz_per_s: solution.audit.worst_rocof_hz_per_s,
        },
    })
}

fn dispatch_csv(grid: &GridModel, solution: &DispatchSolution) -> String {
    let mut out = String::from("bus,h_v_mws,price_per_mws\n");
    for (i, g) in grid.generators.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            g.id,
            fmt9(solution.h_v_mws[i]),
            fmt9(solution.prices_per_mws[i])
        );
    }
    out
}

/// One CSV over the trace's sample grid: `t_s` first, then one column per
/// bus, in the trace's machine-then-load order.
fn trace_csv(trace: &SimulationTrace, series: &[Vec<f64>]) -> String {
    let mut out = String::from("t_s");
    for id in &trace.bus_ids {
        let _ = write!(out, ",{id}");
    }
    out.push('\n');
    for k in 0..trace.samples() {
        let _ = write!(out, "{}", fmt9(trace.t_s[k]));
        for column in series {
            let _ = write!(out, ",{}", fmt9(column[k]));
        }
        out.push('\n');
    }
    out
}

fn companion_path(output: &Path) -> PathBuf {
    match output.extension() {
        Some(ext) => output.with_extension(format!("rocof.{}", ext.to_string_lossy())),
        None => output.with_extension("rocof"),
    }
}

fn write_block_dumps(
    prefix: &Path,
    blocks: &rocof_core::susceptance::SusceptanceBlocks,
) -> Result<(), CliError> {
    let gens = blocks.gen_ids();
    let loads = blocks.load_ids();
    let dumps: [(&str, &[BusId], &[BusId]); 4] = [
        ("b_gg", gens, gens),
        ("b_gb", gens, loads),
        ("b_bg", loads, gens),
        ("b_bb", loads, loads),
    ];
    for (name, rows, cols) in dumps {
        let matrix = match name {
            "b_gg" => blocks.b_gg(),
            "b_gb" => blocks.b_gb(),
            "b_bg" => blocks.b_bg(),
            _ => blocks.b_bb(),
        };
        let mut out = String::from("bus");
        for c in cols {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (r, id) in rows.iter().enumerate() {
            let _ = write!(out, "{id}");
            for c in 0..cols.len() {
                let _ = write!(out, ",{}", fmt9(matrix[(r, c)]));
            }
            out.push('\n');
        }
        let mut path = prefix.as_os_str().to_owned();
        path.push(format!(".{name}.csv"));
        atomic_write(Path::new(&path), &out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Output plumbing

fn write_artifact(output: Option<&Path>, content: &str) -> Result<(), CliError> {
    match output {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => atomic_write(path, content),
    }
}

/// Writes via a temp file in the destination directory plus rename, so a
/// crash can never leave a half-written artifact behind.
fn atomic_write(path: &Path, content: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, "write", e))?;
    tmp.write_all(content.as_bytes())
        .map_err(|e| CliError::io(path, "write", e))?;
    tmp.persist(path)
        .map_err(|e| CliError::io(path, "write", e.error))?;
    Ok(())
}
