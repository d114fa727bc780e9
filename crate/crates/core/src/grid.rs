//! Grid model: buses, machines, branches, and the strict JSON schema they
//! travel in.
//!
//! The model deliberately separates two node classes:
//!
//! * **load buses** — the physical network nodes; every branch in `lines`
//!   connects two of them;
//! * **generators** — synchronous machines, each represented by an internal
//!   EMF node behind a transient-reactance susceptance, attached to exactly
//!   one terminal load bus.
//!
//! [`parse_grid`] rejects malformed input outright (bad JSON, unknown keys,
//! duplicate ids, non-positive susceptances, reversed inertia bounds).
//! [`validate_grid`] never fails: it audits a model — including one built
//! programmatically — and reports referential and topological problems as a
//! list of issues, so a caller can show all of them at once.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a bus or machine. Compared and ordered as a plain string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(String);

impl BusId {
    pub fn new(id: impl Into<String>) -> Self {
        BusId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BusId {
    fn from(s: &str) -> Self {
        BusId(s.to_owned())
    }
}

/// One synchronous machine and its virtual-inertia procurement limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Machine identifier; shares a namespace with load-bus ids.
    pub id: BusId,
    /// Terminal load bus the machine's internal node attaches to.
    pub terminal: BusId,
    /// Synchronous inertia already on the machine, MW·s.
    pub h0_mws: f64,
    /// Hard cap on total inertia (synchronous plus awarded), MW·s.
    pub h_max_mws: f64,
    /// Susceptance of the internal (transient-reactance) branch, per unit.
    pub b_internal_pu: f64,
    /// Offer price for virtual inertia, $ per MW·s.
    pub cost_per_mws: f64,
}

/// A branch between two load buses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: BusId,
    pub to: BusId,
    /// Branch susceptance, per unit; parallel branches are aggregated by
    /// summation when parsed.
    pub b_pu: f64,
}

/// Complete study-network model.
///
/// Invariants maintained by [`parse_grid`] and checked by [`validate_grid`]:
/// at least one generator and one load bus; ids globally unique and
/// non-empty; susceptances positive; `0 <= h0_mws <= h_max_mws`; offer prices
/// non-negative; at most one line per unordered bus pair; every line endpoint
/// and generator terminal is a declared load bus; the overall graph
/// (load buses plus machine internal nodes) is connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridModel {
    /// Nominal system frequency, Hz.
    pub f0_hz: f64,
    /// System power base used for per-unit conversion, MVA.
    pub s_base_mva: f64,
    pub load_buses: Vec<BusId>,
    pub generators: Vec<GeneratorSpec>,
    pub lines: Vec<LineSpec>,
}

impl GridModel {
    /// Position of `id` in `load_buses`, if it is a load bus.
    pub fn load_index(&self, id: &BusId) -> Option<usize> {
        self.load_buses.iter().position(|b| b == id)
    }

    /// Position of `id` in `generators`, if it is a machine.
    pub fn generator_index(&self, id: &BusId) -> Option<usize> {
        self.generators.iter().position(|g| &g.id == id)
    }

    /// Copy of the grid with `award_mws[i]` added to machine `i`'s inertia.
    ///
    /// Used to audit a dispatch: the awarded model must satisfy the RoCoF cap
    /// when re-analysed from scratch.
    pub fn with_awarded_inertia(&self, award_mws: &[f64]) -> GridModel {
        assert_eq!(
            award_mws.len(),
            self.generators.len(),
            "one award per machine"
        );
        let mut grid = self.clone();
        for (gen, award) in grid.generators.iter_mut().zip(award_mws) {
            gen.h0_mws += award;
        }
        grid
    }
}

/// Why a grid file was rejected.
#[derive(Debug, Error)]
pub enum ParseError {
    /// Malformed JSON, an unknown key, a missing field, or a wrongly typed
    /// value. `line` and `column` locate the problem in the input text.
    #[error("invalid grid JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate id {0:?}: load buses and machines share one namespace")]
    DuplicateId(String),
    #[error("empty id string in {0}")]
    EmptyId(&'static str),
    #[error("{context}: susceptance must be positive and finite, got {value}")]
    NonPositiveSusceptance { context: String, value: f64 },
    #[error("machine {id:?}: h0_mws {h0} exceeds h_max_mws {h_max}")]
    InertiaBoundsReversed { id: String, h0: f64, h_max: f64 },
    #[error("machine {id:?}: {field} must be finite and non-negative, got {value}")]
    NegativeMachineField {
        id: String,
        field: &'static str,
        value: f64,
    },
    #[error("{field} must be positive and finite, got {value}")]
    NonPositiveSystemField { field: &'static str, value: f64 },
    #[error("line {from:?} -> {to:?} connects a bus to itself")]
    SelfLoop { from: String, to: String },
    #[error("grid declares no {0}")]
    EmptySection(&'static str),
}

/// Severity of a [`ValidationIssue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// One finding from [`validate_grid`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    /// Bus or machine the issue points at, when there is a single culprit.
    pub bus: Option<BusId>,
    pub message: String,
}

/// Everything [`validate_grid`] found, errors and warnings alike.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    /// True when no issue has [`Severity::Error`]; warnings do not block use.
    pub fn ok(&self) -> bool {
        self.issues.iter().all(|i| i.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Error)
    }

    /// One line per issue, for logs and CLI output.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for issue in &self.issues {
            out.push_str(&issue.severity.to_string());
            if let Some(bus) = &issue.bus {
                out.push_str(&format!(" [{bus}]"));
            }
            out.push_str(": ");
            out.push_str(&issue.message);
            out.push('\n');
        }
        out
    }
}

/// Parses a grid model from JSON text.
///
/// Strictness is the point: unknown keys, missing fields, duplicate ids,
/// non-positive susceptances, reversed inertia bounds, self-loops, and empty
/// sections are all rejected here, so code downstream of a successful parse
/// can rely on local field invariants. Parallel lines between the same bus
/// pair are legal in the input and aggregated by summing susceptance.
///
/// Referential and topological problems (dangling terminal, disconnected
/// graph) are *not* parse errors; run [`validate_grid`] for those.
pub fn parse_grid(text: &str) -> Result<GridModel, ParseError> {
    let mut grid: GridModel = serde_json::from_str(text).map_err(|e| ParseError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    check_system_fields(&grid)?;
    check_sections(&grid)?;
    check_ids(&grid)?;
    check_machines(&grid)?;
    check_lines(&grid)?;
    grid.lines = aggregate_parallel_lines(std::mem::take(&mut grid.lines));
    Ok(grid)
}

/// Serializes a grid back to the canonical pretty-printed JSON schema.
///
/// `parse_grid(&serialize_grid(&g))` reproduces `g` exactly for any model
/// that already satisfies the parse-level invariants.
pub fn serialize_grid(grid: &GridModel) -> String {
    let mut text = serde_json::to_string_pretty(grid).expect("grid models always serialize");
    text.push('\n');
    text
}

fn check_system_fields(grid: &GridModel) -> Result<(), ParseError> {
    for (field, value) in [("f0_hz", grid.f0_hz), ("s_base_mva", grid.s_base_mva)] {
        if !value.is_finite() || value <= 0.0 {
            return Err(ParseError::NonPositiveSystemField { field, value });
        }
    }
    Ok(())
}

fn check_sections(grid: &GridModel) -> Result<(), ParseError> {
    if grid.load_buses.is_empty() {
        return Err(ParseError::EmptySection("load buses"));
    }
    if grid.generators.is_empty() {
        return Err(ParseError::EmptySection("generators"));
    }
    Ok(())
}

fn check_ids(grid: &GridModel) -> Result<(), ParseError> {
    let mut seen = HashSet::new();
    for id in &grid.load_buses {
        if id.as_str().is_empty() {
            return Err(ParseError::EmptyId("load_buses"));
        }
        if !seen.insert(id.clone()) {
            return Err(ParseError::DuplicateId(id.as_str().to_owned()));
        }
    }
    for gen in &grid.generators {
        if gen.id.as_str().is_empty() {
            return Err(ParseError::EmptyId("generators"));
        }
        if !seen.insert(gen.id.clone()) {
            return Err(ParseError::DuplicateId(gen.id.as_str().to_owned()));
        }
    }
    Ok(())
}

fn check_machines(grid: &GridModel) -> Result<(), ParseError> {
    for gen in &grid.generators {
        if !gen.b_internal_pu.is_finite() || gen.b_internal_pu <= 0.0 {
            return Err(ParseError::NonPositiveSusceptance {
                context: format!("machine {:?} internal branch", gen.id.as_str()),
                value: gen.b_internal_pu,
            });
        }
        for (field, value) in [
            ("h0_mws", gen.h0_mws),
            ("h_max_mws", gen.h_max_mws),
            ("cost_per_mws", gen.cost_per_mws),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(ParseError::NegativeMachineField {
                    id: gen.id.as_str().to_owned(),
                    field,
                    value,
                });
            }
        }
        if gen.h0_mws > gen.h_max_mws {
            return Err(ParseError::InertiaBoundsReversed {
                id: gen.id.as_str().to_owned(),
                h0: gen.h0_mws,
                h_max: gen.h_max_mws,
            });
        }
    }
    Ok(())
}

fn check_lines(grid: &GridModel) -> Result<(), ParseError> {
    for line in &grid.lines {
        if !line.b_pu.is_finite() || line.b_pu <= 0.0 {
            return Err(ParseError::NonPositiveSusceptance {
                context: format!(
                    "line {:?} -> {:?}",
                    line.from.as_str(),
                    line.to.as_str()
                ),
                value: line.b_pu,
            });
        }
        if line.from == line.to {
            return Err(ParseError::SelfLoop {
                from: line.from.as_str().to_owned(),
                to: line.to.as_str().to_owned(),
            });
        }
    }
    Ok(())
}

/// Merges branches that connect the same unordered bus pair by summing their
/// susceptances. First-seen orientation and ordering are kept so the result
/// is deterministic.
fn aggregate_parallel_lines(lines: Vec<LineSpec>) -> Vec<LineSpec> {
    let mut order: Vec<LineSpec> = Vec::with_capacity(lines.len());
    let mut index: HashMap<(BusId, BusId), usize> = HashMap::new();
    for line in lines {
        let key = if line.from <= line.to {
            (line.from.clone(), line.to.clone())
        } else {
            (line.to.clone(), line.from.clone())
        };
        match index.get(&key) {
            Some(&i) => order[i].b_pu += line.b_pu,
            None => {
                index.insert(key, order.len());
                order.push(line);
            }
        }
    }
    order
}

/// Audits a grid model and reports every problem found, without failing.
///
/// Re-checks the local invariants that [`parse_grid`] enforces (the model may
/// have been built in code), then referential integrity (terminals and line
/// endpoints must name declared load buses), then topology. Topological
/// checks — isolated load buses and overall connectivity — only run when the
/// references resolve, since a graph with dangling edges has no meaningful
/// connectivity.
pub fn validate_grid(grid: &GridModel) -> ValidationReport {
    let mut issues = Vec::new();
    local_issues(grid, &mut issues);
    let referential_clean = referential_issues(grid, &mut issues);
    if referential_clean && !grid.load_buses.is_empty() {
        topology_issues(grid, &mut issues);
    }
    for gen in &grid.generators {
        if gen.h0_mws == 0.0 {
            issues.push(ValidationIssue {
                severity: Severity::Warning,
                bus: Some(gen.id.clone()),
                message: "machine has zero synchronous inertia; RoCoF is undefined unless \
                          virtual inertia is awarded"
                    .to_owned(),
            });
        }
    }
    ValidationReport { issues }
}

fn push_error(issues: &mut Vec<ValidationIssue>, bus: Option<BusId>, message: String) {
    issues.push(ValidationIssue {
        severity: Severity::Error,
        bus,
        message,
    });
}

fn local_issues(grid: &GridModel, issues: &mut Vec<ValidationIssue>) {
    for (field, value) in [("f0_hz", grid.f0_hz), ("s_base_mva", grid.s_base_mva)] {
        if !value.is_finite() || value <= 0.0 {
            push_error(issues, None, format!("{field} must be positive, got {value}"));
        }
    }
    if grid.load_buses.is_empty() {
        push_error(issues, None, "grid declares no load buses".to_owned());
    }
    if grid.generators.is_empty() {
        push_error(issues, None, "grid declares no generators".to_owned());
    }
    let mut seen = HashSet::new();
    for id in grid
        .load_buses
        .iter()
        .chain(grid.generators.iter().map(|g| &g.id))
    {
        if id.as_str().is_empty() {
            push_error(issues, None, "empty id string".to_owned());
        }
        if !seen.insert(id.clone()) {
            push_error(
                issues,
                Some(id.clone()),
                format!("duplicate id {:?}", id.as_str()),
            );
        }
    }
    for gen in &grid.generators {
        if !gen.b_internal_pu.is_finite() || gen.b_internal_pu <= 0.0 {
            push_error(
                issues,
                Some(gen.id.clone()),
                format!(
                    "internal susceptance must be positive, got {}",
                    gen.b_internal_pu
                ),
            );
        }
        if !gen.h0_mws.is_finite() || gen.h0_mws < 0.0 {
            push_error(
                issues,
                Some(gen.id.clone()),
                format!("h0_mws must be finite and non-negative, got {}", gen.h0_mws),
            );
        }
        if !gen.h_max_mws.is_finite() || gen.h_max_mws < gen.h0_mws {
            push_error(
                issues,
                Some(gen.id.clone()),
                format!(
                    "h_max_mws must be finite and at least h0_mws, got {} (h0_mws {})",
                    gen.h_max_mws, gen.h0_mws
                ),
            );
        }
        if !gen.cost_per_mws.is_finite() || gen.cost_per_mws < 0.0 {
            push_error(
                issues,
                Some(gen.id.clone()),
                format!(
                    "cost_per_mws must be finite and non-negative, got {}",
                    gen.cost_per_mws
                ),
            );
        }
    }
    let mut pairs = HashSet::new();
    for line in &grid.lines {
        if !line.b_pu.is_finite() || line.b_pu <= 0.0 {
            push_error(
                issues,
                Some(line.from.clone()),
                format!(
                    "line {} -> {}: susceptance must be positive, got {}",
                    line.from, line.to, line.b_pu
                ),
            );
        }
        if line.from == line.to {
            push_error(
                issues,
                Some(line.from.clone()),
                format!("line {} -> {} connects a bus to itself", line.from, line.to),
            );
        }
        let key = if line.from <= line.to {
            (line.from.clone(), line.to.clone())
        } else {
            (line.to.clone(), line.from.clone())
        };
        if !pairs.insert(key) {
            push_error(
                issues,
                Some(line.from.clone()),
                format!(
                    "parallel lines between {} and {} must be aggregated into one",
                    line.from, line.to
                ),
            );
        }
    }
}

/// Returns true when every terminal and line endpoint resolves to a load bus.
fn referential_issues(grid: &GridModel, issues: &mut Vec<ValidationIssue>) -> bool {
    let loads: HashSet<&BusId> = grid.load_buses.iter().collect();
    let mut clean = true;
    for gen in &grid.generators {
        if !loads.contains(&gen.terminal) {
            clean = false;
            push_error(
                issues,
                Some(gen.id.clone()),
                format!(
                    "machine terminal {:?} is not a declared load bus",
                    gen.terminal.as_str()
                ),
            );
        }
    }
    for line in &grid.lines {
        for end in [&line.from, &line.to] {
            if !loads.contains(end) {
                clean = false;
                push_error(
                    issues,
                    Some(end.clone()),
                    format!(
                        "line endpoint {:?} is not a declared load bus",
                        end.as_str()
                    ),
                );
            }
        }
    }
    clean
}

/// Flags isolated load buses and overall disconnection.
///
/// The walked graph is the full model graph: load buses plus machine internal
/// nodes, joined by lines and internal branches. A single-load grid with one
/// attached machine is connected; a load bus with no incident branch of
/// either kind is isolated.
fn topology_issues(grid: &GridModel, issues: &mut Vec<ValidationIssue>) {
    let m = grid.load_buses.len();
    let n = grid.generators.len();
    let load_index: HashMap<&BusId, usize> = grid
        .load_buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b, i))
        .collect();

    // Nodes 0..m are load buses, m..m+n are machine internal nodes.
    let mut adjacency = vec![Vec::new(); m + n];
    let connect = |a: usize, b: usize, adjacency: &mut Vec<Vec<usize>>| {
        adjacency[a].push(b);
        adjacency[b].push(a);
    };
    for line in &grid.lines {
        connect(
            load_index[&line.from],
            load_index[&line.to],
            &mut adjacency,
        );
    }
    for (g, gen) in grid.generators.iter().enumerate() {
        connect(load_index[&gen.terminal], m + g, &mut adjacency);
    }

    for (j, bus) in grid.load_buses.iter().enumerate() {
        if adjacency[j].is_empty() {
            push_error(
                issues,
                Some(bus.clone()),
                format!("isolated bus: {bus} has no incident line or machine"),
            );
        }
    }

    let mut visited = vec![false; m + n];
    let mut stack = vec![0usize];
    visited[0] = true;
    let mut reached = 1usize;
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if !visited[w] {
                visited[w] = true;
                reached += 1;
                stack.push(w);
            }
        }
    }
    if reached < m + n {
        let unreached: Vec<String> = grid
            .load_buses
            .iter()
            .enumerate()
            .filter(|(j, _)| !visited[*j])
            .map(|(_, b)| b.as_str().to_owned())
            .chain(
                grid.generators
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| !visited[m + g])
                    .map(|(_, gen)| gen.id.as_str().to_owned()),
            )
            .collect();
        push_error(
            issues,
            None,
            format!(
                "graph disconnected: {} of {} nodes unreachable from {} ({})",
                m + n - reached,
                m + n,
                grid.load_buses[0],
                unreached.join(", ")
            ),
        );
    }
}
