//! Post-contingency RoCoF: who absorbs a sudden load step, how fast each
//! machine's frequency falls, and why the worst excursion is always at a
//! machine.
//!
//! The chain of results, all algebraic consequences of the augmented
//! susceptance model:
//!
//! 1. **Impact distribution.** At the instant of a load step, machine rotor
//!    angles cannot move, so the extra power splits among machines purely
//!    electrically: `ΔP_G = B_GB · B_BB⁻¹ · ΔP_D`. The shares sum to the
//!    disturbance exactly (the full matrix is a Laplacian), which
//!    [`distribute_impact`] verifies to [`tol::CONSERVATION_TOL_MW`].
//! 2. **Machine RoCoF.** Each machine decelerates against its own inertia:
//!    `rocof_i = -f0 · ΔP_{G,i} / (2 H_i)` in Hz/s, with `H_i` in MW·s.
//! 3. **Propagation.** Load-bus frequency is the inertia-free limit of the
//!    network dynamics: `rocof_D = T · rocof_G` with `T = -B_BB⁻¹ · B_BG`.
//!    `T` is entrywise non-negative with unit row sums — each load bus sees a
//!    convex mixture of machine RoCoFs — so no load bus can exceed the worst
//!    machine. [`propagation_matrix`] checks both structural facts
//!    numerically instead of assuming them, and [`nodal_rocof_report`] turns
//!    a failure of the argmax-at-machine conclusion into a hard error rather
//!    than a silently wrong report.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{BusId, GridModel};
use crate::susceptance::{assemble_blocks, certify_invertible, SusceptanceBlocks, SusceptanceError};
use crate::tol;

/// A sudden load step at one bus. Positive `p_dis_mw` means the load
/// *increases* (frequency will fall).
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub bus: BusId,
    pub p_dis_mw: f64,
}

/// Which contingencies to screen.
#[derive(Debug, Clone)]
pub enum ContingencySet {
    Explicit(Vec<Disturbance>),
    /// The same load step applied at every load bus in turn.
    AllLoadBuses { p_dis_mw: f64 },
}

impl ContingencySet {
    /// Expands to a concrete, ordered disturbance list for `grid`.
    pub fn expand(&self, grid: &GridModel) -> Result<Vec<Disturbance>, RocofError> {
        let list = match self {
            ContingencySet::Explicit(list) => list.clone(),
            ContingencySet::AllLoadBuses { p_dis_mw } => grid
                .load_buses
                .iter()
                .map(|bus| Disturbance {
                    bus: bus.clone(),
                    p_dis_mw: *p_dis_mw,
                })
                .collect(),
        };
        if list.is_empty() {
            return Err(RocofError::EmptyContingencySet);
        }
        Ok(list)
    }
}

/// How one disturbance lands on the synchronous machines, MW per machine in
/// `SusceptanceBlocks::gen_ids` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactDistribution {
    pub delta_pg_mw: Vec<f64>,
    /// `|Σ delta_pg - p_dis|` left after the solve; bounded by
    /// [`tol::CONSERVATION_TOL_MW`] or the distribution is rejected.
    pub conservation_residual_mw: f64,
}

/// The machine-to-load RoCoF mixing matrix `T = -B_BB⁻¹ B_BG`, validated on
/// construction: every row sums to 1 within [`tol::ROW_SUM_TOL`] and no entry
/// lies below [`tol::ENTRY_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    matrix: DMatrix<f64>,
}

impl PropagationMatrix {
    /// Rows are load buses, columns are machines.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Mixes machine RoCoFs into load-bus RoCoFs.
    pub fn apply(&self, gen_rocof: &[f64]) -> Result<Vec<f64>, RocofError> {
        if gen_rocof.len() != self.matrix.ncols() {
            return Err(RocofError::DimensionMismatch(format!(
                "propagation matrix has {} machine columns but {} RoCoF values were given",
                self.matrix.ncols(),
                gen_rocof.len()
            )));
        }
        let g = DVector::from_column_slice(gen_rocof);
        Ok((&self.matrix * g).iter().copied().collect())
    }
}

/// Node class in a report row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Generator,
    Load,
}

impl BusKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BusKind::Generator => "generator",
            BusKind::Load => "load",
        }
    }
}

/// Full nodal RoCoF picture for one disturbance.
#[derive(Debug, Clone)]
pub struct RocofReport {
    pub disturbance: Disturbance,
    /// Machine ids, aligned with `gen_rocof_hz_per_s`.
    pub gen_ids: Vec<BusId>,
    /// Load-bus ids, aligned with `load_rocof_hz_per_s`.
    pub load_ids: Vec<BusId>,
    pub gen_rocof_hz_per_s: Vec<f64>,
    pub load_rocof_hz_per_s: Vec<f64>,
    pub impact: ImpactDistribution,
    /// Machine bus with the largest RoCoF magnitude (ties broken toward the
    /// lexicographically smallest id). Guaranteed to be a machine; see
    /// [`RocofError::WorstAtLoadBus`].
    pub worst_bus: BusId,
    pub worst_rocof_hz_per_s: f64,
}

impl RocofReport {
    /// All nodal rows in canonical output order: machines first, then load
    /// buses, each in grid declaration order.
    pub fn rows(&self) -> impl Iterator<Item = (&BusId, BusKind, f64)> {
        self.gen_ids
            .iter()
            .zip(&self.gen_rocof_hz_per_s)
            .map(|(id, &r)| (id, BusKind::Generator, r))
            .chain(
                self.load_ids
                    .iter()
                    .zip(&self.load_rocof_hz_per_s)
                    .map(|(id, &r)| (id, BusKind::Load, r)),
            )
    }
}

/// Per-machine worst-case impact across a screened contingency set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenSummaryEntry {
    pub gen: BusId,
    /// Largest `|delta_pg|` over the set — the impact that binds when this
    /// machine's inertia is dispatched.
    pub max_abs_delta_pg_mw: f64,
    /// First contingency (in input order) attaining that maximum.
    pub binding_contingency: BusId,
}

/// Ordered per-contingency reports plus the per-machine binding summary.
#[derive(Debug, Clone)]
pub struct ScreenResult {
    pub reports: Vec<RocofReport>,
    pub summary: Vec<ScreenSummaryEntry>,
}

#[derive(Debug, Error)]
pub enum RocofError {
    #[error(transparent)]
    Susceptance(#[from] SusceptanceError),
    #[error("disturbance bus {0} is not a load bus of this grid")]
    DisturbanceNotALoadBus(BusId),
    #[error("disturbance size must be positive and finite, got {0} MW")]
    BadDisturbanceSize(f64),
    #[error("machine {bus} has non-positive total inertia {h_mws} MW·s; RoCoF is undefined")]
    ZeroInertia { bus: BusId, h_mws: f64 },
    #[error(
        "machine impact shares sum to {sum_mw} MW against a {p_dis_mw} MW disturbance \
         (residual {residual_mw:.3e} MW, limit {limit:.3e} MW)",
        limit = tol::CONSERVATION_TOL_MW
    )]
    ConservationViolated {
        sum_mw: f64,
        p_dis_mw: f64,
        residual_mw: f64,
    },
    #[error(
        "propagation matrix row {row} sums to {sum} (must be 1 within {limit:.1e})",
        limit = tol::ROW_SUM_TOL
    )]
    RowSumViolated { row: usize, sum: f64 },
    #[error(
        "propagation matrix entry ({row}, {col}) is {value:.3e}, below the \
         non-negativity floor {floor:.1e}",
        floor = tol::ENTRY_FLOOR
    )]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error(
        "largest RoCoF magnitude is at load bus {load_bus} ({load_rocof_hz_per_s} Hz/s), \
         strictly beyond every machine (closest: {gen_bus} at {gen_rocof_hz_per_s} Hz/s); \
         the convex-mixture structure of the model is broken"
    )]
    WorstAtLoadBus {
        load_bus: BusId,
        load_rocof_hz_per_s: f64,
        gen_bus: BusId,
        gen_rocof_hz_per_s: f64,
    },
    #[error("contingency set is empty")]
    EmptyContingencySet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Splits a load step onto the machines through the network algebra.
///
/// Requires `d.p_dis_mw` positive and finite and `d.bus` a load bus of
/// `grid`. Every share is non-negative for a connected grid (same M-matrix
/// fact that powers the propagation matrix), and the shares sum to the
/// disturbance size; both are verified.
pub fn distribute_impact(
    grid: &GridModel,
    blocks: &SusceptanceBlocks,
    d: &Disturbance,
) -> Result<ImpactDistribution, RocofError> {
    if !d.p_dis_mw.is_finite() || d.p_dis_mw <= 0.0 {
        return Err(RocofError::BadDisturbanceSize(d.p_dis_mw));
    }
    let j = blocks
        .load_index(&d.bus)
        .ok_or_else(|| RocofError::DisturbanceNotALoadBus(d.bus.clone()))?;

    // A load increase of p MW is a net injection change of -p/s_base pu at
    // the disturbed bus.
    let mut rhs = DVector::zeros(blocks.load_ids().len());
    rhs[j] = -d.p_dis_mw / grid.s_base_mva;
    let theta = blocks.solve_bbb(&rhs)?;
    let delta_pu = blocks.b_gb() * theta;
    let delta_pg_mw: Vec<f64> = delta_pu.iter().map(|v| v * grid.s_base_mva).collect();

    let sum_mw: f64 = delta_pg_mw.iter().sum();
    let residual_mw = (sum_mw - d.p_dis_mw).abs();
    if residual_mw > tol::CONSERVATION_TOL_MW {
        return Err(RocofError::ConservationViolated {
            sum_mw,
            p_dis_mw: d.p_dis_mw,
            residual_mw,
        });
    }
    Ok(ImpactDistribution {
        delta_pg_mw,
        conservation_residual_mw: residual_mw,
    })
}

/// Initial RoCoF of each machine given its total inertia, Hz/s.
///
/// `inertia_mws[i]` is machine `i`'s inertia constant in MW·s (synchronous
/// plus any awarded virtual inertia); all entries must be positive.
pub fn generator_rocof_with_inertia(
    impact: &ImpactDistribution,
    gen_ids: &[BusId],
    inertia_mws: &[f64],
    f0_hz: f64,
) -> Result<Vec<f64>, RocofError> {
    if impact.delta_pg_mw.len() != inertia_mws.len() || gen_ids.len() != inertia_mws.len() {
        return Err(RocofError::DimensionMismatch(format!(
            "{} impact shares, {} inertias, {} machine ids",
            impact.delta_pg_mw.len(),
            inertia_mws.len(),
            gen_ids.len()
        )));
    }
    impact
        .delta_pg_mw
        .iter()
        .zip(inertia_mws)
        .zip(gen_ids)
        .map(|((&dp, &h), id)| {
            if !h.is_finite() || h <= 0.0 {
                return Err(RocofError::ZeroInertia {
                    bus: id.clone(),
                    h_mws: h,
                });
            }
            Ok(-f0_hz * dp / (2.0 * h))
        })
        .collect()
}

/// Initial RoCoF of each machine at its synchronous inertia `h0_mws`.
pub fn generator_rocof(
    impact: &ImpactDistribution,
    grid: &GridModel,
) -> Result<Vec<f64>, RocofError> {
    let ids: Vec<BusId> = grid.generators.iter().map(|g| g.id.clone()).collect();
    let h0: Vec<f64> = grid.generators.iter().map(|g| g.h0_mws).collect();
    generator_rocof_with_inertia(impact, &ids, &h0, grid.f0_hz)
}

/// Builds and validates the machine-to-load mixing matrix `T = -B_BB⁻¹ B_BG`.
pub fn propagation_matrix(blocks: &SusceptanceBlocks) -> Result<PropagationMatrix, RocofError> {
    let m = blocks.load_ids().len();
    let n = blocks.gen_ids().len();
    let mut matrix = DMatrix::zeros(m, n);
    for i in 0..n {
        let rhs = DVector::from_iterator(m, blocks.b_bg().column(i).iter().copied());
        let x = blocks.solve_bbb(&rhs)?;
        for j in 0..m {
            matrix[(j, i)] = -x[j];
        }
    }
    for j in 0..m {
        let sum: f64 = matrix.row(j).iter().sum();
        if (sum - 1.0).abs() > tol::ROW_SUM_TOL {
            return Err(RocofError::RowSumViolated { row: j, sum });
        }
        for i in 0..n {
            if matrix[(j, i)] < tol::ENTRY_FLOOR {
                return Err(RocofError::NegativeEntry {
                    row: j,
                    col: i,
                    value: matrix[(j, i)],
                });
            }
        }
    }
    Ok(PropagationMatrix { matrix })
}

/// Load-bus RoCoFs as the validated convex mixture of machine RoCoFs.
pub fn load_rocof(t: &PropagationMatrix, gen_rocof: &[f64]) -> Result<Vec<f64>, RocofError> {
    t.apply(gen_rocof)
}

/// Picks the bus with the largest RoCoF magnitude, insisting it is a machine.
///
/// Magnitudes within [`tol::ARGMAX_TIE_TOL`] of the maximum count as tied;
/// among tied machines the lexicographically smallest id wins so the choice
/// is deterministic. If no machine ties with the true maximum — impossible
/// for a connected grid, where load buses are convex mixtures — the model
/// assumption is broken and an error carries the evidence.
fn worst_nodal_rocof(
    gen_ids: &[BusId],
    gen_rocof: &[f64],
    load_ids: &[BusId],
    load_rocof: &[f64],
) -> Result<(BusId, f64), RocofError> {
    let max_mag = gen_rocof
        .iter()
        .chain(load_rocof)
        .fold(0.0_f64, |acc, r| acc.max(r.abs()));

    let mut best: Option<(&BusId, f64)> = None;
    for (id, &r) in gen_ids.iter().zip(gen_rocof) {
        if r.abs() >= max_mag - tol::ARGMAX_TIE_TOL {
            match best {
                Some((bid, _)) if bid <= id => {}
                _ => best = Some((id, r)),
            }
        }
    }
    if let Some((id, r)) = best {
        return Ok((id.clone(), r));
    }

    // No machine within tie tolerance of the maximum: report the offending
    // load bus and the closest machine as evidence.
    let (worst_load_idx, _) = load_rocof
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |(bi, bm), (i, r)| {
            if r.abs() > bm {
                (i, r.abs())
            } else {
                (bi, bm)
            }
        });
    let (best_gen_idx, _) = gen_rocof
        .iter()
        .enumerate()
        .fold((0, -1.0_f64), |(bi, bm), (i, r)| {
            if r.abs() > bm {
                (i, r.abs())
            } else {
                (bi, bm)
            }
        });
    Err(RocofError::WorstAtLoadBus {
        load_bus: load_ids[worst_load_idx].clone(),
        load_rocof_hz_per_s: load_rocof[worst_load_idx],
        gen_bus: gen_ids[best_gen_idx].clone(),
        gen_rocof_hz_per_s: gen_rocof[best_gen_idx],
    })
}

fn report_with_blocks(
    grid: &GridModel,
    blocks: &SusceptanceBlocks,
    d: &Disturbance,
) -> Result<RocofReport, RocofError> {
    let impact = distribute_impact(grid, blocks, d)?;
    let gen = generator_rocof(&impact, grid)?;
    let t = propagation_matrix(blocks)?;
    let load = load_rocof(&t, &gen)?;
    let (worst_bus, worst_rocof) =
        worst_nodal_rocof(blocks.gen_ids(), &gen, blocks.load_ids(), &load)?;
    Ok(RocofReport {
        disturbance: d.clone(),
        gen_ids: blocks.gen_ids().to_vec(),
        load_ids: blocks.load_ids().to_vec(),
        gen_rocof_hz_per_s: gen,
        load_rocof_hz_per_s: load,
        impact,
        worst_bus,
        worst_rocof_hz_per_s: worst_rocof,
    })
}

/// Assembles the susceptance blocks for a validated grid and certifies the
/// load-side block invertible, in one step. Every analysis entry point goes
/// through this so no computation ever runs on an uncertified factorization.
pub fn assemble_and_certify(grid: &GridModel) -> Result<SusceptanceBlocks, RocofError> {
    let blocks = assemble_blocks(grid)?;
    certify_invertible(&blocks)?;
    Ok(blocks)
}

/// Computes the complete nodal RoCoF report for one disturbance: validates
/// the grid, certifies the susceptance block, distributes the impact, and
/// evaluates machine and load-bus RoCoFs with the worst bus identified.
pub fn nodal_rocof_report(grid: &GridModel, d: &Disturbance) -> Result<RocofReport, RocofError> {
    let blocks = assemble_and_certify(grid)?;
    report_with_blocks(grid, &blocks, d)
}

/// Runs [`nodal_rocof_report`] for every contingency in the set, reusing one
/// factorization, and summarises the binding impact per machine.
///
/// Contingencies are evaluated in parallel but reported strictly in input
/// order, so results are deterministic.
pub fn screen_contingencies(
    grid: &GridModel,
    set: &ContingencySet,
) -> Result<ScreenResult, RocofError> {
    let contingencies = set.expand(grid)?;
    let blocks = assemble_and_certify(grid)?;

    let outcomes: Vec<Result<RocofReport, RocofError>> = contingencies
        .par_iter()
        .map(|d| report_with_blocks(grid, &blocks, d))
        .collect();
    let mut reports = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        reports.push(outcome?);
    }

    let summary = blocks
        .gen_ids()
        .iter()
        .enumerate()
        .map(|(i, gen)| {
            let (k, best) = reports.iter().enumerate().fold(
                (0usize, -1.0_f64),
                |(bk, bm), (k, report)| {
                    let mag = report.impact.delta_pg_mw[i].abs();
                    if mag > bm {
                        (k, mag)
                    } else {
                        (bk, bm)
                    }
                },
            );
            ScreenSummaryEntry {
                gen: gen.clone(),
                max_abs_delta_pg_mw: best,
                binding_contingency: reports[k].disturbance.bus.clone(),
            }
        })
        .collect();

    Ok(ScreenResult { reports, summary })
}
