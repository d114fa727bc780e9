//! Minimum-cost virtual-inertia dispatch with nodal prices from LP duality.
//!
//! Given a RoCoF cap `r` and a set of screened contingencies, the dispatch
//! buys virtual inertia `h_v,i ≥ 0` on top of each machine's synchronous
//! inertia `h0,i` so that **every** machine respects the cap under **every**
//! contingency:
//!
//! ```text
//! min  Σ_i cost_i · h_v,i
//! s.t. -2r·h_v,i ≤  f0·ΔP_{i,k} + 2r·h0,i    (lower side, per machine i,
//!      -2r·h_v,i ≤ -f0·ΔP_{i,k} + 2r·h0,i     upper side — per contingency k)
//!      0 ≤ h_v,i ≤ h_max,i - h0,i
//! ```
//!
//! The two sides linearise `|f0·ΔP| ≤ 2r·(h0 + h_v)`, i.e. `|rocof_i| ≤ r`.
//! Because load-bus RoCoF is a convex mixture of machine RoCoFs, capping the
//! machines caps the whole network — which the post-solve audit re-verifies
//! from scratch on the awarded grid rather than trusting.
//!
//! **Prices.** The dual multiplier of each RoCoF row measures how much the
//! optimal cost falls per unit of constraint relief. Summed per machine over
//! contingencies and scaled by `2r`, the row duals become the nodal price of
//! inertia: `ρ_i = 2r·(σ̄_i + σ̲_i)`. As a guard against scaling mistakes —
//! the classic failure mode of dual-based pricing — the prices are recovered
//! twice: once from the natural-form LP above and once from an independently
//! solved normalized form whose rows are pre-divided by `2r` (duals are then
//! prices directly). The two routes must agree to [`tol::DUAL_ROUTE_TOL`].

use thiserror::Error;

use crate::grid::{BusId, GridModel};
use crate::lp::{self, KktResiduals, LpOutcome, LpProblem, LpRowData, LpSolution};
use crate::rocof::{
    assemble_and_certify, distribute_impact, screen_contingencies, ContingencySet, Disturbance,
    RocofError,
};
use crate::tol;

/// Everything the LP is built from, kept for pricing and audit.
#[derive(Debug, Clone)]
pub struct DispatchProblem {
    pub rocof_max_hz_per_s: f64,
    pub f0_hz: f64,
    pub contingencies: Vec<Disturbance>,
    /// `impacts_mw[k][i]`: machine `i`'s share of contingency `k`, MW.
    pub impacts_mw: Vec<Vec<f64>>,
    pub gen_ids: Vec<BusId>,
    pub h0_mws: Vec<f64>,
    pub h_max_mws: Vec<f64>,
    pub cost_per_mws: Vec<f64>,
}

/// Which constraint a row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RocofSide {
    /// Guards against RoCoF below `-r` (the binding side for load increases).
    Lower,
    /// Guards against RoCoF above `+r`.
    Upper,
}

/// Provenance of one LP row: machine × contingency × side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTag {
    pub gen: usize,
    pub contingency: usize,
    pub side: RocofSide,
}

/// One tagged inequality `coeffs · h_v ≤ rhs`.
#[derive(Debug, Clone)]
pub struct TaggedRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub tag: RowTag,
}

/// The dispatch LP in standard inequality form: RoCoF rows are tagged with
/// their provenance; variable headroom bounds are kept separate from the
/// rows and lowered to extra inequalities only when solving.
#[derive(Debug, Clone)]
pub struct LpStandardForm {
    pub objective: Vec<f64>,
    pub rows: Vec<TaggedRow>,
    /// Per-variable upper bound `h_max,i - h0,i` (lower bound is zero).
    pub upper_bounds_mws: Vec<f64>,
}

impl LpStandardForm {
    /// Lowers to the generic solver's shape: tagged rows first, then one
    /// bound row per variable, in variable order.
    pub fn to_lp(&self) -> LpProblem {
        let n = self.objective.len();
        let mut rows: Vec<LpRowData> = self
            .rows
            .iter()
            .map(|r| LpRowData {
                coeffs: r.coeffs.clone(),
                rhs: r.rhs,
            })
            .collect();
        for (i, &u) in self.upper_bounds_mws.iter().enumerate() {
            assert!(u.is_finite(), "headroom bounds are always finite");
            let mut coeffs = vec![0.0; n];
            coeffs[i] = 1.0;
            rows.push(LpRowData { coeffs, rhs: u });
        }
        LpProblem {
            objective: self.objective.clone(),
            rows,
        }
    }
}

/// A (machine, contingency) pair that no feasible award can satisfy: the cap
/// demands more total inertia than the machine can hold.
#[derive(Debug, Clone)]
pub struct ImpossiblePair {
    pub gen: BusId,
    pub contingency_bus: BusId,
    /// Total inertia the cap would require on this machine, MW·s.
    pub required_mws: f64,
    /// The machine's h_max, MW·s.
    pub available_mws: f64,
}

/// Evidence for an infeasible dispatch.
#[derive(Debug, Clone)]
pub struct InfeasibleDispatch {
    pub impossible_pairs: Vec<ImpossiblePair>,
    /// Minimum total constraint violation found by the solver's first phase.
    pub phase1_objective: f64,
}

/// Post-solve audit: the awarded grid, re-analysed from scratch.
#[derive(Debug, Clone)]
pub struct DispatchAudit {
    pub worst_bus: BusId,
    pub worst_rocof_hz_per_s: f64,
    /// Contingency bus under which the worst RoCoF occurs.
    pub worst_contingency: BusId,
}

/// An accepted dispatch: awards, prices, and the certificates that earned
/// acceptance.
#[derive(Debug, Clone)]
pub struct DispatchSolution {
    /// Virtual inertia awarded per machine, MW·s, in grid order.
    pub h_v_mws: Vec<f64>,
    /// Total procurement cost.
    pub objective: f64,
    /// `sigma_lower[k][i]`: natural-form dual of the lower RoCoF row.
    pub sigma_lower: Vec<Vec<f64>>,
    /// `sigma_upper[k][i]`: natural-form dual of the upper RoCoF row.
    pub sigma_upper: Vec<Vec<f64>>,
    /// Nodal inertia price per machine, `ρ_i = 2r·(σ̄_i + σ̲_i)`, $/MW·s.
    pub prices_per_mws: Vec<f64>,
    /// True when some row sits at zero slack with zero dual: the dual
    /// solution (hence the prices) is one of several valid choices.
    pub degenerate: bool,
    pub kkt: KktResiduals,
    pub audit: DispatchAudit,
}

#[derive(Debug)]
pub enum DispatchOutcome {
    Optimal(Box<DispatchSolution>),
    Infeasible(InfeasibleDispatch),
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error(transparent)]
    Rocof(#[from] RocofError),
    #[error("RoCoF cap must be positive and finite, got {0} Hz/s")]
    BadRocofMax(f64),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
    #[error("dispatch LP reported unbounded, impossible under finite headroom bounds")]
    Unbounded,
    #[error(
        "price routes disagree for machine {gen}: natural-form {natural} vs \
         normalized-form {normalized} $/MW·s"
    )]
    DualRouteMismatch {
        gen: BusId,
        natural: f64,
        normalized: f64,
    },
    #[error("natural and normalized LPs disagree on feasibility: {0}")]
    RouteFeasibilityMismatch(String),
    #[error(
        "LP optimality certificates failed: max residual {max:.3e} exceeds {limit:.3e}",
        max = residuals.max(),
        limit = tol::KKT_TOL
    )]
    KktViolation { residuals: KktResiduals },
    #[error(
        "audit failed: awarded grid shows {worst_rocof} Hz/s at {worst_bus}, \
         beyond the {cap} Hz/s cap"
    )]
    AuditFailure {
        worst_bus: BusId,
        worst_rocof: f64,
        cap: f64,
    },
}

/// Screens the contingencies and lays out the dispatch LP in natural form.
///
/// Row order is contingency-major: for each contingency, each machine
/// contributes its lower then its upper row. Tags record the provenance so
/// duals can be routed back to (machine, contingency) pairs.
pub fn build_dispatch(
    grid: &GridModel,
    set: &ContingencySet,
    rocof_max_hz_per_s: f64,
) -> Result<(DispatchProblem, LpStandardForm), DispatchError> {
    if !rocof_max_hz_per_s.is_finite() || rocof_max_hz_per_s <= 0.0 {
        return Err(DispatchError::BadRocofMax(rocof_max_hz_per_s));
    }
    let contingencies = set.expand(grid)?;
    let blocks = assemble_and_certify(grid)?;
    let impacts_mw: Vec<Vec<f64>> = contingencies
        .iter()
        .map(|d| distribute_impact(grid, &blocks, d).map(|i| i.delta_pg_mw))
        .collect::<Result<_, _>>()?;

    let problem = DispatchProblem {
        rocof_max_hz_per_s,
        f0_hz: grid.f0_hz,
        contingencies,
        impacts_mw,
        gen_ids: grid.generators.iter().map(|g| g.id.clone()).collect(),
        h0_mws: grid.generators.iter().map(|g| g.h0_mws).collect(),
        h_max_mws: grid.generators.iter().map(|g| g.h_max_mws).collect(),
        cost_per_mws: grid.generators.iter().map(|g| g.cost_per_mws).collect(),
    };
    let form = natural_form(&problem);
    Ok((problem, form))
}

fn natural_form(p: &DispatchProblem) -> LpStandardForm {
    lp_form(p, 2.0 * p.rocof_max_hz_per_s, 1.0)
}

/// Normalized form: every RoCoF row divided by `2r`, so each row dual is a
/// price contribution directly.
fn normalized_form(p: &DispatchProblem) -> LpStandardForm {
    lp_form(p, 1.0, 1.0 / (2.0 * p.rocof_max_hz_per_s))
}

/// Shared row layout. `coeff_scale` multiplies the variable coefficient
/// (natural: 2r, normalized: 1); `rhs_scale` multiplies the impact term
/// (natural: 1, normalized: 1/(2r)).
fn lp_form(p: &DispatchProblem, coeff_scale: f64, rhs_scale: f64) -> LpStandardForm {
    let n = p.gen_ids.len();
    let mut rows = Vec::with_capacity(2 * n * p.contingencies.len());
    for (k, impacts) in p.impacts_mw.iter().enumerate() {
        for i in 0..n {
            let drive = p.f0_hz * impacts[i] * rhs_scale;
            let base = coeff_scale * p.h0_mws[i];
            let mut lower = vec![0.0; n];
            lower[i] = -coeff_scale;
            rows.push(TaggedRow {
                coeffs: lower,
                rhs: drive + base,
                tag: RowTag {
                    gen: i,
                    contingency: k,
                    side: RocofSide::Lower,
                },
            });
            let mut upper = vec![0.0; n];
            upper[i] = -coeff_scale;
            rows.push(TaggedRow {
                coeffs: upper,
                rhs: base - drive,
                tag: RowTag {
                    gen: i,
                    contingency: k,
                    side: RocofSide::Upper,
                },
            });
        }
    }
    LpStandardForm {
        objective: p.cost_per_mws.clone(),
        rows,
        upper_bounds_mws: p
            .h_max_mws
            .iter()
            .zip(&p.h0_mws)
            .map(|(hm, h0)| hm - h0)
            .collect(),
    }
}

/// Solves a dispatch LP (either form) with the in-crate simplex.
pub fn solve_lp(form: &LpStandardForm) -> Result<LpOutcome, DispatchError> {
    Ok(lp::solve(&form.to_lp())?)
}

/// Routes row duals back to (machine, contingency) matrices and prices.
///
/// `sigma[k][i]` are the duals exactly as the given form produced them; the
/// price is `price_scale · Σ_k (σ̄ + σ̲)` per machine — `2r` for the natural
/// form, `1` for the normalized form.
pub fn extract_prices(
    form: &LpStandardForm,
    solution: &LpSolution,
    price_scale: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let n = form.objective.len();
    let n_k = form
        .rows
        .iter()
        .map(|r| r.tag.contingency + 1)
        .max()
        .unwrap_or(0);
    let mut sigma_lower = vec![vec![0.0; n]; n_k];
    let mut sigma_upper = vec![vec![0.0; n]; n_k];
    for (r, row) in form.rows.iter().enumerate() {
        let dual = solution.row_duals[r];
        match row.tag.side {
            RocofSide::Lower => sigma_lower[row.tag.contingency][row.tag.gen] = dual,
            RocofSide::Upper => sigma_upper[row.tag.contingency][row.tag.gen] = dual,
        }
    }
    let prices = (0..n)
        .map(|i| {
            let total: f64 = (0..n_k)
                .map(|k| sigma_lower[k][i] + sigma_upper[k][i])
                .sum();
            price_scale * total
        })
        .collect();
    (sigma_lower, sigma_upper, prices)
}

/// Pairs that are unsatisfiable even with the full headroom: the cap needs
/// `f0·|ΔP| / (2r)` total inertia on the machine, more than `h_max`.
fn impossible_pairs(p: &DispatchProblem) -> Vec<ImpossiblePair> {
    let two_r = 2.0 * p.rocof_max_hz_per_s;
    let mut pairs = Vec::new();
    for (k, impacts) in p.impacts_mw.iter().enumerate() {
        for (i, impact) in impacts.iter().enumerate() {
            let required = p.f0_hz * impact.abs() / two_r;
            let slack = 1e-9 * (1.0 + required.abs());
            if required > p.h_max_mws[i] + slack {
                pairs.push(ImpossiblePair {
                    gen: p.gen_ids[i].clone(),
                    contingency_bus: p.contingencies[k].bus.clone(),
                    required_mws: required,
                    available_mws: p.h_max_mws[i],
                });
            }
        }
    }
    pairs
}

/// Full dispatch: build, solve, price via two independent routes, certify
/// optimality, and audit the awarded grid end to end.
pub fn dispatch(
    grid: &GridModel,
    set: &ContingencySet,
    rocof_max_hz_per_s: f64,
) -> Result<DispatchOutcome, DispatchError> {
    let (problem, form) = build_dispatch(grid, set, rocof_max_hz_per_s)?;
    let lowered = form.to_lp();

    let natural = match solve_lp(&form)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible(e) => {
            let pairs = impossible_pairs(&problem);
            debug_assert!(
                !pairs.is_empty(),
                "single-variable rows make infeasibility attributable"
            );
            return Ok(DispatchOutcome::Infeasible(InfeasibleDispatch {
                impossible_pairs: pairs,
                phase1_objective: e.phase1_objective,
            }));
        }
        LpOutcome::Unbounded { .. } => return Err(DispatchError::Unbounded),
    };

    let kkt = lp::kkt_residuals(&lowered, &natural);
    if !kkt.within(tol::KKT_TOL) {
        return Err(DispatchError::KktViolation { residuals: kkt });
    }

    let two_r = 2.0 * rocof_max_hz_per_s;
    let (sigma_lower, sigma_upper, prices) = extract_prices(&form, &natural, two_r);

    // Independent pricing route: solve the pre-scaled LP from scratch and
    // read prices straight off its duals.
    let norm_form = normalized_form(&problem);
    let normalized = match solve_lp(&norm_form)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible(e) => {
            return Err(DispatchError::RouteFeasibilityMismatch(format!(
                "normalized route infeasible (phase-1 objective {:.3e}) after natural route solved",
                e.phase1_objective
            )));
        }
        LpOutcome::Unbounded { .. } => return Err(DispatchError::Unbounded),
    };
    let norm_kkt = lp::kkt_residuals(&norm_form.to_lp(), &normalized);
    if !norm_kkt.within(tol::KKT_TOL) {
        return Err(DispatchError::KktViolation {
            residuals: norm_kkt,
        });
    }
    let (_, _, norm_prices) = extract_prices(&norm_form, &normalized, 1.0);

    for i in 0..prices.len() {
        let scale = prices[i].abs().max(1.0);
        if (prices[i] - norm_prices[i]).abs() > tol::DUAL_ROUTE_TOL * scale {
            return Err(DispatchError::DualRouteMismatch {
                gen: problem.gen_ids[i].clone(),
                natural: prices[i],
                normalized: norm_prices[i],
            });
        }
    }

    // Audit: rebuild the awarded grid and re-run the whole RoCoF pipeline on
    // every contingency; nothing from the LP is trusted here.
    let awarded = grid.with_awarded_inertia(&natural.x);
    let screen = screen_contingencies(
        &awarded,
        &ContingencySet::Explicit(problem.contingencies.clone()),
    )?;
    let (worst_k, worst_report) = screen
        .reports
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.worst_rocof_hz_per_s
                .abs()
                .total_cmp(&b.worst_rocof_hz_per_s.abs())
        })
        .expect("contingency set is non-empty");
    let audit = DispatchAudit {
        worst_bus: worst_report.worst_bus.clone(),
        worst_rocof_hz_per_s: worst_report.worst_rocof_hz_per_s,
        worst_contingency: problem.contingencies[worst_k].bus.clone(),
    };
    if audit.worst_rocof_hz_per_s.abs() > rocof_max_hz_per_s + tol::AUDIT_SLACK_HZ_PER_S {
        return Err(DispatchError::AuditFailure {
            worst_bus: audit.worst_bus,
            worst_rocof: audit.worst_rocof_hz_per_s,
            cap: rocof_max_hz_per_s,
        });
    }

    Ok(DispatchOutcome::Optimal(Box::new(DispatchSolution {
        h_v_mws: natural.x,
        objective: natural.objective,
        sigma_lower,
        sigma_upper,
        prices_per_mws: prices,
        degenerate: !natural.degenerate_rows.is_empty(),
        kkt,
        audit,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_grid;
    use approx::assert_abs_diff_eq;

    fn star_grid() -> GridModel {
        parse_grid(
            r#"{
            "f0_hz": 50.0, "s_base_mva": 100.0, "load_buses": ["L1"],
            "generators": [
                {"id": "G1", "terminal": "L1", "h0_mws": 500.0,
                 "h_max_mws": 5000.0, "b_internal_pu": 5.0, "cost_per_mws": 1.0},
                {"id": "G2", "terminal": "L1", "h0_mws": 2000.0,
                 "h_max_mws": 5000.0, "b_internal_pu": 10.0, "cost_per_mws": 1.0}
            ],
            "lines": []
        }"#,
        )
        .unwrap()
    }

    fn all_buses(mw: f64) -> ContingencySet {
        ContingencySet::AllLoadBuses { p_dis_mw: mw }
    }

    fn optimal(outcome: DispatchOutcome) -> DispatchSolution {
        match outcome {
            DispatchOutcome::Optimal(s) => *s,
            DispatchOutcome::Infeasible(e) => panic!("unexpectedly infeasible: {e:?}"),
        }
    }

    #[test]
    fn star_lp_has_expected_shape() {
        let (problem, form) = build_dispatch(&star_grid(), &all_buses(150.0), 1.0).unwrap();
        assert_eq!(form.objective.len(), 2);
        assert_eq!(form.rows.len(), 4, "2 machines × 1 contingency × 2 sides");
        assert_eq!(form.upper_bounds_mws, vec![4500.0, 3000.0]);
        assert_eq!(problem.impacts_mw.len(), 1);
        assert_abs_diff_eq!(problem.impacts_mw[0][0], 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(problem.impacts_mw[0][1], 100.0, epsilon = 1e-9);

        // Natural-form rows carry -2r on the owning variable; right-hand
        // sides mix the impact drive f0·ΔP with the inertia budget 2r·h0.
        let rhs: Vec<f64> = form.rows.iter().map(|r| r.rhs).collect();
        assert_eq!(form.rows[0].coeffs, vec![-2.0, 0.0]);
        assert_eq!(form.rows[1].coeffs, vec![-2.0, 0.0]);
        assert_eq!(form.rows[2].coeffs, vec![0.0, -2.0]);
        assert_abs_diff_eq!(rhs[0], 3500.0, epsilon = 1e-9); // G1 lower
        assert_abs_diff_eq!(rhs[1], -1500.0, epsilon = 1e-9); // G1 upper
        assert_abs_diff_eq!(rhs[2], 9000.0, epsilon = 1e-9); // G2 lower
        assert_abs_diff_eq!(rhs[3], -1000.0, epsilon = 1e-9); // G2 upper
        assert_eq!(form.rows[1].tag.side, RocofSide::Upper);
        assert_eq!(form.rows[2].tag.gen, 1);
    }

    #[test]
    fn star_dispatch_awards_and_prices() {
        let sol = optimal(dispatch(&star_grid(), &all_buses(150.0), 1.0).unwrap());
        assert_abs_diff_eq!(sol.h_v_mws[0], 750.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.h_v_mws[1], 500.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, 1250.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.prices_per_mws[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.prices_per_mws[1], 1.0, epsilon = 1e-9);
        // The binding side is the upper row (load increase → falling
        // frequency), with natural-form dual c / 2r = 0.5.
        assert_abs_diff_eq!(sol.sigma_upper[0][0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.sigma_upper[0][1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.sigma_lower[0][0], 0.0, epsilon = 1e-12);
        assert!(sol.kkt.within(tol::KKT_TOL));
        assert!(!sol.degenerate);
    }

    #[test]
    fn star_audit_closes_exactly_at_the_cap() {
        let sol = optimal(dispatch(&star_grid(), &all_buses(150.0), 1.0).unwrap());
        // Awarded inertias (1250, 2500) make both machines hit -1.0 Hz/s
        // exactly; the tie breaks to the lexicographically first machine.
        assert_abs_diff_eq!(sol.audit.worst_rocof_hz_per_s, -1.0, epsilon = 1e-9);
        assert_eq!(sol.audit.worst_bus, BusId::from("G1"));
        assert_eq!(sol.audit.worst_contingency, BusId::from("L1"));
    }

    #[test]
    fn slack_cap_awards_nothing_and_prices_zero() {
        let sol = optimal(dispatch(&star_grid(), &all_buses(150.0), 5.0).unwrap());
        assert_eq!(sol.h_v_mws, vec![0.0, 0.0]);
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.prices_per_mws, vec![0.0, 0.0]);
    }

    #[test]
    fn infeasible_cap_names_the_impossible_pair() {
        let mut grid = star_grid();
        grid.generators[0].h_max_mws = 1000.0;
        match dispatch(&grid, &all_buses(150.0), 1.0).unwrap() {
            DispatchOutcome::Infeasible(e) => {
                assert_eq!(e.impossible_pairs.len(), 1);
                let pair = &e.impossible_pairs[0];
                assert_eq!(pair.gen, BusId::from("G1"));
                assert_eq!(pair.contingency_bus, BusId::from("L1"));
                assert_abs_diff_eq!(pair.required_mws, 1250.0, epsilon = 1e-9);
                assert_abs_diff_eq!(pair.available_mws, 1000.0, epsilon = 1e-9);
                assert!(e.phase1_objective > 0.0);
            }
            DispatchOutcome::Optimal(_) => panic!("expected infeasible"),
        }
    }

    #[test]
    fn exactly_critical_headroom_is_feasible() {
        let mut grid = star_grid();
        grid.generators[0].h_max_mws = 1250.0; // headroom equals the need
        let sol = optimal(dispatch(&grid, &all_buses(150.0), 1.0).unwrap());
        assert_abs_diff_eq!(sol.h_v_mws[0], 750.0, epsilon = 1e-9);
        assert!(sol.audit.worst_rocof_hz_per_s.abs() <= 1.0 + tol::AUDIT_SLACK_HZ_PER_S);
    }

    #[test]
    fn rejects_bad_cap() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                dispatch(&star_grid(), &all_buses(150.0), bad),
                Err(DispatchError::BadRocofMax(_))
            ));
        }
    }

    #[test]
    fn tighter_cap_never_costs_less() {
        let grid = star_grid();
        let costs: Vec<f64> = [2.0, 1.5, 1.0, 0.8]
            .iter()
            .map(|&cap| optimal(dispatch(&grid, &all_buses(150.0), cap).unwrap()).objective)
            .collect();
        for pair in costs.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "objective must not fall as the cap tightens: {costs:?}"
            );
        }
    }

    #[test]
    fn positive_price_implies_a_binding_row() {
        let grid = star_grid();
        let (_, form) = build_dispatch(&grid, &all_buses(150.0), 1.0).unwrap();
        let sol = optimal(dispatch(&grid, &all_buses(150.0), 1.0).unwrap());
        for (i, &price) in sol.prices_per_mws.iter().enumerate() {
            if price > 1e-9 {
                let binding = form.rows.iter().any(|row| {
                    row.tag.gen == i && {
                        let lhs = -2.0 * sol.h_v_mws[i];
                        (lhs - row.rhs).abs() <= 1e-6 * (1.0 + row.rhs.abs())
                    }
                });
                assert!(binding, "machine {i} priced {price} without a binding row");
            }
        }
    }

    #[test]
    fn lp_objective_matches_coarse_grid_search() {
        // Independent check on a small instance: exhaustively try awards on
        // a 1 MW·s lattice and compare costs.
        let mut grid = star_grid();
        grid.generators[0].cost_per_mws = 3.0;
        grid.generators[1].cost_per_mws = 1.0;
        let (problem, _) = build_dispatch(&grid, &all_buses(150.0), 1.0).unwrap();
        let sol = optimal(dispatch(&grid, &all_buses(150.0), 1.0).unwrap());

        let feasible = |h: &[f64]| {
            problem.impacts_mw.iter().all(|impacts| {
                impacts.iter().enumerate().all(|(i, &dp)| {
                    let total = problem.h0_mws[i] + h[i];
                    problem.f0_hz * dp.abs() <= 2.0 * problem.rocof_max_hz_per_s * total + 1e-9
                })
            })
        };
        let mut best = f64::INFINITY;
        let u0 = (grid.generators[0].h_max_mws - grid.generators[0].h0_mws) as usize;
        let u1 = (grid.generators[1].h_max_mws - grid.generators[1].h0_mws) as usize;
        // The lattice only needs to reach slightly past the per-machine
        // requirements (1250 and 2500 total), not the full headroom.
        for a in 0..=u0.min(1000) {
            for b in 0..=u1.min(1000) {
                let h = [a as f64, b as f64];
                if feasible(&h) {
                    let cost = 3.0 * h[0] + 1.0 * h[1];
                    if cost < best {
                        best = cost;
                    }
                }
            }
        }
        let step_cost: f64 = 3.0 + 1.0;
        assert!(
            (sol.objective - best).abs() <= step_cost,
            "LP {} vs lattice {}",
            sol.objective,
            best
        );
        assert!(sol.objective <= best + 1e-9, "LP must not exceed the lattice");
    }
}
