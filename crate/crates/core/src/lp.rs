//! Dense two-phase primal simplex for small inequality-form LPs, with exact
//! dual recovery.
//!
//! Problem shape: `min cᵀx` subject to `A x ≤ b`, `x ≥ 0`. Upper bounds on
//! variables are expressed by the caller as ordinary rows, which keeps the
//! solver uniform and makes every bound's dual multiplier come back through
//! the same channel as any other row dual — the inertia-pricing layer depends
//! on that.
//!
//! Design choices, all in favour of auditability over speed:
//!
//! * **Bland's rule everywhere.** Entering column = lowest eligible index;
//!   leaving row = lowest basic index among minimum ratios. Termination is
//!   guaranteed, no cycling, and a given problem always pivots identically,
//!   so solutions are bit-reproducible across runs.
//! * **Duals from the final tableau.** At optimality the reduced cost of row
//!   `r`'s slack column equals the row's dual multiplier `σ_r ≥ 0` — for
//!   rows that entered negated (negative right-hand side) as well, because
//!   the surplus column's sign flip cancels the row negation.
//! * **Certificates, not trust.** [`kkt_residuals`] re-checks primal
//!   feasibility, dual feasibility, stationarity, complementary slackness
//!   and the duality gap against the *original* problem data, so a bug in
//!   the tableau bookkeeping cannot silently leak into dispatch results.
//!
//! Redundant rows (an artificial variable stuck basic at zero after phase
//! one with no real pivot available) are deleted and carry zero duals; their
//! slack columns were never touched by earlier pivots, so deletion cannot
//! disturb the remaining reduced costs.

use thiserror::Error;

use crate::tol;

/// `min cᵀx` s.t. `rows[r].coeffs · x ≤ rows[r].rhs` for all `r`, `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRowData>,
}

/// One `≤` row, dense over all variables.
#[derive(Debug, Clone)]
pub struct LpRowData {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Primal-dual solution at a simplex optimum.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per input row, non-negative at optimality.
    pub row_duals: Vec<f64>,
    /// Final reduced cost per variable — the dual of its `x_j ≥ 0` bound.
    pub reduced_costs: Vec<f64>,
    /// Rows with both (near-)zero slack and (near-)zero dual: the primal
    /// basis is degenerate there and prices may be one of several valid
    /// choices.
    pub degenerate_rows: Vec<usize>,
    pub iterations: usize,
}

/// Evidence returned when phase one cannot zero the artificial variables.
#[derive(Debug, Clone)]
pub struct InfeasibleEvidence {
    /// Minimum attainable sum of constraint violations.
    pub phase1_objective: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(InfeasibleEvidence),
    /// The objective can be pushed to `-∞`; only possible when the caller
    /// forgot to bound a direction.
    Unbounded { entering: usize },
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    RowShape {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in LP data ({context})")]
    NonFinite { context: String },
    #[error("simplex exceeded {0} pivots; problem is ill-posed for this solver")]
    IterationLimit(usize),
}

/// Scaled optimality certificates for a solved LP, all of which must fall
/// below [`tol::KKT_TOL`] for a solution to be trusted.
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    /// Worst scaled violation of `A x ≤ b` and `x ≥ 0`.
    pub primal_infeasibility: f64,
    /// Worst scaled violation of `c + Aᵀσ - z = 0` and `σ, z ≥ 0`.
    pub dual_infeasibility: f64,
    /// Worst scaled product `σ_r · slack_r` or `z_j · x_j`.
    pub complementary_slackness: f64,
    /// `|cᵀx + bᵀσ|`, scaled — primal and dual objectives must meet.
    pub duality_gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_infeasibility
            .max(self.dual_infeasibility)
            .max(self.complementary_slackness)
            .max(self.duality_gap)
    }

    pub fn within(&self, limit: f64) -> bool {
        self.max() <= limit
    }
}

struct Tableau {
    /// Constraint rows × (structural + slack + artificial) columns.
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Basic column of each row.
    basis: Vec<usize>,
    /// Reduced-cost row of the true objective, kept consistent through both
    /// phases.
    cost: Vec<f64>,
    n: usize,
    slack_start: usize,
}

pub fn solve(problem: &LpProblem) -> Result<LpOutcome, LpError> {
    validate_problem(problem)?;
    let n = problem.objective.len();
    let m = problem.rows.len();
    let slack_start = n;
    let art_start = n + m;

    // Count artificials: one per negative right-hand side.
    let negated: Vec<bool> = problem.rows.iter().map(|r| r.rhs < 0.0).collect();
    let n_art = negated.iter().filter(|&&v| v).count();
    let ncols = n + m + n_art;

    let mut t = Tableau {
        a: vec![vec![0.0; ncols]; m],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        cost: {
            let mut c = vec![0.0; ncols];
            c[..n].copy_from_slice(&problem.objective);
            c
        },
        n,
        slack_start,
    };

    let mut art_col = art_start;
    for (r, row) in problem.rows.iter().enumerate() {
        if negated[r] {
            for (j, &v) in row.coeffs.iter().enumerate() {
                t.a[r][j] = -v;
            }
            t.a[r][slack_start + r] = -1.0;
            t.a[r][art_col] = 1.0;
            t.rhs[r] = -row.rhs;
            t.basis[r] = art_col;
            art_col += 1;
        } else {
            t.a[r][..n].copy_from_slice(&row.coeffs);
            t.a[r][slack_start + r] = 1.0;
            t.rhs[r] = row.rhs;
            t.basis[r] = slack_start + r;
        }
    }

    let mut iterations = 0usize;
    let iter_cap = 50_000 + 100 * (n + m);

    if n_art > 0 {
        // Phase one: minimise the sum of artificials. The reduced phase-one
        // cost row starts as -Σ (artificial-basic rows) on real columns and
        // zero on the (basic) artificials themselves. Artificials never
        // re-enter once they leave, hence the `art_start` entry limit.
        let mut p1cost = vec![0.0; ncols];
        for r in 0..m {
            if t.basis[r] >= art_start {
                for (j, c) in p1cost.iter_mut().enumerate().take(art_start) {
                    *c -= t.a[r][j];
                }
            }
        }

        loop {
            iterations += 1;
            if iterations > iter_cap {
                return Err(LpError::IterationLimit(iter_cap));
            }
            let Some(enter) = entering_column(&p1cost, art_start) else {
                break;
            };
            let Some(leave) = leaving_row(&t, enter) else {
                // Phase-one objective is bounded below by zero; no leaving
                // row would mean an unbounded descent, which cannot happen.
                unreachable!("phase-one subproblem cannot be unbounded");
            };
            pivot_with_cost(&mut t, leave, enter, &mut p1cost);
        }

        // Remaining infeasibility is exactly the artificial mass still in
        // the basis; read it off the tableau rather than tracking deltas.
        let p1obj: f64 = t
            .basis
            .iter()
            .zip(&t.rhs)
            .filter(|(&b, _)| b >= art_start)
            .map(|(_, &v)| v)
            .sum();
        let scale = 1.0 + problem.rows.iter().fold(0.0_f64, |a, r| a.max(r.rhs.abs()));
        if p1obj > tol::LP_FEAS_TOL * scale {
            return Ok(LpOutcome::Infeasible(InfeasibleEvidence {
                phase1_objective: p1obj,
            }));
        }

        // Drive leftover artificials out of the basis, or delete the row as
        // redundant when no real column can take over.
        let mut r = 0;
        while r < t.a.len() {
            if t.basis[r] >= art_start {
                let pivot_col = (0..art_start)
                    .find(|&j| t.a[r][j].abs() > tol::LP_PIVOT_TOL);
                match pivot_col {
                    Some(j) => {
                        pivot(&mut t, r, j);
                        r += 1;
                    }
                    None => {
                        t.a.remove(r);
                        t.rhs.remove(r);
                        t.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    // Phase two on the true objective. Artificial columns are dead: never
    // eligible to enter.
    loop {
        iterations += 1;
        if iterations > iter_cap {
            return Err(LpError::IterationLimit(iter_cap));
        }
        let Some(enter) = entering_column(&t.cost, art_start) else {
            break;
        };
        let Some(leave) = leaving_row(&t, enter) else {
            return Ok(LpOutcome::Unbounded { entering: enter });
        };
        pivot(&mut t, leave, enter);
    }

    Ok(LpOutcome::Optimal(extract_solution(problem, &t, iterations)))
}

fn validate_problem(problem: &LpProblem) -> Result<(), LpError> {
    let n = problem.objective.len();
    if problem.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::NonFinite {
            context: "objective".to_owned(),
        });
    }
    for (r, row) in problem.rows.iter().enumerate() {
        if row.coeffs.len() != n {
            return Err(LpError::RowShape {
                row: r,
                got: row.coeffs.len(),
                expected: n,
            });
        }
        if row.coeffs.iter().any(|v| !v.is_finite()) || !row.rhs.is_finite() {
            return Err(LpError::NonFinite {
                context: format!("row {r}"),
            });
        }
    }
    Ok(())
}

/// Bland: the lowest column index with a meaningfully negative reduced cost,
/// restricted to columns `< limit`.
fn entering_column(cost: &[f64], limit: usize) -> Option<usize> {
    (0..limit).find(|&j| cost[j] < -tol::LP_PIVOT_TOL)
}

/// Bland ratio test: minimum `rhs / a` over positive pivots; ties go to the
/// row whose basic variable has the lowest index.
fn leaving_row(t: &Tableau, enter: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for r in 0..t.a.len() {
        let a = t.a[r][enter];
        if a > tol::LP_PIVOT_TOL {
            let ratio = t.rhs[r] / a;
            best = match best {
                None => Some((r, ratio)),
                Some((br, bratio)) => {
                    if ratio < bratio - 1e-12
                        || ((ratio - bratio).abs() <= 1e-12 && t.basis[r] < t.basis[br])
                    {
                        Some((r, ratio))
                    } else {
                        Some((br, bratio))
                    }
                }
            };
        }
    }
    best.map(|(r, _)| r)
}

fn pivot(t: &mut Tableau, leave: usize, enter: usize) {
    let ncols = t.cost.len();
    let p = t.a[leave][enter];
    for j in 0..ncols {
        t.a[leave][j] /= p;
    }
    t.rhs[leave] /= p;
    t.a[leave][enter] = 1.0; // kill rounding on the pivot itself

    for r in 0..t.a.len() {
        if r == leave {
            continue;
        }
        let f = t.a[r][enter];
        if f != 0.0 {
            for j in 0..ncols {
                t.a[r][j] -= f * t.a[leave][j];
            }
            t.a[r][enter] = 0.0;
            t.rhs[r] -= f * t.rhs[leave];
        }
    }

    let f = t.cost[enter];
    if f != 0.0 {
        for j in 0..ncols {
            t.cost[j] -= f * t.a[leave][j];
        }
        t.cost[enter] = 0.0;
    }
    t.basis[leave] = enter;
}

/// Pivot that also keeps a phase-one cost row reduced. The elimination uses
/// the pivot row *after* normalisation, so the multiplier is the raw
/// phase-one reduced cost of the entering column.
fn pivot_with_cost(t: &mut Tableau, leave: usize, enter: usize, p1cost: &mut [f64]) {
    let pe = p1cost[enter];
    pivot(t, leave, enter);
    if pe != 0.0 {
        for (j, c) in p1cost.iter_mut().enumerate() {
            *c -= pe * t.a[leave][j];
        }
        p1cost[enter] = 0.0;
    }
}

fn extract_solution(problem: &LpProblem, t: &Tableau, iterations: usize) -> LpSolution {
    let n = t.n;
    let m = problem.rows.len();
    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[r];
        }
    }
    let objective = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();

    // Row dual = final reduced cost of the row's slack column; deleted
    // (redundant) rows keep dual zero.
    let mut row_duals = vec![0.0; m];
    for (r, dual) in row_duals.iter_mut().enumerate() {
        let d = t.cost[t.slack_start + r];
        *dual = if d.abs() < 1e-13 { 0.0 } else { d };
    }
    let reduced_costs: Vec<f64> = (0..n).map(|j| t.cost[j]).collect();

    let mut degenerate_rows = Vec::new();
    for (r, row) in problem.rows.iter().enumerate() {
        let slack = row.rhs
            - row
                .coeffs
                .iter()
                .zip(&x)
                .map(|(a, v)| a * v)
                .sum::<f64>();
        let scale = 1.0 + row.rhs.abs();
        if slack.abs() <= tol::LP_DEGENERACY_TOL * scale
            && row_duals[r].abs() <= tol::LP_DEGENERACY_TOL
        {
            degenerate_rows.push(r);
        }
    }

    LpSolution {
        x,
        objective,
        row_duals,
        reduced_costs,
        degenerate_rows,
        iterations,
    }
}

/// Re-derives every optimality certificate from the original problem data.
pub fn kkt_residuals(problem: &LpProblem, solution: &LpSolution) -> KktResiduals {
    let n = problem.objective.len();
    let mut primal = 0.0_f64;
    let mut comp = 0.0_f64;

    for (r, row) in problem.rows.iter().enumerate() {
        let ax: f64 = row.coeffs.iter().zip(&solution.x).map(|(a, v)| a * v).sum();
        let scale = 1.0 + row.rhs.abs();
        primal = primal.max((ax - row.rhs) / scale);
        comp = comp.max((solution.row_duals[r] * (row.rhs - ax)).abs() / scale);
    }
    for &v in &solution.x {
        primal = primal.max(-v);
    }

    let mut dual = 0.0_f64;
    let cost_scale = 1.0
        + problem
            .objective
            .iter()
            .fold(0.0_f64, |a, c| a.max(c.abs()));
    for j in 0..n {
        let mut stat = problem.objective[j] - solution.reduced_costs[j];
        for (r, row) in problem.rows.iter().enumerate() {
            stat += solution.row_duals[r] * row.coeffs[j];
        }
        dual = dual.max(stat.abs() / cost_scale);
        dual = dual.max(-solution.reduced_costs[j] / cost_scale);
        comp = comp.max((solution.reduced_costs[j] * solution.x[j]).abs() / cost_scale);
    }
    for &s in &solution.row_duals {
        dual = dual.max(-s / cost_scale);
    }

    let b_dot_sigma: f64 = problem
        .rows
        .iter()
        .zip(&solution.row_duals)
        .map(|(row, s)| row.rhs * s)
        .sum();
    let gap = (solution.objective + b_dot_sigma).abs() / (1.0 + solution.objective.abs());

    KktResiduals {
        primal_infeasibility: primal.max(0.0),
        dual_infeasibility: dual.max(0.0),
        complementary_slackness: comp,
        duality_gap: gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn row(coeffs: &[f64], rhs: f64) -> LpRowData {
        LpRowData {
            coeffs: coeffs.to_vec(),
            rhs,
        }
    }

    fn solve_optimal(problem: &LpProblem) -> LpSolution {
        match solve(problem).unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn one_variable_lower_bound_row() {
        // min x s.t. x ≥ 5 (as -x ≤ -5), x ≤ 10.
        let p = LpProblem {
            objective: vec![1.0],
            rows: vec![row(&[-1.0], -5.0), row(&[1.0], 10.0)],
        };
        let s = solve_optimal(&p);
        assert_abs_diff_eq!(s.x[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.row_duals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.row_duals[1], 0.0, epsilon = 1e-12);
        assert!(kkt_residuals(&p, &s).within(1e-9));
    }

    #[test]
    fn two_variable_classic() {
        // max x + y s.t. x + 2y ≤ 4, 3x + y ≤ 6  →  min -x - y.
        // Optimum at the row intersection: x = 8/5, y = 6/5.
        let p = LpProblem {
            objective: vec![-1.0, -1.0],
            rows: vec![row(&[1.0, 2.0], 4.0), row(&[3.0, 1.0], 6.0)],
        };
        let s = solve_optimal(&p);
        assert_abs_diff_eq!(s.x[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, -2.8, epsilon = 1e-12);
        // Duals solve the transposed system: σ1 + 3σ2 = 1, 2σ1 + σ2 = 1.
        assert_abs_diff_eq!(s.row_duals[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(s.row_duals[1], 0.2, epsilon = 1e-12);
        assert!(kkt_residuals(&p, &s).within(1e-9));
    }

    #[test]
    fn infeasible_box_is_detected() {
        // x ≤ 1 and x ≥ 3 cannot both hold.
        let p = LpProblem {
            objective: vec![1.0],
            rows: vec![row(&[1.0], 1.0), row(&[-1.0], -3.0)],
        };
        match solve(&p).unwrap() {
            LpOutcome::Infeasible(e) => assert!(e.phase1_objective > 1.0),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_direction_is_detected() {
        let p = LpProblem {
            objective: vec![-1.0],
            rows: vec![],
        };
        assert!(matches!(
            solve(&p).unwrap(),
            LpOutcome::Unbounded { entering: 0 }
        ));
    }

    #[test]
    fn duplicate_binding_rows_flag_degeneracy() {
        // max x with x ≤ 1 stated twice: one row takes the whole dual, the
        // twin sits at zero slack and zero dual — degenerate.
        let p = LpProblem {
            objective: vec![-1.0],
            rows: vec![row(&[1.0], 1.0), row(&[1.0], 1.0)],
        };
        let s = solve_optimal(&p);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.row_duals[0] + s.row_duals[1], 1.0, epsilon = 1e-12);
        assert_eq!(s.degenerate_rows.len(), 1);
        assert!(kkt_residuals(&p, &s).within(1e-9));
    }

    #[test]
    fn redundant_negated_row_is_dropped_with_zero_dual() {
        // x ≥ 2 twice: phase one satisfies one copy, the other row becomes
        // redundant and must come back with dual exactly zero.
        let p = LpProblem {
            objective: vec![1.0],
            rows: vec![row(&[-1.0], -2.0), row(&[-1.0], -2.0)],
        };
        let s = solve_optimal(&p);
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.row_duals[0] + s.row_duals[1], 1.0, epsilon = 1e-12);
        assert!(s.row_duals.contains(&0.0));
        assert!(kkt_residuals(&p, &s).within(1e-9));
    }

    #[test]
    fn mixed_signs_needing_both_phases() {
        // min 2x + 3y s.t. x + y ≥ 4, x - y ≤ 2, y ≤ 3.
        // Candidate corners: (4,0) infeasible for row 2 (4 ≤ 2 fails... 4-0=4>2),
        // so optimum balances x+y=4 with x-y=2 → (3,1), cost 9; versus (1,3),
        // cost 11. Optimum (3,1).
        let p = LpProblem {
            objective: vec![2.0, 3.0],
            rows: vec![
                row(&[-1.0, -1.0], -4.0),
                row(&[1.0, -1.0], 2.0),
                row(&[0.0, 1.0], 3.0),
            ],
        };
        let s = solve_optimal(&p);
        assert_abs_diff_eq!(s.x[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 9.0, epsilon = 1e-12);
        let k = kkt_residuals(&p, &s);
        assert!(k.within(1e-9), "kkt: {k:?}");
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let p = LpProblem {
            objective: vec![2.0, 3.0, 0.5],
            rows: vec![
                row(&[-1.0, -1.0, -0.5], -4.0),
                row(&[1.0, -1.0, 2.0], 2.0),
                row(&[0.0, 1.0, 1.0], 3.0),
            ],
        };
        let a = solve_optimal(&p);
        let b = solve_optimal(&p);
        assert_eq!(a.x, b.x);
        assert_eq!(a.row_duals, b.row_duals);
        assert_eq!(a.iterations, b.iterations);
    }

    mod random_certified {
        use super::*;
        use proptest::prelude::*;

        // Feasible-by-construction instances: pick a target point x*, make
        // every row hold at x* with selectable slack. Weak duality then gives
        // an oracle: the solver's optimum can never exceed the cost of x*,
        // and the KKT certificates must close.
        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn certified_optima_beat_known_feasible_points(
                n in 1usize..4,
                m in 0usize..6,
                seeds in proptest::collection::vec(0.0_f64..10.0, 4),
                coefs in proptest::collection::vec(-3.0_f64..3.0, 24),
                slacks in proptest::collection::vec(0.0_f64..5.0, 6),
                costs in proptest::collection::vec(0.0_f64..4.0, 4),
            ) {
                let xstar: Vec<f64> = seeds.iter().take(n).copied().collect();
                let objective: Vec<f64> = costs.iter().take(n).copied().collect();
                let mut rows = Vec::new();
                for r in 0..m {
                    let coeffs: Vec<f64> =
                        (0..n).map(|j| coefs[(r * n + j) % coefs.len()]).collect();
                    let ax: f64 = coeffs.iter().zip(&xstar).map(|(a, v)| a * v).sum();
                    rows.push(LpRowData { coeffs, rhs: ax + slacks[r % slacks.len()] });
                }
                let p = LpProblem { objective, rows };
                match solve(&p).unwrap() {
                    LpOutcome::Optimal(s) => {
                        let feasible_cost: f64 = p
                            .objective
                            .iter()
                            .zip(&xstar)
                            .map(|(c, v)| c * v)
                            .sum();
                        prop_assert!(s.objective <= feasible_cost + 1e-7);
                        let k = kkt_residuals(&p, &s);
                        prop_assert!(k.within(1e-7), "kkt residuals {k:?}");
                    }
                    LpOutcome::Infeasible(_) => {
                        prop_assert!(false, "feasible-by-construction LP reported infeasible");
                    }
                    LpOutcome::Unbounded { .. } => {
                        // Legitimate when no row caps a zero-cost direction;
                        // with non-negative costs this needs a zero cost.
                        prop_assert!(p.objective.contains(&0.0) || m == 0);
                    }
                }
            }
        }
    }
}
