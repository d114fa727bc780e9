//! Numerical tolerances used across the crate, in one place so their
//! relationships stay visible.
//!
//! Three families:
//!
//! * **linear-algebra guards** — how far from singular or from an exact
//!   solve we tolerate the susceptance system to be;
//! * **physical identities** — slack allowed on conservation laws and
//!   convex-mixture structure that hold exactly in real arithmetic;
//! * **optimisation certificates** — how tight the LP's feasibility,
//!   optimality and dual agreements must be before a dispatch is accepted.

/// Reciprocal condition estimate below which the diagonally equilibrated
/// load-side susceptance block is treated as numerically singular. For a
/// connected grid the block is an irreducibly diagonally dominant M-matrix
/// and sits far above this; values below it indicate a broken topology.
pub const RCOND_MIN: f64 = 1e-12;

/// Relative residual `‖B_BB x - rhs‖_inf / ‖rhs‖_inf` allowed on any linear
/// solve against the load-side block. LU with partial pivoting is backward
/// stable, so residuals land near machine epsilon; exceeding this means the
/// factorization cannot be trusted.
pub const SOLVE_RESIDUAL_REL: f64 = 1e-9;

/// Absolute slack, MW, allowed on the power-conservation identity: machine
/// impact shares must sum to the disturbance size.
pub const CONSERVATION_TOL_MW: f64 = 1e-6;

/// How far each propagation-matrix row sum may deviate from exactly 1.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Most negative value a propagation-matrix entry may take. Entries are
/// provably non-negative; this absorbs rounding in the block solves.
pub const ENTRY_FLOOR: f64 = -1e-12;

/// Two RoCoF magnitudes within this of each other count as tied when picking
/// the worst bus, so ranking does not depend on last-bit noise.
pub const ARGMAX_TIE_TOL: f64 = 1e-9;

/// Scaled ceiling for every LP optimality certificate: primal feasibility,
/// dual feasibility, complementary slackness, and the duality gap.
pub const KKT_TOL: f64 = 1e-7;

/// Relative disagreement allowed between inertia prices recovered from the
/// natural-form LP duals and from the independently solved normalized-form
/// LP. The two routes differ only by a row scaling, so they must agree to
/// rounding.
pub const DUAL_ROUTE_TOL: f64 = 1e-9;

/// Post-dispatch audit slack, Hz/s: re-analysed worst-case RoCoF of the
/// awarded grid may exceed the cap by at most this much.
pub const AUDIT_SLACK_HZ_PER_S: f64 = 1e-6;

/// Reduced costs less negative than this do not qualify a column to enter
/// the simplex basis; pivot elements smaller in magnitude are not eligible
/// in the ratio test.
pub const LP_PIVOT_TOL: f64 = 1e-10;

/// A phase-one artificial objective below this (scaled by the constraint
/// norms) certifies feasibility.
pub const LP_FEAS_TOL: f64 = 1e-7;

/// Slack and dual values within this of zero count as zero when flagging a
/// degenerate dispatch.
pub const LP_DEGENERACY_TOL: f64 = 1e-9;

/// Per-step local truncation error, relative to state norm, above which the
/// swing integrator rejects the requested step size instead of returning an
/// under-resolved trace.
pub const ODE_LTE_TOL: f64 = 1e-7;
