//! Post-contingency frequency analysis for DC power-flow network models.
//!
//! The crate answers three questions about a transmission grid hit by a sudden
//! load step:
//!
//! 1. **Where does the disturbance land?** A reduced susceptance model splits
//!    the network into generator internal nodes and load buses; inverting the
//!    load-side block distributes the post-contingency power mismatch onto the
//!    synchronous machines ([`rocof::distribute_impact`]).
//! 2. **How fast does frequency fall, and where is it worst?** Each machine's
//!    initial rate of change of frequency (RoCoF) follows from its inertia,
//!    and load-bus RoCoF is a convex mixture of machine RoCoFs, so the largest
//!    excursion always sits at a machine terminal
//!    ([`rocof::nodal_rocof_report`]).
//! 3. **How much virtual inertia must each bus buy to cap RoCoF, and what is
//!    that worth?** A linear program awards per-machine virtual inertia at
//!    minimum cost; its dual variables price inertia bus by bus
//!    ([`dispatch::dispatch`]).
//!
//! A time-domain swing-equation integrator ([`swing::simulate_swing`]) serves
//! as an independent cross-check on the algebraic RoCoF path.
//!
//! All internal linear algebra is dense ([`nalgebra`]); the target systems are
//! reduced study networks, not full interconnection cases.

pub mod dispatch;
pub mod grid;
pub mod lp;
pub mod rocof;
pub mod susceptance;
pub mod swing;
pub mod tol;

pub use dispatch::{dispatch, DispatchError, DispatchOutcome, DispatchProblem, DispatchSolution};
pub use grid::{
    parse_grid, validate_grid, BusId, GeneratorSpec, GridModel, LineSpec, ParseError,
    ValidationReport,
};
pub use rocof::{
    nodal_rocof_report, screen_contingencies, BusKind, ContingencySet, Disturbance, RocofError,
    RocofReport,
};
pub use susceptance::{assemble_blocks, certify_invertible, SusceptanceBlocks, SusceptanceError};
pub use swing::{simulate_swing, SimulationTrace, SwingError};
