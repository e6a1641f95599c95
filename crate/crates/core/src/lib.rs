//! Deterministic global minimization with guaranteed enclosures.
//!
//! The crate combines four pieces:
//!
//! * [`interval`] — validated interval arithmetic with optional outward
//!   rounding;
//! * [`tape`] — programs recorded as single assignment code, evaluated
//!   forward with interval arithmetic and backward with interval
//!   adjoints that enclose every gradient over a box;
//! * [`functions`] — a registry of benchmark objectives and a builder
//!   for user programs, each carrying separator marks;
//! * [`separability`] + [`solver`] — monotonicity checks, automatic
//!   separator verification, and an interval branch-and-bound solver
//!   that decomposes problems along verified separators into
//!   lower-dimensional subproblems.

pub mod functions;
pub mod interval;
pub mod separability;
pub mod solver;
pub mod tape;

pub use functions::{make, BenchmarkId, FunctionsError, ObjectiveProgram, SeparatorMark};
pub use interval::{Interval, IntervalError, IntervalVector, Rounding};
pub use separability::{
    check_monotonicity, verify_on_domain, verify_separator, Monotonicity, MonotonicityTag,
    SeparatorVerdict, VerifiedSeparator,
};
pub use solver::{
    solve, BoxTask, Counts, Exploration, Incumbent, SolveReport, SolverConfig, SolverError,
    TraceRecord, TraceStatus,
};
pub use tape::{AdjointResult, NodeId, Tape, TapeBuilder, TapeError};
