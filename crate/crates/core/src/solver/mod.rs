//! Interval branch-and-bound global minimizer.
//!
//! The solver maintains a queue of box tasks. Each popped box passes
//! through the value check (enclosure lower bound against the
//! incumbent), the first-order optimality check (sign-definite gradient
//! components eliminate interior boxes or pin domain-boundary faces),
//! midpoint bound improvement, the separator decomposition step, and
//! finally bisection. Interval evaluation failures never eliminate a
//! box; such boxes are kept and bisected so the enclosure of the global
//! minimum is preserved.
//!
//! Under best-first exploration the run additionally stops as soon as
//! the popped lower bound proves the incumbent optimal within
//! `f_tolerance`; every queued box then counts as active in the report.

mod engine;

use crate::interval::{Interval, IntervalVector, Rounding};
use crate::separability::{self, VerifiedSeparator};
use crate::tape::{AdjointResult, Tape, TapeError};
use serde::{Deserialize, Serialize};

pub use crate::separability::SeparatorVerdict;

/// How a task entered the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Root,
    Bisection,
    Separation,
    BoundaryFix,
}

/// One work item: a box, the record of dimensions already resolved to a
/// point, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTask {
    pub bounds: IntervalVector,
    /// `Some(v)` marks a dimension fixed at `v`; the corresponding box
    /// component is the degenerate interval `[v, v]`.
    pub fixed: Vec<Option<f64>>,
    pub depth: u32,
    pub origin: Origin,
}

impl BoxTask {
    pub fn root(domain: IntervalVector) -> BoxTask {
        let fixed = vec![None; domain.len()];
        BoxTask {
            bounds: domain,
            fixed,
            depth: 0,
            origin: Origin::Root,
        }
    }

    /// Pin dimension `dim` to `value` (degenerate interval).
    fn fix_dim(&mut self, dim: usize, value: f64) {
        self.bounds.set(dim, Interval::point(value));
        self.fixed[dim] = Some(value);
    }

    /// Evaluation point of the task: box midpoint, with fixed
    /// dimensions at their pinned values.
    pub fn midpoint(&self) -> Vec<f64> {
        self.bounds.midpoint()
    }
}

/// Queue discipline of the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// Pop the box with the smallest enclosure lower bound; ties break
    /// by insertion order. Enables the f_tolerance early stop.
    #[default]
    BestFirstLowerBound,
    /// Last-in-first-out refinement.
    DepthFirst,
}

/// Solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Boxes are not split below this width; must be positive.
    pub min_width: f64,
    /// Target gap between the incumbent and the lower bound.
    pub f_tolerance: f64,
    /// Budget on generated boxes (inner separator solves included).
    pub max_nodes: u64,
    /// Enables the separator decomposition step.
    pub separation: bool,
    pub exploration: Exploration,
    pub rounding: Rounding,
    /// Queue workers; 1 (the default) is deterministic.
    pub workers: usize,
    /// Record one trace row per processed box.
    pub record_trace: bool,
}

impl SolverConfig {
    /// Defaults scaled to a domain: `min_width` is 1e-4 of the initial
    /// width, the gap target is 1e-6, and the node budget is 1e7.
    pub fn defaults_for(domain: &IntervalVector) -> SolverConfig {
        let width = domain.width();
        SolverConfig {
            min_width: if width > 0.0 { 1e-4 * width } else { 1e-12 },
            f_tolerance: 1e-6,
            max_nodes: 10_000_000,
            separation: true,
            exploration: Exploration::BestFirstLowerBound,
            rounding: Rounding::Exact,
            workers: 1,
            record_trace: false,
        }
    }

    fn validate(&self, dim: usize, domain_dim: usize) -> Result<(), SolverError> {
        if dim != domain_dim {
            return Err(SolverError::DimensionMismatch {
                expected: dim,
                got: domain_dim,
            });
        }
        if self.min_width.is_nan() || self.min_width <= 0.0 {
            return Err(SolverError::InvalidConfig("min_width must be positive"));
        }
        if self.f_tolerance.is_nan() || self.f_tolerance <= 0.0 {
            return Err(SolverError::InvalidConfig("f_tolerance must be positive"));
        }
        if self.max_nodes < 1 {
            return Err(SolverError::InvalidConfig("max_nodes must be at least 1"));
        }
        if self.workers < 1 {
            return Err(SolverError::InvalidConfig("workers must be at least 1"));
        }
        Ok(())
    }
}

/// Best known upper bound on the minimum: a point and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Per-fate box counters. `generated` counts every box ever queued
/// (separator inner solves included) and equals the sum of the other
/// fields: every generated box is eventually eliminated, replaced
/// (boundary fix, separation), bisected, or still active at exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub generated: u64,
    pub value_eliminated: u64,
    pub optimality_eliminated: u64,
    pub boundary_fixed: u64,
    pub separated: u64,
    pub bisected: u64,
    /// Separations taken with an exactly-zero separator adjoint
    /// (degenerate solutions; the affected dimensions were pinned to
    /// midpoints).
    pub degenerate_separated: u64,
    /// Boxes that reached `min_width` plus boxes still queued at exit.
    pub active_at_exit: u64,
}

impl Counts {
    /// Boxes whose fate was decided (everything except queue leftovers
    /// never popped).
    pub fn settled(&self) -> u64 {
        self.value_eliminated
            + self.optimality_eliminated
            + self.boundary_fixed
            + self.separated
            + self.bisected
            + self.active_at_exit
    }
}

/// Processing status of a traced box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    /// Kept: bisected, at resolution, or still queued at exit.
    Active,
    ValueEliminated,
    OptimalityEliminated,
    BoundaryFixed,
    Separated,
}

impl TraceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Active => "active",
            TraceStatus::ValueEliminated => "value_eliminated",
            TraceStatus::OptimalityEliminated => "optimality_eliminated",
            TraceStatus::BoundaryFixed => "boundary_fixed",
            TraceStatus::Separated => "separated",
        }
    }
}

/// One trace row: the box (lo/hi per dimension) and its status, in
/// processing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub bounds: Vec<(f64, f64)>,
    pub status: TraceStatus,
}

/// Result of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Enclosure of the global minimum value.
    pub best_value: Interval,
    /// Best evaluated point, if any midpoint evaluation succeeded.
    pub incumbent: Option<Incumbent>,
    pub counts: Counts,
    pub trace: Option<Vec<TraceRecord>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    /// The node budget ran out; the partial report still carries a
    /// valid enclosure of everything explored.
    #[error("node budget exhausted after {} generated boxes", report.counts.generated)]
    BudgetExhausted { report: Box<SolveReport> },
    #[error("unknown separator label {0:?}")]
    UnknownSeparator(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("program has dimension {expected}, domain has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// `bisect` failure: every splittable dimension is already at or below
/// `min_width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no dimension wider than min_width to split")]
pub struct NothingToSplit;

/// Splits every non-fixed dimension wider than `min_width` at its
/// midpoint, producing `2^k` children that partition the task up to
/// shared faces.
pub fn bisect(task: &BoxTask, min_width: f64) -> Result<Vec<BoxTask>, NothingToSplit> {
    let split_dims: Vec<usize> = (0..task.bounds.len())
        .filter(|&d| task.fixed[d].is_none() && task.bounds[d].width() > min_width)
        .collect();
    if split_dims.is_empty() {
        return Err(NothingToSplit);
    }
    let halves: Vec<(Interval, Interval)> = split_dims
        .iter()
        .map(|&d| {
            let c = task.bounds[d];
            let m = c.midpoint();
            (
                Interval::new(c.lo(), m).expect("midpoint inside"),
                Interval::new(m, c.hi()).expect("midpoint inside"),
            )
        })
        .collect();
    let mut children = Vec::with_capacity(1 << split_dims.len());
    for mask in 0..(1_usize << split_dims.len()) {
        let mut bounds = task.bounds.clone();
        for (bit, (&d, h)) in split_dims.iter().zip(&halves).enumerate() {
            bounds.set(d, if mask >> bit & 1 == 0 { h.0 } else { h.1 });
        }
        children.push(BoxTask {
            bounds,
            fixed: task.fixed.clone(),
            depth: task.depth + 1,
            origin: Origin::Bisection,
        });
    }
    Ok(children)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueCheck {
    Keep,
    Discard,
}

/// Discards a box exactly when its enclosure lies strictly above the
/// incumbent: `f([x]).lo > ȳ*`.
pub fn value_check(output: Interval, incumbent_ub: f64) -> ValueCheck {
    if output.lo() > incumbent_ub {
        ValueCheck::Discard
    } else {
        ValueCheck::Keep
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimalityAction {
    Keep,
    Discard,
    /// Re-queue the box with `dim` pinned to the stated endpoint of the
    /// original domain.
    FixBoundary {
        dim: usize,
        endpoint: Endpoint,
    },
}

/// First-order optimality check with boundary handling.
///
/// For every non-fixed dimension whose gradient enclosure is
/// sign-definite, the minimum over the box sits on the favorable face.
/// If that face is interior to the original domain the box is discarded
/// (the face also belongs to a neighboring box); if it lies on the
/// domain boundary the box is replaced by the pinned face. A discard
/// takes precedence over a pending boundary fix.
pub fn optimality_check(
    adjoints: &AdjointResult,
    task: &BoxTask,
    original: &IntervalVector,
) -> OptimalityAction {
    let mut fix: Option<(usize, Endpoint)> = None;
    for d in 0..task.bounds.len() {
        if task.fixed[d].is_some() {
            continue;
        }
        let a = adjoints.input_adjoints[d];
        if a.lo() >= 0.0 {
            if task.bounds[d].lo() == original[d].lo() {
                fix.get_or_insert((d, Endpoint::Lower));
            } else {
                return OptimalityAction::Discard;
            }
        } else if a.hi() <= 0.0 {
            if task.bounds[d].hi() == original[d].hi() {
                fix.get_or_insert((d, Endpoint::Upper));
            } else {
                return OptimalityAction::Discard;
            }
        }
    }
    match fix {
        Some((dim, endpoint)) => OptimalityAction::FixBoundary { dim, endpoint },
        None => OptimalityAction::Keep,
    }
}

/// Evaluates the task midpoint and returns a better incumbent when the
/// value is strictly smaller than `current_value`. Evaluation failures
/// leave the incumbent unchanged.
pub fn improve_bound(tape: &Tape, task: &BoxTask, current_value: f64) -> Option<Incumbent> {
    let point = task.midpoint();
    match tape.eval_real(&point) {
        // an overflowed value is no usable bound
        Ok(value) if value.is_finite() && value < current_value => {
            Some(Incumbent { point, value })
        }
        _ => None,
    }
}

/// Verifies the requested separator labels of `program` on `domain`
/// (tolerance zero), returning each verdict. Labels that cannot be
/// resolved yield an error; rejected candidates are reported, not
/// errors.
pub fn verify_separators(
    program: &crate::functions::ObjectiveProgram,
    domain: &IntervalVector,
    labels: &[String],
    rounding: Rounding,
) -> Result<Vec<(VerifiedSeparator, SeparatorVerdict)>, SolverError> {
    let mut out = Vec::with_capacity(labels.len());
    for label in labels {
        match separability::verify_on_domain(program, domain, label, 0.0, rounding) {
            Ok(pair) => out.push(pair),
            Err(TapeError::UnknownLabel(l)) => return Err(SolverError::UnknownSeparator(l)),
            // Verification could not evaluate on any probe box: treat
            // the candidate as unusable rather than failing the solve.
            Err(_) => continue,
        }
    }
    Ok(out)
}

/// Runs the branch-and-bound search for the global minimum of
/// `program` over `domain`.
///
/// `separators` names the marked nodes to use for decomposition (only
/// consulted when `config.separation` is set); they are verified once
/// up front and rejected candidates are ignored. The returned
/// enclosure `best_value` brackets the global minimum; on budget
/// exhaustion the partial report is carried in the error.
pub fn solve(
    program: &crate::functions::ObjectiveProgram,
    domain: &IntervalVector,
    separators: &[String],
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    config.validate(program.dim(), domain.len())?;
    let mut verified: Vec<VerifiedSeparator> = if config.separation {
        verify_separators(program, domain, separators, config.rounding)?
            .into_iter()
            .filter_map(|(sep, verdict)| verdict.is_verified().then_some(sep))
            .collect()
    } else {
        Vec::new()
    };
    // Nested separators run innermost-first; independent ones keep a
    // stable label order.
    verified.sort_by(|a, b| (a.x1.len(), &a.label).cmp(&(b.x1.len(), &b.label)));
    engine::run(program, domain, &verified, config)
}
