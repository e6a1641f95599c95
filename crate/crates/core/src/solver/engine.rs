//! Work-queue machinery behind [`super::solve`].
//!
//! One `SearchContext` describes a single branch-and-bound search (its
//! objective tape, reference domain, incumbent and queue). The outer
//! search may be served by several workers sharing the queue; the inner
//! searches spawned by the separator step run single-threaded on the
//! worker that triggered them, sharing only the global node accounting.

use super::*;
use crate::separability::{check_monotonicity, MonotonicityTag};
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::{Condvar, Mutex};

/// A queued task with the enclosure lower bound of its box, computed
/// when the task was generated.
struct ScoredTask {
    lb: f64,
    seq: u64,
    task: BoxTask,
}

/// Max-heap wrapper ordered so the smallest `(lb, seq)` pops first.
struct HeapEntry(ScoredTask);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .0
            .lb
            .total_cmp(&self.0.lb)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// Terminal fate of a processed (or drained) task.
#[derive(Clone, Copy)]
enum Fate {
    ValueEliminated,
    OptimalityEliminated,
    BoundaryFixed,
    Separated,
    Bisected,
    ActiveLeaf,
    QueuedAtExit,
}

impl Fate {
    fn status(self) -> TraceStatus {
        match self {
            Fate::ValueEliminated => TraceStatus::ValueEliminated,
            Fate::OptimalityEliminated => TraceStatus::OptimalityEliminated,
            Fate::BoundaryFixed => TraceStatus::BoundaryFixed,
            Fate::Separated => TraceStatus::Separated,
            Fate::Bisected | Fate::ActiveLeaf | Fate::QueuedAtExit => TraceStatus::Active,
        }
    }
}

struct AcctInner {
    generated: u64,
    counts: Counts,
    trace: Option<Vec<TraceRecord>>,
}

/// Node accounting shared by the outer search and all inner separator
/// solves: the budget, the fate counters, and the optional trace.
struct Accounting {
    budget: u64,
    exhausted: AtomicBool,
    inner: Mutex<AcctInner>,
}

impl Accounting {
    fn new(budget: u64, record_trace: bool) -> Accounting {
        Accounting {
            budget,
            exhausted: AtomicBool::new(false),
            inner: Mutex::new(AcctInner {
                generated: 0,
                counts: Counts::default(),
                trace: record_trace.then(Vec::new),
            }),
        }
    }

    fn is_exhausted(&self) -> bool {
        self.exhausted.load(AtomicOrdering::Relaxed)
    }

    /// Claims one node from the budget; `None` once the budget is gone.
    fn try_generate(&self) -> Option<u64> {
        let mut inner = self.inner.lock().unwrap();
        if inner.generated >= self.budget {
            self.exhausted.store(true, AtomicOrdering::Relaxed);
            return None;
        }
        inner.generated += 1;
        inner.counts.generated += 1;
        Some(inner.generated)
    }

    fn record(&self, bounds: &IntervalVector, fate: Fate) {
        let mut inner = self.inner.lock().unwrap();
        match fate {
            Fate::ValueEliminated => inner.counts.value_eliminated += 1,
            Fate::OptimalityEliminated => inner.counts.optimality_eliminated += 1,
            Fate::BoundaryFixed => inner.counts.boundary_fixed += 1,
            Fate::Separated => inner.counts.separated += 1,
            Fate::Bisected => inner.counts.bisected += 1,
            Fate::ActiveLeaf | Fate::QueuedAtExit => inner.counts.active_at_exit += 1,
        }
        if let Some(trace) = inner.trace.as_mut() {
            trace.push(TraceRecord {
                bounds: bounds.iter().map(|c| (c.lo(), c.hi())).collect(),
                status: fate.status(),
            });
        }
    }

    fn bump_degenerate(&self) {
        self.inner.lock().unwrap().counts.degenerate_separated += 1;
    }
}

struct QueueCore {
    heap: BinaryHeap<HeapEntry>,
    stack: Vec<ScoredTask>,
    inflight: usize,
    stopped: bool,
    /// Smallest lower bound among boxes that reached `min_width`.
    leaf_floor: f64,
}

impl QueueCore {
    fn new() -> QueueCore {
        QueueCore {
            heap: BinaryHeap::new(),
            stack: Vec::new(),
            inflight: 0,
            stopped: false,
            leaf_floor: f64::INFINITY,
        }
    }

    fn push(&mut self, exploration: Exploration, t: ScoredTask) {
        match exploration {
            Exploration::BestFirstLowerBound => self.heap.push(HeapEntry(t)),
            Exploration::DepthFirst => self.stack.push(t),
        }
    }

    fn pop(&mut self, exploration: Exploration) -> Option<ScoredTask> {
        match exploration {
            Exploration::BestFirstLowerBound => self.heap.pop().map(|e| e.0),
            Exploration::DepthFirst => self.stack.pop(),
        }
    }

    fn pop_any(&mut self) -> Option<ScoredTask> {
        self.heap.pop().map(|e| e.0).or_else(|| self.stack.pop())
    }
}

struct SearchSync {
    core: Mutex<QueueCore>,
    cond: Condvar,
}

impl SearchSync {
    fn new() -> SearchSync {
        SearchSync {
            core: Mutex::new(QueueCore::new()),
            cond: Condvar::new(),
        }
    }
}

struct IncumbentState {
    value: f64,
    point: Option<Vec<f64>>,
}

/// Everything one branch-and-bound search needs. Lock order is always
/// queue before incumbent.
struct SearchContext<'a> {
    original: IntervalVector,
    separators: &'a [VerifiedSeparator],
    config: &'a SolverConfig,
    min_width: f64,
    f_tol: f64,
    acct: &'a Accounting,
    sync: SearchSync,
    incumbent: Mutex<IncumbentState>,
}

impl SearchContext<'_> {
    fn incumbent_value(&self) -> f64 {
        self.incumbent.lock().unwrap().value
    }

    fn offer_incumbent(&self, candidate: Incumbent) {
        let mut inc = self.incumbent.lock().unwrap();
        if candidate.value < inc.value {
            inc.value = candidate.value;
            inc.point = Some(candidate.point);
        }
    }
}

struct SearchOutcome {
    /// Smallest lower bound over boxes still covering candidate minima
    /// (min-width leaves and the queue remainder); `+inf` if none
    /// remain.
    lo: f64,
    incumbent: Option<Incumbent>,
}

/// Claims a node from the budget and computes the child's enclosure
/// lower bound; a failed interval evaluation keeps the box with an
/// unbounded score so it is refined rather than trusted.
fn score(ctx: &SearchContext<'_>, tape: &mut Tape, task: BoxTask) -> Option<ScoredTask> {
    let seq = ctx.acct.try_generate()?;
    let lb = tape
        .forward(&task.bounds)
        .map(|out| out.lo())
        .unwrap_or(f64::NEG_INFINITY);
    Some(ScoredTask { lb, seq, task })
}

fn worker_loop(ctx: &SearchContext<'_>, tape: &mut Tape) {
    loop {
        let scored = {
            let mut core = ctx.sync.core.lock().unwrap();
            loop {
                if core.stopped || ctx.acct.is_exhausted() {
                    core.stopped = true;
                    ctx.sync.cond.notify_all();
                    return;
                }
                if let Some(t) = core.pop(ctx.config.exploration) {
                    // Best-first pops in lower-bound order, so once the
                    // cheapest box cannot undercut the incumbent by more
                    // than f_tol, nothing can: the gap target is met.
                    if ctx.config.exploration == Exploration::BestFirstLowerBound {
                        let inc = ctx.incumbent_value();
                        if inc.is_finite() && t.lb >= inc - ctx.f_tol {
                            core.push(ctx.config.exploration, t);
                            core.stopped = true;
                            ctx.sync.cond.notify_all();
                            return;
                        }
                    }
                    core.inflight += 1;
                    break t;
                }
                if core.inflight == 0 {
                    core.stopped = true;
                    ctx.sync.cond.notify_all();
                    return;
                }
                core = ctx.sync.cond.wait(core).unwrap();
            }
        };

        let children = process_task(ctx, tape, scored);

        let mut core = ctx.sync.core.lock().unwrap();
        for c in children {
            core.push(ctx.config.exploration, c);
        }
        core.inflight -= 1;
        ctx.sync.cond.notify_all();
    }
}

/// Runs one box through the check pipeline and returns its replacement
/// tasks (bisection children, a boundary-fixed child, or a separated
/// slice).
fn process_task(ctx: &SearchContext<'_>, tape: &mut Tape, scored: ScoredTask) -> Vec<ScoredTask> {
    let ScoredTask { lb, task, .. } = scored;

    // Value check on the stored bound against the freshest incumbent;
    // discarded boxes need no sweeps at all.
    if lb > ctx.incumbent_value() {
        ctx.acct.record(&task.bounds, Fate::ValueEliminated);
        return Vec::new();
    }

    // Forward + reverse sweep. Evaluation failures (division by a zero
    // interval, sqrt adjoint at zero) leave `adjoints` empty: the box
    // may still hold the minimum, so it is kept and bisected.
    let adjoints: Option<AdjointResult> = match tape.forward(&task.bounds) {
        Ok(_) => tape.reverse_sweep().ok(),
        Err(_) => None,
    };

    if let Some(adj) = &adjoints {
        match optimality_check(adj, &task, &ctx.original) {
            OptimalityAction::Discard => {
                ctx.acct.record(&task.bounds, Fate::OptimalityEliminated);
                return Vec::new();
            }
            OptimalityAction::FixBoundary { dim, endpoint } => {
                let mut child = task.clone();
                let v = match endpoint {
                    Endpoint::Lower => ctx.original[dim].lo(),
                    Endpoint::Upper => ctx.original[dim].hi(),
                };
                child.fix_dim(dim, v);
                child.depth += 1;
                child.origin = Origin::BoundaryFix;
                ctx.acct.record(&task.bounds, Fate::BoundaryFixed);
                return score(ctx, tape, child).into_iter().collect();
            }
            OptimalityAction::Keep => {}
        }
    }

    if let Some(better) = improve_bound(tape, &task, ctx.incumbent_value()) {
        ctx.offer_incumbent(better);
    }

    if let Some(adj) = &adjoints {
        if ctx.config.separation && !ctx.separators.is_empty() {
            if let Some(reduced) = separator_step(ctx, tape, adj, &task) {
                ctx.acct.record(&task.bounds, Fate::Separated);
                return score(ctx, tape, reduced).into_iter().collect();
            }
        }
    }

    match bisect(&task, ctx.min_width) {
        Ok(children) => {
            ctx.acct.record(&task.bounds, Fate::Bisected);
            children
                .into_iter()
                .filter_map(|c| score(ctx, tape, c))
                .collect()
        }
        Err(NothingToSplit) => {
            ctx.acct.record(&task.bounds, Fate::ActiveLeaf);
            let mut core = ctx.sync.core.lock().unwrap();
            core.leaf_floor = core.leaf_floor.min(lb);
            Vec::new()
        }
    }
}

/// Decomposition step: for every verified separator that is
/// monotone on this box, solve the inner problem (minimize the
/// separator for increasing objectives, maximize for decreasing ones)
/// over its X1 dimensions and pin those dimensions to the inner argmin.
/// Separators are visited innermost-first, so nested candidates see
/// their inner stages already resolved. Returns the reduced task, or
/// `None` when no separator applied.
fn separator_step(
    ctx: &SearchContext<'_>,
    tape: &Tape,
    adj: &AdjointResult,
    task: &BoxTask,
) -> Option<BoxTask> {
    let mut current = task.clone();
    let mut any = false;
    for sep in ctx.separators {
        let free: Vec<usize> = sep
            .x1
            .iter()
            .copied()
            .filter(|&d| current.fixed[d].is_none())
            .collect();
        if free.is_empty() {
            continue;
        }
        let negate = match check_monotonicity(tape, adj, sep.node).tag {
            MonotonicityTag::Unknown => continue,
            MonotonicityTag::Degenerate => {
                // The objective does not vary with the separator here:
                // any slice carries the minimum (degenerate solution).
                for &d in &free {
                    let v = current.bounds[d].midpoint();
                    current.fix_dim(d, v);
                }
                ctx.acct.bump_degenerate();
                any = true;
                continue;
            }
            MonotonicityTag::Increasing => false,
            MonotonicityTag::Decreasing => true,
        };
        if let Some(point) = solve_inner(ctx, tape, sep.node, negate, &current, &free) {
            for &d in &free {
                current.fix_dim(d, point[d]);
            }
            any = true;
        }
    }
    if !any {
        return None;
    }
    current.depth = task.depth + 1;
    current.origin = Origin::Separation;
    Some(current)
}

/// Inner branch-and-bound over the separator's own sub-tape, restricted
/// to the X1 dimensions of the current slice. Shares the global node
/// budget; on exhaustion (or if no point evaluation ever succeeded) the
/// result is dropped and the outer task stays unseparated.
fn solve_inner(
    ctx: &SearchContext<'_>,
    tape: &Tape,
    node: usize,
    negate: bool,
    current: &BoxTask,
    free: &[usize],
) -> Option<Vec<f64>> {
    let mut inner_tape = tape.sub_tape(node, negate);
    let n = current.bounds.len();
    let domain: IntervalVector = (0..n)
        .map(|d| {
            if free.contains(&d) {
                current.bounds[d]
            } else {
                // dimensions the separator does not own are irrelevant
                // to its value; pin them so only X1 is explored
                Interval::point(current.bounds[d].midpoint())
            }
        })
        .collect();
    let fixed = (0..n)
        .map(|d| (!free.contains(&d)).then(|| domain[d].midpoint()))
        .collect();
    let root = BoxTask {
        bounds: domain.clone(),
        fixed,
        depth: 0,
        origin: Origin::Root,
    };
    let inner_ctx = SearchContext {
        original: domain,
        separators: &[],
        config: ctx.config,
        min_width: ctx.min_width,
        // the inner argmin feeds a pinned coordinate of the outer
        // search, so it is located to a tighter gap than the outer one
        f_tol: ctx.config.f_tolerance / 16.0,
        acct: ctx.acct,
        sync: SearchSync::new(),
        incumbent: Mutex::new(IncumbentState {
            value: f64::INFINITY,
            point: None,
        }),
    };
    let outcome = run_search(&inner_ctx, &mut inner_tape, root, 1);
    if ctx.acct.is_exhausted() {
        return None;
    }
    outcome.incumbent.map(|inc| inc.point)
}

fn run_search(
    ctx: &SearchContext<'_>,
    tape: &mut Tape,
    root: BoxTask,
    workers: usize,
) -> SearchOutcome {
    if let Some(scored) = score(ctx, tape, root) {
        ctx.sync
            .core
            .lock()
            .unwrap()
            .push(ctx.config.exploration, scored);
    }
    if workers <= 1 {
        worker_loop(ctx, tape);
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                let mut worker_tape = tape.clone();
                s.spawn(move || worker_loop(ctx, &mut worker_tape));
            }
        });
    }

    // The queue remainder gets a final value check against the best
    // incumbent: boxes whose enclosure lies strictly above it are
    // eliminated, the rest stay active at exit and keep the enclosure
    // honest.
    let inc_value = ctx.incumbent_value();
    let mut core = ctx.sync.core.lock().unwrap();
    let mut lo = core.leaf_floor;
    while let Some(t) = core.pop_any() {
        let enclosure = Interval::new(t.lb, f64::INFINITY).expect("queued bound is not NaN");
        if let ValueCheck::Discard = value_check(enclosure, inc_value) {
            ctx.acct.record(&t.task.bounds, Fate::ValueEliminated);
        } else {
            ctx.acct.record(&t.task.bounds, Fate::QueuedAtExit);
            lo = lo.min(t.lb);
        }
    }
    drop(core);

    let inc = ctx.incumbent.lock().unwrap();
    let incumbent = inc.point.clone().map(|point| Incumbent {
        point,
        value: inc.value,
    });
    SearchOutcome { lo, incumbent }
}

pub(super) fn run(
    program: &crate::functions::ObjectiveProgram,
    domain: &IntervalVector,
    separators: &[VerifiedSeparator],
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    let acct = Accounting::new(config.max_nodes, config.record_trace);
    let mut tape = program.build_tape(config.rounding);
    let ctx = SearchContext {
        original: domain.clone(),
        separators,
        config,
        min_width: config.min_width,
        f_tol: config.f_tolerance,
        acct: &acct,
        sync: SearchSync::new(),
        incumbent: Mutex::new(IncumbentState {
            value: f64::INFINITY,
            point: None,
        }),
    };
    let outcome = run_search(
        &ctx,
        &mut tape,
        BoxTask::root(domain.clone()),
        config.workers,
    );

    let exhausted = acct.is_exhausted();
    let inner = acct.inner.into_inner().unwrap();

    let hi = outcome
        .incumbent
        .as_ref()
        .map(|i| i.value)
        .unwrap_or(f64::INFINITY);
    // No surviving box means every region was eliminated against the
    // incumbent, which therefore attained the minimum.
    let lo = outcome.lo.min(hi);
    let best_value = Interval::new(lo, hi).expect("lower bound cannot exceed incumbent");

    let report = SolveReport {
        best_value,
        incumbent: outcome.incumbent,
        counts: inner.counts,
        trace: inner.trace,
    };
    if exhausted {
        Err(SolverError::BudgetExhausted {
            report: Box::new(report),
        })
    } else {
        Ok(report)
    }
}
