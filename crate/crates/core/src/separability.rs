//! Monotonicity classification and structural-separator verification
//! from interval adjoints.
//!
//! Both checks run on sweeps that already exist: classifying
//! monotonicity reads one adjoint interval of a full reverse sweep
//! (zero extra sweeps), and verifying a separator candidate costs
//! exactly one additional reseeded sweep.

use crate::functions::ObjectiveProgram;
use crate::interval::{Interval, IntervalVector, Rounding};
use crate::tape::{AdjointResult, Tape, TapeError};

/// Sign classification of `df/ds` over a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotonicityTag {
    /// `df/ds >= 0` everywhere (and not identically zero).
    Increasing,
    /// `df/ds <= 0` everywhere (and not identically zero).
    Decreasing,
    /// Adjoint is exactly `[0, 0]`: the objective does not vary with
    /// the node on this box.
    Degenerate,
    /// The adjoint enclosure straddles zero.
    Unknown,
}

/// Monotonicity of the objective with respect to one node, together
/// with the adjoint enclosure it was read from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monotonicity {
    pub tag: MonotonicityTag,
    pub adjoint: Interval,
}

/// Outcome of separator verification.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparatorVerdict {
    Verified {
        /// Inputs the separator owns (reseeded adjoint equals the full
        /// gradient component).
        x1: Vec<usize>,
        /// Inputs the separator does not touch (reseeded adjoint is
        /// zero).
        x2: Vec<usize>,
        /// Set when the verification seed `df/ds` was exactly `[0, 0]`;
        /// the partition then comes from structural reachability.
        degenerate: bool,
    },
    Rejected {
        /// First input whose reseeded adjoint is neither the full
        /// gradient component nor zero. `None` when the rejection is a
        /// partition violation (one of the index sets came out empty).
        witness: Option<usize>,
    },
}

impl SeparatorVerdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, SeparatorVerdict::Verified { .. })
    }
}

/// Classifies monotonicity of the objective w.r.t. node `s` from an
/// existing reverse sweep; performs no tape work itself.
pub fn check_monotonicity(_tape: &Tape, result: &AdjointResult, s: usize) -> Monotonicity {
    let adjoint = result.all_adjoints[s];
    let tag = if adjoint == Interval::ZERO {
        MonotonicityTag::Degenerate
    } else if adjoint.lo() >= 0.0 {
        MonotonicityTag::Increasing
    } else if adjoint.hi() <= 0.0 {
        MonotonicityTag::Decreasing
    } else {
        MonotonicityTag::Unknown
    };
    Monotonicity { tag, adjoint }
}

#[inline]
fn endpoint_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

fn interval_close(a: Interval, b: Interval, tol: f64) -> bool {
    endpoint_close(a.lo(), b.lo(), tol) && endpoint_close(a.hi(), b.hi(), tol)
}

fn is_zero(a: Interval, tol: f64) -> bool {
    interval_close(a, Interval::ZERO, tol)
}

/// Verifies that node `s` is a structural separator on the box the tape
/// was swept on.
///
/// Runs exactly one reseeded sweep with the adjoint of `s` from the
/// full sweep as seed. Every input must then either reproduce its full
/// gradient component endpoint-for-endpoint within `tolerance` (it
/// belongs to X1) or come out as the zero interval (X2). Inputs with a
/// zero adjoint in both sweeps are assigned to X2. Both sweeps traverse
/// identical node sequences in identical order, so true separators
/// match at tolerance zero.
///
/// A degenerate seed (`df/ds = [0, 0]`) carries no adjoint information;
/// the partition then falls back to backward reachability from `s` and
/// the verdict is flagged accordingly.
pub fn verify_separator(
    tape: &mut Tape,
    result: &AdjointResult,
    s: usize,
    tolerance: f64,
) -> Result<SeparatorVerdict, TapeError> {
    assert!(tolerance >= 0.0);
    let n = tape.n_inputs();
    let seed = result.all_adjoints[s];

    if seed == Interval::ZERO {
        let reach = tape.backward_reachable_inputs(s);
        let x1: Vec<usize> = (0..n).filter(|&i| reach[i]).collect();
        let x2: Vec<usize> = (0..n).filter(|&i| !reach[i]).collect();
        if x1.is_empty() || x2.is_empty() {
            return Ok(SeparatorVerdict::Rejected { witness: None });
        }
        return Ok(SeparatorVerdict::Verified {
            x1,
            x2,
            degenerate: true,
        });
    }

    let reseeded = tape.seed_and_sweep(s, seed)?;
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    for i in 0..n {
        let a = reseeded.input_adjoints[i];
        let full = result.input_adjoints[i];
        if is_zero(a, tolerance) {
            x2.push(i);
        } else if interval_close(a, full, tolerance) {
            x1.push(i);
        } else {
            return Ok(SeparatorVerdict::Rejected { witness: Some(i) });
        }
    }
    if x1.is_empty() || x2.is_empty() {
        return Ok(SeparatorVerdict::Rejected { witness: None });
    }
    Ok(SeparatorVerdict::Verified {
        x1,
        x2,
        degenerate: false,
    })
}

/// A separator candidate that passed verification, ready for the
/// solver's decomposition step.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedSeparator {
    pub label: String,
    pub node: usize,
    pub x1: Vec<usize>,
    pub x2: Vec<usize>,
    pub degenerate: bool,
}

/// Verifies a labelled candidate of `program` on `domain`.
///
/// Structural separability is a global property, so the verdict on any
/// box transfers to every other box. When the adjoint sweep hits a
/// domain violation on the given box (e.g. a sqrt adjoint at zero), the
/// check retries on a deterministic sequence of shrunken sub-boxes
/// anchored near the upper quarter of each component; the first box
/// that evaluates decides.
pub fn verify_on_domain(
    program: &ObjectiveProgram,
    domain: &IntervalVector,
    label: &str,
    tolerance: f64,
    rounding: Rounding,
) -> Result<(VerifiedSeparator, SeparatorVerdict), TapeError> {
    let mut tape = program.build_tape(rounding);
    let node = tape
        .mark_index(label)
        .ok_or_else(|| TapeError::UnknownLabel(label.to_string()))?;
    let mut last_err = None;
    for attempt in 0..=6 {
        let candidate = shrink_box(domain, attempt);
        let verdict = (|| {
            tape.forward(&candidate)?;
            let full = tape.reverse_sweep()?;
            verify_separator(&mut tape, &full, node, tolerance)
        })();
        match verdict {
            Ok(verdict) => {
                let (x1, x2, degenerate) = match &verdict {
                    SeparatorVerdict::Verified { x1, x2, degenerate } => {
                        (x1.clone(), x2.clone(), *degenerate)
                    }
                    SeparatorVerdict::Rejected { .. } => (Vec::new(), Vec::new(), false),
                };
                return Ok((
                    VerifiedSeparator {
                        label: label.to_string(),
                        node,
                        x1,
                        x2,
                        degenerate,
                    },
                    verdict,
                ));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Attempt 0 is the box itself; attempt k shrinks every component by
/// 4^-k around its upper quarter point, moving away from typical
/// singular sets (like the origin of a centered box) while staying
/// inside the domain.
fn shrink_box(domain: &IntervalVector, attempt: u32) -> IntervalVector {
    if attempt == 0 {
        return domain.clone();
    }
    let s = 0.25_f64.powi(attempt as i32);
    domain
        .iter()
        .map(|c| {
            let anchor = c.lo() + 0.75 * (c.hi() - c.lo());
            let lo = anchor + (c.lo() - anchor) * s;
            let hi = anchor + (c.hi() - anchor) * s;
            Interval::new(lo, hi).expect("shrunken box stays ordered")
        })
        .collect()
}
