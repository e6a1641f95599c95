//! Registry of objective programs: five standard global-optimization
//! benchmarks plus a builder hook for user-defined functions.
//!
//! Each program knows its dimension, its default search box, how to emit
//! its assignment sequence into a [`TapeBuilder`], and which intermediate
//! nodes are marked as separator candidates or monotonicity probes.

use crate::interval::{IntervalVector, Rounding};
use crate::tape::{NodeId, Tape, TapeBuilder, TapeError};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Identifier of a built-in benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkId {
    StyblinskiTang,
    Exponential,
    RecursiveExponential,
    Shubert,
    Salomon,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 5] = [
        BenchmarkId::StyblinskiTang,
        BenchmarkId::Exponential,
        BenchmarkId::RecursiveExponential,
        BenchmarkId::Shubert,
        BenchmarkId::Salomon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkId::StyblinskiTang => "styblinski_tang",
            BenchmarkId::Exponential => "exponential",
            BenchmarkId::RecursiveExponential => "recursive_exponential",
            BenchmarkId::Shubert => "shubert",
            BenchmarkId::Salomon => "salomon",
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkId {
    type Err = FunctionsError;
    fn from_str(s: &str) -> Result<Self, FunctionsError> {
        BenchmarkId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| FunctionsError::UnknownBenchmark(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FunctionsError {
    #[error("unknown benchmark {0:?} (valid: styblinski_tang, exponential, recursive_exponential, shubert, salomon)")]
    UnknownBenchmark(String),
    #[error("benchmark {name} requires dimension >= {min}, got {n}")]
    InvalidDimension {
        name: &'static str,
        n: usize,
        min: usize,
    },
}

/// A labelled intermediate of interest: a separator candidate (to be
/// verified, then exploited by the solver) or a plain monotonicity
/// probe.
#[derive(Debug, Clone)]
pub struct SeparatorMark {
    pub label: String,
    pub description: String,
    /// Which inputs the separator is expected to own; only cross-checked
    /// in tests, the verified sets are always recomputed from sweeps.
    pub x1_hint: Vec<usize>,
}

type BuildFn = dyn Fn(&mut TapeBuilder) -> NodeId + Send + Sync;

/// An objective function as a reproducible tape-recording recipe.
///
/// Programs are immutable after construction and cheap to share.
#[derive(Clone)]
pub struct ObjectiveProgram {
    name: String,
    dim: usize,
    default_box: IntervalVector,
    separators: Vec<SeparatorMark>,
    build: Arc<BuildFn>,
}

impl fmt::Debug for ObjectiveProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveProgram")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("default_box", &self.default_box)
            .field("separators", &self.separators)
            .finish_non_exhaustive()
    }
}

impl ObjectiveProgram {
    /// Wraps a user-supplied builder. The builder must emit the same
    /// node sequence on every call and return the output node.
    pub fn from_builder(
        name: impl Into<String>,
        dim: usize,
        default_box: IntervalVector,
        separators: Vec<SeparatorMark>,
        build: impl Fn(&mut TapeBuilder) -> NodeId + Send + Sync + 'static,
    ) -> ObjectiveProgram {
        assert_eq!(default_box.len(), dim);
        ObjectiveProgram {
            name: name.into(),
            dim,
            default_box,
            separators,
            build: Arc::new(build),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn default_box(&self) -> &IntervalVector {
        &self.default_box
    }

    /// Separator candidates in declaration order.
    pub fn separator_marks(&self) -> &[SeparatorMark] {
        &self.separators
    }

    /// Emits the assignment sequence into a fresh tape without
    /// evaluating it.
    pub fn build_tape(&self, rounding: Rounding) -> Tape {
        let mut builder = TapeBuilder::new(self.dim);
        let output = (self.build)(&mut builder);
        builder.finish(output, rounding)
    }

    /// Records the program on `domain`: builds the tape and runs the
    /// forward interval sweep, leaving every node value set.
    pub fn record(&self, domain: &IntervalVector, rounding: Rounding) -> Result<Tape, TapeError> {
        let mut tape = self.build_tape(rounding);
        tape.forward(domain)?;
        Ok(tape)
    }

    /// Real-arithmetic evaluation of the same assignment sequence.
    pub fn eval_real(&self, x: &[f64]) -> Result<f64, TapeError> {
        self.build_tape(Rounding::Exact).eval_real(x)
    }
}

/// Builds a benchmark program of dimension `n` with its standard
/// search box.
pub fn make(id: BenchmarkId, n: usize) -> Result<ObjectiveProgram, FunctionsError> {
    if n < 1 {
        return Err(FunctionsError::InvalidDimension {
            name: id.name(),
            n,
            min: 1,
        });
    }
    Ok(match id {
        BenchmarkId::StyblinskiTang => styblinski_tang(n),
        BenchmarkId::Exponential => exponential(n),
        BenchmarkId::RecursiveExponential => recursive_exponential(n, -2.1, 2.0),
        BenchmarkId::Shubert => shubert(n),
        BenchmarkId::Salomon => salomon(n),
    })
}

/// The Recursive Exponential on its wider literature box `[-2, 3]^n`
/// (the registry default is the tighter `[-2.1, 2.0]^n`).
pub fn recursive_exponential_wide(n: usize) -> ObjectiveProgram {
    recursive_exponential(n, -2.0, 3.0)
}

fn uniform_box(n: usize, lo: f64, hi: f64) -> IntervalVector {
    IntervalVector::uniform(n, lo, hi).expect("static benchmark box")
}

/// f(x) = 1/2 * sum_i (x_i^4 - 16 x_i^2 + 5 x_i), separators s_i = the
/// i-th term.
fn styblinski_tang(n: usize) -> ObjectiveProgram {
    let separators = (0..n)
        .map(|i| SeparatorMark {
            label: format!("s{i}"),
            description: format!("term x{i}^4 - 16 x{i}^2 + 5 x{i}"),
            x1_hint: vec![i],
        })
        .collect();
    ObjectiveProgram::from_builder(
        "styblinski_tang",
        n,
        uniform_box(n, -5.0, 5.0),
        separators,
        move |b| {
            let mut terms = Vec::with_capacity(n);
            for i in 0..n {
                let x = b.input(i);
                let x4 = b.pow_int(x, 4);
                let x2 = b.sqr(x);
                let t2 = b.scale(x2, -16.0);
                let t3 = b.scale(x, 5.0);
                let s = b.sum(&[x4, t2, t3]);
                b.mark(&format!("s{i}"), s);
                terms.push(s);
            }
            let total = b.sum(&terms);
            b.scale(total, 0.5)
        },
    )
}

/// f(x) = -exp(-1/2 * sum_i x_i^2), separators s_i = x_i^2.
fn exponential(n: usize) -> ObjectiveProgram {
    let separators = (0..n)
        .map(|i| SeparatorMark {
            label: format!("s{i}"),
            description: format!("x{i}^2"),
            x1_hint: vec![i],
        })
        .collect();
    ObjectiveProgram::from_builder(
        "exponential",
        n,
        uniform_box(n, -1.0, 1.0),
        separators,
        move |b| {
            let mut squares = Vec::with_capacity(n);
            for i in 0..n {
                let x = b.input(i);
                let s = b.sqr(x);
                b.mark(&format!("s{i}"), s);
                squares.push(s);
            }
            let total = b.sum(&squares);
            let arg = b.scale(total, -0.5);
            let e = b.exp(arg);
            b.neg(e)
        },
    )
}

/// y_0 = 1, y_{i+1} = exp(x_i^2 + y_i - 1), f = y_n; separators
/// y_1 .. y_{n-1}. The constant y_0 is folded into the first
/// assignment.
fn recursive_exponential(n: usize, lo: f64, hi: f64) -> ObjectiveProgram {
    let separators = (1..n)
        .map(|i| SeparatorMark {
            label: format!("y{i}"),
            description: format!("recursion stage y{i}"),
            x1_hint: (0..i).collect(),
        })
        .collect();
    ObjectiveProgram::from_builder(
        "recursive_exponential",
        n,
        uniform_box(n, lo, hi),
        separators,
        move |b| {
            let x0 = b.input(0);
            let sq0 = b.sqr(x0);
            let mut y = b.exp(sq0);
            if n > 1 {
                b.mark("y1", y);
            }
            for i in 1..n {
                let x = b.input(i);
                let sq = b.sqr(x);
                let sum = b.add(sq, y);
                let arg = b.shift(sum, -1.0);
                y = b.exp(arg);
                if i + 1 < n {
                    b.mark(&format!("y{}", i + 1), y);
                }
            }
            y
        },
    )
}

/// f(x) = prod_i sum_{j=1..5} cos((j+1) x_i + j), separators s_i = the
/// i-th factor.
fn shubert(n: usize) -> ObjectiveProgram {
    let separators = (0..n)
        .map(|i| SeparatorMark {
            label: format!("s{i}"),
            description: format!("factor sum_j cos((j+1) x{i} + j)"),
            x1_hint: vec![i],
        })
        .collect();
    ObjectiveProgram::from_builder(
        "shubert",
        n,
        uniform_box(n, -10.0, 10.0),
        separators,
        move |b| {
            let mut factors = Vec::with_capacity(n);
            for i in 0..n {
                let x = b.input(i);
                let mut terms = Vec::with_capacity(5);
                for j in 1..=5 {
                    let scaled = b.scale(x, (j + 1) as f64);
                    let arg = b.shift(scaled, j as f64);
                    terms.push(b.cos(arg));
                }
                let s = b.sum(&terms);
                b.mark(&format!("s{i}"), s);
                factors.push(s);
            }
            let mut prod = factors[0];
            for &f in &factors[1..] {
                prod = b.mul(prod, f);
            }
            prod
        },
    )
}

/// f(x) = 1 - cos(2 pi S) + 0.1 S with S = sqrt(sum_i x_i^2);
/// separators s_i = x_i^2, plus the probe mark `S`.
///
/// `S` itself depends on every input (its X2 would be empty), so it is
/// marked for monotonicity probing but not listed as a separator
/// candidate.
fn salomon(n: usize) -> ObjectiveProgram {
    let separators = (0..n)
        .map(|i| SeparatorMark {
            label: format!("s{i}"),
            description: format!("x{i}^2"),
            x1_hint: vec![i],
        })
        .collect();
    ObjectiveProgram::from_builder(
        "salomon",
        n,
        uniform_box(n, -100.0, 100.0),
        separators,
        move |b| {
            let mut squares = Vec::with_capacity(n);
            for i in 0..n {
                let x = b.input(i);
                let s = b.sqr(x);
                b.mark(&format!("s{i}"), s);
                squares.push(s);
            }
            let total = b.sum(&squares);
            let radius = b.sqrt(total);
            b.mark("S", radius);
            let angle = b.scale(radius, 2.0 * std::f64::consts::PI);
            let c = b.cos(angle);
            let neg_c = b.neg(c);
            let one_minus = b.shift(neg_c, 1.0);
            let linear = b.scale(radius, 0.1);
            b.add(one_minus, linear)
        },
    )
}

/// Consecutive roots of `d/dS (1 - cos(2 pi S) + 0.1 S) = 2 pi sin(2 pi S) + 0.1`
/// bracketing the z-th monotonically increasing stretch:
///
/// `S_{2z-1} = z + asin(-0.1/(2 pi)) / (2 pi)` and
/// `S_{2z}   = z + 1/2 - asin(-0.1/(2 pi)) / (2 pi)`.
///
/// The derivative is positive strictly between the two returned values
/// and changes sign only at them within one period. Each root is nudged
/// 2e-14 into the monotone stretch so that boxes built from the
/// returned values stay verifiably sign-definite in interval
/// arithmetic; the residual of `2 pi sin(2 pi S) + 0.1` stays below
/// 1e-12.
pub fn salomon_roots(z: u32) -> (f64, f64) {
    assert!(z >= 1, "root index starts at 1");
    const NUDGE: f64 = 2e-14;
    let two_pi = 2.0 * std::f64::consts::PI;
    let a = (-0.1 / two_pi).asin() / two_pi;
    let lower = f64::from(z) + a;
    let upper = f64::from(z) + 0.5 - a;
    (lower + NUDGE, upper - NUDGE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;

    fn degenerate(x: &[f64]) -> IntervalVector {
        IntervalVector::degenerate(x)
    }

    #[test]
    fn unknown_benchmark_is_rejected() {
        assert!(matches!(
            "nope".parse::<BenchmarkId>(),
            Err(FunctionsError::UnknownBenchmark(_))
        ));
        assert_eq!(
            "shubert".parse::<BenchmarkId>().unwrap(),
            BenchmarkId::Shubert
        );
    }

    #[test]
    fn exponential_at_origin() {
        let p = make(BenchmarkId::Exponential, 2).unwrap();
        assert_eq!(p.eval_real(&[0.0, 0.0]).unwrap(), -1.0);
        let mut tape = p.build_tape(Rounding::Exact);
        let out = tape.forward(&degenerate(&[0.0, 0.0])).unwrap();
        assert_eq!(out, Interval::point(-1.0));
    }

    #[test]
    fn recursive_exponential_minimum_value() {
        let p = make(BenchmarkId::RecursiveExponential, 4).unwrap();
        assert_eq!(p.eval_real(&[0.0; 4]).unwrap(), 1.0);
        let mut tape = p.record(&degenerate(&[0.0; 4]), Rounding::Exact).unwrap();
        assert_eq!(tape.output_value(), Interval::point(1.0));
        // n = 1 degenerate box at zero
        let p1 = make(BenchmarkId::RecursiveExponential, 1).unwrap();
        let out = p1
            .build_tape(Rounding::Exact)
            .forward(&degenerate(&[0.0]))
            .unwrap();
        assert_eq!(out, Interval::point(1.0));
        let _ = tape.forward(&degenerate(&[0.0; 4]));
    }

    #[test]
    fn styblinski_tang_at_zero_and_separator_adjoints() {
        let p = make(BenchmarkId::StyblinskiTang, 1).unwrap();
        assert_eq!(p.eval_real(&[0.0]).unwrap(), 0.0);

        let p = make(BenchmarkId::StyblinskiTang, 3).unwrap();
        let mut tape = p.record(p.default_box(), Rounding::Exact).unwrap();
        let adj = tape.reverse_sweep().unwrap();
        for i in 0..3 {
            let a = tape.adjoint_of(&adj, format!("s{i}").as_str()).unwrap();
            assert_eq!(a, Interval::point(0.5));
        }
    }

    #[test]
    fn shubert_value_at_origin() {
        // f(0, 0) = s(0)^2 with s(0) = cos 1 + cos 2 + cos 3 + cos 4 + cos 5
        let s0: f64 = (1..=5).map(|j| f64::from(j).cos()).sum();
        let p = make(BenchmarkId::Shubert, 2).unwrap();
        let v = p.eval_real(&[0.0, 0.0]).unwrap();
        assert!((v - s0 * s0).abs() < 1e-12);
        assert!((s0 - -1.2356).abs() < 1e-3);
    }

    #[test]
    fn salomon_at_origin_and_tape_marks() {
        let p = make(BenchmarkId::Salomon, 2).unwrap();
        assert_eq!(p.eval_real(&[0.0, 0.0]).unwrap(), 0.0);
        let tape = p.build_tape(Rounding::Exact);
        assert!(tape.mark_index("S").is_some());
        assert!(tape.mark_index("s0").is_some());
        // S is a probe, not a separator candidate
        assert!(p.separator_marks().iter().all(|m| m.label != "S"));
    }

    #[test]
    fn salomon_root_residuals_and_ordering() {
        let two_pi = 2.0 * std::f64::consts::PI;
        for z in 1..=5 {
            let (s_lo, s_hi) = salomon_roots(z);
            assert!(s_lo < s_hi);
            for s in [s_lo, s_hi] {
                let residual = two_pi * (two_pi * s).sin() + 0.1;
                assert!(residual.abs() < 1e-12, "z={z} root {s} residual {residual}");
            }
            // derivative is positive strictly between the roots
            let mid = 0.5 * (s_lo + s_hi);
            assert!(two_pi * (two_pi * mid).sin() + 0.1 > 0.0);
        }
        let (s1, s2) = salomon_roots(1);
        assert!((s1 - 0.99747).abs() < 1e-4);
        assert!((s2 - 1.50253).abs() < 1e-4);
    }

    #[test]
    fn default_boxes_have_expected_ranges() {
        let cases: [(BenchmarkId, f64, f64); 5] = [
            (BenchmarkId::StyblinskiTang, -5.0, 5.0),
            (BenchmarkId::Exponential, -1.0, 1.0),
            (BenchmarkId::RecursiveExponential, -2.1, 2.0),
            (BenchmarkId::Shubert, -10.0, 10.0),
            (BenchmarkId::Salomon, -100.0, 100.0),
        ];
        for (id, lo, hi) in cases {
            let p = make(id, 3).unwrap();
            for c in p.default_box().iter() {
                assert_eq!((c.lo(), c.hi()), (lo, hi));
            }
        }
        let wide = recursive_exponential_wide(2);
        assert_eq!(wide.default_box()[0].lo(), -2.0);
        assert_eq!(wide.default_box()[0].hi(), 3.0);
    }

    #[test]
    fn tapes_are_reproducible() {
        let p = make(BenchmarkId::Shubert, 3).unwrap();
        let a = p.build_tape(Rounding::Exact);
        let b = p.build_tape(Rounding::Exact);
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert_eq!(a.node(i).op(), b.node(i).op());
            assert_eq!(a.node(i).preds(), b.node(i).preds());
        }
    }
}
