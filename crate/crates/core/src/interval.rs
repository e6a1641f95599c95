//! Validated interval arithmetic over `f64` endpoints.
//!
//! Every operation returns an enclosure of the exact range (the united
//! extension) of the corresponding real function over its interval
//! arguments. With [`Rounding::Outward`] each computed endpoint is
//! additionally nudged one unit in the last place so that enclosures
//! survive the rounding of the endpoint formulas themselves.
//!
//! Endpoints are finite except where a range genuinely escapes `f64`:
//! an overflowing upper bound becomes `+inf` (and symmetrically `-inf`
//! below), which keeps enclosures valid for compositions such as nested
//! exponentials whose true ranges are astronomically large.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Errors raised by interval construction and arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum IntervalError {
    /// Construction with `lo > hi` or a NaN endpoint.
    #[error("invalid interval endpoints [{lo}, {hi}]")]
    InvalidEndpoints { lo: f64, hi: f64 },
    /// Division by an interval containing zero.
    #[error("division by an interval containing zero")]
    DivisionByZero,
    /// An elemental applied outside its domain (e.g. sqrt of a partly
    /// negative interval).
    #[error("{op} applied outside its domain on [{lo}, {hi}]")]
    DomainViolation { op: &'static str, lo: f64, hi: f64 },
}

/// Endpoint rounding policy for elemental operations.
///
/// `Outward` widens each computed endpoint by one ulp, which covers the
/// (at most one ulp) rounding error of the endpoint formulas without
/// touching the floating-point rounding mode. `Exact` keeps the plain
/// round-to-nearest endpoints; results that are exactly representable
/// (e.g. an adjoint of one half) then stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Rounding {
    #[default]
    Exact,
    Outward,
}

impl Rounding {
    // Zero endpoints are exact range bounds (a square straddling zero,
    // a Sterbenz-exact cancellation) and stay put, as they would under
    // true directed rounding; an operation underflowing to zero can
    // thus be off by one subnormal there, far below any tolerance in
    // play.
    #[inline]
    pub(crate) fn widen(self, iv: Interval) -> Interval {
        match self {
            Rounding::Exact => iv,
            Rounding::Outward => Interval {
                lo: if iv.lo == 0.0 { 0.0 } else { iv.lo.next_down() },
                hi: if iv.hi == 0.0 { 0.0 } else { iv.hi.next_up() },
            },
        }
    }
}

/// A closed interval `[lo, hi]` with `lo <= hi`.
///
/// A degenerate interval (`lo == hi`) behaves as a real scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl TryFrom<(f64, f64)> for Interval {
    type Error = IntervalError;
    fn try_from((lo, hi): (f64, f64)) -> Result<Self, IntervalError> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for (f64, f64) {
    fn from(iv: Interval) -> (f64, f64) {
        (iv.lo, iv.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

// A computed lower endpoint of +inf can only come from a positive
// overflow; rounding it toward -inf lands on the largest finite value.
// Symmetrically for upper endpoints. This keeps lo <= hi without NaN.
#[inline]
fn dir_lo(x: f64) -> f64 {
    if x == f64::INFINITY {
        f64::MAX
    } else {
        x
    }
}

#[inline]
fn dir_hi(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        f64::MIN
    } else {
        x
    }
}

// Endpoint product with the 0 * inf = 0 convention of interval
// arithmetic (a zero factor pins the product regardless of magnitude).
#[inline]
fn ep_mul(x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        0.0
    } else {
        x * y
    }
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Builds `[lo, hi]`; rejects NaN endpoints and `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Interval, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(IntervalError::InvalidEndpoints { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// The degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Interval {
        debug_assert!(!x.is_nan());
        Interval { lo: x, hi: x }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// True when `self` is a subset of `other`.
    pub fn subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// A point guaranteed to lie inside the interval.
    pub fn midpoint(&self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        if m.is_finite() {
            return m.clamp(self.lo, self.hi);
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        if m.is_finite() {
            m.clamp(self.lo, self.hi)
        } else if self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY {
            0.0
        } else if self.hi == f64::INFINITY {
            self.lo
        } else {
            self.hi
        }
    }

    /// Smallest interval containing both arguments.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Set intersection; `None` when disjoint.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: dir_lo(self.lo + other.lo),
            hi: dir_hi(self.hi + other.hi),
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        Interval {
            lo: dir_lo(self.lo - other.hi),
            hi: dir_hi(self.hi - other.lo),
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let c = [
            ep_mul(self.lo, other.lo),
            ep_mul(self.lo, other.hi),
            ep_mul(self.hi, other.lo),
            ep_mul(self.hi, other.hi),
        ];
        let mut lo = c[0];
        let mut hi = c[0];
        for &v in &c[1..] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Interval {
            lo: dir_lo(lo),
            hi: dir_hi(hi),
        }
    }

    /// Requires `0 ∉ other`; extended division is deliberately not
    /// supported (callers treat the failure as "cannot evaluate").
    pub fn div(&self, other: &Interval) -> Result<Interval, IntervalError> {
        if other.contains_zero() {
            return Err(IntervalError::DivisionByZero);
        }
        let c = [
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        ];
        // NaN corners (inf/inf) are dominated by the finite-edge limits.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &c {
            if !v.is_nan() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok(Interval {
            lo: dir_lo(lo),
            hi: dir_hi(hi),
        })
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn exp(&self) -> Interval {
        Interval {
            lo: dir_lo(self.lo.exp()),
            hi: self.hi.exp(),
        }
    }

    pub fn sqrt(&self) -> Result<Interval, IntervalError> {
        if self.lo < 0.0 {
            return Err(IntervalError::DomainViolation {
                op: "sqrt",
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(Interval {
            lo: self.lo.sqrt(),
            hi: self.hi.sqrt(),
        })
    }

    /// United extension of `x -> x^2`; tighter than `mul(self, self)`
    /// when the interval straddles zero.
    pub fn sqr(&self) -> Interval {
        let a = self.lo * self.lo;
        let b = self.hi * self.hi;
        if self.contains_zero() {
            Interval {
                lo: 0.0,
                hi: dir_hi(a.max(b)),
            }
        } else {
            Interval {
                lo: dir_lo(a.min(b)),
                hi: dir_hi(a.max(b)),
            }
        }
    }

    /// Integer power by repeated squaring of the endpoint values, with
    /// the even/odd zero-straddling cases handled on the range directly.
    pub fn pow_int(&self, k: i32) -> Result<Interval, IntervalError> {
        if k == 0 {
            return Ok(Interval::ONE);
        }
        if k < 0 {
            if self.contains_zero() {
                return Err(IntervalError::DivisionByZero);
            }
            let p = self.pow_int(-k)?;
            return Interval::ONE.div(&p);
        }
        let iv = if k % 2 != 0 {
            Interval {
                lo: self.lo.powi(k),
                hi: self.hi.powi(k),
            }
        } else {
            let a = self.lo.abs().powi(k);
            let b = self.hi.abs().powi(k);
            if self.contains_zero() {
                Interval {
                    lo: 0.0,
                    hi: a.max(b),
                }
            } else {
                Interval {
                    lo: a.min(b),
                    hi: a.max(b),
                }
            }
        };
        Ok(Interval {
            lo: dir_lo(iv.lo),
            hi: dir_hi(iv.hi),
        })
    }

    /// Multiplication by the constant `c`.
    pub fn scale(&self, c: f64) -> Interval {
        if c == 0.0 {
            return Interval::ZERO;
        }
        let (lo, hi) = if c > 0.0 {
            (c * self.lo, c * self.hi)
        } else {
            (c * self.hi, c * self.lo)
        };
        Interval {
            lo: dir_lo(lo),
            hi: dir_hi(hi),
        }
    }

    /// Translation by the constant `c`.
    pub fn shift(&self, c: f64) -> Interval {
        Interval {
            lo: dir_lo(self.lo + c),
            hi: dir_hi(self.hi + c),
        }
    }

    pub fn sin(&self) -> Interval {
        // Extrema of sin sit at (k + 1/2)*pi; sin there is +1 for even
        // k and -1 for odd k.
        trig_range(self, f64::sin, -0.5)
    }

    pub fn cos(&self) -> Interval {
        // Extrema of cos sit at k*pi; cos there is +1 for even k and -1
        // for odd k.
        trig_range(self, f64::cos, 0.0)
    }
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Shared sin/cos range computation. `offset` shifts the extremum grid:
/// extrema lie at `(k - offset) * pi` for integer `k`, with even `k`
/// giving the maximum (+1) and odd `k` the minimum (-1).
fn trig_range(iv: &Interval, f: fn(f64) -> f64, offset: f64) -> Interval {
    let full = Interval { lo: -1.0, hi: 1.0 };
    if !iv.width().is_finite() || iv.width() >= TWO_PI {
        return full;
    }
    let fa = f(iv.lo);
    let fb = f(iv.hi);
    let mut lo = fa.min(fb);
    let mut hi = fa.max(fb);

    // Integer extremum indices contained in the argument range, widened
    // by a guard band so an extremum sitting within rounding error of a
    // boundary is never missed (including it only widens the result).
    let t0 = iv.lo / std::f64::consts::PI + offset;
    let t1 = iv.hi / std::f64::consts::PI + offset;
    let guard = 1e-12 + 4.0 * f64::EPSILON * t1.abs().max(t0.abs());
    if t1.abs().max(t0.abs()) > 4.5e15 {
        return full; // argument so large that ulp spacing exceeds pi
    }
    let k0 = (t0 - guard).ceil();
    let k1 = (t1 + guard).floor();
    if k1 >= k0 {
        if k1 - k0 >= 1.0 {
            return full; // two consecutive extrema, both parities present
        }
        // single extremum index; parity decides which bound it pins
        if (k0.rem_euclid(2.0)) == 0.0 {
            hi = 1.0;
        } else {
            lo = -1.0;
        }
    }
    Interval { lo, hi }
}

/// Binary elemental opcodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Unary elemental opcodes; `PowInt`, `Scale` and `Shift` carry their
/// compile-time constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Sin,
    Cos,
    Sqrt,
    Sqr,
    PowInt(i32),
    Scale(f64),
    Shift(f64),
}

/// United extension of a binary elemental, widened per `rounding`.
pub fn binary_op(
    op: BinaryOp,
    a: Interval,
    b: Interval,
    rounding: Rounding,
) -> Result<Interval, IntervalError> {
    let out = match op {
        BinaryOp::Add => a.add(&b),
        BinaryOp::Sub => a.sub(&b),
        BinaryOp::Mul => a.mul(&b),
        BinaryOp::Div => a.div(&b)?,
    };
    Ok(rounding.widen(out))
}

/// United extension of a unary elemental, widened per `rounding`.
pub fn unary_op(op: UnaryOp, a: Interval, rounding: Rounding) -> Result<Interval, IntervalError> {
    let out = match op {
        UnaryOp::Neg => a.neg(),
        UnaryOp::Exp => a.exp(),
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Sqrt => a.sqrt()?,
        UnaryOp::Sqr => a.sqr(),
        UnaryOp::PowInt(k) => a.pow_int(k)?,
        UnaryOp::Scale(c) => a.scale(c),
        UnaryOp::Shift(c) => a.shift(c),
    };
    Ok(rounding.widen(out))
}

/// An ordered sequence of intervals; the box type of the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalVector(Vec<Interval>);

impl IntervalVector {
    pub fn new(components: Vec<Interval>) -> IntervalVector {
        IntervalVector(components)
    }

    /// The uniform box `[lo, hi]^n`.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<IntervalVector, IntervalError> {
        let iv = Interval::new(lo, hi)?;
        Ok(IntervalVector(vec![iv; n]))
    }

    /// Degenerate box at a point.
    pub fn degenerate(point: &[f64]) -> IntervalVector {
        IntervalVector(point.iter().map(|&x| Interval::point(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Maximum component width.
    pub fn width(&self) -> f64 {
        self.0.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.0.iter().map(Interval::midpoint).collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.len() == point.len() && self.0.iter().zip(point).all(|(iv, &x)| iv.contains(x))
    }

    /// Componentwise subset test.
    pub fn subset_of(&self, other: &IntervalVector) -> bool {
        self.len() == other.len() && self.0.iter().zip(other.iter()).all(|(a, b)| a.subset_of(b))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.0
    }

    pub fn set(&mut self, i: usize, iv: Interval) {
        self.0[i] = iv;
    }
}

impl std::ops::Index<usize> for IntervalVector {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl FromIterator<Interval> for IntervalVector {
    fn from_iter<T: IntoIterator<Item = Interval>>(iter: T) -> Self {
        IntervalVector(iter.into_iter().collect())
    }
}
