//! Tape-recorded single assignment code with interval values and
//! interval adjoints.
//!
//! A program is recorded once as a DAG of elemental operations in
//! topological order (inputs first, output last). A forward sweep
//! evaluates every node with interval arithmetic on a box; a reverse
//! sweep propagates interval adjoints from a seed node down to the
//! inputs, enclosing every gradient the function attains on the box.
//!
//! The tape keeps its forward values, so several reverse sweeps with
//! different seeds (full gradient, separator verification) reuse one
//! forward evaluation. Adjoint accumulation visits nodes in descending
//! index order and sums successor contributions in ascending successor
//! order, which makes sweeps bit-for-bit deterministic.

use crate::interval::{
    binary_op, unary_op, BinaryOp, Interval, IntervalError, IntervalVector, Rounding, UnaryOp,
};
use std::collections::BTreeMap;
use std::fmt;

/// Handle to a tape node, as returned by [`TapeBuilder`] methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Elemental opcode of a tape node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpCode {
    /// Independent variable `x_i`.
    Input,
    Binary(BinaryOp),
    Unary(UnaryOp),
    /// n-ary sum; keeps tapes for `sum of x_i^2` patterns short.
    SumN,
}

/// One recorded assignment: opcode, predecessors, and the interval
/// value/adjoint of the assigned variable.
#[derive(Debug, Clone)]
pub struct TapeNode {
    op: OpCode,
    preds: Vec<usize>,
    value: Interval,
    adjoint: Interval,
}

impl TapeNode {
    pub fn op(&self) -> OpCode {
        self.op
    }

    pub fn preds(&self) -> &[usize] {
        &self.preds
    }

    pub fn value(&self) -> Interval {
        self.value
    }

    pub fn adjoint(&self) -> Interval {
        self.adjoint
    }
}

/// Errors raised while sweeping a tape.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TapeError {
    /// An elemental hit an interval domain error; `node` is the index of
    /// the assignment whose evaluation (or local partial) failed.
    #[error("node {node}: {source}")]
    Eval {
        node: usize,
        #[source]
        source: IntervalError,
    },
    #[error("unknown mark label {0:?}")]
    UnknownLabel(String),
    #[error("node index {index} out of range ({len} nodes)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("box has {got} components, tape has {expected} inputs")]
    DimensionMismatch { expected: usize, got: usize },
}

fn eval_err(node: usize) -> impl FnOnce(IntervalError) -> TapeError {
    move |source| TapeError::Eval { node, source }
}

/// Adjoints produced by a reverse sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointResult {
    /// Gradient enclosure, one interval per independent variable.
    pub input_adjoints: IntervalVector,
    /// Adjoint of every tape node, indexed like the tape.
    pub all_adjoints: Vec<Interval>,
}

/// Incrementally records a single assignment code.
///
/// Inputs occupy indices `0..n_inputs`; every other method appends one
/// node whose predecessors must already exist, so the recorded order is
/// topological by construction.
pub struct TapeBuilder {
    ops: Vec<(OpCode, Vec<usize>)>,
    n_inputs: usize,
    marks: BTreeMap<String, usize>,
}

impl TapeBuilder {
    pub fn new(n_inputs: usize) -> TapeBuilder {
        let ops = (0..n_inputs).map(|_| (OpCode::Input, Vec::new())).collect();
        TapeBuilder {
            ops,
            n_inputs,
            marks: BTreeMap::new(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn input(&self, i: usize) -> NodeId {
        assert!(i < self.n_inputs, "input {i} out of range");
        NodeId(i)
    }

    fn push(&mut self, op: OpCode, preds: Vec<usize>) -> NodeId {
        for &p in &preds {
            assert!(p < self.ops.len(), "predecessor {p} not yet recorded");
        }
        self.ops.push((op, preds));
        NodeId(self.ops.len() - 1)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(OpCode::Binary(BinaryOp::Add), vec![a.0, b.0])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(OpCode::Binary(BinaryOp::Sub), vec![a.0, b.0])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(OpCode::Binary(BinaryOp::Mul), vec![a.0, b.0])
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(OpCode::Binary(BinaryOp::Div), vec![a.0, b.0])
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(OpCode::Unary(UnaryOp::Neg), vec![a.0])
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(OpCode::Unary(UnaryOp::Exp), vec![a.0])
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        self.push(OpCode::Unary(UnaryOp::Sin), vec![a.0])
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        self.push(OpCode::Unary(UnaryOp::Cos), vec![a.0])
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.push(OpCode::Unary(UnaryOp::Sqrt), vec![a.0])
    }

    pub fn sqr(&mut self, a: NodeId) -> NodeId {
        self.push(OpCode::Unary(UnaryOp::Sqr), vec![a.0])
    }

    pub fn pow_int(&mut self, a: NodeId, k: i32) -> NodeId {
        self.push(OpCode::Unary(UnaryOp::PowInt(k)), vec![a.0])
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        assert!(c.is_finite(), "scale constant must be finite");
        self.push(OpCode::Unary(UnaryOp::Scale(c)), vec![a.0])
    }

    pub fn shift(&mut self, a: NodeId, c: f64) -> NodeId {
        assert!(c.is_finite(), "shift constant must be finite");
        self.push(OpCode::Unary(UnaryOp::Shift(c)), vec![a.0])
    }

    pub fn sum(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "sum of zero terms");
        self.push(OpCode::SumN, parts.iter().map(|n| n.0).collect())
    }

    /// Attaches a label to an intermediate node (separator candidates,
    /// monotonicity probes).
    pub fn mark(&mut self, label: &str, node: NodeId) {
        self.marks.insert(label.to_string(), node.0);
    }

    /// Freezes the recorded structure into a tape with `output` as the
    /// dependent variable. Values are unset until a forward sweep runs.
    pub fn finish(self, output: NodeId, rounding: Rounding) -> Tape {
        assert_eq!(
            output.0,
            self.ops.len() - 1,
            "output must be the last recorded node"
        );
        let nodes: Vec<TapeNode> = self
            .ops
            .into_iter()
            .map(|(op, preds)| TapeNode {
                op,
                preds,
                value: Interval::ZERO,
                adjoint: Interval::ZERO,
            })
            .collect();
        let mut succs = vec![Vec::new(); nodes.len()];
        for (j, node) in nodes.iter().enumerate() {
            for &p in &node.preds {
                // ascending successor order, deduplicated; a successor
                // using a node twice contributes both partials once
                if succs[p].last() != Some(&j) {
                    succs[p].push(j);
                }
            }
        }
        Tape {
            nodes,
            succs,
            n_inputs: self.n_inputs,
            output: output.0,
            marks: self.marks,
            rounding,
        }
    }
}

/// A recorded single assignment code DAG with per-node interval values
/// and adjoints.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<TapeNode>,
    succs: Vec<Vec<usize>>,
    n_inputs: usize,
    output: usize,
    marks: BTreeMap<String, usize>,
    rounding: Rounding,
}

/// Selects a tape node either by mark label or by raw index.
#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Label(&'a str),
    Index(usize),
}

impl<'a> From<&'a str> for NodeRef<'a> {
    fn from(label: &'a str) -> Self {
        NodeRef::Label(label)
    }
}

impl From<usize> for NodeRef<'_> {
    fn from(index: usize) -> Self {
        NodeRef::Index(index)
    }
}

impl From<NodeId> for NodeRef<'_> {
    fn from(id: NodeId) -> Self {
        NodeRef::Index(id.0)
    }
}

impl Tape {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn output_index(&self) -> usize {
        self.output
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }

    pub fn node(&self, i: usize) -> &TapeNode {
        &self.nodes[i]
    }

    /// Interval value of the dependent variable from the last forward
    /// sweep.
    pub fn output_value(&self) -> Interval {
        self.nodes[self.output].value
    }

    pub fn marks(&self) -> impl Iterator<Item = (&str, usize)> {
        self.marks.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn mark_index(&self, label: &str) -> Option<usize> {
        self.marks.get(label).copied()
    }

    pub fn resolve(&self, node: NodeRef<'_>) -> Result<usize, TapeError> {
        match node {
            NodeRef::Label(label) => self
                .mark_index(label)
                .ok_or_else(|| TapeError::UnknownLabel(label.to_string())),
            NodeRef::Index(index) => {
                if index < self.nodes.len() {
                    Ok(index)
                } else {
                    Err(TapeError::IndexOutOfRange {
                        index,
                        len: self.nodes.len(),
                    })
                }
            }
        }
    }

    /// Natural interval extension: evaluates every node on `domain` and
    /// returns the enclosure of the output. Domain errors are tagged
    /// with the offending node.
    pub fn forward(&mut self, domain: &IntervalVector) -> Result<Interval, TapeError> {
        if domain.len() != self.n_inputs {
            return Err(TapeError::DimensionMismatch {
                expected: self.n_inputs,
                got: domain.len(),
            });
        }
        for i in 0..self.n_inputs {
            self.nodes[i].value = domain[i];
        }
        for j in self.n_inputs..self.nodes.len() {
            let value = self.eval_node(j).map_err(eval_err(j))?;
            self.nodes[j].value = value;
        }
        Ok(self.output_value())
    }

    fn eval_node(&self, j: usize) -> Result<Interval, IntervalError> {
        let node = &self.nodes[j];
        match node.op {
            OpCode::Input => Ok(node.value),
            OpCode::Binary(op) => binary_op(
                op,
                self.nodes[node.preds[0]].value,
                self.nodes[node.preds[1]].value,
                self.rounding,
            ),
            OpCode::Unary(op) => unary_op(op, self.nodes[node.preds[0]].value, self.rounding),
            OpCode::SumN => {
                let mut acc = self.nodes[node.preds[0]].value;
                for &p in &node.preds[1..] {
                    acc = binary_op(BinaryOp::Add, acc, self.nodes[p].value, self.rounding)?;
                }
                Ok(acc)
            }
        }
    }

    /// Local partial of node `j` with respect to predecessor `k`,
    /// evaluated on the recorded interval values. A predecessor used in
    /// several argument positions accumulates all of its partials.
    fn partial(&self, j: usize, k: usize) -> Result<Interval, IntervalError> {
        let node = &self.nodes[j];
        let r = self.rounding;
        let mut total: Option<Interval> = None;
        for (pos, &p) in node.preds.iter().enumerate() {
            if p != k {
                continue;
            }
            let term = match node.op {
                OpCode::Input => unreachable!("inputs have no predecessors"),
                OpCode::SumN => Interval::ONE,
                OpCode::Binary(BinaryOp::Add) => Interval::ONE,
                OpCode::Binary(BinaryOp::Sub) => {
                    if pos == 0 {
                        Interval::ONE
                    } else {
                        Interval::point(-1.0)
                    }
                }
                OpCode::Binary(BinaryOp::Mul) => {
                    let other = node.preds[1 - pos];
                    self.nodes[other].value
                }
                OpCode::Binary(BinaryOp::Div) => {
                    let v = self.nodes[node.preds[1]].value;
                    if pos == 0 {
                        r.widen(Interval::ONE.div(&v)?)
                    } else {
                        let u = self.nodes[node.preds[0]].value;
                        r.widen(u.div(&r.widen(v.sqr()))?.neg())
                    }
                }
                OpCode::Unary(op) => match op {
                    UnaryOp::Neg => Interval::point(-1.0),
                    // d exp(u)/du = exp(u): reuse the recorded value
                    UnaryOp::Exp => node.value,
                    UnaryOp::Sin => r.widen(self.nodes[p].value.cos()),
                    UnaryOp::Cos => r.widen(self.nodes[p].value.sin().neg()),
                    // d sqrt(u)/du = 1/(2 sqrt(u)): fails at sqrt(0)
                    UnaryOp::Sqrt => r.widen(Interval::ONE.div(&node.value.scale(2.0))?),
                    UnaryOp::Sqr => r.widen(self.nodes[p].value.scale(2.0)),
                    UnaryOp::PowInt(kk) => {
                        let base = self.nodes[p].value;
                        r.widen(base.pow_int(kk - 1)?.scale(f64::from(kk)))
                    }
                    UnaryOp::Scale(c) => Interval::point(c),
                    UnaryOp::Shift(_) => Interval::ONE,
                },
            };
            total = Some(match total {
                None => term,
                Some(t) => binary_op(BinaryOp::Add, t, term, r)?,
            });
        }
        Ok(total.expect("partial requested for a non-predecessor"))
    }

    /// Reverse interval-adjoint sweep seeded with `[1, 1]` at the
    /// output; input adjoints enclose the gradient over the forward
    /// box.
    pub fn reverse_sweep(&mut self) -> Result<AdjointResult, TapeError> {
        self.seed_and_sweep(self.output, Interval::ONE)
    }

    /// Reverse sweep with `seed` placed on `seed_node`; every other
    /// adjoint starts at zero and nodes above the seed stay exactly
    /// zero. Accumulation order is fixed (descending node index,
    /// ascending successor index) so repeated sweeps are bit-identical.
    pub fn seed_and_sweep(
        &mut self,
        seed_node: usize,
        seed: Interval,
    ) -> Result<AdjointResult, TapeError> {
        if seed_node >= self.nodes.len() {
            return Err(TapeError::IndexOutOfRange {
                index: seed_node,
                len: self.nodes.len(),
            });
        }
        for node in &mut self.nodes {
            node.adjoint = Interval::ZERO;
        }
        self.nodes[seed_node].adjoint = seed;
        for k in (0..seed_node).rev() {
            let mut acc = Interval::ZERO;
            let mut first = true;
            for s in 0..self.succs[k].len() {
                let j = self.succs[k][s];
                let aj = self.nodes[j].adjoint;
                // an exactly-zero adjoint contributes nothing; skipping
                // it keeps unreachable nodes at exactly [0, 0]
                if aj == Interval::ZERO {
                    continue;
                }
                let partial = self.partial(j, k).map_err(eval_err(j))?;
                let term =
                    binary_op(BinaryOp::Mul, aj, partial, self.rounding).map_err(eval_err(j))?;
                acc = if first {
                    term
                } else {
                    binary_op(BinaryOp::Add, acc, term, self.rounding).map_err(eval_err(k))?
                };
                first = false;
            }
            self.nodes[k].adjoint = acc;
        }
        let input_adjoints = (0..self.n_inputs)
            .map(|i| self.nodes[i].adjoint)
            .collect::<IntervalVector>();
        let all_adjoints = self.nodes.iter().map(|n| n.adjoint).collect();
        Ok(AdjointResult {
            input_adjoints,
            all_adjoints,
        })
    }

    /// Adjoint interval of a node picked by mark label or index; for a
    /// marked separator `s` this is the enclosure of `df/ds` over the
    /// swept box.
    pub fn adjoint_of<'a>(
        &self,
        result: &AdjointResult,
        node: impl Into<NodeRef<'a>>,
    ) -> Result<Interval, TapeError> {
        let idx = self.resolve(node.into())?;
        Ok(result.all_adjoints[idx])
    }

    /// Real-arithmetic evaluation of the same assignment sequence; the
    /// oracle path used for bound improvement and tests.
    pub fn eval_real(&self, x: &[f64]) -> Result<f64, TapeError> {
        if x.len() != self.n_inputs {
            return Err(TapeError::DimensionMismatch {
                expected: self.n_inputs,
                got: x.len(),
            });
        }
        let mut vals = vec![0.0_f64; self.nodes.len()];
        vals[..self.n_inputs].copy_from_slice(x);
        for j in self.n_inputs..self.nodes.len() {
            let node = &self.nodes[j];
            let v = match node.op {
                OpCode::Input => unreachable!(),
                OpCode::Binary(op) => {
                    let a = vals[node.preds[0]];
                    let b = vals[node.preds[1]];
                    match op {
                        BinaryOp::Add => a + b,
                        BinaryOp::Sub => a - b,
                        BinaryOp::Mul => a * b,
                        BinaryOp::Div => {
                            if b == 0.0 {
                                return Err(TapeError::Eval {
                                    node: j,
                                    source: IntervalError::DivisionByZero,
                                });
                            }
                            a / b
                        }
                    }
                }
                OpCode::Unary(op) => {
                    let a = vals[node.preds[0]];
                    match op {
                        UnaryOp::Neg => -a,
                        UnaryOp::Exp => a.exp(),
                        UnaryOp::Sin => a.sin(),
                        UnaryOp::Cos => a.cos(),
                        UnaryOp::Sqrt => {
                            if a < 0.0 {
                                return Err(TapeError::Eval {
                                    node: j,
                                    source: IntervalError::DomainViolation {
                                        op: "sqrt",
                                        lo: a,
                                        hi: a,
                                    },
                                });
                            }
                            a.sqrt()
                        }
                        UnaryOp::Sqr => a * a,
                        UnaryOp::PowInt(k) => a.powi(k),
                        UnaryOp::Scale(c) => c * a,
                        UnaryOp::Shift(c) => a + c,
                    }
                }
                OpCode::SumN => node.preds.iter().map(|&p| vals[p]).sum(),
            };
            vals[j] = v;
        }
        Ok(vals[self.output])
    }

    /// Which inputs can reach `node` along the precedence relation.
    pub fn backward_reachable_inputs(&self, node: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![node];
        while let Some(k) = stack.pop() {
            if seen[k] {
                continue;
            }
            seen[k] = true;
            stack.extend_from_slice(&self.nodes[k].preds);
        }
        seen.truncate(self.n_inputs);
        seen
    }

    /// Tape computing the marked intermediate `new_output` (optionally
    /// negated), sharing this tape's inputs. Used for the inner
    /// optimization of a separator over its own variables.
    pub fn sub_tape(&self, new_output: usize, negate: bool) -> Tape {
        assert!(new_output < self.nodes.len());
        let mut nodes: Vec<TapeNode> = self.nodes[..=new_output].to_vec();
        let mut output = new_output;
        if negate {
            nodes.push(TapeNode {
                op: OpCode::Unary(UnaryOp::Neg),
                preds: vec![new_output],
                value: Interval::ZERO,
                adjoint: Interval::ZERO,
            });
            output = nodes.len() - 1;
        }
        let mut succs = vec![Vec::new(); nodes.len()];
        for (j, node) in nodes.iter().enumerate() {
            for &p in &node.preds {
                if succs[p].last() != Some(&j) {
                    succs[p].push(j);
                }
            }
        }
        let marks = self
            .marks
            .iter()
            .filter(|(_, &v)| v <= new_output)
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        Tape {
            nodes,
            succs,
            n_inputs: self.n_inputs,
            output,
            marks,
            rounding: self.rounding,
        }
    }
}
