//! Recorded expression tape for device vector fields.
//!
//! Device equations are written once against [`Var`] handles.  The recorded
//! tape is then evaluated in two ways: a plain forward pass (the right-hand
//! side used by the reference solver and the macro-process) and a
//! coefficient-by-coefficient pass that applies the differential
//! transformation rules to every node, giving the `k`-th Taylor coefficient
//! of each device derivative from the state coefficients `X[0..=k]`.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::series::{cauchy, div_step, recip_step, sin_cos_step, sqrt_step, DtSeries};

#[derive(Debug, Clone, Copy)]
enum Node {
    Const(f64),
    State(usize),
    Time,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Scale(u32, f64),
    Offset(u32, f64),
    Recip(u32),
    Sqrt(u32),
    /// `sin(arg)`; the matching `Cos` is always the next node.
    Sin(u32),
    Cos(u32),
    /// Non-windup limiter: passes `deriv` unless `state` sits on a bound and
    /// `deriv` points outward, decided from the order-0 values.
    Gate {
        deriv: u32,
        state: usize,
        lo: f64,
        hi: f64,
    },
}

/// Lower/upper clamp applied to a state after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBound {
    pub state: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Records device equations into a [`Tape`].
#[derive(Debug, Default)]
pub struct TapeBuilder {
    nodes: RefCell<Vec<Node>>,
    outputs: RefCell<Vec<(usize, u32)>>,
    bounds: RefCell<Vec<StateBound>>,
}

/// Handle to a recorded value.
#[derive(Clone, Copy)]
pub struct Var<'a> {
    id: u32,
    b: &'a TapeBuilder,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl TapeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, n: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(n);
        (nodes.len() - 1) as u32
    }

    fn var(&self, n: Node) -> Var<'_> {
        Var {
            id: self.push(n),
            b: self,
        }
    }

    fn node(&self, id: u32) -> Node {
        self.nodes.borrow()[id as usize]
    }

    fn as_const(&self, id: u32) -> Option<f64> {
        match self.node(id) {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn constant(&self, c: f64) -> Var<'_> {
        self.var(Node::Const(c))
    }

    pub fn state(&self, index: usize) -> Var<'_> {
        self.var(Node::State(index))
    }

    pub fn time(&self) -> Var<'_> {
        self.var(Node::Time)
    }

    /// Declares `deriv` as the time derivative of state `index`.
    pub fn output(&self, index: usize, deriv: Var<'_>) {
        self.outputs.borrow_mut().push((index, deriv.id));
    }

    /// Declares a derivative whose state is confined to `[lo, hi]`.
    pub fn limited_output(&self, index: usize, deriv: Var<'_>, lo: f64, hi: f64) {
        let gate = self.push(Node::Gate {
            deriv: deriv.id,
            state: index,
            lo,
            hi,
        });
        self.outputs.borrow_mut().push((index, gate));
        self.bounds.borrow_mut().push(StateBound { state: index, lo, hi });
    }

    pub fn finish(self) -> Tape {
        let mut outputs = self.outputs.into_inner();
        outputs.sort_by_key(|o| o.0);
        Tape {
            nodes: self.nodes.into_inner(),
            outputs,
            bounds: self.bounds.into_inner(),
        }
    }
}

impl<'a> Var<'a> {
    fn unary(self, n: Node) -> Var<'a> {
        self.b.var(n)
    }

    pub fn sin_cos(self) -> (Var<'a>, Var<'a>) {
        if let Some(c) = self.b.as_const(self.id) {
            return (self.b.constant(c.sin()), self.b.constant(c.cos()));
        }
        let s = self.unary(Node::Sin(self.id));
        let c = self.unary(Node::Cos(self.id));
        (s, c)
    }

    pub fn sqrt(self) -> Var<'a> {
        match self.b.as_const(self.id) {
            Some(c) => self.b.constant(c.sqrt()),
            None => self.unary(Node::Sqrt(self.id)),
        }
    }

    pub fn recip(self) -> Var<'a> {
        match self.b.as_const(self.id) {
            Some(c) => self.b.constant(1.0 / c),
            None => self.unary(Node::Recip(self.id)),
        }
    }

    pub fn square(self) -> Var<'a> {
        self * self
    }

    pub fn scale(self, c: f64) -> Var<'a> {
        if c == 1.0 {
            return self;
        }
        if c == 0.0 {
            return self.b.constant(0.0);
        }
        match self.b.as_const(self.id) {
            Some(v) => self.b.constant(v * c),
            None => self.unary(Node::Scale(self.id, c)),
        }
    }

    fn offset(self, c: f64) -> Var<'a> {
        if c == 0.0 {
            return self;
        }
        match self.b.as_const(self.id) {
            Some(v) => self.b.constant(v + c),
            None => self.unary(Node::Offset(self.id, c)),
        }
    }
}

impl<'a> Add for Var<'a> {
    type Output = Var<'a>;
    fn add(self, rhs: Var<'a>) -> Var<'a> {
        match (self.b.as_const(self.id), self.b.as_const(rhs.id)) {
            (Some(a), Some(b)) => self.b.constant(a + b),
            (Some(a), None) => rhs.offset(a),
            (None, Some(b)) => self.offset(b),
            (None, None) => self.b.var(Node::Add(self.id, rhs.id)),
        }
    }
}

impl<'a> Sub for Var<'a> {
    type Output = Var<'a>;
    fn sub(self, rhs: Var<'a>) -> Var<'a> {
        match (self.b.as_const(self.id), self.b.as_const(rhs.id)) {
            (Some(a), Some(b)) => self.b.constant(a - b),
            (None, Some(b)) => self.offset(-b),
            (Some(a), None) => (-rhs).offset(a),
            (None, None) => self.b.var(Node::Sub(self.id, rhs.id)),
        }
    }
}

impl<'a> Mul for Var<'a> {
    type Output = Var<'a>;
    fn mul(self, rhs: Var<'a>) -> Var<'a> {
        match (self.b.as_const(self.id), self.b.as_const(rhs.id)) {
            (Some(a), Some(b)) => self.b.constant(a * b),
            (Some(a), None) => rhs.scale(a),
            (None, Some(b)) => self.scale(b),
            (None, None) => self.b.var(Node::Mul(self.id, rhs.id)),
        }
    }
}

impl<'a> Div for Var<'a> {
    type Output = Var<'a>;
    fn div(self, rhs: Var<'a>) -> Var<'a> {
        match (self.b.as_const(self.id), self.b.as_const(rhs.id)) {
            (Some(a), Some(b)) => self.b.constant(a / b),
            (_, Some(b)) => self.scale(1.0 / b),
            _ => self.b.var(Node::Div(self.id, rhs.id)),
        }
    }
}

impl<'a> Neg for Var<'a> {
    type Output = Var<'a>;
    fn neg(self) -> Var<'a> {
        match self.b.as_const(self.id) {
            Some(a) => self.b.constant(-a),
            None => self.unary(Node::Neg(self.id)),
        }
    }
}

impl<'a> Add<f64> for Var<'a> {
    type Output = Var<'a>;
    fn add(self, rhs: f64) -> Var<'a> {
        self.offset(rhs)
    }
}

impl<'a> Sub<f64> for Var<'a> {
    type Output = Var<'a>;
    fn sub(self, rhs: f64) -> Var<'a> {
        self.offset(-rhs)
    }
}

impl<'a> Mul<f64> for Var<'a> {
    type Output = Var<'a>;
    fn mul(self, rhs: f64) -> Var<'a> {
        self.scale(rhs)
    }
}

impl<'a> Div<f64> for Var<'a> {
    type Output = Var<'a>;
    fn div(self, rhs: f64) -> Var<'a> {
        self.scale(1.0 / rhs)
    }
}

impl<'a> Mul<Var<'a>> for f64 {
    type Output = Var<'a>;
    fn mul(self, rhs: Var<'a>) -> Var<'a> {
        rhs.scale(self)
    }
}

impl<'a> Add<Var<'a>> for f64 {
    type Output = Var<'a>;
    fn add(self, rhs: Var<'a>) -> Var<'a> {
        rhs.offset(self)
    }
}

impl<'a> Sub<Var<'a>> for f64 {
    type Output = Var<'a>;
    fn sub(self, rhs: Var<'a>) -> Var<'a> {
        (-rhs).offset(self)
    }
}

/// Immutable recorded device equations.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    outputs: Vec<(usize, u32)>,
    bounds: Vec<StateBound>,
}

/// Scratch storage for tape evaluation.
#[derive(Debug, Clone, Default)]
pub struct TapeWork {
    width: usize,
    values: Vec<f64>,
    gates: Vec<bool>,
    plain: Vec<f64>,
}

impl Tape {
    /// Taylor coefficients to order `order` of the system whose every state
    /// is a tape output, by the recursion `X[k+1] = F[k] / (k+1)`.
    pub fn expand(&self, x0: &[f64], t0: f64, order: usize) -> DtSeries {
        let mut s = DtSeries::constant(x0, order, t0);
        let mut work = TapeWork::default();
        self.prepare(&mut work, order);
        let mut f = vec![0.0; x0.len()];
        for k in 0..order {
            self.coefficient(k, &s, t0, &mut work);
            self.output_coefficients(k, &work, &mut f);
            for (i, fi) in f.iter().enumerate() {
                s.set_coeff(i, k + 1, fi / (k + 1) as f64);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(state index, node)` pairs, sorted by state index.
    pub fn outputs(&self) -> impl Iterator<Item = usize> + '_ {
        self.outputs.iter().map(|o| o.0)
    }

    pub fn bounds(&self) -> &[StateBound] {
        &self.bounds
    }

    /// Number of nonlinear product-type nodes (cost indicator).
    pub fn product_nodes(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Mul(..) | Node::Div(..) | Node::Recip(_) | Node::Sqrt(_) | Node::Sin(_)))
            .count()
    }

    /// Plain forward evaluation; writes `deriv[state] = f_state(x, t)` for
    /// every recorded output and leaves other entries untouched.
    pub fn eval(&self, x: &[f64], t: f64, work: &mut TapeWork, deriv: &mut [f64]) {
        let v = &mut work.plain;
        v.clear();
        v.resize(self.nodes.len(), 0.0);
        let mut i = 0;
        while i < self.nodes.len() {
            let val = match self.nodes[i] {
                Node::Const(c) => c,
                Node::State(s) => x[s],
                Node::Time => t,
                Node::Add(a, b) => v[a as usize] + v[b as usize],
                Node::Sub(a, b) => v[a as usize] - v[b as usize],
                Node::Mul(a, b) => v[a as usize] * v[b as usize],
                Node::Div(a, b) => v[a as usize] / v[b as usize],
                Node::Neg(a) => -v[a as usize],
                Node::Scale(a, c) => v[a as usize] * c,
                Node::Offset(a, c) => v[a as usize] + c,
                Node::Recip(a) => 1.0 / v[a as usize],
                Node::Sqrt(a) => v[a as usize].sqrt(),
                Node::Sin(a) => {
                    let (s, c) = v[a as usize].sin_cos();
                    v[i + 1] = c;
                    v[i] = s;
                    i += 2;
                    continue;
                }
                Node::Cos(a) => v[a as usize].cos(),
                Node::Gate { deriv, state, lo, hi } => {
                    let d = v[deriv as usize];
                    if gate_blocks(x[state], d, lo, hi) {
                        0.0
                    } else {
                        d
                    }
                }
            };
            v[i] = val;
            i += 1;
        }
        for &(s, id) in &self.outputs {
            deriv[s] = v[id as usize];
        }
    }

    pub(crate) fn prepare(&self, work: &mut TapeWork, order: usize) {
        let width = order + 1;
        work.width = width;
        work.values.clear();
        work.values.resize(self.nodes.len() * width, 0.0);
        work.gates.clear();
        work.gates.resize(self.nodes.len(), false);
    }

    /// Computes coefficient `k` of every node from `series` coefficients
    /// `0..=k` and the node coefficients `0..k` already held in `work`.
    /// [`Tape::prepare`] must have been called for this expansion.
    pub(crate) fn coefficient(&self, k: usize, series: &DtSeries, t0: f64, work: &mut TapeWork) {
        let w = work.width;
        let vals = &mut work.values;
        let mut i = 0;
        while i < self.nodes.len() {
            let at = |id: u32| id as usize * w;
            let val = match self.nodes[i] {
                Node::Const(c) => {
                    if k == 0 {
                        c
                    } else {
                        0.0
                    }
                }
                Node::State(s) => series.coeff(s, k),
                Node::Time => match k {
                    0 => t0,
                    1 => 1.0,
                    _ => 0.0,
                },
                Node::Add(a, b) => vals[at(a) + k] + vals[at(b) + k],
                Node::Sub(a, b) => vals[at(a) + k] - vals[at(b) + k],
                Node::Mul(a, b) => {
                    cauchy(&vals[at(a)..at(a) + k + 1], &vals[at(b)..at(b) + k + 1], k)
                }
                Node::Div(a, b) => {
                    if k == 0 {
                        vals[at(a)] / vals[at(b)]
                    } else {
                        div_step(
                            &vals[at(a)..at(a) + k + 1],
                            &vals[at(b)..at(b) + k + 1],
                            &vals[i * w..i * w + k],
                            k,
                        )
                    }
                }
                Node::Neg(a) => -vals[at(a) + k],
                Node::Scale(a, c) => vals[at(a) + k] * c,
                Node::Offset(a, c) => {
                    if k == 0 {
                        vals[at(a)] + c
                    } else {
                        vals[at(a) + k]
                    }
                }
                Node::Recip(a) => {
                    if k == 0 {
                        1.0 / vals[at(a)]
                    } else {
                        recip_step(&vals[at(a)..at(a) + k + 1], &vals[i * w..i * w + k], k)
                    }
                }
                Node::Sqrt(a) => {
                    if k == 0 {
                        vals[at(a)].sqrt()
                    } else {
                        sqrt_step(&vals[at(a)..at(a) + k + 1], &vals[i * w..i * w + k], k)
                    }
                }
                Node::Sin(a) => {
                    let (s, c) = if k == 0 {
                        vals[at(a)].sin_cos()
                    } else {
                        sin_cos_step(
                            &vals[at(a)..at(a) + k + 1],
                            &vals[i * w..i * w + k],
                            &vals[(i + 1) * w..(i + 1) * w + k],
                            k,
                        )
                    };
                    vals[i * w + k] = s;
                    vals[(i + 1) * w + k] = c;
                    i += 2;
                    continue;
                }
                Node::Cos(_) => unreachable!("cosine nodes are filled with their sine partner"),
                Node::Gate { deriv, state, lo, hi } => {
                    if k == 0 {
                        work.gates[i] = gate_blocks(series.coeff(state, 0), vals[at(deriv)], lo, hi);
                    }
                    if work.gates[i] {
                        0.0
                    } else {
                        vals[at(deriv) + k]
                    }
                }
            };
            vals[i * w + k] = val;
            i += 1;
        }
    }

    /// Writes coefficient `k` of each recorded derivative into `out[state]`.
    pub(crate) fn output_coefficients(&self, k: usize, work: &TapeWork, out: &mut [f64]) {
        for &(s, id) in &self.outputs {
            out[s] = work.values[id as usize * work.width + k];
        }
    }
}

fn gate_blocks(x: f64, d: f64, lo: f64, hi: f64) -> bool {
    (x >= hi && d > 0.0) || (x <= lo && d < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expand(tape: &Tape, x0: &[f64], t0: f64, order: usize) -> DtSeries {
        tape.expand(x0, t0, order)
    }

    #[test]
    fn exponential_decay_coefficients() {
        let b = TapeBuilder::new();
        let x = b.state(0);
        b.output(0, -x);
        let tape = b.finish();
        let s = expand(&tape, &[1.0], 0.0, 20);
        let mut fact = 1.0;
        for k in 0..=20 {
            if k > 0 {
                fact *= k as f64;
            }
            let want = if k % 2 == 0 { 1.0 } else { -1.0 } / fact;
            assert!((s.coeff(0, k) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn nonlinear_logistic_matches_plain_derivatives() {
        // x' = x (1 - x) / (1 + sin(t)^2) exercised through every node kind
        let b = TapeBuilder::new();
        let x = b.state(0);
        let t = b.time();
        let (s, _c) = t.sin_cos();
        let denom = s.square() + 1.0;
        let d = x * (1.0 - x) / denom + (x * x + 1.0).sqrt().recip() * 0.1;
        b.output(0, d);
        let tape = b.finish();
        let s = expand(&tape, &[0.3], 0.4, 12);
        // compare X[1] with plain evaluation and X[2] with a finite difference of f along the solution
        let mut work = TapeWork::default();
        let mut f = [0.0];
        tape.eval(&[0.3], 0.4, &mut work, &mut f);
        assert!((s.coeff(0, 1) - f[0]).abs() < 1e-15);
        let h = 1e-5;
        let xp = s.evaluate(h)[0];
        let xm = s.evaluate(-h)[0];
        let mut fp = [0.0];
        let mut fm = [0.0];
        tape.eval(&[xp], 0.4 + h, &mut work, &mut fp);
        tape.eval(&[xm], 0.4 - h, &mut work, &mut fm);
        let x2 = (fp[0] - fm[0]) / (2.0 * h) / 2.0;
        assert!((s.coeff(0, 2) - x2).abs() < 1e-8);
    }

    #[test]
    fn gate_blocks_outward_motion() {
        let b = TapeBuilder::new();
        b.limited_output(0, b.constant(1.0) + b.state(0) * 0.0, 0.0, 1.0);
        let tape = b.finish();
        let mut work = TapeWork::default();
        let mut d = [0.0];
        tape.eval(&[1.0], 0.0, &mut work, &mut d);
        assert_eq!(d[0], 0.0);
        tape.eval(&[0.5], 0.0, &mut work, &mut d);
        assert_eq!(d[0], 1.0);
        assert_eq!(tape.bounds().len(), 1);
    }
}
