//! Scalar automatic differentiation on an append-only tape.
//!
//! Every scalar carries, besides its value, forward-mode tangents with
//! respect to the two normalized input coordinates. The tangent arithmetic
//! itself is recorded on the tape, so a reverse sweep started from any node
//! (a value, or one of the tangent channels) yields exact gradients with
//! respect to all registered parameters. This gives the mixed second-order
//! derivatives the energy loss needs: strains are input-tangents, and the
//! optimizer needs their parameter gradients.

use crate::error::{PikanError, Result};

pub type NodeId = u32;

const NO_PARENT: NodeId = u32::MAX;

/// Node id of the constant 0 every tape starts with.
pub const ZERO: NodeId = 0;
/// Node id of the constant 1 every tape starts with.
pub const ONE: NodeId = 1;

/// Which input coordinate a lifted input is seeded against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputAxis {
    X,
    Y,
}

#[derive(Clone, Copy)]
struct Node {
    p0: NodeId,
    p1: NodeId,
    d0: f64,
    d1: f64,
}

/// A scalar on the tape together with its two input-tangent channels.
///
/// For a parameter or constant leaf both tangents are the shared `ZERO`
/// node; arithmetic short-circuits on that, so parameter-only subgraphs
/// pay nothing for the tangent channels.
#[derive(Debug, Clone, Copy)]
pub struct DualScalar {
    pub v: NodeId,
    pub dx: NodeId,
    pub dy: NodeId,
}

impl DualScalar {
    pub fn node_ids(&self) -> (NodeId, NodeId, NodeId) {
        (self.v, self.dx, self.dy)
    }
}

pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<f64>,
    n_params: usize,
    adjoint: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        let mut tape = Tape {
            nodes: Vec::with_capacity(1 << 14),
            values: Vec::with_capacity(1 << 14),
            n_params: 0,
            adjoint: Vec::new(),
        };
        tape.push_leaf(0.0);
        tape.push_leaf(1.0);
        tape
    }

    /// Registers trainable leaves. Must be called once, directly after
    /// construction, before any expression is recorded.
    pub fn register_params(&mut self, theta: &[f64]) {
        assert_eq!(self.nodes.len(), 2, "params must be registered first");
        for &t in theta {
            self.push_leaf(t);
        }
        self.n_params = theta.len();
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Node id of the i-th registered parameter.
    pub fn param(&self, i: usize) -> NodeId {
        debug_assert!(i < self.n_params);
        (2 + i) as NodeId
    }

    pub fn param_dual(&self, i: usize) -> DualScalar {
        DualScalar {
            v: self.param(i),
            dx: ZERO,
            dy: ZERO,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Tape position to rewind to between independent evaluations.
    pub fn watermark(&self) -> usize {
        self.nodes.len()
    }

    /// Drops every node recorded after `mark`, keeping leaves intact.
    pub fn rewind(&mut self, mark: usize) {
        debug_assert!(mark >= 2 + self.n_params);
        self.nodes.truncate(mark);
        self.values.truncate(mark);
    }

    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id as usize]
    }

    fn push_leaf(&mut self, value: f64) -> NodeId {
        self.push_node(NO_PARENT, NO_PARENT, 0.0, 0.0, value)
    }

    #[inline]
    fn push_node(&mut self, p0: NodeId, p1: NodeId, d0: f64, d1: f64, value: f64) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { p0, p1, d0, d1 });
        self.values.push(value);
        id
    }

    // ---- raw scalar ops on node ids ----

    pub fn constant(&mut self, c: f64) -> NodeId {
        self.push_leaf(c)
    }

    #[inline]
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == ZERO {
            return b;
        }
        if b == ZERO {
            return a;
        }
        let v = self.value(a) + self.value(b);
        self.push_node(a, b, 1.0, 1.0, v)
    }

    #[inline]
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if b == ZERO {
            return a;
        }
        let v = self.value(a) - self.value(b);
        self.push_node(a, b, 1.0, -1.0, v)
    }

    #[inline]
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == ZERO || b == ZERO {
            return ZERO;
        }
        let va = self.value(a);
        let vb = self.value(b);
        self.push_node(a, b, vb, va, va * vb)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let vb = self.value(b);
        if vb == 0.0 {
            return Err(PikanError::DivisionByZero { node: b });
        }
        if a == ZERO {
            return Ok(ZERO);
        }
        let va = self.value(a);
        Ok(self.push_node(a, b, 1.0 / vb, -va / (vb * vb), va / vb))
    }

    #[inline]
    pub fn neg(&mut self, a: NodeId) -> NodeId {
        if a == ZERO {
            return ZERO;
        }
        let v = -self.value(a);
        self.push_node(a, NO_PARENT, -1.0, 0.0, v)
    }

    /// c * a for a constant c.
    #[inline]
    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        if a == ZERO || c == 0.0 {
            return ZERO;
        }
        if c == 1.0 {
            return a;
        }
        let v = c * self.value(a);
        self.push_node(a, NO_PARENT, c, 0.0, v)
    }

    /// a + c for a constant c.
    #[inline]
    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        if c == 0.0 {
            return a;
        }
        let v = self.value(a) + c;
        self.push_node(a, NO_PARENT, 1.0, 0.0, v)
    }

    /// c0*a + c1*b for constants c0, c1.
    #[inline]
    pub fn lincomb(&mut self, a: NodeId, c0: f64, b: NodeId, c1: f64) -> NodeId {
        if a == ZERO {
            return self.scale(b, c1);
        }
        if b == ZERO {
            return self.scale(a, c0);
        }
        let v = c0 * self.value(a) + c1 * self.value(b);
        self.push_node(a, b, c0, c1, v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).tanh();
        self.push_node(a, NO_PARENT, 1.0 - v * v, 0.0, v)
    }

    /// Logistic sigmoid, recorded as a single node.
    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = 1.0 / (1.0 + (-self.value(a)).exp());
        self.push_node(a, NO_PARENT, v * (1.0 - v), 0.0, v)
    }

    pub fn powi(&mut self, a: NodeId, n: i32) -> NodeId {
        let va = self.value(a);
        let v = va.powi(n);
        self.push_node(a, NO_PARENT, f64::from(n) * va.powi(n - 1), 0.0, v)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).sqrt();
        self.push_node(a, NO_PARENT, 0.5 / v, 0.0, v)
    }

    /// Sums a slice of nodes with a fixed-shape pairwise tree.
    pub fn sum_pairwise(&mut self, ids: &[NodeId]) -> NodeId {
        match ids.len() {
            0 => ZERO,
            1 => ids[0],
            n => {
                let mid = n / 2;
                let lo = self.sum_pairwise(&ids[..mid]);
                let hi = self.sum_pairwise(&ids[mid..]);
                self.add(lo, hi)
            }
        }
    }

    // ---- dual lifting ----

    pub fn lift_input(&mut self, x: f64, which: InputAxis) -> DualScalar {
        let v = self.push_leaf(x);
        match which {
            InputAxis::X => DualScalar { v, dx: ONE, dy: ZERO },
            InputAxis::Y => DualScalar { v, dx: ZERO, dy: ONE },
        }
    }

    pub fn lift_const(&mut self, c: f64) -> DualScalar {
        DualScalar {
            v: self.push_leaf(c),
            dx: ZERO,
            dy: ZERO,
        }
    }

    // ---- dual arithmetic (tangents recorded on the tape) ----

    pub fn dadd(&mut self, a: DualScalar, b: DualScalar) -> DualScalar {
        DualScalar {
            v: self.add(a.v, b.v),
            dx: self.add(a.dx, b.dx),
            dy: self.add(a.dy, b.dy),
        }
    }

    pub fn dsub(&mut self, a: DualScalar, b: DualScalar) -> DualScalar {
        DualScalar {
            v: self.sub(a.v, b.v),
            dx: self.sub(a.dx, b.dx),
            dy: self.sub(a.dy, b.dy),
        }
    }

    pub fn dmul(&mut self, a: DualScalar, b: DualScalar) -> DualScalar {
        let v = self.mul(a.v, b.v);
        let dx = {
            let t0 = self.mul(a.dx, b.v);
            let t1 = self.mul(a.v, b.dx);
            self.add(t0, t1)
        };
        let dy = {
            let t0 = self.mul(a.dy, b.v);
            let t1 = self.mul(a.v, b.dy);
            self.add(t0, t1)
        };
        DualScalar { v, dx, dy }
    }

    pub fn ddiv(&mut self, a: DualScalar, b: DualScalar) -> Result<DualScalar> {
        let v = self.div(a.v, b.v)?;
        // d(a/b) = da/b - (a/b) * db/b
        let dx = {
            let t0 = self.div(a.dx, b.v)?;
            let q = self.div(b.dx, b.v)?;
            let t1 = self.mul(v, q);
            self.sub(t0, t1)
        };
        let dy = {
            let t0 = self.div(a.dy, b.v)?;
            let q = self.div(b.dy, b.v)?;
            let t1 = self.mul(v, q);
            self.sub(t0, t1)
        };
        Ok(DualScalar { v, dx, dy })
    }

    pub fn dneg(&mut self, a: DualScalar) -> DualScalar {
        DualScalar {
            v: self.neg(a.v),
            dx: self.neg(a.dx),
            dy: self.neg(a.dy),
        }
    }

    pub fn dscale(&mut self, a: DualScalar, c: f64) -> DualScalar {
        DualScalar {
            v: self.scale(a.v, c),
            dx: self.scale(a.dx, c),
            dy: self.scale(a.dy, c),
        }
    }

    pub fn dadd_const(&mut self, a: DualScalar, c: f64) -> DualScalar {
        DualScalar {
            v: self.add_const(a.v, c),
            dx: a.dx,
            dy: a.dy,
        }
    }

    /// c - a; tangents are negated.
    pub fn dconst_sub(&mut self, c: f64, a: DualScalar) -> DualScalar {
        let v = self.value(a.v);
        DualScalar {
            v: self.push_node(a.v, NO_PARENT, -1.0, 0.0, c - v),
            dx: self.neg(a.dx),
            dy: self.neg(a.dy),
        }
    }

    pub fn dtanh(&mut self, a: DualScalar) -> DualScalar {
        let v = self.tanh(a.v);
        if a.dx == ZERO && a.dy == ZERO {
            return DualScalar { v, dx: ZERO, dy: ZERO };
        }
        // derivative 1 - tanh^2, built on-tape so theta-gradients flow through it
        let t2 = self.mul(v, v);
        let s = self.push_node(t2, NO_PARENT, -1.0, 0.0, 1.0 - self.value(t2));
        DualScalar {
            v,
            dx: self.mul(s, a.dx),
            dy: self.mul(s, a.dy),
        }
    }

    /// silu(x) = x * sigmoid(x).
    pub fn dsilu(&mut self, a: DualScalar) -> DualScalar {
        let s = self.sigmoid(a.v);
        let v = self.mul(a.v, s);
        if a.dx == ZERO && a.dy == ZERO {
            return DualScalar { v, dx: ZERO, dy: ZERO };
        }
        // silu'(x) = s * (1 + x * (1 - s))
        let one_minus_s = self.push_node(s, NO_PARENT, -1.0, 0.0, 1.0 - self.value(s));
        let xm = self.mul(a.v, one_minus_s);
        let inner = self.add_const(xm, 1.0);
        let d = self.mul(s, inner);
        DualScalar {
            v,
            dx: self.mul(d, a.dx),
            dy: self.mul(d, a.dy),
        }
    }

    pub fn dpowi(&mut self, a: DualScalar, n: i32) -> DualScalar {
        let v = self.powi(a.v, n);
        if a.dx == ZERO && a.dy == ZERO {
            return DualScalar { v, dx: ZERO, dy: ZERO };
        }
        let va = self.value(a.v);
        let d = self.push_node(
            a.v,
            NO_PARENT,
            f64::from(n) * f64::from(n - 1) * va.powi(n - 2),
            0.0,
            f64::from(n) * va.powi(n - 1),
        );
        DualScalar {
            v,
            dx: self.mul(d, a.dx),
            dy: self.mul(d, a.dy),
        }
    }

    // ---- reverse pass ----

    /// Reverse accumulation from `output`, with adjoint seed `seed`,
    /// adding parameter gradients into `grad` (length `n_params`).
    pub fn backward_into(&mut self, output: NodeId, seed: f64, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.n_params);
        let n = output as usize + 1;
        if self.adjoint.len() < n {
            self.adjoint.resize(n, 0.0);
        }
        let adj = &mut self.adjoint[..n];
        adj.fill(0.0);
        adj[output as usize] = seed;
        let first_non_leaf = 2 + self.n_params;
        for i in (first_non_leaf..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = self.nodes[i];
            if node.p0 != NO_PARENT {
                adj[node.p0 as usize] += node.d0 * a;
            }
            if node.p1 != NO_PARENT {
                adj[node.p1 as usize] += node.d1 * a;
            }
        }
        if n > 2 {
            let upto = self.n_params.min(n - 2);
            for (g, a) in grad[..upto].iter_mut().zip(&adj[2..2 + upto]) {
                *g += *a;
            }
        }
    }

    /// Gradient of `output` over all parameter slots.
    pub fn backward(&mut self, output: NodeId) -> Vec<f64> {
        let mut grad = vec![0.0; self.n_params];
        self.backward_into(output, 1.0, &mut grad);
        grad
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}
