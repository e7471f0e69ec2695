//! Reverse-mode differentiation over a flat tape.
//!
//! Every block in this module is written against [`Real`], implemented by
//! plain `f64` (fast inference) and by [`Var`] (recorded on a [`Tape`] so
//! parameter gradients come out of a single backward sweep).

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;
    /// A constant living in the same computation as `self`.
    fn lift(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;

    fn sigmoid(self) -> Self {
        let v = self.value();
        if v >= 0.0 {
            let e = (-self).exp();
            (e + 1.0).recip_of(1.0)
        } else {
            let e = self.exp();
            e / (e + 1.0)
        }
    }

    /// `c / self`
    fn recip_of(self, c: f64) -> Self {
        self.lift(c) / self
    }

    fn square(self) -> Self {
        self * self
    }

    fn relu(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            self * 0.0
        }
    }

    fn leaky_relu(self, slope: f64) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            self * slope
        }
    }

    fn elu(self, alpha: f64) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            (self.exp() - 1.0) * alpha
        }
    }

    /// `log(sigmoid(self))` without overflow.
    fn log_sigmoid(self) -> Self {
        let v = self.value();
        if v >= 0.0 {
            -((-self).exp() + 1.0).ln()
        } else {
            self - (self.exp() + 1.0).ln()
        }
    }
}

impl Real for f64 {
    fn value(self) -> f64 {
        self
    }
    fn lift(self, c: f64) -> Self {
        c
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [(usize, f64); 2],
    arity: u8,
}

/// Append-only record of operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, arity: u8, parents: [(usize, f64); 2]) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, arity });
        nodes.len() - 1
    }

    /// A new independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        Var {
            tape: self,
            idx: self.push(0, [(0, 0.0); 2]),
            val: value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adjoints of every tape entry with respect to `output`.
    pub fn gradient(&self, output: Var<'_>) -> Gradient {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output.idx] = 1.0;
        for i in (0..=output.idx).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            for k in 0..n.arity as usize {
                let (p, d) = n.parents[k];
                adj[p] += a * d;
            }
        }
        Gradient { adj }
    }
}

pub struct Gradient {
    adj: Vec<f64>,
}

impl Gradient {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adj[v.idx]
    }

    pub fn wrt_all(&self, vs: &[Var<'_>]) -> Vec<f64> {
        vs.iter().map(|v| self.adj[v.idx]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
    val: f64,
}

impl<'t> Var<'t> {
    fn unary(self, val: f64, d: f64) -> Self {
        Var {
            tape: self.tape,
            idx: self.tape.push(1, [(self.idx, d), (0, 0.0)]),
            val,
        }
    }

    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        Var {
            tape: self.tape,
            idx: self.tape.push(2, [(self.idx, da), (other.idx, db)]),
            val,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl<'t> Real for Var<'t> {
    fn value(self) -> f64 {
        self.val
    }
    fn lift(self, c: f64) -> Self {
        self.tape.var(c)
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn sigmoid(self) -> Self {
        let s = if self.val >= 0.0 {
            1.0 / (1.0 + (-self.val).exp())
        } else {
            let e = self.val.exp();
            e / (1.0 + e)
        };
        self.unary(s, s * (1.0 - s))
    }
}

/// Sum of a non-empty slice.
pub fn sum<T: Real>(xs: &[T]) -> T {
    let mut it = xs.iter().copied();
    let first = it.next().expect("sum of empty slice");
    it.fold(first, |a, b| a + b)
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    let mut acc = a[0] * b[0];
    for i in 1..a.len() {
        acc = acc + a[i] * b[i];
    }
    acc
}
