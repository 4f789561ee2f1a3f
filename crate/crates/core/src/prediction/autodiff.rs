//! Scalar reverse-mode differentiation.
//!
//! The recurrent model's forward pass is written once over [`Real`]; running
//! it with `f64` gives plain inference, running it with [`Var`] records a tape
//! from which [`Tape::gradient`] recovers exact derivatives.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;

    fn sigmoid(self) -> Self {
        Self::from_f64(1.0) / (Self::from_f64(1.0) + (-self).exp())
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sigmoid(self) -> Self {
        1.0 / (1.0 + (-self).exp())
    }
}

#[derive(Clone, Copy)]
struct Node {
    parents: [(usize, f64); 2],
    arity: u8,
}

/// Append-only record of the operations that produced each [`Var`].
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node {
            parents: [(0, 0.0); 2],
            arity: 0,
        });
        Var {
            value,
            node: Some((self, index)),
        }
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    /// d(output)/d(node) for every node on the tape.
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![0.0; nodes.len()];
        let Some((_, out)) = output.node else {
            return adjoint;
        };
        adjoint[out] = 1.0;
        for k in (0..=out).rev() {
            let a = adjoint[k];
            if a == 0.0 {
                continue;
            }
            let node = nodes[k];
            for &(parent, partial) in &node.parents[..node.arity as usize] {
                adjoint[parent] += a * partial;
            }
        }
        adjoint
    }
}

/// A value that may be tracked on a [`Tape`]; untracked values are constants.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    value: f64,
    node: Option<(&'t Tape, usize)>,
}

impl<'t> Var<'t> {
    pub fn index(&self) -> Option<usize> {
        self.node.map(|(_, k)| k)
    }

    fn unary(self, value: f64, partial: f64) -> Self {
        match self.node {
            None => Var { value, node: None },
            Some((tape, k)) => Var {
                value,
                node: Some((
                    tape,
                    tape.push(Node {
                        parents: [(k, partial), (0, 0.0)],
                        arity: 1,
                    }),
                )),
            },
        }
    }

    fn binary(self, rhs: Self, value: f64, dl: f64, dr: f64) -> Self {
        let node = match (self.node, rhs.node) {
            (None, None) => None,
            (Some((tape, l)), None) => Some((
                tape,
                tape.push(Node {
                    parents: [(l, dl), (0, 0.0)],
                    arity: 1,
                }),
            )),
            (None, Some((tape, r))) => Some((
                tape,
                tape.push(Node {
                    parents: [(r, dr), (0, 0.0)],
                    arity: 1,
                }),
            )),
            (Some((tape, l)), Some((_, r))) => Some((
                tape,
                tape.push(Node {
                    parents: [(l, dl), (r, dr)],
                    arity: 2,
                }),
            )),
        };
        Var { value, node }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl Real for Var<'_> {
    fn from_f64(v: f64) -> Self {
        Var { value: v, node: None }
    }
    fn value(self) -> f64 {
        self.value
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn sigmoid(self) -> Self {
        let s = 1.0 / (1.0 + (-self.value).exp());
        self.unary(s, s * (1.0 - s))
    }
}
