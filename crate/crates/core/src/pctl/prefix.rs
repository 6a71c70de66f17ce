//! Evaluation of step-bounded path formulas on finite trace prefixes.

use super::ast::*;
use super::eval::{resolve_atom, Pred, ResolveError};
use crate::network::{Network, NetworkState};

/// Number of steps after position 0 that decide the formula, or `None` when
/// no finite prefix does.
pub fn horizon(f: &PathFormula) -> Option<u64> {
    match f {
        PathFormula::Bool(_) | PathFormula::Atom(_) => Some(0),
        PathFormula::Not(a) => horizon(a),
        PathFormula::And(a, b) | PathFormula::Or(a, b) | PathFormula::Implies(a, b) => {
            Some(horizon(a)?.max(horizon(b)?))
        }
        PathFormula::Next(a) => horizon(a)?.checked_add(1),
        PathFormula::Finally(Bound::AtMost(t), a) | PathFormula::Globally(Bound::AtMost(t), a) => {
            horizon(a)?.checked_add(*t)
        }
        PathFormula::Until(Bound::AtMost(t), a, b) => horizon(a)?.max(horizon(b)?).checked_add(*t),
        _ => None,
    }
}

#[derive(Debug, Clone)]
enum Node {
    Bool(bool),
    Atom(Pred),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Next(Box<Node>),
    Finally(u64, Box<Node>),
    Globally(u64, Box<Node>),
    Until(u64, Box<Node>, Box<Node>),
}

/// A bounded path formula compiled against a network.
#[derive(Debug, Clone)]
pub struct PrefixMonitor {
    root: Node,
    horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("not statistically checkable; use exact checker")]
    Unbounded,
    #[error(transparent)]
    Resolve(#[from] ResolveError),
}

impl PrefixMonitor {
    pub fn new(f: &PathFormula, network: &Network) -> Result<Self, PrefixError> {
        let horizon = horizon(f).ok_or(PrefixError::Unbounded)?;
        Ok(PrefixMonitor {
            root: build(f, network)?,
            horizon,
        })
    }

    /// Number of states after the initial one needed to decide the formula.
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Evaluates at position 0; `states` must hold at least `horizon + 1`
    /// states.
    pub fn eval(&self, states: &[NetworkState]) -> bool {
        assert!(states.len() as u64 > self.horizon, "prefix shorter than horizon");
        eval(&self.root, states, 0)
    }
}

fn build(f: &PathFormula, network: &Network) -> Result<Node, PrefixError> {
    let b = |x: &PathFormula| build(x, network).map(Box::new);
    Ok(match f {
        PathFormula::Bool(v) => Node::Bool(*v),
        PathFormula::Atom(a) => Node::Atom(resolve_atom(a, network)?),
        PathFormula::Not(a) => Node::Not(b(a)?),
        PathFormula::And(x, y) => Node::And(b(x)?, b(y)?),
        PathFormula::Or(x, y) => Node::Or(b(x)?, b(y)?),
        PathFormula::Implies(x, y) => Node::Implies(b(x)?, b(y)?),
        PathFormula::Next(a) => Node::Next(b(a)?),
        PathFormula::Finally(Bound::AtMost(t), a) => Node::Finally(*t, b(a)?),
        PathFormula::Globally(Bound::AtMost(t), a) => Node::Globally(*t, b(a)?),
        PathFormula::Until(Bound::AtMost(t), x, y) => Node::Until(*t, b(x)?, b(y)?),
        _ => return Err(PrefixError::Unbounded),
    })
}

fn eval(n: &Node, s: &[NetworkState], i: usize) -> bool {
    match n {
        Node::Bool(v) => *v,
        Node::Atom(p) => p.eval(&s[i], None),
        Node::Not(a) => !eval(a, s, i),
        Node::And(a, b) => eval(a, s, i) && eval(b, s, i),
        Node::Or(a, b) => eval(a, s, i) || eval(b, s, i),
        Node::Implies(a, b) => !eval(a, s, i) || eval(b, s, i),
        Node::Next(a) => eval(a, s, i + 1),
        Node::Finally(t, a) => (i..=i + *t as usize).any(|j| eval(a, s, j)),
        Node::Globally(t, a) => (i..=i + *t as usize).all(|j| eval(a, s, j)),
        Node::Until(t, a, b) => {
            for j in i..=i + *t as usize {
                if eval(b, s, j) {
                    return true;
                }
                if !eval(a, s, j) {
                    return false;
                }
            }
            false
        }
    }
}
