//! Product of the chain with a deterministic monitor for boolean
//! combinations of temporal leaves. Each leaf remembers whether it has been
//! decided; undecided leaves and the long-run patterns `FG`/`GF` are resolved
//! on the bottom components of the product.

use std::collections::{HashMap, VecDeque};

use num_traits::Zero;

use super::ast::{Bound, PathFormula};
use super::eval::{compile_step, Pred};
use super::CheckError;
use crate::dtmc::Dtmc;
use crate::network::NetworkState;
use crate::rational::Rational;
use crate::solve;

#[derive(Debug, Clone)]
enum Kind {
    /// Step formula at the leaf's position.
    Now(Pred),
    Eventually(Bound, Pred),
    Always(Bound, Pred),
    Until(Bound, Pred, Pred),
    /// `FG`: holds on every step of the limit.
    LimitAll(Pred),
    /// `GF`: holds on some step of the limit.
    LimitSome(Pred),
}

/// A temporal leaf whose window starts `offset` steps into the path.
#[derive(Debug, Clone)]
struct Leaf {
    offset: u64,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Skel {
    Leaf(usize),
    Const(bool),
    Not(Box<Skel>),
    And(Box<Skel>, Box<Skel>),
    Or(Box<Skel>, Box<Skel>),
}

const PENDING: u8 = 0;
const TRUE: u8 = 1;
const FALSE: u8 = 2;

/// Unfolding bounded operators over temporal bodies multiplies leaves; past
/// this many the formula is rejected.
const MAX_LEAVES: usize = 4096;

fn unsupported(f: &PathFormula) -> CheckError {
    CheckError::Unsupported(format!("fragment unsupported: {f}"))
}

fn fold(parts: Vec<Skel>, and: bool) -> Skel {
    parts
        .into_iter()
        .reduce(|a, b| {
            if and {
                Skel::And(Box::new(a), Box::new(b))
            } else {
                Skel::Or(Box::new(a), Box::new(b))
            }
        })
        .unwrap_or(Skel::Const(and))
}

struct Builder<'a> {
    dtmc: &'a Dtmc,
    leaves: Vec<Leaf>,
}

impl Builder<'_> {
    fn step(&self, f: &PathFormula) -> Result<Pred, CheckError> {
        compile_step(f, &self.dtmc.network).map_err(CheckError::from)
    }

    fn leaf(&mut self, offset: u64, kind: Kind) -> Result<Skel, CheckError> {
        if self.leaves.len() >= MAX_LEAVES {
            return Err(CheckError::Unsupported(format!(
                "fragment unsupported: more than {MAX_LEAVES} monitor leaves"
            )));
        }
        self.leaves.push(Leaf { offset, kind });
        Ok(Skel::Leaf(self.leaves.len() - 1))
    }

    /// Skeleton of `f` evaluated `d` steps into the path.
    fn skeleton(&mut self, f: &PathFormula, d: u64) -> Result<Skel, CheckError> {
        if f.is_step() {
            let p = self.step(f)?;
            return self.leaf(d, Kind::Now(p));
        }
        let sub = |b: &mut Self, g: &PathFormula, at: u64| b.skeleton(g, at).map(Box::new);
        Ok(match f {
            PathFormula::Not(a) => Skel::Not(sub(self, a, d)?),
            PathFormula::And(a, b) => Skel::And(sub(self, a, d)?, sub(self, b, d)?),
            PathFormula::Or(a, b) => Skel::Or(sub(self, a, d)?, sub(self, b, d)?),
            PathFormula::Implies(a, b) => Skel::Or(Box::new(Skel::Not(sub(self, a, d)?)), sub(self, b, d)?),
            PathFormula::Next(g) => self.skeleton(g, d + 1)?,
            PathFormula::Finally(Bound::Unbounded, g) if matches!(**g, PathFormula::Globally(Bound::Unbounded, _)) => {
                let PathFormula::Globally(_, h) = &**g else { unreachable!() };
                self.limit_all(h)?
            }
            PathFormula::Globally(Bound::Unbounded, g) if matches!(**g, PathFormula::Finally(Bound::Unbounded, _)) => {
                let PathFormula::Finally(_, h) = &**g else { unreachable!() };
                self.limit_some(h)?
            }
            PathFormula::Finally(bound, g) if g.is_step() => {
                let p = self.step(g)?;
                self.leaf(d, Kind::Eventually(*bound, p))?
            }
            PathFormula::Globally(bound, g) if g.is_step() => {
                let p = self.step(g)?;
                self.leaf(d, Kind::Always(*bound, p))?
            }
            PathFormula::Until(bound, a, b) if a.is_step() && b.is_step() => {
                let (pa, pb) = (self.step(a)?, self.step(b)?);
                self.leaf(d, Kind::Until(*bound, pa, pb))?
            }
            // Bounded windows over temporal bodies unfold position by position.
            PathFormula::Finally(Bound::AtMost(t), g) => {
                let parts = (0..=*t).map(|k| self.skeleton(g, d + k)).collect::<Result<_, _>>()?;
                fold(parts, false)
            }
            PathFormula::Globally(Bound::AtMost(t), g) => {
                let parts = (0..=*t).map(|k| self.skeleton(g, d + k)).collect::<Result<_, _>>()?;
                fold(parts, true)
            }
            PathFormula::Until(Bound::AtMost(t), a, b) => {
                let mut parts = Vec::new();
                for k in 0..=*t {
                    let mut conj = vec![self.skeleton(b, d + k)?];
                    for j in 0..k {
                        conj.push(self.skeleton(a, d + j)?);
                    }
                    parts.push(fold(conj, true));
                }
                fold(parts, false)
            }
            _ => return Err(unsupported(f)),
        })
    }

    /// `FG h`.
    fn limit_all(&mut self, h: &PathFormula) -> Result<Skel, CheckError> {
        if h.is_step() {
            let p = self.step(h)?;
            return self.leaf(0, Kind::LimitAll(p));
        }
        Ok(match h {
            PathFormula::And(a, b) => Skel::And(Box::new(self.limit_all(a)?), Box::new(self.limit_all(b)?)),
            PathFormula::Finally(Bound::Unbounded, x) => self.limit_some(x)?,
            PathFormula::Globally(Bound::Unbounded, x) => self.limit_all(x)?,
            _ => return Err(unsupported(h)),
        })
    }

    /// `GF h`.
    fn limit_some(&mut self, h: &PathFormula) -> Result<Skel, CheckError> {
        if h.is_step() {
            let p = self.step(h)?;
            return self.leaf(0, Kind::LimitSome(p));
        }
        Ok(match h {
            PathFormula::Or(a, b) => Skel::Or(Box::new(self.limit_some(a)?), Box::new(self.limit_some(b)?)),
            PathFormula::Finally(Bound::Unbounded, x) => self.limit_some(x)?,
            PathFormula::Globally(Bound::Unbounded, x) => self.limit_all(x)?,
            _ => return Err(unsupported(h)),
        })
    }
}

fn eval3(s: &Skel, mem: &[u8]) -> Option<bool> {
    match s {
        Skel::Leaf(i) => match mem[*i] {
            TRUE => Some(true),
            FALSE => Some(false),
            _ => None,
        },
        Skel::Const(b) => Some(*b),
        Skel::Not(a) => eval3(a, mem).map(|v| !v),
        Skel::And(a, b) => match (eval3(a, mem), eval3(b, mem)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Skel::Or(a, b) => match (eval3(a, mem), eval3(b, mem)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
    }
}

fn eval_final(s: &Skel, leaf_value: &dyn Fn(usize) -> bool) -> bool {
    match s {
        Skel::Leaf(i) => leaf_value(*i),
        Skel::Const(b) => *b,
        Skel::Not(a) => !eval_final(a, leaf_value),
        Skel::And(a, b) => eval_final(a, leaf_value) && eval_final(b, leaf_value),
        Skel::Or(a, b) => eval_final(a, leaf_value) || eval_final(b, leaf_value),
    }
}

fn within(bound: Bound, n: u64) -> (bool, bool) {
    // (position counts, last counted position)
    match bound {
        Bound::Unbounded => (true, false),
        Bound::AtMost(t) => (n <= t, n == t),
        Bound::After(t) => (n > t, false),
    }
}

/// Updates leaf memory with the step at position `n` (`cur`, `next`).
fn advance(leaves: &[Leaf], mem: &mut [u8], n: u64, cur: &NetworkState, next: &NetworkState) {
    for (i, leaf) in leaves.iter().enumerate() {
        if mem[i] != PENDING || n < leaf.offset {
            continue;
        }
        let n = n - leaf.offset;
        let holds = |p: &Pred| p.eval(cur, Some(next));
        mem[i] = match &leaf.kind {
            Kind::Now(p) => {
                if n == 0 {
                    if holds(p) { TRUE } else { FALSE }
                } else {
                    PENDING
                }
            }
            Kind::Eventually(bound, p) => {
                let (counts, last) = within(*bound, n);
                if counts && holds(p) {
                    TRUE
                } else if last {
                    FALSE
                } else {
                    PENDING
                }
            }
            Kind::Always(bound, p) => {
                let (counts, last) = within(*bound, n);
                if counts && !holds(p) {
                    FALSE
                } else if last {
                    TRUE
                } else {
                    PENDING
                }
            }
            Kind::Until(bound, a, b) => {
                let (counts, last) = within(*bound, n);
                if counts && holds(b) {
                    TRUE
                } else if !holds(a) || last {
                    FALSE
                } else {
                    PENDING
                }
            }
            Kind::LimitAll(_) | Kind::LimitSome(_) => PENDING,
        };
    }
}

#[derive(Debug, Clone)]
pub struct MonitorResult {
    pub value: Rational,
    pub approximate: bool,
}

/// Probability that a path from the initial state satisfies `f`.
pub fn probability(dtmc: &Dtmc, f: &PathFormula) -> Result<MonitorResult, CheckError> {
    let mut builder = Builder { dtmc, leaves: Vec::new() };
    let skel = builder.skeleton(f, 0)?;
    let leaves = builder.leaves;
    let cap = leaves
        .iter()
        .map(|l| {
            let span = match &l.kind {
                Kind::Now(_) => 1,
                Kind::Eventually(b, _) | Kind::Always(b, _) | Kind::Until(b, _, _) => match b {
                    Bound::Unbounded => 1,
                    Bound::AtMost(t) | Bound::After(t) => t.saturating_add(1),
                },
                Kind::LimitAll(_) | Kind::LimitSome(_) => 0,
            };
            l.offset.saturating_add(span)
        })
        .max()
        .unwrap_or(0)
        .max(1);

    // Product states: (chain state, clock, memory); 0 and 1 are the decided
    // reject/accept sinks.
    type Key = (usize, u64, Vec<u8>);
    const REJECT: usize = 0;
    const ACCEPT: usize = 1;
    let mut keys: Vec<Option<Key>> = vec![None, None];
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut rows: Vec<Vec<(usize, Rational)>> = vec![
        vec![(REJECT, Rational::from_integer(1.into()))],
        vec![(ACCEPT, Rational::from_integer(1.into()))],
    ];
    let start: Key = (dtmc.initial, 0, vec![PENDING; leaves.len()]);
    let start_id = match eval3(&skel, &start.2) {
        Some(true) => ACCEPT,
        Some(false) => REJECT,
        None => {
            index.insert(start.clone(), 2);
            keys.push(Some(start));
            rows.push(Vec::new());
            2
        }
    };
    let mut queue: VecDeque<usize> = VecDeque::new();
    if start_id == 2 {
        queue.push_back(2);
    }
    while let Some(id) = queue.pop_front() {
        let (s, clock, mem) = keys[id].clone().expect("live product state");
        let next_clock = (clock + 1).min(cap);
        let mut row: Vec<(usize, Rational)> = Vec::new();
        for (t, q) in &dtmc.transitions[s] {
            let mut m = mem.clone();
            advance(&leaves, &mut m, clock, &dtmc.states[s], &dtmc.states[*t]);
            let target = match eval3(&skel, &m) {
                Some(true) => ACCEPT,
                Some(false) => REJECT,
                None => {
                    let key = (*t, next_clock, m);
                    match index.get(&key) {
                        Some(&j) => j,
                        None => {
                            let j = keys.len();
                            index.insert(key.clone(), j);
                            keys.push(Some(key));
                            rows.push(Vec::new());
                            queue.push_back(j);
                            j
                        }
                    }
                }
            };
            match row.iter_mut().find(|(j, _)| *j == target) {
                Some((_, acc)) => *acc += q,
                None => row.push((target, q.clone())),
            }
        }
        row.sort_by_key(|(j, _)| *j);
        rows[id] = row;
    }

    let mut target = vec![false; rows.len()];
    target[ACCEPT] = true;
    let (keys, rows) = (&keys, &rows);
    for bscc in solve::bottom_sccs(rows) {
        if bscc.len() == 1 && bscc[0] < 2 {
            continue;
        }
        let members: std::collections::HashSet<usize> = bscc.iter().copied().collect();
        let mem = keys[bscc[0]].as_ref().expect("live product state").2.clone();
        let edge_holds = |p: &Pred, want_all: bool| {
            let mut edges = bscc.iter().flat_map(|&u| {
                let (su, _, _) = keys[u].as_ref().expect("live product state");
                rows[u]
                    .iter()
                    .filter(|(v, _)| members.contains(v))
                    .map(move |(v, _)| (*su, keys[*v].as_ref().expect("live product state").0))
            });
            if want_all {
                edges.all(|(a, b)| p.eval(&dtmc.states[a], Some(&dtmc.states[b])))
            } else {
                edges.any(|(a, b)| p.eval(&dtmc.states[a], Some(&dtmc.states[b])))
            }
        };
        let leaf_value = |i: usize| match mem[i] {
            TRUE => true,
            FALSE => false,
            _ => match &leaves[i].kind {
                Kind::Always(..) => true,
                Kind::LimitAll(p) => edge_holds(p, true),
                Kind::LimitSome(p) => edge_holds(p, false),
                _ => false,
            },
        };
        if eval_final(&skel, &leaf_value) {
            for &u in &bscc {
                target[u] = true;
            }
        }
    }
    let allowed = vec![true; rows.len()];
    let result = solve::reach(rows, &allowed, &target, &[start_id]);
    let value = result.values[start_id].clone().unwrap_or_else(Rational::zero);
    Ok(MonitorResult {
        value,
        approximate: result.approximate,
    })
}
