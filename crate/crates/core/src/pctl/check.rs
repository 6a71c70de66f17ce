use std::fmt;
use std::time::Instant;

use num_traits::{One, Zero};
use serde_json::json;

use super::ast::*;
use super::eval::{check_atoms, compile_step, Pred};
use super::{monitor, parse_formula, CheckError};
use crate::dtmc::Dtmc;
use crate::rational::{self, Rational};
use crate::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    GraphQualitative,
    BoundedIteration,
    Bscc,
    LinearSolve,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GraphQualitative => "graph-qualitative",
            Method::BoundedIteration => "bounded-iteration",
            Method::LinearSolve => "linear-solve",
            Method::Bscc => "bscc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResultKind {
    Verdict,
    Probability,
    Reward,
}

impl ResultKind {
    pub fn name(self) -> &'static str {
        match self {
            ResultKind::Verdict => "verdict",
            ResultKind::Probability => "probability",
            ResultKind::Reward => "reward",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Number(Rational),
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub kind: ResultKind,
    pub value: Value,
    pub elapsed_ms: f64,
    pub method: Method,
}

impl CheckResult {
    pub fn verdict(&self) -> Option<bool> {
        match self.value {
            Value::Bool(b) => Some(b),
            Value::Number(_) => None,
        }
    }

    pub fn number(&self) -> Option<&Rational> {
        match &self.value {
            Value::Number(q) => Some(q),
            Value::Bool(_) => None,
        }
    }

    /// `{property, kind, value, method, elapsed_ms}` plus the exact value as
    /// a string under `exact`.
    pub fn to_json(&self, property: &str) -> serde_json::Value {
        let (value, exact) = match &self.value {
            Value::Bool(b) => (json!(b), b.to_string()),
            Value::Number(q) => (json!(rational::to_f64(q)), rational::display(q)),
        };
        json!({
            "property": property,
            "kind": self.kind.name(),
            "value": value,
            "method": self.method.name(),
            "elapsed_ms": self.elapsed_ms,
            "exact": exact,
        })
    }
}

/// Parses and checks one property.
pub fn check_text(dtmc: &Dtmc, text: &str) -> Result<CheckResult, CheckError> {
    check(dtmc, &parse_formula(text)?)
}

pub fn check(dtmc: &Dtmc, formula: &Formula) -> Result<CheckResult, CheckError> {
    let start = Instant::now();
    let (kind, value, method) = match formula {
        Formula::Prob {
            bound: ProbBound::Query,
            path,
        } => {
            let (q, m) = path_value(dtmc, path)?;
            (ResultKind::Probability, Value::Number(q), m)
        }
        Formula::Reward { name, horizon } => {
            let q = expected_cumulative_reward(dtmc, name, *horizon)?;
            (ResultKind::Reward, Value::Number(q), Method::BoundedIteration)
        }
        _ => {
            let (b, m) = verdict(dtmc, formula)?;
            (ResultKind::Verdict, Value::Bool(b), m)
        }
    };
    Ok(CheckResult {
        kind,
        value,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        method,
    })
}

fn verdict(dtmc: &Dtmc, f: &Formula) -> Result<(bool, Method), CheckError> {
    Ok(match f {
        Formula::Prob {
            bound: ProbBound::Compare(op, c),
            path,
        } => {
            if let Some(v) = qualitative(dtmc, path, *op, c)? {
                return Ok((v, Method::GraphQualitative));
            }
            let (q, m) = path_value(dtmc, path)?;
            (op.holds(&q, c), m)
        }
        Formula::Not(a) => {
            let (v, m) = verdict(dtmc, a)?;
            (!v, m)
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let (x, m1) = verdict(dtmc, a)?;
            let (y, m2) = verdict(dtmc, b)?;
            let v = match f {
                Formula::And(..) => x && y,
                Formula::Or(..) => x || y,
                _ => !x || y,
            };
            (v, m1.max(m2))
        }
        _ => {
            return Err(CheckError::Unsupported(
                "fragment unsupported: only bounded P operators combine with boolean connectives".into(),
            ))
        }
    })
}

fn state_mask(dtmc: &Dtmc, p: &Pred) -> Vec<bool> {
    dtmc.states.iter().map(|s| p.eval(s, None)).collect()
}

fn compile_state(dtmc: &Dtmc, f: &PathFormula) -> Result<Pred, CheckError> {
    Ok(compile_step(f, &dtmc.network)?)
}

/// Graph-only verdicts for almost-sure invariants.
fn qualitative(dtmc: &Dtmc, path: &PathFormula, op: CmpOp, c: &Rational) -> Result<Option<bool>, CheckError> {
    if !(op == CmpOp::Ge && c.is_one()) {
        return Ok(None);
    }
    match path {
        PathFormula::Globally(Bound::Unbounded, g) if g.is_step() => {
            let p = compile_state(dtmc, g)?;
            let ok = dtmc.transitions.iter().enumerate().all(|(i, row)| {
                row.iter()
                    .all(|(j, _)| p.eval(&dtmc.states[i], Some(&dtmc.states[*j])))
            });
            Ok(Some(ok))
        }
        PathFormula::Globally(Bound::After(t), g) if g.is_state() => {
            // Every state reachable in exactly t+1 steps must have its whole
            // forward closure inside the φ-states.
            let p = compile_state(dtmc, g)?;
            let mut frontier = vec![false; dtmc.len()];
            frontier[dtmc.initial] = true;
            for _ in 0..=*t {
                let mut next = vec![false; dtmc.len()];
                for (i, row) in dtmc.transitions.iter().enumerate() {
                    if frontier[i] {
                        for (j, _) in row {
                            next[*j] = true;
                        }
                    }
                }
                if next == frontier {
                    break;
                }
                frontier = next;
            }
            let closure = solve::forward_closure(&dtmc.transitions, (0..dtmc.len()).filter(|&i| frontier[i]));
            Ok(Some(
                closure
                    .iter()
                    .enumerate()
                    .all(|(i, &inside)| !inside || p.eval(&dtmc.states[i], None)),
            ))
        }
        _ => Ok(None),
    }
}

fn reach_values(dtmc: &Dtmc, allowed: &[bool], target: &[bool], sources: &[usize]) -> (Vec<Option<Rational>>, Method) {
    let r = solve::reach(&dtmc.transitions, allowed, target, sources);
    let method = if r.approximate {
        Method::BoundedIteration
    } else if r.solved {
        Method::LinearSolve
    } else {
        Method::GraphQualitative
    };
    (r.values, method)
}

/// Exact probability of `path` from the initial state.
fn path_value(dtmc: &Dtmc, path: &PathFormula) -> Result<(Rational, Method), CheckError> {
    check_atoms(path, &dtmc.network)?;
    let init = dtmc.initial;
    let one = Rational::one();
    let bool_q = |b: bool| if b { Rational::one() } else { Rational::zero() };

    if path.is_state() {
        let p = compile_state(dtmc, path)?;
        return Ok((bool_q(p.eval(&dtmc.states[init], None)), Method::GraphQualitative));
    }
    match path {
        PathFormula::Next(g) if g.is_state() => {
            let p = compile_state(dtmc, g)?;
            return Ok((next_mass(dtmc, init, &p), Method::BoundedIteration));
        }
        // A state condition guarding one step is read as the conditional
        // one-step probability, minimised over every reachable state that
        // satisfies the condition.
        PathFormula::Implies(a, b) if a.is_state() && matches!(&**b, PathFormula::Next(g) if g.is_state()) => {
            let PathFormula::Next(g) = &**b else { unreachable!() };
            let cond = compile_state(dtmc, a)?;
            let p = compile_state(dtmc, g)?;
            let min = (0..dtmc.len())
                .filter(|&i| cond.eval(&dtmc.states[i], None))
                .map(|i| next_mass(dtmc, i, &p))
                .min()
                .unwrap_or(one);
            return Ok((min, Method::BoundedIteration));
        }
        PathFormula::Finally(Bound::AtMost(t), g) if g.is_state() => {
            let target = state_mask(dtmc, &compile_state(dtmc, g)?);
            let v = solve::bounded_until(dtmc.scaled(), &vec![true; dtmc.len()], &target, *t);
            return Ok((v[init].clone(), Method::BoundedIteration));
        }
        PathFormula::Until(Bound::AtMost(t), a, b) if a.is_state() && b.is_state() => {
            let allowed = state_mask(dtmc, &compile_state(dtmc, a)?);
            let target = state_mask(dtmc, &compile_state(dtmc, b)?);
            let v = solve::bounded_until(dtmc.scaled(), &allowed, &target, *t);
            return Ok((v[init].clone(), Method::BoundedIteration));
        }
        PathFormula::Globally(Bound::AtMost(t), g) if g.is_state() => {
            let bad: Vec<bool> = state_mask(dtmc, &compile_state(dtmc, g)?).iter().map(|b| !b).collect();
            let v = solve::bounded_until(dtmc.scaled(), &vec![true; dtmc.len()], &bad, *t);
            return Ok((one - &v[init], Method::BoundedIteration));
        }
        PathFormula::Finally(Bound::Unbounded, g) if g.is_state() => {
            let target = state_mask(dtmc, &compile_state(dtmc, g)?);
            let (v, m) = reach_values(dtmc, &vec![true; dtmc.len()], &target, &[init]);
            return Ok((v[init].clone().unwrap_or_default(), m));
        }
        PathFormula::Until(Bound::Unbounded, a, b) if a.is_state() && b.is_state() => {
            let allowed = state_mask(dtmc, &compile_state(dtmc, a)?);
            let target = state_mask(dtmc, &compile_state(dtmc, b)?);
            let (v, m) = reach_values(dtmc, &allowed, &target, &[init]);
            return Ok((v[init].clone().unwrap_or_default(), m));
        }
        PathFormula::Globally(Bound::Unbounded, g) if g.is_state() => {
            let bad: Vec<bool> = state_mask(dtmc, &compile_state(dtmc, g)?).iter().map(|b| !b).collect();
            let (v, m) = reach_values(dtmc, &vec![true; dtmc.len()], &bad, &[init]);
            return Ok((one - v[init].clone().unwrap_or_default(), m));
        }
        PathFormula::Globally(Bound::After(t), g) | PathFormula::Finally(Bound::After(t), g) if g.is_state() => {
            let is_g = matches!(path, PathFormula::Globally(..));
            let mask = state_mask(dtmc, &compile_state(dtmc, g)?);
            let target: Vec<bool> = if is_g { mask.iter().map(|b| !b).collect() } else { mask };
            let dist = solve::transient(dtmc.scaled(), init, t + 1);
            let support: Vec<usize> = (0..dtmc.len()).filter(|&i| !dist[i].is_zero()).collect();
            let (v, m) = reach_values(dtmc, &vec![true; dtmc.len()], &target, &support);
            let mut total = Rational::zero();
            for &i in &support {
                let r = v[i].clone().unwrap_or_default();
                let r = if is_g { &one - r } else { r };
                total += &dist[i] * r;
            }
            return Ok((total, m.max(Method::BoundedIteration)));
        }
        _ => {}
    }
    let r = monitor::probability(dtmc, path)?;
    Ok((r.value, if r.approximate { Method::BoundedIteration } else { Method::Bscc }))
}

fn next_mass(dtmc: &Dtmc, i: usize, p: &Pred) -> Rational {
    dtmc.transitions[i]
        .iter()
        .filter(|(j, _)| p.eval(&dtmc.states[*j], None))
        .map(|(_, q)| q)
        .sum()
}

/// `Σ_{k=0..=t} Σ_s Pr(state s at step k)·reward(s)`.
pub fn expected_cumulative_reward(dtmc: &Dtmc, name: &str, t: u64) -> Result<Rational, CheckError> {
    let reward = dtmc
        .rewards
        .get(name)
        .ok_or_else(|| CheckError::UnknownReward(name.to_string()))?;
    Ok(solve::cumulative_reward(dtmc.scaled(), dtmc.initial, reward, t))
}
