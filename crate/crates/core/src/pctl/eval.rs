use super::ast::*;
use crate::network::{Network, NetworkState};

/// A step predicate with variables resolved to neuron indices. `Next`
/// refers to the following state of the path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pred {
    Bool(bool),
    Cmp { index: usize, kind: VarKind, op: CmpOp, value: i64 },
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Next(Box<Pred>),
}

impl Pred {
    pub fn has_next(&self) -> bool {
        match self {
            Pred::Bool(_) | Pred::Cmp { .. } => false,
            Pred::Next(_) => true,
            Pred::Not(a) => a.has_next(),
            Pred::And(a, b) | Pred::Or(a, b) => a.has_next() || b.has_next(),
        }
    }

    /// Evaluates at `cur`; `next` must be given when the predicate uses `X`.
    pub fn eval(&self, cur: &NetworkState, next: Option<&NetworkState>) -> bool {
        match self {
            Pred::Bool(b) => *b,
            Pred::Cmp { index, kind, op, value } => {
                let n = &cur.neurons[*index];
                let lhs = match kind {
                    VarKind::Spike => n.spiked as i64,
                    VarKind::Phase => n.phase.code(),
                    VarKind::Potential => n.potential,
                    VarKind::Aref => n.aref as i64,
                    VarKind::Rref => n.rref as i64,
                };
                op.holds(&lhs, value)
            }
            Pred::Not(a) => !a.eval(cur, next),
            Pred::And(a, b) => a.eval(cur, next) && b.eval(cur, next),
            Pred::Or(a, b) => a.eval(cur, next) || b.eval(cur, next),
            Pred::Next(a) => a.eval(next.expect("X needs a successor state"), None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("unknown neuron {0} in '{1}'")]
    UnknownNeuron(u32, String),
    #[error("variable '{0}' needs a neuron number in a {1}-neuron network")]
    Ambiguous(String, usize),
    #[error("'{0}' is not a step formula")]
    NotStep(String),
}

/// Resolves one atom to a neuron index and a concrete integer constant.
pub fn resolve_atom(atom: &Atom, network: &Network) -> Result<Pred, ResolveError> {
    let index = match atom.var.neuron {
        Some(id) => network
            .index_of(id)
            .ok_or_else(|| ResolveError::UnknownNeuron(id, atom.to_string()))?,
        None if network.len() == 1 => 0,
        None => return Err(ResolveError::Ambiguous(atom.var.to_string(), network.len())),
    };
    let params = &network.params[index];
    let value = match atom.rhs {
        Operand::Int(v) => v,
        Operand::Const(c) => match c {
            NamedConst::Arp => params.arp as i64,
            NamedConst::Rrp => params.rrp as i64,
            NamedConst::Threshold => params.tau,
            NamedConst::PRest => params.p_rest,
            NamedConst::PMin => params.p_min,
            NamedConst::PMax => params.p_max,
        },
    };
    Ok(Pred::Cmp {
        index,
        kind: atom.var.kind,
        op: atom.op,
        value,
    })
}

/// Compiles a step formula (state formulas and `X` of state formulas).
pub fn compile_step(f: &PathFormula, network: &Network) -> Result<Pred, ResolveError> {
    Ok(match f {
        PathFormula::Bool(b) => Pred::Bool(*b),
        PathFormula::Atom(a) => resolve_atom(a, network)?,
        PathFormula::Not(a) => Pred::Not(Box::new(compile_step(a, network)?)),
        PathFormula::And(a, b) => Pred::And(Box::new(compile_step(a, network)?), Box::new(compile_step(b, network)?)),
        PathFormula::Or(a, b) => Pred::Or(Box::new(compile_step(a, network)?), Box::new(compile_step(b, network)?)),
        PathFormula::Implies(a, b) => Pred::Or(
            Box::new(Pred::Not(Box::new(compile_step(a, network)?))),
            Box::new(compile_step(b, network)?),
        ),
        PathFormula::Next(a) if a.is_state() => Pred::Next(Box::new(compile_step(a, network)?)),
        _ => return Err(ResolveError::NotStep(f.to_string())),
    })
}

/// Checks that every atom of the formula names an existing neuron.
pub fn check_atoms(f: &PathFormula, network: &Network) -> Result<(), ResolveError> {
    for atom in f.atoms() {
        resolve_atom(&atom, network)?;
    }
    Ok(())
}
