use std::fmt;

use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// `y`
    Spike,
    /// `s`
    Phase,
    /// `p`
    Potential,
    Aref,
    Rref,
}

impl VarKind {
    pub fn prefix(self) -> &'static str {
        match self {
            VarKind::Spike => "y",
            VarKind::Phase => "s",
            VarKind::Potential => "p",
            VarKind::Aref => "aref",
            VarKind::Rref => "rref",
        }
    }
}

/// A neuron variable such as `y1`; a bare `y` refers to the only neuron of a
/// single-neuron network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub neuron: Option<u32>,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.neuron {
            Some(id) => write!(f, "{}{}", self.kind.prefix(), id),
            None => write!(f, "{}", self.kind.prefix()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds<T: PartialOrd>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// Per-neuron symbolic constants usable on the right of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedConst {
    Arp,
    Rrp,
    Threshold,
    PRest,
    PMin,
    PMax,
}

impl NamedConst {
    pub fn name(self) -> &'static str {
        match self {
            NamedConst::Arp => "ARP",
            NamedConst::Rrp => "RRP",
            NamedConst::Threshold => "threshold",
            NamedConst::PRest => "P_rest",
            NamedConst::PMin => "P_min",
            NamedConst::PMax => "P_max",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ARP" => NamedConst::Arp,
            "RRP" | "RRS" => NamedConst::Rrp,
            "threshold" | "P_rth" => NamedConst::Threshold,
            "P_rest" => NamedConst::PRest,
            "P_min" | "MIN" => NamedConst::PMin,
            "P_max" | "MAX" => NamedConst::PMax,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Int(i64),
    Const(NamedConst),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Int(v) => write!(f, "{v}"),
            Operand::Const(c) => write!(f, "{}", c.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub var: Var,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.var, self.op.symbol(), self.rhs)
    }
}

/// Step bound on a temporal operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    Unbounded,
    /// `<=t`: positions `0..=t`.
    AtMost(u64),
    /// `>t`: positions strictly after `t`.
    After(u64),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Unbounded => Ok(()),
            Bound::AtMost(t) => write!(f, "<={t}"),
            Bound::After(t) => write!(f, ">{t}"),
        }
    }
}

/// Path formulas. Temporal-free trees double as state formulas.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathFormula {
    Bool(bool),
    Atom(Atom),
    Not(Box<PathFormula>),
    And(Box<PathFormula>, Box<PathFormula>),
    Or(Box<PathFormula>, Box<PathFormula>),
    Implies(Box<PathFormula>, Box<PathFormula>),
    Next(Box<PathFormula>),
    Finally(Bound, Box<PathFormula>),
    Globally(Bound, Box<PathFormula>),
    Until(Bound, Box<PathFormula>, Box<PathFormula>),
}

impl PathFormula {
    pub fn negate(f: PathFormula) -> Self {
        PathFormula::Not(Box::new(f))
    }

    pub fn and(a: PathFormula, b: PathFormula) -> Self {
        PathFormula::And(Box::new(a), Box::new(b))
    }

    /// True when no temporal operator occurs.
    pub fn is_state(&self) -> bool {
        match self {
            PathFormula::Bool(_) | PathFormula::Atom(_) => true,
            PathFormula::Not(a) => a.is_state(),
            PathFormula::And(a, b) | PathFormula::Or(a, b) | PathFormula::Implies(a, b) => {
                a.is_state() && b.is_state()
            }
            _ => false,
        }
    }

    /// Boolean combination of state formulas and `X` of state formulas.
    pub fn is_step(&self) -> bool {
        match self {
            PathFormula::Bool(_) | PathFormula::Atom(_) => true,
            PathFormula::Next(a) => a.is_state(),
            PathFormula::Not(a) => a.is_step(),
            PathFormula::And(a, b) | PathFormula::Or(a, b) | PathFormula::Implies(a, b) => {
                a.is_step() && b.is_step()
            }
            _ => false,
        }
    }

    /// Every atom in the formula.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(*a));
        out
    }

    fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            PathFormula::Bool(_) => {}
            PathFormula::Atom(a) => f(a),
            PathFormula::Not(a) | PathFormula::Next(a) | PathFormula::Finally(_, a) | PathFormula::Globally(_, a) => {
                a.visit_atoms(f)
            }
            PathFormula::And(a, b) | PathFormula::Or(a, b) | PathFormula::Implies(a, b) | PathFormula::Until(_, a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Bool(b) => write!(f, "{b}"),
            PathFormula::Atom(a) => write!(f, "({a})"),
            PathFormula::Not(a) => write!(f, "!{a}"),
            PathFormula::And(a, b) => write!(f, "({a} & {b})"),
            PathFormula::Or(a, b) => write!(f, "({a} | {b})"),
            PathFormula::Implies(a, b) => write!(f, "({a} -> {b})"),
            PathFormula::Next(a) => write!(f, "(X {a})"),
            PathFormula::Finally(bound, a) => write!(f, "(F{bound} {a})"),
            PathFormula::Globally(bound, a) => write!(f, "(G{bound} {a})"),
            PathFormula::Until(bound, a, b) => write!(f, "({a} U{bound} {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProbBound {
    /// `P=?`
    Query,
    Compare(CmpOp, Rational),
}

/// A checkable property: probability or reward queries and boolean
/// combinations of bounded probability verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Prob { bound: ProbBound, path: PathFormula },
    /// `R{"name"}=? [ C<=horizon ]`
    Reward { name: String, horizon: u64 },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Prob { bound, path } => {
                match bound {
                    ProbBound::Query => write!(f, "P=? ")?,
                    ProbBound::Compare(op, c) => write!(f, "P{}{} ", op.symbol(), rational::display(c))?,
                }
                write!(f, "[ {path} ]")
            }
            Formula::Reward { name, horizon } => {
                write!(f, "R{{{}}}=? [ C<={horizon} ]", serde_json::to_string(name).unwrap_or_default())
            }
            Formula::Not(a) => write!(f, "!({a})"),
            Formula::And(a, b) => write!(f, "({a}) & ({b})"),
            Formula::Or(a, b) => write!(f, "({a}) | ({b})"),
            Formula::Implies(a, b) => write!(f, "({a}) -> ({b})"),
        }
    }
}
