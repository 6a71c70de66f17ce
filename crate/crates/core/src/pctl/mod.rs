//! Property language: a PCTL subset with the long-run patterns `FG`/`GF`,
//! and an exact checker over explicit chains.

pub mod ast;
mod check;
pub mod eval;
mod monitor;
mod parser;
pub mod prefix;

pub use ast::{Atom, Bound, CmpOp, Formula, NamedConst, Operand, PathFormula, ProbBound, Var, VarKind};
pub use check::{check, check_text, expected_cumulative_reward, CheckResult, Method, ResultKind, Value};
pub use parser::{parse_formula, parse_path, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Resolve(#[from] eval::ResolveError),
    #[error("{0}")]
    Unsupported(String),
    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),
}
