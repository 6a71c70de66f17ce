//! PRISM export: a `dtmc` model with one module per neuron synchronised on a
//! single `[tick]` action, plus a property file using the same names.

use std::fmt::Write as _;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::network::{Endpoint, NetworkSpec};
use crate::neuron::NeuronParams;
use crate::pctl::{
    self, Atom, Bound, Formula, NamedConst, Operand, PathFormula, ProbBound, Var,
};
use crate::rational::{self, Rational};

/// PRISM integers are 32-bit.
const PRISM_INT_MAX: i64 = i32::MAX as i64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrismError {
    #[error("neuron {id}: {message}")]
    Range { id: u32, message: String },
    #[error("network has no neurons")]
    Empty,
    #[error("property {index}: {message}")]
    Property { index: usize, message: String },
}

fn check_ranges(spec: &NetworkSpec) -> Result<(), PrismError> {
    if spec.neurons.is_empty() {
        return Err(PrismError::Empty);
    }
    for n in &spec.neurons {
        let p = &n.params;
        let range = |message: String| PrismError::Range { id: n.id, message };
        if let Some(problem) = p.problems().into_iter().next() {
            return Err(range(problem));
        }
        let widest = [p.p_min, p.p_max, p.tau, i64::from(p.arp), i64::from(p.rrp)]
            .into_iter()
            .chain(p.table.boundaries.iter().copied())
            .map(i64::abs)
            .max()
            .unwrap_or(0);
        if widest > PRISM_INT_MAX {
            return Err(range(format!("value {widest} does not fit a PRISM int")));
        }
    }
    Ok(())
}

fn prob(q: &Rational) -> String {
    rational::display(q)
}

/// Right-hand side of a weighted sum term, `- 20*y2` style.
fn term(first: bool, weight: i64, var: &str) -> String {
    match (first, weight < 0) {
        (true, false) => format!("{weight}*{var}"),
        (true, true) => format!("-{}*{var}", -weight),
        (false, false) => format!(" + {weight}*{var}"),
        (false, true) => format!(" - {}*{var}", -weight),
    }
}

fn spike_update(id: u32, p: &NeuronParams) -> String {
    match (p.arp, p.rrp) {
        (0, 0) => format!("(s{id}'=0)&(y{id}'=1)&(p{id}'=P_REST{id})"),
        (0, _) => format!("(s{id}'=2)&(y{id}'=1)&(p{id}'=P_REST{id})&(rref{id}'=RRP{id})"),
        _ => format!("(s{id}'=1)&(y{id}'=1)&(p{id}'=P_REST{id})&(aref{id}'=ARP{id})&(rref{id}'=0)"),
    }
}

/// `(guard over Δ, probability)` for every table interval, low to high, with
/// neighbouring intervals of equal probability merged.
fn intervals(id: u32, p: &NeuronParams, scale: &Rational) -> Vec<(String, Rational)> {
    let t = &p.table;
    let mut cuts: Vec<i64> = t.boundaries.iter().rev().map(|l| -l).collect();
    cuts.push(0);
    cuts.extend(t.boundaries.iter().copied());
    if t.k() == 0 {
        cuts = vec![0];
    }
    // Interval i spans [cuts[i-1], cuts[i]); the first and last are open.
    let mut spans: Vec<(Option<i64>, Option<i64>, Rational)> = Vec::new();
    for i in 0..=cuts.len() {
        let lo = i.checked_sub(1).map(|j| cuts[j]);
        let hi = cuts.get(i).copied();
        let q = scale * lo.map_or_else(Rational::zero, |l| t.lookup(l));
        match spans.last_mut() {
            Some(last) if last.2 == q => last.1 = hi,
            _ => spans.push((lo, hi, q)),
        }
    }
    let delta = format!("newp{id}-TAU{id}");
    spans
        .into_iter()
        .map(|(lo, hi, q)| {
            let guard = match (lo, hi) {
                (None, None) => "true".to_string(),
                (None, Some(h)) => format!("{delta}<{h}"),
                (Some(l), None) => format!("{delta}>={l}"),
                (Some(l), Some(h)) => format!("{delta}>={l} & {delta}<{h}"),
            };
            (guard, q)
        })
        .collect()
}

fn conj(a: &str, b: &str) -> String {
    if b == "true" {
        a.to_string()
    } else {
        format!("{a} & {b}")
    }
}

fn command(guard: &str, q: &Rational, quiet: &str, spike: &str) -> String {
    if q.is_zero() {
        format!("  [tick] {guard} -> {quiet};\n")
    } else if q.is_one() {
        format!("  [tick] {guard} -> {spike};\n")
    } else {
        format!(
            "  [tick] {guard} -> {}:{quiet} + {}:{spike};\n",
            prob(&(Rational::one() - q)),
            prob(q)
        )
    }
}

/// Emits the PRISM model for a validated spec.
pub fn emit_model(spec: &NetworkSpec) -> Result<String, PrismError> {
    check_ranges(spec)?;
    let ids = spec.neuron_ids();
    let params = |id: u32| spec.neuron(id).expect("id from spec");
    let mut out = String::new();

    out.push_str("dtmc\n\n");
    for &id in &ids {
        let p = params(id);
        let _ = writeln!(out, "// neuron {id}");
        let _ = writeln!(out, "const int TAU{id} = {};", p.tau);
        let _ = writeln!(out, "const int ARP{id} = {};", p.arp);
        let _ = writeln!(out, "const int RRP{id} = {};", p.rrp);
        let _ = writeln!(out, "const int P_REST{id} = {};", p.p_rest);
        let _ = writeln!(out, "const int P_MIN{id} = {};", p.p_min);
        let _ = writeln!(out, "const int P_MAX{id} = {};", p.p_max);
        let _ = writeln!(out, "const int LEAK_NUM{id} = {};", p.leak.numer());
        let _ = writeln!(out, "const int LEAK_DEN{id} = {};", p.leak.denom());
        out.push('\n');
    }

    // Inputs: constants live in module variables, patterns are read off a clock.
    let period = crate::network::Network::new(spec).period();
    let patterns: Vec<_> = spec.inputs.iter().filter(|i| i.values.len() > 1).collect();
    for inp in &patterns {
        let len = inp.values.len();
        let mut expr = inp.values[len - 1].to_string();
        for (k, v) in inp.values.iter().enumerate().rev().skip(1) {
            expr = format!("(mod(clk,{len})={k} ? {v} : {expr})");
        }
        let _ = writeln!(out, "formula x{} = {expr};", inp.id);
    }
    if !patterns.is_empty() {
        out.push('\n');
    }
    out.push_str("module Input\n");
    if period > 1 {
        let _ = writeln!(out, "  clk : [0..{}] init 0;", period - 1);
    }
    for inp in spec.inputs.iter().filter(|i| i.values.len() <= 1) {
        let v = inp.values.first().copied().unwrap_or(0);
        let _ = writeln!(out, "  x{} : [{v}..{v}] init {v};", inp.id);
    }
    if period > 1 {
        let _ = writeln!(out, "  [tick] true -> (clk'=mod(clk+1,{period}));");
    } else {
        out.push_str("  [tick] true -> true;\n");
    }
    out.push_str("endmodule\n\n");

    // Synapses read the presynaptic spike bit of the current state, which is
    // the previous step's emission: the one-step delay.
    let mut any_transfer = false;
    for e in &spec.edges {
        if let (Endpoint::Neuron(from), Endpoint::Neuron(to)) = (e.from, e.to) {
            let _ = writeln!(out, "formula transfer{from}_{to} = y{from};");
            any_transfer = true;
        }
    }
    if any_transfer {
        out.push('\n');
    }

    for &id in &ids {
        let mut sum = String::new();
        for e in spec.edges.iter().filter(|e| e.to == Endpoint::Neuron(id)) {
            let var = match e.from {
                Endpoint::Input(i) => format!("x{i}"),
                Endpoint::Neuron(j) => format!("transfer{j}_{id}"),
            };
            sum.push_str(&term(sum.is_empty(), e.weight, &var));
        }
        if sum.is_empty() {
            sum.push('0');
        }
        let _ = writeln!(out, "formula in{id} = {sum};");
        let _ = writeln!(
            out,
            "formula newp{id} = max(P_MIN{id}, min(P_MAX{id}, floor(((y{id}=1 ? 0 : LEAK_NUM{id}*p{id}) + LEAK_DEN{id}*in{id})/LEAK_DEN{id})));"
        );
    }
    out.push('\n');

    for &id in &ids {
        let p = params(id);
        let _ = writeln!(out, "module Neuron{id}");
        let _ = writeln!(out, "  aref{id} : [0..ARP{id}] init 0;");
        let _ = writeln!(out, "  rref{id} : [0..RRP{id}] init 0;");
        let _ = writeln!(out, "  s{id} : [0..2] init 0;");
        let _ = writeln!(out, "  y{id} : [0..1] init 0;");
        let _ = writeln!(out, "  p{id} : [P_MIN{id}..P_MAX{id}] init P_REST{id};");
        out.push('\n');

        let spike = spike_update(id, p);
        let quiet0 = format!("(y{id}'=0)&(p{id}'=newp{id})");
        for (guard, q) in intervals(id, p, &Rational::one()) {
            out.push_str(&command(&conj(&format!("s{id}=0"), &guard), &q, &quiet0, &spike));
        }
        if p.arp > 0 {
            out.push('\n');
            let _ = writeln!(
                out,
                "  [tick] s{id}=1 & aref{id}>0 -> (y{id}'=0)&(p{id}'=0)&(aref{id}'=aref{id}-1);"
            );
            let leave = if p.rrp > 0 {
                format!("(s{id}'=2)&(rref{id}'=RRP{id})")
            } else {
                format!("(s{id}'=0)")
            };
            let _ = writeln!(
                out,
                "  [tick] s{id}=1 & aref{id}=0 -> (y{id}'=0)&(p{id}'=0)&{leave};"
            );
        }
        if p.rrp > 0 {
            out.push('\n');
            let quiet2 = format!(
                "(y{id}'=0)&(p{id}'=newp{id})&(s{id}'=(rref{id}>0 ? 2 : 0))&(rref{id}'=max(rref{id}-1,0))"
            );
            for (guard, q) in intervals(id, p, &p.alpha) {
                out.push_str(&command(&conj(&format!("s{id}=2"), &guard), &q, &quiet2, &spike));
            }
        }
        out.push_str("endmodule\n\n");
    }

    for (n, &id) in ids.iter().enumerate() {
        let _ = writeln!(out, "rewards \"spike{id}_count\"");
        let _ = writeln!(out, "  y{id}=1 : 1;");
        out.push_str("endrewards\n");
        if n + 1 < ids.len() {
            out.push('\n');
        }
    }
    Ok(out)
}

struct Namer<'a> {
    spec: &'a NetworkSpec,
}

impl Namer<'_> {
    fn neuron(&self, var: &Var) -> Result<u32, String> {
        match var.neuron {
            Some(id) if self.spec.neuron(id).is_some() => Ok(id),
            Some(id) => Err(format!("unknown neuron {id} in `{var}`")),
            None if self.spec.neurons.len() == 1 => Ok(self.spec.neurons[0].id),
            None => Err(format!("`{var}` needs a neuron index")),
        }
    }

    fn atom(&self, a: &Atom) -> Result<String, String> {
        let id = self.neuron(&a.var)?;
        let rhs = match a.rhs {
            Operand::Int(v) => v.to_string(),
            Operand::Const(c) => {
                let name = match c {
                    NamedConst::Arp => "ARP",
                    NamedConst::Rrp => "RRP",
                    NamedConst::Threshold => "TAU",
                    NamedConst::PRest => "P_REST",
                    NamedConst::PMin => "P_MIN",
                    NamedConst::PMax => "P_MAX",
                };
                format!("{name}{id}")
            }
        };
        Ok(format!("({}{id}{}{rhs})", a.var.kind.prefix(), a.op.symbol()))
    }

    fn bound(b: Bound) -> String {
        match b {
            Bound::Unbounded => String::new(),
            Bound::AtMost(t) => format!("<={t}"),
            Bound::After(t) => format!(">{t}"),
        }
    }

    fn path(&self, f: &PathFormula) -> Result<String, String> {
        Ok(match f {
            PathFormula::Bool(b) => b.to_string(),
            PathFormula::Atom(a) => self.atom(a)?,
            PathFormula::Not(a) => format!("!{}", self.path(a)?),
            PathFormula::And(a, b) => format!("({} & {})", self.path(a)?, self.path(b)?),
            PathFormula::Or(a, b) => format!("({} | {})", self.path(a)?, self.path(b)?),
            PathFormula::Implies(a, b) => format!("({} => {})", self.path(a)?, self.path(b)?),
            PathFormula::Next(a) => format!("(X {})", self.path(a)?),
            PathFormula::Finally(b, a) => format!("(F{} {})", Self::bound(*b), self.path(a)?),
            PathFormula::Globally(b, a) => format!("(G{} {})", Self::bound(*b), self.path(a)?),
            PathFormula::Until(b, x, y) => {
                format!("({} U{} {})", self.path(x)?, Self::bound(*b), self.path(y)?)
            }
        })
    }

    fn top_path(&self, f: &PathFormula) -> Result<String, String> {
        let s = self.path(f)?;
        Ok(match f {
            PathFormula::Bool(_) | PathFormula::Atom(_) | PathFormula::Not(_) => s,
            _ => s[1..s.len() - 1].to_string(),
        })
    }

    fn formula(&self, f: &Formula) -> Result<String, String> {
        Ok(match f {
            Formula::Prob { bound, path } => {
                let op = match bound {
                    ProbBound::Query => "=?".to_string(),
                    ProbBound::Compare(op, c) => format!("{}{}", op.symbol(), prob(c)),
                };
                // One-step conditional: minimum over the reachable states
                // satisfying the guard.
                if let PathFormula::Implies(a, b) = path {
                    if let PathFormula::Next(g) = &**b {
                        if a.is_state() && g.is_state() {
                            let inner = format!("P{op} [ X {} ]", self.path(g)?);
                            return Ok(match bound {
                                ProbBound::Query => {
                                    format!("filter(min, {inner}, {})", self.path(a)?)
                                }
                                ProbBound::Compare(..) => {
                                    format!("filter(forall, {inner}, {})", self.path(a)?)
                                }
                            });
                        }
                    }
                }
                format!("P{op} [ {} ]", self.top_path(path)?)
            }
            Formula::Reward { name, horizon } => {
                let valid = name
                    .strip_prefix("spike")
                    .and_then(|r| r.strip_suffix("_count"))
                    .and_then(|id| id.parse::<u32>().ok())
                    .is_some_and(|id| self.spec.neuron(id).is_some());
                if !valid {
                    return Err(format!("unknown reward structure \"{name}\""));
                }
                format!("R{{\"{name}\"}}=? [ C<={horizon} ]")
            }
            Formula::Not(a) => format!("!({})", self.formula(a)?),
            Formula::And(a, b) => format!("({}) & ({})", self.formula(a)?, self.formula(b)?),
            Formula::Or(a, b) => format!("({}) | ({})", self.formula(a)?, self.formula(b)?),
            Formula::Implies(a, b) => format!("({}) => ({})", self.formula(a)?, self.formula(b)?),
        })
    }
}

/// Translates parsed properties, one per line.
pub fn emit_formulas(spec: &NetworkSpec, formulas: &[Formula]) -> Result<String, PrismError> {
    let namer = Namer { spec };
    let mut out = String::new();
    for (index, f) in formulas.iter().enumerate() {
        let line = namer
            .formula(f)
            .map_err(|message| PrismError::Property { index, message })?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Parses and translates property texts, one per line.
pub fn emit_properties<S: AsRef<str>>(spec: &NetworkSpec, formulas: &[S]) -> Result<String, PrismError> {
    let parsed = formulas
        .iter()
        .enumerate()
        .map(|(index, text)| {
            pctl::parse_formula(text.as_ref()).map_err(|e| PrismError::Property {
                index,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    emit_formulas(spec, &parsed)
}

/// File stem for exported models: ASCII alphanumerics and `_`, never empty.
pub fn sanitize_name(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, 'm');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

/// Structural check of the PRISM subset this module emits: block nesting,
/// declarations, command shape, balanced brackets and distributions that sum
/// to one. Not a full PRISM parser.
pub fn check_model_syntax(text: &str) -> Result<(), SyntaxError> {
    let err = |line: usize, message: &str| SyntaxError {
        line,
        message: message.to_string(),
    };
    #[derive(PartialEq)]
    enum Block {
        Top,
        Module,
        Rewards,
    }
    let mut block = Block::Top;
    let mut seen_type = false;
    let mut vars: Vec<String> = Vec::new();
    let mut modules = 0;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !balanced(line) {
            return Err(err(line_no, "unbalanced brackets"));
        }
        if !seen_type {
            if line != "dtmc" {
                return Err(err(line_no, "model must start with `dtmc`"));
            }
            seen_type = true;
            continue;
        }
        match block {
            Block::Top => {
                if let Some(name) = line.strip_prefix("module ") {
                    if !is_ident(name.trim()) {
                        return Err(err(line_no, "bad module name"));
                    }
                    block = Block::Module;
                    modules += 1;
                } else if let Some(name) = line.strip_prefix("rewards ") {
                    let name = name.trim();
                    if !(name.len() >= 2 && name.starts_with('"') && name.ends_with('"')) {
                        return Err(err(line_no, "reward name must be quoted"));
                    }
                    block = Block::Rewards;
                } else if let Some(rest) = line.strip_prefix("const ") {
                    let rest = rest
                        .strip_prefix("int ")
                        .or_else(|| rest.strip_prefix("double "))
                        .ok_or_else(|| err(line_no, "constant needs a type"))?;
                    let (name, value) = rest
                        .split_once('=')
                        .ok_or_else(|| err(line_no, "constant needs a value"))?;
                    if !is_ident(name.trim()) || !value.trim().ends_with(';') {
                        return Err(err(line_no, "malformed constant"));
                    }
                } else if let Some(rest) = line.strip_prefix("formula ") {
                    let (name, value) = rest
                        .split_once('=')
                        .ok_or_else(|| err(line_no, "formula needs a body"))?;
                    if !is_ident(name.trim()) || !value.trim().ends_with(';') {
                        return Err(err(line_no, "malformed formula"));
                    }
                } else {
                    return Err(err(line_no, "unexpected top-level item"));
                }
            }
            Block::Module => {
                if line == "endmodule" {
                    block = Block::Top;
                } else if line.starts_with('[') {
                    check_command(line, &vars).map_err(|m| err(line_no, &m))?;
                } else {
                    let (name, decl) = line
                        .split_once(':')
                        .ok_or_else(|| err(line_no, "expected declaration or command"))?;
                    let name = name.trim();
                    let decl = decl.trim();
                    if !is_ident(name) || !decl.starts_with('[') || !decl.contains("..") || !decl.contains(" init ") || !decl.ends_with(';') {
                        return Err(err(line_no, "malformed variable declaration"));
                    }
                    if vars.iter().any(|v| v == name) {
                        return Err(err(line_no, "variable declared twice"));
                    }
                    vars.push(name.to_string());
                }
            }
            Block::Rewards => {
                if line == "endrewards" {
                    block = Block::Top;
                } else {
                    let (guard, value) = line
                        .split_once(':')
                        .ok_or_else(|| err(line_no, "reward item needs `guard : value;`"))?;
                    if guard.trim().is_empty() || !value.trim().ends_with(';') {
                        return Err(err(line_no, "malformed reward item"));
                    }
                }
            }
        }
    }
    if !seen_type {
        return Err(err(0, "empty model"));
    }
    if block != Block::Top {
        return Err(err(text.lines().count(), "unterminated block"));
    }
    if modules == 0 {
        return Err(err(0, "model has no modules"));
    }
    Ok(())
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn balanced(s: &str) -> bool {
    let mut stack = Vec::new();
    for c in s.chars() {
        let open = match c {
            '(' | '[' | '{' => {
                stack.push(c);
                continue;
            }
            ')' => '(',
            ']' => '[',
            '}' => '{',
            _ => continue,
        };
        if stack.pop() != Some(open) {
            return false;
        }
    }
    stack.is_empty()
}

/// Splits on `sep` at bracket depth zero.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn check_command(line: &str, vars: &[String]) -> Result<(), String> {
    let close = line.find(']').ok_or("missing `]`")?;
    let label = line[1..close].trim();
    if !(label.is_empty() || is_ident(label)) {
        return Err("bad action label".into());
    }
    let body = line[close + 1..].trim();
    let body = body.strip_suffix(';').ok_or("command must end with `;`")?;
    let (guard, updates) = body.split_once("->").ok_or("command needs `->`")?;
    if guard.trim().is_empty() {
        return Err("empty guard".into());
    }
    let branches = split_top(updates, '+');
    let mut total = Rational::zero();
    for branch in &branches {
        let branch = branch.trim();
        let update = match split_top(branch, ':').as_slice() {
            [single] => {
                if branches.len() > 1 {
                    return Err("probabilistic branch without probability".into());
                }
                total += Rational::one();
                *single
            }
            [p, u] => {
                let q = parse_prob(p.trim()).ok_or("probability must be a decimal or n/d")?;
                if !rational::is_probability(&q) {
                    return Err("probability outside [0, 1]".into());
                }
                total += q;
                *u
            }
            _ => return Err("malformed update".into()),
        };
        let update = update.trim();
        if update == "true" {
            continue;
        }
        for assignment in split_top(update, '&') {
            let a = assignment.trim();
            let inner = a
                .strip_prefix('(')
                .and_then(|a| a.strip_suffix(')'))
                .ok_or("assignment must be parenthesised")?;
            let (lhs, rhs) = inner.split_once("'=").ok_or("assignment needs `'=`")?;
            if !vars.iter().any(|v| v == lhs.trim()) {
                return Err(format!("assignment to undeclared variable `{}`", lhs.trim()));
            }
            if rhs.trim().is_empty() {
                return Err("empty assignment".into());
            }
        }
    }
    if total != Rational::one() {
        return Err(format!("branch probabilities sum to {}", rational::display(&total)));
    }
    Ok(())
}

fn parse_prob(s: &str) -> Option<Rational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            (d != 0).then(|| rational::ratio(n, d))
        }
        None => rational::parse_rational(s),
    }
}
