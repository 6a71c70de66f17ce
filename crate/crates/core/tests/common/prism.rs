//! Interpreter for the PRISM subset the exporter emits, used to rebuild the
//! chain from the emitted text and compare it with the native one.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::{One, Signed, Zero};
use spikecheck::dtmc::Dtmc;
use spikecheck::network::NetworkState;
use spikecheck::rational::{self, Rational};

#[derive(Debug, Clone)]
enum Expr {
    Num(Rational),
    Bool(bool),
    Ident(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(String, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Val {
    Num(Rational),
    Bool(bool),
}

impl Val {
    fn num(self) -> Rational {
        match self {
            Val::Num(q) => q,
            Val::Bool(_) => panic!("expected a number"),
        }
    }
    fn bool(self) -> bool {
        match self {
            Val::Bool(b) => b,
            Val::Num(_) => panic!("expected a boolean"),
        }
    }
}

fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let b: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == '.') {
                i += 1;
            }
            out.push(b[start..i].iter().collect());
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == '_') {
                i += 1;
            }
            out.push(b[start..i].iter().collect());
        } else {
            let two: String = b[i..(i + 2).min(b.len())].iter().collect();
            if ["<=", ">=", "!=", "=>"].contains(&two.as_str()) {
                out.push(two);
                i += 2;
            } else {
                out.push(c.to_string());
                i += 1;
            }
        }
    }
    out
}

struct P {
    toks: Vec<String>,
    pos: usize,
}

impl P {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(String::as_str)
    }
    fn next(&mut self) -> String {
        self.pos += 1;
        self.toks[self.pos - 1].clone()
    }
    fn eat(&mut self, t: &str) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
    fn expect(&mut self, t: &str) {
        assert!(self.eat(t), "expected {t} at {:?}", self.peek());
    }

    fn ite(&mut self) -> Expr {
        let c = self.binary(0);
        if self.eat("?") {
            let a = self.ite();
            self.expect(":");
            let b = self.ite();
            Expr::Ite(Box::new(c), Box::new(a), Box::new(b))
        } else {
            c
        }
    }

    fn binary(&mut self, level: usize) -> Expr {
        const LEVELS: [&[&str]; 5] = [&["|"], &["&"], &["=", "!=", "<", "<=", ">", ">="], &["+", "-"], &["*", "/"]];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1);
        while let Some(op) = self.peek().filter(|t| LEVELS[level].contains(t)).map(str::to_string) {
            self.pos += 1;
            let rhs = self.binary(level + 1);
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
            if level == 2 {
                break;
            }
        }
        lhs
    }

    fn unary(&mut self) -> Expr {
        if self.eat("-") {
            return Expr::Neg(Box::new(self.unary()));
        }
        if self.eat("!") {
            return Expr::Not(Box::new(self.unary()));
        }
        if self.eat("(") {
            let e = self.ite();
            self.expect(")");
            return e;
        }
        let t = self.next();
        if t.starts_with(|c: char| c.is_ascii_digit()) {
            return Expr::Num(rational::parse_rational(&t).expect("number"));
        }
        match t.as_str() {
            "true" => return Expr::Bool(true),
            "false" => return Expr::Bool(false),
            _ => {}
        }
        if self.eat("(") {
            let mut args = vec![self.ite()];
            while self.eat(",") {
                args.push(self.ite());
            }
            self.expect(")");
            return Expr::Call(t, args);
        }
        Expr::Ident(t)
    }
}

fn parse_expr(s: &str) -> Expr {
    let mut p = P {
        toks: tokenize(s),
        pos: 0,
    };
    let e = p.ite();
    assert!(p.peek().is_none(), "trailing tokens in {s:?}");
    e
}

/// Splits on `sep` outside parentheses.
fn split_top<'a>(s: &'a str, sep: &str) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            _ if depth == 0 && s[i..].starts_with(sep) => {
                parts.push(&s[start..i]);
                i += sep.len();
                start = i;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(&s[start..]);
    parts
}

struct Command {
    guard: Expr,
    branches: Vec<(Expr, Vec<(usize, Expr)>)>,
}

pub struct Model {
    consts: HashMap<String, Rational>,
    formulas: HashMap<String, Expr>,
    /// `(name, lo, hi, init)` in declaration order.
    pub vars: Vec<(String, i64, i64, i64)>,
    modules: Vec<Vec<Command>>,
}

pub type Valuation = Vec<i64>;

impl Model {
    pub fn parse(text: &str) -> Model {
        let mut m = Model {
            consts: HashMap::new(),
            formulas: HashMap::new(),
            vars: Vec::new(),
            modules: Vec::new(),
        };
        let mut in_module = false;
        let mut in_rewards = false;
        let mut pending: Vec<(String, String)> = Vec::new();
        let mut raw_commands: Vec<Vec<String>> = Vec::new();
        for line in text.lines() {
            let line = line.split("//").next().unwrap_or("").trim();
            if line.is_empty() || line == "dtmc" {
                continue;
            }
            if in_rewards {
                in_rewards = line != "endrewards";
                continue;
            }
            if line.starts_with("rewards ") {
                in_rewards = true;
            } else if line.starts_with("module ") {
                in_module = true;
                raw_commands.push(Vec::new());
            } else if line == "endmodule" {
                in_module = false;
            } else if let Some(rest) = line.strip_prefix("const int ") {
                let (name, value) = rest.trim_end_matches(';').split_once('=').expect("const");
                let v = m.eval(&parse_expr(value), &[]).num();
                m.consts.insert(name.trim().to_string(), v);
            } else if let Some(rest) = line.strip_prefix("formula ") {
                let (name, value) = rest.trim_end_matches(';').split_once('=').expect("formula");
                m.formulas.insert(name.trim().to_string(), parse_expr(value));
            } else if in_module && line.starts_with('[') {
                raw_commands.last_mut().expect("module").push(line.to_string());
            } else if in_module {
                let (name, decl) = line.split_once(':').expect("declaration");
                let decl = decl.trim().trim_end_matches(';');
                let (range, init) = decl.split_once(" init ").expect("init");
                let (lo, hi) = range.trim_start_matches('[').trim_end_matches(']').split_once("..").expect("range");
                pending.push((name.trim().to_string(), format!("{lo}\u{0}{hi}\u{0}{init}")));
            } else {
                panic!("unexpected line {line:?}");
            }
        }
        for (name, packed) in pending {
            let parts: Vec<&str> = packed.split('\u{0}').collect();
            let int = |s: &str| rational::floor_i64(&m.eval(&parse_expr(s), &[]).num());
            let v = (name, int(parts[0]), int(parts[1]), int(parts[2]));
            m.vars.push(v);
        }
        for cmds in raw_commands {
            let mut module = Vec::new();
            for line in cmds {
                let body = line[line.find(']').expect("label") + 1..].trim().trim_end_matches(';');
                let (guard, updates) = body.split_once("->").expect("arrow");
                let mut branches = Vec::new();
                for branch in split_top(updates, "+") {
                    let parts = split_top(branch.trim(), ":");
                    let (q, upd) = match parts.as_slice() {
                        [u] => (Expr::Num(Rational::one()), *u),
                        [q, u] => (parse_expr(q), *u),
                        _ => panic!("bad branch {branch:?}"),
                    };
                    let mut assigns = Vec::new();
                    if upd.trim() != "true" {
                        for a in split_top(upd.trim(), "&") {
                            let a = a.trim().strip_prefix('(').and_then(|a| a.strip_suffix(')')).expect("parens");
                            let (lhs, rhs) = a.split_once("'=").expect("assignment");
                            let idx = m.vars.iter().position(|v| v.0 == lhs.trim()).expect("declared");
                            assigns.push((idx, parse_expr(rhs)));
                        }
                    }
                    branches.push((q, assigns));
                }
                module.push(Command {
                    guard: parse_expr(guard),
                    branches,
                });
            }
            m.modules.push(module);
        }
        m
    }

    fn eval(&self, e: &Expr, s: &[i64]) -> Val {
        match e {
            Expr::Num(q) => Val::Num(q.clone()),
            Expr::Bool(b) => Val::Bool(*b),
            Expr::Ident(name) => {
                if let Some(i) = self.vars.iter().position(|v| &v.0 == name) {
                    Val::Num(rational::int(s[i]))
                } else if let Some(q) = self.consts.get(name) {
                    Val::Num(q.clone())
                } else if let Some(f) = self.formulas.get(name) {
                    self.eval(f, s)
                } else {
                    panic!("unknown identifier {name}")
                }
            }
            Expr::Neg(a) => Val::Num(-self.eval(a, s).num()),
            Expr::Not(a) => Val::Bool(!self.eval(a, s).bool()),
            Expr::Ite(c, a, b) => {
                if self.eval(c, s).bool() {
                    self.eval(a, s)
                } else {
                    self.eval(b, s)
                }
            }
            Expr::Call(f, args) => {
                let v: Vec<Rational> = args.iter().map(|a| self.eval(a, s).num()).collect();
                Val::Num(match f.as_str() {
                    "floor" => v[0].floor(),
                    "min" => v.into_iter().min().expect("args"),
                    "max" => v.into_iter().max().expect("args"),
                    "mod" => {
                        let r = &v[0] % &v[1];
                        if r.is_negative() {
                            r + v[1].abs()
                        } else {
                            r
                        }
                    }
                    other => panic!("unknown function {other}"),
                })
            }
            Expr::Bin(op, a, b) => {
                let x = self.eval(a, s);
                match op.as_str() {
                    "&" => Val::Bool(x.bool() && self.eval(b, s).bool()),
                    "|" => Val::Bool(x.bool() || self.eval(b, s).bool()),
                    _ => {
                        let (x, y) = (x.num(), self.eval(b, s).num());
                        match op.as_str() {
                            "+" => Val::Num(x + y),
                            "-" => Val::Num(x - y),
                            "*" => Val::Num(x * y),
                            "/" => Val::Num(x / y),
                            "=" => Val::Bool(x == y),
                            "!=" => Val::Bool(x != y),
                            "<" => Val::Bool(x < y),
                            "<=" => Val::Bool(x <= y),
                            ">" => Val::Bool(x > y),
                            ">=" => Val::Bool(x >= y),
                            other => panic!("unknown operator {other}"),
                        }
                    }
                }
            }
        }
    }

    pub fn initial(&self) -> Valuation {
        self.vars.iter().map(|v| v.3).collect()
    }

    /// Synchronous product of the single enabled command of every module.
    pub fn successors(&self, s: &[i64]) -> BTreeMap<Valuation, Rational> {
        let mut out = vec![(Rational::one(), s.to_vec())];
        for (mi, module) in self.modules.iter().enumerate() {
            let enabled: Vec<&Command> = module.iter().filter(|c| self.eval(&c.guard, s).bool()).collect();
            assert_eq!(enabled.len(), 1, "module {mi} has {} enabled commands in {s:?}", enabled.len());
            let mut next = Vec::new();
            let mut total = Rational::zero();
            for (q, assigns) in &enabled[0].branches {
                let q = self.eval(q, s).num();
                total += &q;
                for (acc, partial) in &out {
                    let mut v = partial.clone();
                    for (idx, rhs) in assigns {
                        let value = rational::floor_i64(&self.eval(rhs, s).num());
                        let (name, lo, hi, _) = &self.vars[*idx];
                        assert!(*lo <= value && value <= *hi, "{name}={value} out of range");
                        v[*idx] = value;
                    }
                    next.push((acc * &q, v));
                }
            }
            assert!(total.is_one(), "module {mi} branch mass {total}");
            out = next;
        }
        let mut dist = BTreeMap::new();
        for (q, v) in out {
            if !q.is_zero() {
                *dist.entry(v).or_insert_with(Rational::zero) += q;
            }
        }
        dist
    }

    /// Reachable chain in BFS order.
    pub fn explore(&self, limit: usize) -> Vec<(Valuation, BTreeMap<Valuation, Rational>)> {
        let mut seen = HashMap::new();
        let init = self.initial();
        seen.insert(init.clone(), ());
        let mut queue = VecDeque::from([init]);
        let mut out = Vec::new();
        while let Some(s) = queue.pop_front() {
            assert!(out.len() < limit, "state limit exceeded");
            let succ = self.successors(&s);
            for t in succ.keys() {
                if seen.insert(t.clone(), ()).is_none() {
                    queue.push_back(t.clone());
                }
            }
            out.push((s, succ));
        }
        out
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.0 == name)
    }
}

/// Rebuilds the chain by interpreting the emitted model and compares it with
/// the native one state by state.
pub fn matches_native(text: &str, native: &Dtmc) -> Result<(), String> {
    let model = Model::parse(text);
    let index = |name: String| model.var_index(&name).ok_or(format!("no variable {name}"));
    let mut slots = Vec::new();
    for (k, id) in native.network.ids.iter().enumerate() {
        slots.push((k, index(format!("s{id}"))?, index(format!("y{id}"))?, index(format!("p{id}"))?, index(format!("aref{id}"))?, index(format!("rref{id}"))?));
    }
    let clk = model.var_index("clk");
    let encode = |st: &NetworkState| {
        let mut v = model.initial();
        for &(k, s, y, p, a, r) in &slots {
            let n = &st.neurons[k];
            v[s] = n.phase.code();
            v[y] = i64::from(n.spiked);
            v[p] = n.potential;
            v[a] = n.aref.into();
            v[r] = n.rref.into();
        }
        if let Some(c) = clk {
            v[c] = st.clock as i64;
        }
        v
    };
    let chain = model.explore(native.len() + 1);
    if chain.len() != native.len() {
        return Err(format!("{} interpreted states vs {} native", chain.len(), native.len()));
    }
    let rows: HashMap<Vec<i64>, _> = chain.into_iter().collect();
    for (i, st) in native.states.iter().enumerate() {
        let row = rows.get(&encode(st)).ok_or_else(|| format!("native state {st} not reached"))?;
        let mut want = BTreeMap::new();
        for (j, q) in &native.transitions[i] {
            *want.entry(encode(&native.states[*j])).or_insert_with(Rational::zero) += q;
        }
        if *row != want {
            return Err(format!("row of {st} differs"));
        }
    }
    Ok(())
}
