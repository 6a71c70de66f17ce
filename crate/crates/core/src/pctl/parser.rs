use std::fmt;

use super::ast::*;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.offset + 1, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Not,
    And,
    Or,
    Arrow,
    Minus,
    Cmp(CmpOp),
    EqQuery,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Number(s) => format!("number {s}"),
            Tok::Str(_) => "string".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::Not => "'!'".into(),
            Tok::And => "'&'".into(),
            Tok::Or => "'|'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Cmp(op) => format!("'{}'", op.symbol()),
            Tok::EqQuery => "'=?'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: String| ParseError { offset, message };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let next = bytes.get(i + 1).copied();
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b'{' => Tok::LBrace,
            b'}' => Tok::RBrace,
            b'&' => {
                if next == Some(b'&') {
                    i += 1;
                }
                Tok::And
            }
            b'|' => {
                if next == Some(b'|') {
                    i += 1;
                }
                Tok::Or
            }
            b'!' if next == Some(b'=') => {
                i += 1;
                Tok::Cmp(CmpOp::Ne)
            }
            b'!' => Tok::Not,
            b'-' if next == Some(b'>') => {
                i += 1;
                Tok::Arrow
            }
            b'-' => Tok::Minus,
            b'=' => match next {
                Some(b'>') => {
                    i += 1;
                    Tok::Arrow
                }
                Some(b'?') => {
                    i += 1;
                    Tok::EqQuery
                }
                Some(b'=') => {
                    i += 1;
                    Tok::Cmp(CmpOp::Eq)
                }
                _ => Tok::Cmp(CmpOp::Eq),
            },
            b'<' if next == Some(b'=') => {
                i += 1;
                Tok::Cmp(CmpOp::Le)
            }
            b'<' => Tok::Cmp(CmpOp::Lt),
            b'>' if next == Some(b'=') => {
                i += 1;
                Tok::Cmp(CmpOp::Ge)
            }
            b'>' => Tok::Cmp(CmpOp::Gt),
            b'"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    let Some(ch) = text[j..].chars().next() else {
                        return Err(err(start, "unterminated string".into()));
                    };
                    match ch {
                        '"' => break,
                        '\\' => {
                            let Some(esc) = text[j + 1..].chars().next() else {
                                return Err(err(start, "unterminated string".into()));
                            };
                            j += 1 + esc.len_utf8();
                            match esc {
                                '"' | '\\' | '/' => s.push(esc),
                                'b' => s.push('\u{8}'),
                                'f' => s.push('\u{c}'),
                                'n' => s.push('\n'),
                                'r' => s.push('\r'),
                                't' => s.push('\t'),
                                'u' => {
                                    let (c, used) = unicode_escape(text, j).ok_or_else(|| err(j - 2, "bad \\u escape".into()))?;
                                    s.push(c);
                                    j += used;
                                }
                                _ => return Err(err(j - 2, format!("unsupported escape '\\{esc}'"))),
                            }
                        }
                        _ => {
                            s.push(ch);
                            j += ch.len_utf8();
                        }
                    }
                }
                i = j;
                Tok::Str(s)
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() {
                    let d = bytes[j];
                    let exp_sign = (d == b'-' || d == b'+') && j > i && matches!(bytes[j - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                i = j - 1;
                Tok::Number(text[start..j].to_string())
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                i = j - 1;
                Tok::Ident(text[start..j].to_string())
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(err(start, format!("unexpected character {ch:?}")));
            }
        };
        i += 1;
        out.push((start, tok));
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(wanted)
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    // ---- top level ----

    fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.f_or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn f_or(&mut self) -> PResult<Formula> {
        let mut lhs = self.f_and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.f_and()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn f_and(&mut self) -> PResult<Formula> {
        let mut lhs = self.f_unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.f_unary()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn f_unary(&mut self) -> PResult<Formula> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::Not(Box::new(self.f_unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            Tok::Ident(name) if name == "P" => self.prob(),
            Tok::Ident(name) if name == "R" => self.reward(),
            Tok::Ident(name) if matches!(name.as_str(), "X" | "F" | "G" | "U" | "FG" | "GF") => {
                self.error("path operator outside P")
            }
            Tok::Ident(_) => self.error("fragment unsupported: state formula outside P; wrap it in P>=1 [ ... ]"),
            _ => self.unexpected("'P', 'R', '!' or '('"),
        }
    }

    fn prob(&mut self) -> PResult<Formula> {
        self.bump();
        let bound = match self.bump() {
            Tok::EqQuery => ProbBound::Query,
            Tok::Cmp(op @ (CmpOp::Ge | CmpOp::Gt | CmpOp::Le | CmpOp::Lt)) => {
                let at = self.offset();
                let value = self.probability()?;
                if !rational::is_probability(&value) {
                    return Err(ParseError {
                        offset: at,
                        message: "probability bound outside [0,1]".into(),
                    });
                }
                ProbBound::Compare(op, value)
            }
            _ => {
                self.pos -= 1;
                return self.unexpected("'=?', '>=', '>', '<=' or '<' after P");
            }
        };
        self.expect(Tok::LBracket, "'['")?;
        let path = self.path()?;
        self.expect(Tok::RBracket, "']'")?;
        Ok(Formula::Prob { bound, path })
    }

    fn probability(&mut self) -> PResult<Rational> {
        match self.peek().clone() {
            Tok::Number(text) => match rational::parse_rational(&text) {
                Some(q) => {
                    self.bump();
                    Ok(q)
                }
                None => self.error(format!("malformed number {text}")),
            },
            _ => self.unexpected("a probability"),
        }
    }

    fn reward(&mut self) -> PResult<Formula> {
        self.bump();
        self.expect(Tok::LBrace, "'{'")?;
        let name = match self.bump() {
            Tok::Str(s) => s,
            _ => {
                self.pos -= 1;
                return self.unexpected("a quoted reward name");
            }
        };
        self.expect(Tok::RBrace, "'}'")?;
        self.expect(Tok::EqQuery, "'=?'")?;
        self.expect(Tok::LBracket, "'['")?;
        if !self.is_ident("C") {
            return self.unexpected("'C' (only cumulative rewards are supported)");
        }
        self.bump();
        self.expect(Tok::Cmp(CmpOp::Le), "'<='")?;
        let horizon = self.unsigned()?;
        self.expect(Tok::RBracket, "']'")?;
        Ok(Formula::Reward { name, horizon })
    }

    fn unsigned(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Number(text) => match text.parse::<u64>() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => self.error(format!("expected a nonnegative integer, found {text}")),
            },
            _ => self.unexpected("a step count"),
        }
    }

    // ---- path formulas ----

    fn path(&mut self) -> PResult<PathFormula> {
        let lhs = self.p_or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.path()?;
            return Ok(PathFormula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn p_or(&mut self) -> PResult<PathFormula> {
        let mut lhs = self.p_and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.p_and()?;
            lhs = PathFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn p_and(&mut self) -> PResult<PathFormula> {
        let mut lhs = self.p_until()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.p_until()?;
            lhs = PathFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn p_until(&mut self) -> PResult<PathFormula> {
        let lhs = self.p_unary()?;
        if self.is_ident("U") {
            self.bump();
            let bound = self.bound()?;
            let rhs = self.p_unary()?;
            if self.is_ident("U") {
                return self.error("'U' is not associative; add parentheses");
            }
            return Ok(PathFormula::Until(bound, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn bound(&mut self) -> PResult<Bound> {
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Ok(Bound::Unbounded),
        };
        let at = self.offset();
        self.bump();
        let t = self.unsigned()?;
        let empty = || {
            Err(ParseError {
                offset: at,
                message: "empty step bound".into(),
            })
        };
        Ok(match op {
            CmpOp::Le => Bound::AtMost(t),
            CmpOp::Lt if t == 0 => return empty(),
            CmpOp::Lt => Bound::AtMost(t - 1),
            CmpOp::Gt => Bound::After(t),
            CmpOp::Ge if t == 0 => Bound::Unbounded,
            CmpOp::Ge => Bound::After(t - 1),
            _ => {
                return Err(ParseError {
                    offset: at,
                    message: format!("'{}' is not a step bound", op.symbol()),
                })
            }
        })
    }

    fn p_unary(&mut self) -> PResult<PathFormula> {
        let name = match self.peek().clone() {
            Tok::Not => {
                self.bump();
                return Ok(PathFormula::Not(Box::new(self.p_unary()?)));
            }
            Tok::Ident(name) => name,
            _ => return self.primary(),
        };
        match name.as_str() {
            "X" => {
                self.bump();
                Ok(PathFormula::Next(Box::new(self.p_unary()?)))
            }
            "F" | "G" => {
                self.bump();
                let bound = self.bound()?;
                let body = Box::new(self.p_unary()?);
                Ok(if name == "F" {
                    PathFormula::Finally(bound, body)
                } else {
                    PathFormula::Globally(bound, body)
                })
            }
            "FG" | "GF" => {
                self.bump();
                let body = self.p_unary()?;
                let (outer, inner): (fn(_, _) -> _, fn(_, _) -> _) = if name == "FG" {
                    (PathFormula::Finally, PathFormula::Globally)
                } else {
                    (PathFormula::Globally, PathFormula::Finally)
                };
                Ok(outer(Bound::Unbounded, Box::new(inner(Bound::Unbounded, Box::new(body)))))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<PathFormula> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.path()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => {
                    self.bump();
                    Ok(PathFormula::Bool(true))
                }
                "false" => {
                    self.bump();
                    Ok(PathFormula::Bool(false))
                }
                "P" | "R" => self.error("fragment unsupported: nested probabilistic operator"),
                "U" => self.error("'U' needs a left operand"),
                _ => self.atom(),
            },
            _ => self.unexpected("a proposition"),
        }
    }

    fn atom(&mut self) -> PResult<PathFormula> {
        let at = self.offset();
        let Tok::Ident(name) = self.bump() else {
            unreachable!("atom starts at an identifier")
        };
        let Some(var) = parse_var(&name) else {
            return Err(ParseError {
                offset: at,
                message: format!("unknown variable '{name}'"),
            });
        };
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return self.unexpected("a comparison operator"),
        };
        self.bump();
        let rhs = self.operand()?;
        Ok(PathFormula::Atom(Atom { var, op, rhs }))
    }

    fn operand(&mut self) -> PResult<Operand> {
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        match self.peek().clone() {
            Tok::Number(text) => {
                let Ok(v) = text.parse::<i64>() else {
                    return self.error(format!("expected an integer, found {text}"));
                };
                self.bump();
                Ok(Operand::Int(if negative { -v } else { v }))
            }
            Tok::Ident(name) if !negative => match NamedConst::from_name(&name) {
                Some(c) => {
                    self.bump();
                    Ok(Operand::Const(c))
                }
                None => self.error(format!("unknown constant '{name}'")),
            },
            _ => self.unexpected("an integer or a named constant"),
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let split = name.find(|c: char| c.is_ascii_digit()).unwrap_or(name.len());
    let (prefix, digits) = name.split_at(split);
    let kind = match prefix {
        "y" => VarKind::Spike,
        "s" => VarKind::Phase,
        "p" => VarKind::Potential,
        "aref" => VarKind::Aref,
        "rref" => VarKind::Rref,
        _ => return None,
    };
    let neuron = if digits.is_empty() {
        None
    } else {
        Some(digits.parse().ok()?)
    };
    Some(Var { kind, neuron })
}

/// Decodes the hex digits after `\u` at `at`, joining surrogate pairs.
/// Returns the character and the bytes consumed.
fn unicode_escape(text: &str, at: usize) -> Option<(char, usize)> {
    let hex = |from: usize| {
        let digits = text.get(from..from + 4)?;
        if !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        u32::from_str_radix(digits, 16).ok()
    };
    let hi = hex(at)?;
    if (0xD800..0xDC00).contains(&hi) {
        if text.get(at + 4..at + 6)? != "\\u" {
            return None;
        }
        let lo = hex(at + 6)?;
        if !(0xDC00..0xE000).contains(&lo) {
            return None;
        }
        let c = char::from_u32(0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00))?;
        return Some((c, 10));
    }
    Some((char::from_u32(hi)?, 4))
}

/// Parses one property in the ASCII grammar (`P>=1 [ G (y1=1 -> X s1=1) ]`,
/// `P=? [ F<=3 y1=1 ]`, `R{"spike1_count"}=? [ C<=100 ]`, ...).
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return p.unexpected("end of property");
    }
    Ok(f)
}

/// Parses a bare path formula, as used for statistical estimation.
pub fn parse_path(text: &str) -> Result<PathFormula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.path()?;
    if *p.peek() != Tok::Eof {
        return p.unexpected("end of path formula");
    }
    Ok(f)
}
