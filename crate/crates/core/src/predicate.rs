//! State predicates over system-net places.
//!
//! ```text
//! p4 == 1 && p2 == 0 && size(p3) == 0 && p1 == a - f + 1 && p5 == f
//! ```
//!
//! Atoms: a place name (its token count), `size(p)`/`len(p)` (same),
//! `count(p, color)`, `nets(p)` (net tokens at `p`), `init(p)` (initial
//! count), `f` (net tokens created so far) and `a` (initial count of the
//! snapshot place).

use thiserror::Error;

use crate::model::*;
use crate::semantics::{Marking, Token};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("predicate error at {pos}: {message}")]
pub struct PredicateError {
    pub pos: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntExpr {
    Lit(i64),
    Count(usize),
    Color(usize, u16),
    Nets(usize),
    Created,
    Add(Box<IntExpr>, Box<IntExpr>),
    Sub(Box<IntExpr>, Box<IntExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Lit(bool),
    Cmp(IntExpr, CmpOp, IntExpr),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub expr: BoolExpr,
    pub text: String,
}

/// Evaluation context beyond the marking itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Counters {
    /// Net tokens created since the initial marking.
    pub created: u32,
}

impl Predicate {
    /// Parses `text`. `snapshot` names the place whose initial count `a`
    /// denotes; by default the first uncolored shared place, else the first
    /// uncolored place of the system net.
    pub fn parse(spec: &NpnSpec, text: &str, snapshot: Option<&str>) -> Result<Self, PredicateError> {
        let snap = match snapshot {
            Some(name) => Some(spec.place_by_name(0, name).ok_or(PredicateError {
                pos: 0,
                message: format!("unknown snapshot place `{name}`"),
            })?),
            None => default_snapshot(spec),
        };
        let toks = lex(text)?;
        let mut p = Parser {
            spec,
            toks,
            pos: 0,
            snap,
            len: text.len(),
        };
        let expr = match p.expr()? {
            Expr::Bool(b) => b,
            Expr::Int(_) => return Err(p.error("expected a boolean expression")),
        };
        if p.pos != p.toks.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Predicate {
            expr,
            text: text.to_string(),
        })
    }

    pub fn uses_created(&self) -> bool {
        fn int(e: &IntExpr) -> bool {
            match e {
                IntExpr::Created => true,
                IntExpr::Add(a, b) | IntExpr::Sub(a, b) => int(a) || int(b),
                _ => false,
            }
        }
        fn go(e: &BoolExpr) -> bool {
            match e {
                BoolExpr::Lit(_) => false,
                BoolExpr::Cmp(a, _, b) => int(a) || int(b),
                BoolExpr::Not(x) => go(x),
                BoolExpr::And(a, b) | BoolExpr::Or(a, b) => go(a) || go(b),
            }
        }
        go(&self.expr)
    }

    pub fn eval(&self, m: &Marking, c: Counters) -> bool {
        eval_bool(&self.expr, m, c)
    }
}

pub fn default_snapshot(spec: &NpnSpec) -> Option<PlaceRef> {
    let places = &spec.system().places;
    places
        .iter()
        .position(|p| p.shared && p.ty.is_uncolored())
        .or_else(|| places.iter().position(|p| p.ty.is_uncolored()))
        .map(|idx| PlaceRef { comp: 0, idx })
}

fn eval_int(e: &IntExpr, m: &Marking, c: Counters) -> i64 {
    match e {
        IntExpr::Lit(n) => *n,
        IntExpr::Count(p) => m.places[*p].len() as i64,
        IntExpr::Color(p, v) => m.places[*p].iter().filter(|t| **t == Token::Basic(*v)).count() as i64,
        IntExpr::Nets(p) => m.places[*p].iter().filter(|t| matches!(t, Token::Net(_))).count() as i64,
        IntExpr::Created => c.created as i64,
        IntExpr::Add(a, b) => eval_int(a, m, c) + eval_int(b, m, c),
        IntExpr::Sub(a, b) => eval_int(a, m, c) - eval_int(b, m, c),
    }
}

fn eval_bool(e: &BoolExpr, m: &Marking, c: Counters) -> bool {
    match e {
        BoolExpr::Lit(b) => *b,
        BoolExpr::Cmp(a, op, b) => {
            let (x, y) = (eval_int(a, m, c), eval_int(b, m, c));
            match op {
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
            }
        }
        BoolExpr::Not(x) => !eval_bool(x, m, c),
        BoolExpr::And(a, b) => eval_bool(a, m, c) && eval_bool(b, m, c),
        BoolExpr::Or(a, b) => eval_bool(a, m, c) || eval_bool(b, m, c),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Op(&'static str),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PredicateError> {
    const OPS: [&str; 15] = ["&&", "||", "==", "!=", "<=", ">=", "<", ">", "!", "+", "-", "(", ")", ",", "."];
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[s..i].parse().map_err(|_| PredicateError {
                pos: s,
                message: "integer too large".into(),
            })?;
            out.push((Tok::Int(n), s));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[s..i].to_string()), s));
        } else if let Some(op) = OPS.iter().find(|op| text[i..].starts_with(**op)) {
            out.push((Tok::Op(op), i));
            i += op.len();
        } else {
            return Err(PredicateError {
                pos: i,
                message: format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
            });
        }
    }
    Ok(out)
}

enum Expr {
    Int(IntExpr),
    Bool(BoolExpr),
}

struct Parser<'a> {
    spec: &'a NpnSpec,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    snap: Option<PlaceRef>,
    len: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> PredicateError {
        PredicateError {
            pos: self.toks.get(self.pos).map_or(self.len, |t| t.1),
            message: message.to_string(),
        }
    }

    fn eat(&mut self, op: &str) -> bool {
        if matches!(self.toks.get(self.pos), Some((Tok::Op(o), _)) if *o == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: &str) -> Result<(), PredicateError> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{op}`")))
        }
    }

    fn boolean(&self, e: Expr) -> Result<BoolExpr, PredicateError> {
        match e {
            Expr::Bool(b) => Ok(b),
            Expr::Int(_) => Err(self.error("expected a boolean operand")),
        }
    }

    fn integer(&self, e: Expr) -> Result<IntExpr, PredicateError> {
        match e {
            Expr::Int(i) => Ok(i),
            Expr::Bool(_) => Err(self.error("expected an integer operand")),
        }
    }

    fn expr(&mut self) -> Result<Expr, PredicateError> {
        let mut lhs = self.conj()?;
        while self.eat("||") {
            let a = self.boolean(lhs)?;
            let r = self.conj()?;
            let b = self.boolean(r)?;
            lhs = Expr::Bool(BoolExpr::Or(Box::new(a), Box::new(b)));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Expr, PredicateError> {
        let mut lhs = self.unary()?;
        while self.eat("&&") {
            let a = self.boolean(lhs)?;
            let r = self.unary()?;
            let b = self.boolean(r)?;
            lhs = Expr::Bool(BoolExpr::And(Box::new(a), Box::new(b)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, PredicateError> {
        if self.eat("!") {
            let e = self.unary()?;
            return Ok(Expr::Bool(BoolExpr::Not(Box::new(self.boolean(e)?))));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, PredicateError> {
        let lhs = self.sum()?;
        let ops = [
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ];
        for (s, op) in ops {
            if self.eat(s) {
                let a = self.integer(lhs)?;
                let r = self.sum()?;
                let b = self.integer(r)?;
                return Ok(Expr::Bool(BoolExpr::Cmp(a, op, b)));
            }
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Expr, PredicateError> {
        let mut lhs = self.atom()?;
        loop {
            let add = if self.eat("+") {
                true
            } else if self.eat("-") {
                false
            } else {
                return Ok(lhs);
            };
            let a = self.integer(lhs)?;
            let r = self.atom()?;
            let b = self.integer(r)?;
            lhs = Expr::Int(if add {
                IntExpr::Add(Box::new(a), Box::new(b))
            } else {
                IntExpr::Sub(Box::new(a), Box::new(b))
            });
        }
    }

    fn place(&mut self) -> Result<usize, PredicateError> {
        match self.toks.get(self.pos).cloned() {
            Some((Tok::Ident(name), _)) => {
                let p = self
                    .spec
                    .place_by_name(0, &name)
                    .ok_or_else(|| self.error(&format!("unknown system-net place `{name}`")))?;
                self.pos += 1;
                // tolerate a trailing field selector such as `p3.d`
                if self.eat(".") {
                    self.pos += 1;
                }
                Ok(p.idx)
            }
            _ => Err(self.error("expected a place name")),
        }
    }

    fn atom(&mut self) -> Result<Expr, PredicateError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of predicate"));
        };
        match tok {
            Tok::Int(n) => {
                self.pos += 1;
                Ok(Expr::Int(IntExpr::Lit(n)))
            }
            Tok::Op("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Op("-") => {
                self.pos += 1;
                let e = self.atom()?;
                let e = self.integer(e)?;
                Ok(Expr::Int(IntExpr::Sub(Box::new(IntExpr::Lit(0)), Box::new(e))))
            }
            Tok::Ident(id) => {
                self.pos += 1;
                let is_call = matches!(self.toks.get(self.pos), Some((Tok::Op("("), _)));
                match id.as_str() {
                    "true" => Ok(Expr::Bool(BoolExpr::Lit(true))),
                    "false" => Ok(Expr::Bool(BoolExpr::Lit(false))),
                    "f" if !is_call => Ok(Expr::Int(IntExpr::Created)),
                    "a" if !is_call && self.spec.place_by_name(0, "a").is_none() => {
                        let p = self.snap.ok_or_else(|| self.error("no snapshot place for `a`"))?;
                        Ok(Expr::Int(IntExpr::Lit(self.spec.place(p).init.len() as i64)))
                    }
                    "size" | "len" | "nets" | "init" | "count" if is_call => {
                        self.pos += 1;
                        let p = self.place()?;
                        let e = match id.as_str() {
                            "nets" => IntExpr::Nets(p),
                            "init" => IntExpr::Lit(self.spec.system().places[p].init.len() as i64),
                            "count" => {
                                self.expect(",")?;
                                let Some((Tok::Ident(color), _)) = self.toks.get(self.pos).cloned() else {
                                    return Err(self.error("expected a color name"));
                                };
                                let ty = match self.spec.system().places[p].ty {
                                    PlaceType::Basic(t) => t,
                                    PlaceType::Net(_) => return Err(self.error("count() needs a colored place")),
                                };
                                let v = self.spec.color_types[ty]
                                    .values
                                    .iter()
                                    .position(|c| *c == color)
                                    .ok_or_else(|| self.error(&format!("unknown color `{color}`")))?;
                                self.pos += 1;
                                IntExpr::Color(p, v as u16)
                            }
                            _ => IntExpr::Count(p),
                        };
                        self.expect(")")?;
                        Ok(Expr::Int(e))
                    }
                    _ => {
                        self.pos -= 1;
                        Ok(Expr::Int(IntExpr::Count(self.place()?)))
                    }
                }
            }
            Tok::Op(_) => Err(self.error("unexpected operator")),
        }
    }
}
