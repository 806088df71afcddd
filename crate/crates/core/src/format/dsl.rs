//! Textual net format.
//!
//! ```text
//! file      := "npn" STRING "{" (typeDecl | labelDecl)* component+ "}"
//! typeDecl  := "type" IDENT "{" IDENT ("," IDENT)* "}"
//! labelDecl := "label" ("horizontal" IDENT ":" INT | "vertical" IDENT)
//! component := "component" IDENT ["system"] "{" place* trans* "}"
//! place     := "place" IDENT ":" ptype ["shared"] ["init" minit] ";"
//! ptype     := "dots" | IDENT | "net" "<" IDENT ("," IDENT)* ">"
//! minit     := INT | "[" term ("," term)* "]"
//! trans     := "trans" IDENT ["label" labref] "{" io* "}"
//! labref    := IDENT | "~" IDENT
//! io        := ("in"|"out"|"inhibit") IDENT [":" arcexpr] ";"
//! arcexpr   := INT | "[" aterm ("," aterm)* "]"
//! aterm     := IDENT | IDENT ":" IDENT | "_" | "new" IDENT
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Duplicate,
    Unknown,
    Arity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Span {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn err(kind: ParseErrorKind, span: Span, message: impl Into<String>) -> ParseError {
    ParseError {
        kind,
        message: message.into(),
        line: span.line,
        col: span.col,
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            advance(1, &mut i, &mut col);
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || (c == '_' && chars.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), span));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let s: String = chars[start..i].iter().collect();
            let n = s
                .parse()
                .map_err(|_| err(ParseErrorKind::Syntax, span, "integer literal out of range"))?;
            out.push((Tok::Int(n), span));
        } else if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(err(ParseErrorKind::Syntax, span, "unterminated string"));
            }
            let s: String = chars[start..i].iter().collect();
            i += 1;
            col += s.chars().count() + 2;
            out.push((Tok::Str(s), span));
        } else if "{}[]<>,:;~_".contains(c) {
            advance(1, &mut i, &mut col);
            out.push((Tok::Punct(c), span));
        } else {
            return Err(err(
                ParseErrorKind::Syntax,
                span,
                format!("unexpected character {c:?}"),
            ));
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

type Ident = (String, Span);

enum PTypeAst {
    Named(Ident),
    Net(Vec<Ident>),
}

enum TermAst {
    Name(Ident),
    Typed(Ident, Ident),
    Anon,
    New(Ident),
}

enum ExprAst {
    Int(u64),
    Terms(Vec<TermAst>),
}

struct PlaceAst {
    name: Ident,
    ptype: PTypeAst,
    shared: bool,
    init: Option<(ExprAst, Span)>,
}

#[derive(PartialEq)]
enum IoKind {
    In,
    Out,
    Inhibit,
}

struct IoAst {
    kind: IoKind,
    place: Ident,
    expr: Option<(ExprAst, Span)>,
}

struct TransAst {
    name: Ident,
    label: Option<(bool, Ident)>,
    io: Vec<IoAst>,
}

struct CompAst {
    name: Ident,
    system: bool,
    places: Vec<PlaceAst>,
    trans: Vec<TransAst>,
}

struct LabelAst {
    name: Ident,
    arity: Option<(u64, Span)>,
}

struct FileAst {
    name: String,
    types: Vec<(Ident, Vec<Ident>)>,
    labels: Vec<LabelAst>,
    comps: Vec<CompAst>,
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, what: &str) -> Result<T, ParseError> {
        Err(err(
            ParseErrorKind::Syntax,
            self.span(),
            format!("expected {what}, found {}", self.peek()),
        ))
    }

    fn punct(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{c}`"))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<Ident, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.span();
                self.bump();
                Ok((s, sp))
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn int(&mut self) -> Result<(u64, Span), ParseError> {
        match *self.peek() {
            Tok::Int(n) => {
                let sp = self.span();
                self.bump();
                Ok((n, sp))
            }
            _ => self.unexpected("integer"),
        }
    }

    fn file(&mut self) -> Result<FileAst, ParseError> {
        self.keyword("npn")?;
        let name = match self.bump() {
            (Tok::Str(s), _) => s,
            (t, sp) => {
                return Err(err(
                    ParseErrorKind::Syntax,
                    sp,
                    format!("expected net name string, found {t}"),
                ))
            }
        };
        self.punct('{')?;
        let mut file = FileAst {
            name,
            types: Vec::new(),
            labels: Vec::new(),
            comps: Vec::new(),
        };
        loop {
            if self.is_kw("type") {
                self.bump();
                let name = self.ident()?;
                self.punct('{')?;
                let mut values = vec![self.ident()?];
                while self.eat_punct(',') {
                    values.push(self.ident()?);
                }
                self.punct('}')?;
                self.eat_punct(';');
                file.types.push((name, values));
            } else if self.is_kw("label") {
                self.bump();
                if self.is_kw("horizontal") {
                    self.bump();
                    let name = self.ident()?;
                    self.punct(':')?;
                    let arity = self.int()?;
                    file.labels.push(LabelAst {
                        name,
                        arity: Some(arity),
                    });
                } else if self.is_kw("vertical") {
                    self.bump();
                    let name = self.ident()?;
                    file.labels.push(LabelAst { name, arity: None });
                } else {
                    return self.unexpected("`horizontal` or `vertical`");
                }
                self.eat_punct(';');
            } else if self.is_kw("component") {
                let c = self.component()?;
                file.comps.push(c);
            } else if self.eat_punct('}') {
                break;
            } else {
                return self.unexpected("`type`, `label`, `component` or `}`");
            }
        }
        if *self.peek() != Tok::Eof {
            return self.unexpected("end of input");
        }
        Ok(file)
    }

    fn component(&mut self) -> Result<CompAst, ParseError> {
        self.keyword("component")?;
        let name = self.ident()?;
        let system = if self.is_kw("system") {
            self.bump();
            true
        } else {
            false
        };
        self.punct('{')?;
        let mut comp = CompAst {
            name,
            system,
            places: Vec::new(),
            trans: Vec::new(),
        };
        while self.is_kw("place") {
            self.bump();
            let name = self.ident()?;
            self.punct(':')?;
            let ptype = if self.is_kw("net") {
                self.bump();
                self.punct('<')?;
                let mut comps = vec![self.ident()?];
                while self.eat_punct(',') {
                    comps.push(self.ident()?);
                }
                self.punct('>')?;
                PTypeAst::Net(comps)
            } else {
                PTypeAst::Named(self.ident()?)
            };
            let shared = if self.is_kw("shared") {
                self.bump();
                true
            } else {
                false
            };
            let init = if self.is_kw("init") {
                self.bump();
                let sp = self.span();
                Some((self.expr(false)?, sp))
            } else {
                None
            };
            self.punct(';')?;
            comp.places.push(PlaceAst {
                name,
                ptype,
                shared,
                init,
            });
        }
        while self.is_kw("trans") {
            self.bump();
            let name = self.ident()?;
            let label = if self.is_kw("label") {
                self.bump();
                let upper = self.eat_punct('~');
                Some((upper, self.ident()?))
            } else {
                None
            };
            self.punct('{')?;
            let mut io = Vec::new();
            while !self.eat_punct('}') {
                let kind = if self.is_kw("in") {
                    IoKind::In
                } else if self.is_kw("out") {
                    IoKind::Out
                } else if self.is_kw("inhibit") {
                    IoKind::Inhibit
                } else {
                    return self.unexpected("`in`, `out`, `inhibit` or `}`");
                };
                self.bump();
                let place = self.ident()?;
                let expr = if self.eat_punct(':') {
                    let sp = self.span();
                    Some((self.expr(true)?, sp))
                } else if kind == IoKind::Inhibit {
                    None
                } else {
                    return self.unexpected("`:`");
                };
                self.punct(';')?;
                io.push(IoAst { kind, place, expr });
            }
            comp.trans.push(TransAst { name, label, io });
        }
        if !self.eat_punct('}') {
            return self.unexpected("`place`, `trans` or `}`");
        }
        Ok(comp)
    }

    fn expr(&mut self, allow_vars: bool) -> Result<ExprAst, ParseError> {
        if let Tok::Int(_) = self.peek() {
            return Ok(ExprAst::Int(self.int()?.0));
        }
        self.punct('[')?;
        let mut terms = vec![self.term(allow_vars)?];
        while self.eat_punct(',') {
            terms.push(self.term(allow_vars)?);
        }
        self.punct(']')?;
        Ok(ExprAst::Terms(terms))
    }

    fn term(&mut self, allow_vars: bool) -> Result<TermAst, ParseError> {
        if *self.peek() == Tok::Punct('_') {
            if !allow_vars {
                return self.unexpected("constant");
            }
            self.bump();
            return Ok(TermAst::Anon);
        }
        if self.is_kw("new") {
            self.bump();
            return Ok(TermAst::New(self.ident()?));
        }
        let name = self.ident()?;
        if self.eat_punct(':') {
            if !allow_vars {
                return Err(err(
                    ParseErrorKind::Syntax,
                    name.1,
                    "typed variables are not allowed in initial markings",
                ));
            }
            let ty = self.ident()?;
            return Ok(TermAst::Typed(name, ty));
        }
        Ok(TermAst::Name(name))
    }
}

/// Parses net source text into a spec. Semantic validity is checked
/// separately by [`crate::validate::validate`].
pub fn parse(text: &str) -> Result<NpnSpec, ParseError> {
    let toks = lex(text)?;
    let ast = Parser { toks, pos: 0 }.file()?;
    resolve(ast)
}

fn resolve(ast: FileAst) -> Result<NpnSpec, ParseError> {
    use ParseErrorKind::*;
    let sys_count = ast.comps.iter().filter(|c| c.system).count();
    let Some(sys_pos) = ast.comps.iter().position(|c| c.system) else {
        return Err(err(Syntax, Span { line: 1, col: 1 }, "no `system` component declared"));
    };
    if sys_count > 1 {
        let second = ast.comps.iter().filter(|c| c.system).nth(1).unwrap();
        return Err(err(Duplicate, second.name.1, "more than one system component"));
    }
    let mut spec = NpnSpec::empty(&ast.name, &ast.comps[sys_pos].name.0);
    let mut globals: HashSet<String> = HashSet::from(["dots".to_string(), "dot".to_string()]);
    let mut claim = |name: &Ident, what: &str| -> Result<(), ParseError> {
        if globals.insert(name.0.clone()) {
            Ok(())
        } else {
            Err(err(Duplicate, name.1, format!("duplicate {what} `{}`", name.0)))
        }
    };
    for (name, values) in &ast.types {
        claim(name, "type")?;
        for v in values {
            claim(v, "color constant")?;
        }
        spec.color_types.push(ColorType {
            name: name.0.clone(),
            values: values.iter().map(|v| v.0.clone()).collect(),
        });
    }
    // labels live in their own namespace: `label horizontal c` may coexist
    // with a color `c`
    let mut label_names = HashSet::new();
    for l in &ast.labels {
        if !label_names.insert(l.name.0.clone()) {
            return Err(err(Duplicate, l.name.1, format!("duplicate label `{}`", l.name.0)));
        }
        let kind = match l.arity {
            Some((n, sp)) => {
                if n < 2 {
                    return Err(err(
                        Arity,
                        sp,
                        format!("horizontal label `{}` needs arity >= 2, got {n}", l.name.0),
                    ));
                }
                LabelKind::Horizontal {
                    arity: u32::try_from(n).map_err(|_| err(Arity, sp, "arity too large"))?,
                }
            }
            None => LabelKind::Vertical,
        };
        spec.labels.push(LabelDecl {
            name: l.name.0.clone(),
            kind,
        });
    }
    // System net first, element nets in declaration order.
    let mut order: Vec<usize> = vec![sys_pos];
    order.extend((0..ast.comps.len()).filter(|i| *i != sys_pos));
    for &i in &order {
        claim(&ast.comps[i].name, "component")?;
    }
    for &i in order.iter().skip(1) {
        spec.components.push(NetComponent {
            name: ast.comps[i].name.0.clone(),
            places: Vec::new(),
            variables: BTreeMap::new(),
            transitions: Vec::new(),
        });
    }
    // Places first, everywhere, so that shared places resolve.
    for (comp, &i) in order.iter().enumerate() {
        let mut seen = HashSet::new();
        for p in &ast.comps[i].places {
            if !seen.insert(p.name.0.clone()) {
                return Err(err(Duplicate, p.name.1, format!("duplicate place `{}`", p.name.0)));
            }
            let ty = resolve_ptype(&spec, &p.ptype)?;
            let init = match &p.init {
                None => Vec::new(),
                Some((e, sp)) => resolve_init(&spec, e, *sp)?,
            };
            spec.components[comp].places.push(PlaceDecl {
                name: p.name.0.clone(),
                ty,
                shared: p.shared,
                init,
            });
        }
    }
    for (comp, &i) in order.iter().enumerate() {
        resolve_transitions(&mut spec, comp, &ast.comps[i])?;
    }
    Ok(spec)
}

fn resolve_ptype(spec: &NpnSpec, t: &PTypeAst) -> Result<PlaceType, ParseError> {
    match t {
        PTypeAst::Named(name) => spec.type_index(&name.0).map(PlaceType::Basic).ok_or_else(|| {
            err(ParseErrorKind::Unknown, name.1, format!("unknown type `{}`", name.0))
        }),
        PTypeAst::Net(comps) => {
            let mut set = BTreeSet::new();
            for c in comps {
                let idx = spec.component_index(&c.0).ok_or_else(|| {
                    err(ParseErrorKind::Unknown, c.1, format!("unknown net component `{}`", c.0))
                })?;
                set.insert(idx);
            }
            Ok(PlaceType::Net(set))
        }
    }
}

fn dots(n: u64) -> Vec<Constant> {
    vec![Constant::DOT; n as usize]
}

fn resolve_init(spec: &NpnSpec, e: &ExprAst, sp: Span) -> Result<Vec<Constant>, ParseError> {
    match e {
        ExprAst::Int(n) => Ok(dots(*n)),
        ExprAst::Terms(terms) => terms
            .iter()
            .map(|t| match t {
                TermAst::Name(name) | TermAst::New(name) => resolve_constant(spec, name),
                _ => Err(err(ParseErrorKind::Syntax, sp, "initial markings hold constants only")),
            })
            .collect(),
    }
}

fn resolve_constant(spec: &NpnSpec, name: &Ident) -> Result<Constant, ParseError> {
    spec.color_constant(&name.0)
        .or_else(|| spec.component_index(&name.0).map(|component| Constant::Net { component }))
        .ok_or_else(|| {
            err(ParseErrorKind::Unknown, name.1, format!("unknown constant `{}`", name.0))
        })
}

fn resolve_transitions(spec: &mut NpnSpec, comp: CompId, ast: &CompAst) -> Result<(), ParseError> {
    use ParseErrorKind::*;
    let place_of = |spec: &NpnSpec, name: &Ident| -> Result<PlaceRef, ParseError> {
        if let Some(p) = spec.place_by_name(comp, &name.0) {
            return Ok(p);
        }
        if comp != 0 {
            if let Some(p) = spec.place_by_name(0, &name.0) {
                if spec.place(p).shared {
                    return Ok(p);
                }
            }
        }
        Err(err(Unknown, name.1, format!("unknown place `{}`", name.0)))
    };

    // Typed variable declarations, then inferred ones.
    let mut vars: BTreeMap<String, Variable> = BTreeMap::new();
    for t in &ast.trans {
        for io in &t.io {
            if let Some((ExprAst::Terms(terms), _)) = &io.expr {
                for term in terms {
                    if let TermAst::Typed(name, ty) = term {
                        let pty = if let Some(ti) = spec.type_index(&ty.0) {
                            PlaceType::Basic(ti)
                        } else if let Some(ci) = spec.component_index(&ty.0) {
                            PlaceType::Net(BTreeSet::from([ci]))
                        } else {
                            return Err(err(Unknown, ty.1, format!("unknown type `{}`", ty.0)));
                        };
                        if spec.color_constant(&name.0).is_some() {
                            return Err(err(
                                Duplicate,
                                name.1,
                                format!("variable `{}` shadows a constant", name.0),
                            ));
                        }
                        match vars.get(&name.0) {
                            Some(v) if v.ty != pty => {
                                return Err(err(
                                    Duplicate,
                                    name.1,
                                    format!("variable `{}` declared with conflicting types", name.0),
                                ))
                            }
                            Some(_) => {}
                            None => {
                                vars.insert(
                                    name.0.clone(),
                                    Variable {
                                        name: name.0.clone(),
                                        ty: pty,
                                        anonymous: false,
                                    },
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    // Untyped, non-constant names take the type of the first place they
    // occur at, input arcs first.
    for pass in [IoKind::In, IoKind::Out] {
        for t in &ast.trans {
            for io in t.io.iter().filter(|io| io.kind == pass) {
                if let Some((ExprAst::Terms(terms), _)) = &io.expr {
                    for term in terms {
                        if let TermAst::Name(name) = term {
                            if vars.contains_key(&name.0)
                                || spec.color_constant(&name.0).is_some()
                                || spec.component_index(&name.0).is_some()
                            {
                                continue;
                            }
                            let p = place_of(spec, &io.place)?;
                            vars.insert(
                                name.0.clone(),
                                Variable {
                                    name: name.0.clone(),
                                    ty: spec.place(p).ty.clone(),
                                    anonymous: false,
                                },
                            );
                        }
                    }
                }
            }
        }
    }

    let mut anon = 0usize;
    let mut transitions = Vec::new();
    let mut seen = HashSet::new();
    for t in &ast.trans {
        if !seen.insert(t.name.0.clone()) {
            return Err(err(Duplicate, t.name.1, format!("duplicate transition `{}`", t.name.0)));
        }
        let label = match &t.label {
            None => None,
            Some((upper, name)) => {
                let idx = spec.label_index(&name.0).ok_or_else(|| {
                    err(Unknown, name.1, format!("unknown label `{}`", name.0))
                })?;
                Some(match (spec.labels[idx].kind, upper) {
                    (LabelKind::Horizontal { .. }, false) => TransLabel::Horizontal(idx),
                    (LabelKind::Horizontal { .. }, true) => {
                        return Err(err(
                            Unknown,
                            name.1,
                            format!("`~{}`: horizontal labels have no complement", name.0),
                        ))
                    }
                    (LabelKind::Vertical, false) => TransLabel::Lower(idx),
                    (LabelKind::Vertical, true) => TransLabel::Upper(idx),
                })
            }
        };
        let mut decl = TransitionDecl {
            name: t.name.0.clone(),
            label,
            inputs: Vec::new(),
            outputs: Vec::new(),
            inhibitors: Vec::new(),
        };
        for io in &t.io {
            let place = place_of(spec, &io.place)?;
            let dup = |sp: Span| err(Duplicate, sp, format!("duplicate arc for place `{}`", io.place.0));
            if io.kind == IoKind::Inhibit {
                if decl.inhibitors.contains(&place) {
                    return Err(dup(io.place.1));
                }
                decl.inhibitors.push(place);
                continue;
            }
            let (expr, _) = io.expr.as_ref().expect("non-inhibitor arcs carry expressions");
            let terms = match expr {
                ExprAst::Int(n) => dots(*n).into_iter().map(ArcTerm::Const).collect(),
                ExprAst::Terms(terms) => {
                    let mut out = Vec::new();
                    for term in terms {
                        out.push(match term {
                            TermAst::Anon => {
                                let name = format!("_{anon}");
                                anon += 1;
                                vars.insert(
                                    name.clone(),
                                    Variable {
                                        name: name.clone(),
                                        ty: spec.place(place).ty.clone(),
                                        anonymous: true,
                                    },
                                );
                                ArcTerm::Var(name)
                            }
                            TermAst::New(name) => {
                                let component = spec.component_index(&name.0).ok_or_else(|| {
                                    err(Unknown, name.1, format!("unknown net component `{}`", name.0))
                                })?;
                                ArcTerm::Const(Constant::Net { component })
                            }
                            TermAst::Typed(name, _) => ArcTerm::Var(name.0.clone()),
                            TermAst::Name(name) => {
                                if vars.contains_key(&name.0) {
                                    ArcTerm::Var(name.0.clone())
                                } else {
                                    ArcTerm::Const(resolve_constant(spec, name)?)
                                }
                            }
                        });
                    }
                    out
                }
            };
            let list = if io.kind == IoKind::In {
                &mut decl.inputs
            } else {
                &mut decl.outputs
            };
            if list.iter().any(|a| a.place == place) {
                return Err(dup(io.place.1));
            }
            list.push(Arc { place, terms });
        }
        transitions.push(decl);
    }
    let c = &mut spec.components[comp];
    c.variables = vars;
    c.transitions = transitions;
    Ok(())
}

/// Canonical text for a spec; `parse(serialize(s)) == s` for specs
/// produced by [`parse`].
pub fn serialize(spec: &NpnSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "npn \"{}\" {{", spec.name);
    for t in spec.color_types.iter().skip(1) {
        let _ = writeln!(out, "  type {} {{ {} }}", t.name, t.values.join(", "));
    }
    for l in &spec.labels {
        match l.kind {
            LabelKind::Horizontal { arity } => {
                let _ = writeln!(out, "  label horizontal {}: {}", l.name, arity);
            }
            LabelKind::Vertical => {
                let _ = writeln!(out, "  label vertical {}", l.name);
            }
        }
    }
    for (ci, c) in spec.components.iter().enumerate() {
        let _ = writeln!(
            out,
            "  component {}{} {{",
            c.name,
            if ci == 0 { " system" } else { "" }
        );
        for p in &c.places {
            let _ = write!(out, "    place {}: {}", p.name, spec.type_name(&p.ty));
            if p.shared {
                out.push_str(" shared");
            }
            if !p.init.is_empty() {
                out.push_str(" init ");
                if p.init.iter().all(|k| *k == Constant::DOT) && p.ty.is_uncolored() {
                    let _ = write!(out, "{}", p.init.len());
                } else {
                    let items: Vec<String> = p.init.iter().map(|k| constant_text(spec, *k)).collect();
                    let _ = write!(out, "[{}]", items.join(", "));
                }
            }
            out.push_str(";\n");
        }
        for t in &c.transitions {
            let _ = write!(out, "    trans {}", t.name);
            if let Some(l) = t.label {
                let _ = write!(out, " label {}", spec.label_name(l));
            }
            out.push_str(" {\n");
            for a in &t.inputs {
                let _ = writeln!(out, "      in {}: {};", spec.place(a.place).name, arc_text(spec, ci, a));
            }
            for a in &t.outputs {
                let _ = writeln!(out, "      out {}: {};", spec.place(a.place).name, arc_text(spec, ci, a));
            }
            for p in &t.inhibitors {
                let _ = writeln!(out, "      inhibit {};", spec.place(*p).name);
            }
            out.push_str("    }\n");
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

fn constant_text(spec: &NpnSpec, k: Constant) -> String {
    match k {
        Constant::Net { component } => format!("new {}", spec.components[component].name),
        Constant::Color { .. } => spec.constant_name(k).to_string(),
    }
}

fn arc_text(spec: &NpnSpec, comp: CompId, a: &Arc) -> String {
    if spec.place(a.place).ty.is_uncolored()
        && a.terms.iter().all(|t| *t == ArcTerm::Const(Constant::DOT))
    {
        return a.terms.len().to_string();
    }
    let items: Vec<String> = a
        .terms
        .iter()
        .map(|t| match t {
            ArcTerm::Const(k) => constant_text(spec, *k),
            ArcTerm::Var(v) => match spec.variable(comp, v) {
                Some(var) if var.anonymous => "_".to_string(),
                Some(var) => match &var.ty {
                    PlaceType::Net(set) if set.len() != 1 => v.clone(),
                    ty => format!("{}:{}", v, type_atom(spec, ty)),
                },
                None => v.clone(),
            },
        })
        .collect();
    format!("[{}]", items.join(", "))
}

fn type_atom(spec: &NpnSpec, ty: &PlaceType) -> String {
    match ty {
        PlaceType::Basic(t) => spec.color_types[*t].name.clone(),
        PlaceType::Net(set) => spec.components[*set.iter().next().unwrap()].name.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let spec = parse(r#"npn "x" { component SN system { } }"#).unwrap();
        assert_eq!(spec.components.len(), 1);
        assert!(spec.system().places.is_empty());
        assert!(spec.system().transitions.is_empty());
    }

    #[test]
    fn horizontal_arity_one_is_rejected() {
        let e = parse(r#"npn "x" { label horizontal c: 1 component SN system { } }"#).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity);
        assert_eq!((e.line, e.col), (1, 31));
    }

    #[test]
    fn error_kinds() {
        let cases = [
            (r#"npn "x" { component SN system { place p: Foo; } }"#, ParseErrorKind::Unknown),
            (r#"npn "x" { component SN system { place p: dots; place p: dots; } }"#, ParseErrorKind::Duplicate),
            (r#"npn "x" { component SN system { trans t { in q: 1; } } }"#, ParseErrorKind::Unknown),
            (r#"npn "x" { component SN system { trans t label l { } } }"#, ParseErrorKind::Unknown),
            (r#"npn "x" { component SN system { place p dots; } }"#, ParseErrorKind::Syntax),
            (r#"npn "x" { component A { } }"#, ParseErrorKind::Syntax),
            (r#"npn "x" { type T { a } type U { a } component SN system { } }"#, ParseErrorKind::Duplicate),
        ];
        for (src, kind) in cases {
            assert_eq!(parse(src).unwrap_err().kind, kind, "{src}");
        }
    }

    #[test]
    fn garbage_does_not_panic() {
        for src in ["", "npn", "npn \"", "}}}", "npn \"a\" { component X system { trans t { in", "\u{0}\u{7f}é"] {
            assert!(parse(src).is_err());
        }
    }

    #[test]
    fn anonymous_terms_become_fresh_variables() {
        let spec = parse(
            r#"npn "x" { type T { a, b }
               component SN system { place p: T init [a, b]; place q: T;
                 trans t { in p: [_, _]; out q: [_]; } } }"#,
        )
        .unwrap();
        let t = &spec.system().transitions[0];
        let names: Vec<&str> = t.inputs[0].vars().collect();
        assert_eq!(names, ["_0", "_1"]);
        assert!(spec.system().variables["_2"].anonymous);
        let text = serialize(&spec);
        assert!(text.contains("in p: [_, _];"));
        assert_eq!(parse(&text).unwrap(), spec);
    }
}
