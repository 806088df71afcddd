//! Token-game semantics: markings with nested net tokens, binding
//! enumeration, enabled steps and their application.
//!
//! Markings are plain values. Every place holds a sorted multiset of tokens;
//! net tokens compare structurally (their runtime id is ignored), so two
//! markings are equal exactly when they describe the same nested state.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::sync::Arc as Shared;

use serde::Serialize;
use thiserror::Error;

use crate::model::*;

/// A marked element net. `rtid` identifies the token at runtime (for traces
/// and selection) and takes no part in equality, ordering or hashing.
#[derive(Debug, Clone, Serialize)]
pub struct NetToken {
    pub component: CompId,
    pub marking: Marking,
    pub rtid: u32,
}

impl PartialEq for NetToken {
    fn eq(&self, other: &Self) -> bool {
        self.component == other.component && self.marking == other.marking
    }
}
impl Eq for NetToken {}

impl Ord for NetToken {
    fn cmp(&self, other: &Self) -> Ordering {
        self.component
            .cmp(&other.component)
            .then_with(|| self.marking.cmp(&other.marking))
    }
}
impl PartialOrd for NetToken {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Hash for NetToken {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.component.hash(state);
        self.marking.hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Token {
    /// Index of a value in the place's color type.
    Basic(u16),
    /// Shared so that bindings and successor markings copy only the path
    /// to what changed, not whole nested subtrees.
    Net(Shared<NetToken>),
}

impl Token {
    pub fn as_net(&self) -> Option<&NetToken> {
        match self {
            Token::Net(n) => Some(n),
            Token::Basic(_) => None,
        }
    }
}

/// Marking of one net component: one sorted multiset per own place.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Marking {
    pub places: Vec<Vec<Token>>,
}

impl Marking {
    /// Number of tokens (basic or net) in a place.
    pub fn count(&self, place: usize) -> usize {
        self.places[place].len()
    }

    /// All net tokens at every depth, parents before children.
    pub fn net_tokens(&self) -> Vec<&NetToken> {
        let mut out = Vec::new();
        collect_nets(self, &mut out);
        out
    }

    pub fn max_rtid(&self) -> u32 {
        self.net_tokens().iter().map(|n| n.rtid).max().unwrap_or(0)
    }

    pub fn find(&self, rtid: u32) -> Option<&NetToken> {
        for p in &self.places {
            for t in p {
                if let Token::Net(n) = t {
                    if n.rtid == rtid {
                        return Some(n);
                    }
                    if let Some(x) = n.marking.find(rtid) {
                        return Some(x);
                    }
                }
            }
        }
        None
    }

    /// Positions `(place, index)` leading to the net token `rtid`.
    fn locate(&self, rtid: u32, out: &mut Vec<(usize, usize)>) -> bool {
        for (p, toks) in self.places.iter().enumerate() {
            for (i, t) in toks.iter().enumerate() {
                if let Token::Net(n) = t {
                    out.push((p, i));
                    if n.rtid == rtid || n.marking.locate(rtid, out) {
                        return true;
                    }
                    out.pop();
                }
            }
        }
        false
    }

    /// Mutable access to a net token; unshares only the tokens on its path.
    fn find_mut(&mut self, rtid: u32) -> Option<&mut NetToken> {
        let mut path = Vec::new();
        if !self.locate(rtid, &mut path) {
            return None;
        }
        let (last, above) = path.split_last()?;
        let mut cur = self;
        for &(p, i) in above {
            let Token::Net(n) = &mut cur.places[p][i] else { unreachable!() };
            cur = &mut Shared::make_mut(n).marking;
        }
        let Token::Net(n) = &mut cur.places[last.0][last.1] else { unreachable!() };
        Some(Shared::make_mut(n))
    }

    /// Resolves a path to the addressed net token (`None` path = system net).
    pub fn resolve(&self, path: &Path) -> Option<&NetToken> {
        let mut cur = self;
        let mut last = None;
        for &(place, rtid) in &path.0 {
            let n = cur
                .places
                .get(place)?
                .iter()
                .filter_map(Token::as_net)
                .find(|n| n.rtid == rtid)?;
            cur = &n.marking;
            last = Some(n);
        }
        last
    }

    /// Sorts every multiset, recursively. Net tokens still shared with
    /// another marking are taken to be sorted already.
    pub fn normalize(&mut self) {
        for p in &mut self.places {
            for t in p.iter_mut() {
                if let Token::Net(n) = t {
                    if let Some(n) = Shared::get_mut(n) {
                        n.marking.normalize();
                    }
                }
            }
            p.sort();
        }
    }
}

fn collect_nets<'a>(m: &'a Marking, out: &mut Vec<&'a NetToken>) {
    for p in &m.places {
        for t in p {
            if let Token::Net(n) = t {
                out.push(n);
                collect_nets(&n.marking, out);
            }
        }
    }
}

/// Address of a net token: (place, rtid) pairs from the system net down.
/// The empty path denotes the system net itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Path(pub Vec<(usize, u32)>);

impl Path {
    pub fn host_rtid(&self) -> u32 {
        self.0.last().map_or(0, |(_, r)| *r)
    }
}

pub type Binding = BTreeMap<String, Token>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Firing {
    pub transition: TransRef,
    pub binding: Binding,
}

/// A firing inside the net token with runtime id `rtid`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Participant {
    pub rtid: u32,
    pub firing: Firing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Step {
    Autonomous {
        path: Path,
        firing: Firing,
    },
    /// `participants` are distinct net tokens at place `place` of the net
    /// addressed by `path`.
    Horizontal {
        path: Path,
        place: usize,
        label: usize,
        participants: Vec<Participant>,
    },
    /// `children` holds one upper firing per net token bound by the parent.
    Vertical {
        path: Path,
        firing: Firing,
        children: Vec<Participant>,
    },
}

impl Step {
    /// Constituent firings as (host rtid, firing); children come first.
    pub fn firings(&self) -> Vec<(u32, &Firing)> {
        match self {
            Step::Autonomous { path, firing } => vec![(path.host_rtid(), firing)],
            Step::Horizontal { participants, .. } => {
                participants.iter().map(|p| (p.rtid, &p.firing)).collect()
            }
            Step::Vertical {
                path,
                firing,
                children,
            } => children
                .iter()
                .map(|p| (p.rtid, &p.firing))
                .chain(std::iter::once((path.host_rtid(), firing)))
                .collect(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Step::Autonomous { .. } => "autonomous",
            Step::Horizontal { .. } => "horizontal",
            Step::Vertical { .. } => "vertical",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("no net token with runtime id {0}")]
    UnresolvedPath(u32),
    #[error("step is not enabled: {0}")]
    NotEnabled(String),
}

/// Initial marking of the system net.
pub fn initial_marking(spec: &NpnSpec) -> Marking {
    let mut next = 1;
    let mut m = component_initial(spec, 0, &mut next);
    m.normalize();
    m
}

fn component_initial(spec: &NpnSpec, comp: CompId, next: &mut u32) -> Marking {
    let places = spec.components[comp]
        .places
        .iter()
        .map(|p| p.init.iter().map(|k| constant_token(spec, *k, next)).collect())
        .collect();
    Marking { places }
}

fn constant_token(spec: &NpnSpec, k: Constant, next: &mut u32) -> Token {
    match k {
        Constant::Color { value, .. } => Token::Basic(value),
        Constant::Net { component } => {
            let rtid = *next;
            *next += 1;
            let mut marking = component_initial(spec, component, next);
            marking.normalize();
            Token::Net(Shared::new(NetToken {
                component,
                marking,
                rtid,
            }))
        }
    }
}

/// A fresh net token of `comp` carrying its initial marking.
pub fn fresh_net_token(spec: &NpnSpec, comp: CompId, rtid: u32) -> NetToken {
    let mut next = rtid;
    match constant_token(spec, Constant::Net { component: comp }, &mut next) {
        Token::Net(n) => Shared::unwrap_or_clone(n),
        Token::Basic(_) => unreachable!(),
    }
}

struct Ctx<'a> {
    spec: &'a NpnSpec,
    root: &'a Marking,
}

impl<'a> Ctx<'a> {
    fn available(&self, host: &'a Marking, comp: CompId, p: PlaceRef) -> &'a [Token] {
        if p.comp == comp {
            &host.places[p.idx]
        } else {
            &self.root.places[p.idx]
        }
    }

    fn bindings(&self, host: &'a Marking, comp: CompId, t: TransRef) -> Vec<Binding> {
        let spec = self.spec;
        let td = spec.transition(t);
        if td
            .inhibitors
            .iter()
            .any(|p| !self.available(host, comp, *p).is_empty())
        {
            return Vec::new();
        }
        let mut partial = vec![Binding::new()];
        for arc in &td.inputs {
            let toks = self.available(host, comp, arc.place);
            let mut classes: Vec<&[Token]> = Vec::new();
            let mut start = 0;
            for i in 1..=toks.len() {
                if i == toks.len() || toks[i] != toks[start] {
                    classes.push(&toks[start..i]);
                    start = i;
                }
            }
            let mut used = vec![0usize; classes.len()];
            for k in arc.constants() {
                let want = match k {
                    Constant::Color { value, .. } => Token::Basic(value),
                    Constant::Net { component } => Token::Net(Shared::new(fresh_net_token(spec, component, 0))),
                };
                match classes.iter().position(|c| c[0] == want) {
                    Some(ci) if used[ci] < classes[ci].len() => used[ci] += 1,
                    _ => return Vec::new(),
                }
            }
            let vars: Vec<&Variable> = match arc.vars().map(|v| spec.variable(comp, v)).collect() {
                Some(v) => v,
                None => return Vec::new(),
            };
            let mut opts = Vec::new();
            assign_vars(&vars, &classes, &mut used, &mut Vec::new(), &mut opts);
            if opts.is_empty() {
                return Vec::new();
            }
            partial = partial
                .iter()
                .flat_map(|b| {
                    opts.iter().map(move |o| {
                        let mut b = b.clone();
                        b.extend(o.iter().cloned());
                        b
                    })
                })
                .collect();
        }
        // anonymous basic terms that only occur on outputs range over their type
        for arc in &td.outputs {
            for v in arc.vars() {
                if partial.first().is_some_and(|b| b.contains_key(v)) {
                    continue;
                }
                let Some(Variable {
                    ty: PlaceType::Basic(ty),
                    ..
                }) = spec.variable(comp, v)
                else {
                    continue;
                };
                let n = spec.color_types[*ty].values.len() as u16;
                partial = partial
                    .iter()
                    .flat_map(|b| {
                        (0..n).map(move |val| {
                            let mut b = b.clone();
                            b.insert(v.to_string(), Token::Basic(val));
                            b
                        })
                    })
                    .collect();
            }
        }
        partial
    }

    fn firings(&self, host: &'a Marking, comp: CompId, label: Option<TransLabel>) -> Vec<Firing> {
        let mut out = Vec::new();
        for (idx, td) in self.spec.components[comp].transitions.iter().enumerate() {
            if td.label != label {
                continue;
            }
            let t = TransRef { comp, idx };
            for binding in self.bindings(host, comp, t) {
                out.push(Firing {
                    transition: t,
                    binding,
                });
            }
        }
        out
    }

    fn walk(&self, host: &'a Marking, comp: CompId, path: &mut Path, out: &mut Vec<Step>) {
        let spec = self.spec;
        for (idx, td) in spec.components[comp].transitions.iter().enumerate() {
            let t = TransRef { comp, idx };
            match td.label {
                None => {
                    for binding in self.bindings(host, comp, t) {
                        out.push(Step::Autonomous {
                            path: path.clone(),
                            firing: Firing {
                                transition: t,
                                binding,
                            },
                        });
                    }
                }
                Some(TransLabel::Lower(l)) => {
                    for binding in self.bindings(host, comp, t) {
                        let nets = bound_net_tokens(spec, td, &binding);
                        let firing = Firing {
                            transition: t,
                            binding: binding.clone(),
                        };
                        if nets.is_empty() {
                            out.push(Step::Autonomous {
                                path: path.clone(),
                                firing,
                            });
                            continue;
                        }
                        let per_child: Vec<Vec<Participant>> = nets
                            .iter()
                            .map(|n| {
                                self.firings(&n.marking, n.component, Some(TransLabel::Upper(l)))
                                    .into_iter()
                                    .map(|f| Participant {
                                        rtid: n.rtid,
                                        firing: f,
                                    })
                                    .collect()
                            })
                            .collect();
                        for children in cartesian(&per_child) {
                            out.push(Step::Vertical {
                                path: path.clone(),
                                firing: firing.clone(),
                                children,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        for (pidx, place) in spec.components[comp].places.iter().enumerate() {
            let PlaceType::Net(set) = &place.ty else {
                continue;
            };
            let toks = &host.places[pidx];
            let classes = net_classes(toks);
            for (l, decl) in spec.labels.iter().enumerate() {
                let LabelKind::Horizontal { arity } = decl.kind else {
                    continue;
                };
                let used_here = set.iter().any(|c| {
                    spec.components[*c]
                        .transitions
                        .iter()
                        .any(|t| t.label == Some(TransLabel::Horizontal(l)))
                });
                if !used_here {
                    continue;
                }
                self.horizontal(path, pidx, l, arity as usize, &classes, out);
            }
            for class in &classes {
                let rep = class[0];
                path.0.push((pidx, rep.rtid));
                self.walk(&rep.marking, rep.component, path, out);
                path.0.pop();
            }
        }
    }

    fn horizontal(
        &self,
        path: &Path,
        place: usize,
        label: usize,
        arity: usize,
        classes: &[Vec<&'a NetToken>],
        out: &mut Vec<Step>,
    ) {
        // per class: firing options of each occurrence (structurally alike)
        let cands: Vec<(&Vec<&NetToken>, Vec<Vec<Firing>>)> = classes
            .iter()
            .filter_map(|class| {
                let opts: Vec<Vec<Firing>> = class
                    .iter()
                    .take(arity)
                    .map(|n| self.firings(&n.marking, n.component, Some(TransLabel::Horizontal(label))))
                    .collect();
                (!opts[0].is_empty()).then_some((class, opts))
            })
            .collect();
        let limits: Vec<usize> = cands.iter().map(|(c, _)| c.len().min(arity)).collect();
        for counts in compositions(&limits, arity) {
            // for every class, a non-decreasing choice of option indices
            let per_class: Vec<Vec<Vec<Participant>>> = cands
                .iter()
                .zip(&counts)
                .filter(|(_, n)| **n > 0)
                .map(|((class, opts), &n)| {
                    multichoose(opts[0].len(), n)
                        .into_iter()
                        .map(|choice| {
                            choice
                                .iter()
                                .enumerate()
                                .map(|(j, &o)| Participant {
                                    rtid: class[j].rtid,
                                    firing: opts[j][o].clone(),
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            for combo in cartesian(&per_class) {
                out.push(Step::Horizontal {
                    path: path.clone(),
                    place,
                    label,
                    participants: combo.into_iter().flatten().collect(),
                });
            }
        }
    }
}

fn assign_vars(
    vars: &[&Variable],
    classes: &[&[Token]],
    used: &mut [usize],
    cur: &mut Vec<(String, Token)>,
    out: &mut Vec<Vec<(String, Token)>>,
) {
    let Some((v, rest)) = vars.split_first() else {
        out.push(cur.clone());
        return;
    };
    for ci in 0..classes.len() {
        if used[ci] >= classes[ci].len() {
            continue;
        }
        let tok = &classes[ci][used[ci]];
        let fits = match (&v.ty, tok) {
            (PlaceType::Net(set), Token::Net(n)) => set.contains(&n.component),
            (PlaceType::Basic(_), Token::Basic(_)) => true,
            _ => false,
        };
        if !fits {
            continue;
        }
        used[ci] += 1;
        cur.push((v.name.clone(), tok.clone()));
        assign_vars(rest, classes, used, cur, out);
        cur.pop();
        used[ci] -= 1;
    }
}

fn net_classes(toks: &[Token]) -> Vec<Vec<&NetToken>> {
    let mut out: Vec<Vec<&NetToken>> = Vec::new();
    for n in toks.iter().filter_map(Token::as_net) {
        match out.last_mut() {
            Some(c) if *c[0] == *n => c.push(n),
            _ => out.push(vec![n]),
        }
    }
    out
}

/// Net tokens bound by the input variables of a transition.
pub fn bound_net_tokens<'b>(spec: &NpnSpec, td: &TransitionDecl, b: &'b Binding) -> Vec<&'b NetToken> {
    let _ = spec;
    td.inputs
        .iter()
        .flat_map(|a| a.vars())
        .filter_map(|v| b.get(v).and_then(Token::as_net))
        .collect()
}

fn cartesian<T: Clone>(sets: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut acc: Vec<Vec<T>> = vec![Vec::new()];
    for s in sets {
        acc = acc
            .iter()
            .flat_map(|prefix| {
                s.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x.clone());
                    v
                })
            })
            .collect();
    }
    acc
}

/// All vectors `c` with `c[i] <= limits[i]` summing to `total`.
fn compositions(limits: &[usize], total: usize) -> Vec<Vec<usize>> {
    fn go(limits: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match limits.split_first() {
            None => {
                if left == 0 {
                    out.push(cur.clone());
                }
            }
            Some((&lim, rest)) => {
                for n in 0..=lim.min(left) {
                    cur.push(n);
                    go(rest, left - n, cur, out);
                    cur.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(limits, total, &mut Vec::new(), &mut out);
    out
}

/// Non-decreasing index sequences of length `k` over `0..n`.
fn multichoose(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in from..n {
            cur.push(i);
            go(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// All bindings under which `t` is enabled in the net addressed by `path`,
/// in canonical order.
pub fn enabled_bindings(
    spec: &NpnSpec,
    root: &Marking,
    path: &Path,
    t: TransRef,
) -> Result<Vec<Binding>, SemanticsError> {
    let cx = Ctx { spec, root };
    let (host, comp) = if path.0.is_empty() {
        (root, 0)
    } else {
        let n = root
            .resolve(path)
            .ok_or(SemanticsError::UnresolvedPath(path.host_rtid()))?;
        (&n.marking, n.component)
    };
    if t.comp != comp {
        return Err(SemanticsError::NotEnabled(format!(
            "transition belongs to `{}`",
            spec.components[t.comp].name
        )));
    }
    Ok(cx.bindings(host, comp, t))
}

/// Every enabled step, structurally deduplicated: structurally equal net
/// tokens at the same place are explored once.
pub fn enabled_steps(spec: &NpnSpec, root: &Marking) -> Vec<Step> {
    let cx = Ctx { spec, root };
    let mut out = Vec::new();
    cx.walk(root, 0, &mut Path::default(), &mut out);
    out
}

/// Applies a step, checking that it is enabled in `root`.
pub fn apply_step(spec: &NpnSpec, root: &Marking, step: &Step) -> Result<Marking, SemanticsError> {
    let n = step.firings().len();
    apply_step_ordered(spec, root, step, &(0..n).collect::<Vec<_>>()).map(|(m, _)| m)
}

/// Applies a step with its constituent firings (see [`Step::firings`])
/// executed in `order`. Returns the new marking and the number of net
/// tokens created.
pub fn apply_step_ordered(
    spec: &NpnSpec,
    root: &Marking,
    step: &Step,
    order: &[usize],
) -> Result<(Marking, u32), SemanticsError> {
    check_step(spec, root, step)?;
    let firings = step.firings();
    let mut st = Applier {
        spec,
        root: root.clone(),
        grave: Vec::new(),
        next: root.max_rtid() + 1,
        created: 0,
    };
    for &i in order {
        let (host, f) = firings[i];
        st.fire(host, f)?;
    }
    st.root.normalize();
    Ok((st.root, st.created))
}

fn not_enabled(msg: impl Into<String>) -> SemanticsError {
    SemanticsError::NotEnabled(msg.into())
}

fn host_of(root: &Marking, rtid: u32) -> Result<(&Marking, CompId), SemanticsError> {
    if rtid == 0 {
        return Ok((root, 0));
    }
    let n = root.find(rtid).ok_or(SemanticsError::UnresolvedPath(rtid))?;
    Ok((&n.marking, n.component))
}

fn check_step(spec: &NpnSpec, root: &Marking, step: &Step) -> Result<(), SemanticsError> {
    match step {
        Step::Autonomous { path, firing } => {
            resolve_path(root, path)?;
            let td = spec.transition(firing.transition);
            match td.label {
                None => {}
                Some(TransLabel::Lower(_)) if bound_net_tokens(spec, td, &firing.binding).is_empty() => {}
                _ => return Err(not_enabled(format!("`{}` cannot fire autonomously", td.name))),
            }
            check_firing(spec, root, path.host_rtid(), firing)
        }
        Step::Vertical {
            path,
            firing,
            children,
        } => {
            resolve_path(root, path)?;
            let td = spec.transition(firing.transition);
            let Some(TransLabel::Lower(l)) = td.label else {
                return Err(not_enabled(format!("`{}` is not lower-labeled", td.name)));
            };
            check_firing(spec, root, path.host_rtid(), firing)?;
            let mut bound: Vec<u32> = bound_net_tokens(spec, td, &firing.binding)
                .iter()
                .map(|n| n.rtid)
                .collect();
            let mut kids: Vec<u32> = children.iter().map(|c| c.rtid).collect();
            bound.sort();
            kids.sort();
            if bound != kids {
                return Err(not_enabled("children do not match the bound net tokens"));
            }
            for c in children {
                let ctd = spec.transition(c.firing.transition);
                if ctd.label != Some(TransLabel::Upper(l)) {
                    return Err(not_enabled(format!("`{}` is not labeled ~{}", ctd.name, spec.labels[l].name)));
                }
                check_firing(spec, root, c.rtid, &c.firing)?;
            }
            Ok(())
        }
        Step::Horizontal {
            path,
            place,
            label,
            participants,
        } => {
            let host = match resolve_path(root, path)? {
                Some(n) => &n.marking,
                None => root,
            };
            let arity = spec.arity(*label).ok_or_else(|| not_enabled("label is not horizontal"))?;
            if participants.len() != arity as usize {
                return Err(not_enabled("participant count differs from the label arity"));
            }
            let mut seen = Vec::new();
            for p in participants {
                if seen.contains(&p.rtid) {
                    return Err(not_enabled("participants must be distinct net tokens"));
                }
                seen.push(p.rtid);
                let at_place = host
                    .places
                    .get(*place)
                    .is_some_and(|ts| ts.iter().filter_map(Token::as_net).any(|n| n.rtid == p.rtid));
                if !at_place {
                    return Err(not_enabled(format!("net token {} is not at the place", p.rtid)));
                }
                let ptd = spec.transition(p.firing.transition);
                if ptd.label != Some(TransLabel::Horizontal(*label)) {
                    return Err(not_enabled(format!("`{}` is not labeled {}", ptd.name, spec.labels[*label].name)));
                }
                check_firing(spec, root, p.rtid, &p.firing)?;
            }
            Ok(())
        }
    }
}

fn resolve_path<'m>(root: &'m Marking, path: &Path) -> Result<Option<&'m NetToken>, SemanticsError> {
    if path.0.is_empty() {
        return Ok(None);
    }
    root.resolve(path)
        .map(Some)
        .ok_or(SemanticsError::UnresolvedPath(path.host_rtid()))
}

/// Checks a single firing against the pre-step marking.
fn check_firing(spec: &NpnSpec, root: &Marking, rtid: u32, f: &Firing) -> Result<(), SemanticsError> {
    let (host, comp) = host_of(root, rtid)?;
    let td = spec.transition(f.transition);
    if f.transition.comp != comp {
        return Err(not_enabled(format!("`{}` does not belong to the addressed net", td.name)));
    }
    let cx = Ctx { spec, root };
    for p in &td.inhibitors {
        if !cx.available(host, comp, *p).is_empty() {
            return Err(not_enabled(format!("inhibitor place `{}` is marked", spec.place(*p).name)));
        }
    }
    for arc in &td.inputs {
        let mut pool: Vec<&Token> = cx.available(host, comp, arc.place).iter().collect();
        for term in &arc.terms {
            let found = match term {
                ArcTerm::Const(Constant::Color { value, .. }) => {
                    pool.iter().position(|t| **t == Token::Basic(*value))
                }
                ArcTerm::Const(Constant::Net { .. }) => None,
                ArcTerm::Var(v) => match f.binding.get(v) {
                    Some(Token::Basic(x)) => pool.iter().position(|t| **t == Token::Basic(*x)),
                    Some(Token::Net(want)) => pool.iter().position(|t| {
                        matches!(t, Token::Net(n) if n.rtid == want.rtid && n == want)
                    }),
                    None => None,
                },
            };
            match found {
                Some(i) => {
                    pool.swap_remove(i);
                }
                None => {
                    return Err(not_enabled(format!(
                        "`{}` lacks tokens at `{}`",
                        td.name,
                        spec.place(arc.place).name
                    )))
                }
            }
        }
    }
    for arc in &td.outputs {
        for v in arc.vars() {
            if !f.binding.contains_key(v) {
                return Err(not_enabled(format!("variable `{v}` is unbound")));
            }
        }
    }
    Ok(())
}

struct Applier<'a> {
    spec: &'a NpnSpec,
    root: Marking,
    /// Net tokens consumed during the current step; later firings inside
    /// them still contribute their shared-place effects.
    grave: Vec<Shared<NetToken>>,
    next: u32,
    created: u32,
}

impl Applier<'_> {
    fn host_mut(&mut self, rtid: u32) -> Result<(&mut Marking, CompId), SemanticsError> {
        if rtid == 0 {
            return Ok((&mut self.root, 0));
        }
        if self.root.find(rtid).is_some() {
            let n = self.root.find_mut(rtid).unwrap();
            return Ok((&mut n.marking, n.component));
        }
        for g in &mut self.grave {
            if g.rtid == rtid {
                let g = Shared::make_mut(g);
                return Ok((&mut g.marking, g.component));
            }
            if g.marking.find(rtid).is_some() {
                let n = Shared::make_mut(g).marking.find_mut(rtid).unwrap();
                return Ok((&mut n.marking, n.component));
            }
        }
        Err(SemanticsError::UnresolvedPath(rtid))
    }

    fn fire(&mut self, rtid: u32, f: &Firing) -> Result<(), SemanticsError> {
        let spec = self.spec;
        let td = spec.transition(f.transition);
        let comp = f.transition.comp;
        let mut taken: BTreeMap<&str, Shared<NetToken>> = BTreeMap::new();

        // shared removals
        for arc in td.inputs.iter().filter(|a| a.place.comp != comp) {
            remove_terms(&mut self.root.places[arc.place.idx], arc, &f.binding, &mut taken)?;
        }
        // local effects
        let mut fresh = Vec::new();
        for arc in &td.outputs {
            for term in &arc.terms {
                if let ArcTerm::Const(Constant::Net { component }) = term {
                    let tok = fresh_net_token(spec, *component, self.next);
                    self.next = tok.marking.max_rtid().max(tok.rtid) + 1;
                    self.created += 1 + tok.marking.net_tokens().len() as u32;
                    fresh.push(tok);
                }
            }
        }
        let mut fresh = fresh.into_iter();
        let mut shared_out: Vec<(usize, Token)> = Vec::new();
        {
            let (host, hcomp) = self.host_mut(rtid)?;
            debug_assert_eq!(hcomp, comp);
            for arc in td.inputs.iter().filter(|a| a.place.comp == comp) {
                remove_terms(&mut host.places[arc.place.idx], arc, &f.binding, &mut taken)?;
            }
            for arc in &td.outputs {
                for term in &arc.terms {
                    let tok = match term {
                        ArcTerm::Const(Constant::Color { value, .. }) => Token::Basic(*value),
                        ArcTerm::Const(Constant::Net { .. }) => Token::Net(Shared::new(fresh.next().unwrap())),
                        ArcTerm::Var(v) => match f.binding.get(v) {
                            Some(Token::Net(_)) => Token::Net(
                                taken
                                    .remove(v.as_str())
                                    .ok_or_else(|| not_enabled(format!("net variable `{v}` used twice")))?,
                            ),
                            Some(t) => t.clone(),
                            None => return Err(not_enabled(format!("variable `{v}` is unbound"))),
                        },
                    };
                    if arc.place.comp == comp {
                        host.places[arc.place.idx].push(tok);
                    } else {
                        shared_out.push((arc.place.idx, tok));
                    }
                }
            }
        }
        for (idx, tok) in shared_out {
            self.root.places[idx].push(tok);
        }
        // consumed net tokens vanish with their descendants
        self.grave.extend(taken.into_values());
        Ok(())
    }
}

fn remove_terms<'b>(
    place: &mut Vec<Token>,
    arc: &'b Arc,
    binding: &Binding,
    taken: &mut BTreeMap<&'b str, Shared<NetToken>>,
) -> Result<(), SemanticsError> {
    for term in &arc.terms {
        let pos = match term {
            ArcTerm::Const(Constant::Color { value, .. }) => place.iter().position(|t| *t == Token::Basic(*value)),
            ArcTerm::Const(Constant::Net { .. }) => None,
            ArcTerm::Var(v) => match binding.get(v) {
                Some(Token::Basic(x)) => place.iter().position(|t| *t == Token::Basic(*x)),
                Some(Token::Net(want)) => place
                    .iter()
                    .position(|t| matches!(t, Token::Net(n) if n.rtid == want.rtid)),
                None => None,
            },
        };
        let Some(i) = pos else {
            return Err(not_enabled("token to consume is missing"));
        };
        let tok = place.remove(i);
        if let (ArcTerm::Var(v), Token::Net(n)) = (term, tok) {
            taken.insert(v.as_str(), n);
        }
    }
    Ok(())
}

/// Checks that every token fits its place type, recursively.
pub fn type_check(spec: &NpnSpec, root: &Marking) -> Result<(), String> {
    fn go(spec: &NpnSpec, m: &Marking, comp: CompId) -> Result<(), String> {
        let places = &spec.components[comp].places;
        if m.places.len() != places.len() {
            return Err(format!("`{}` marking has wrong arity", spec.components[comp].name));
        }
        for (p, toks) in places.iter().zip(&m.places) {
            for t in toks {
                match (&p.ty, t) {
                    (PlaceType::Basic(ty), Token::Basic(v)) if (*v as usize) < spec.color_types[*ty].values.len() => {}
                    (PlaceType::Net(set), Token::Net(n)) if set.contains(&n.component) && n.component != 0 => {
                        go(spec, &n.marking, n.component)?
                    }
                    _ => return Err(format!("ill-typed token in `{}`", p.name)),
                }
            }
        }
        Ok(())
    }
    go(spec, root, 0)
}

/// Compact text rendering, e.g. `<p1:4,p3:(F,<p6:1,p7:{},p8:0>)>`.
pub fn render(spec: &NpnSpec, m: &Marking) -> String {
    let mut s = String::new();
    render_into(spec, m, 0, &mut s);
    s
}

fn render_into(spec: &NpnSpec, m: &Marking, comp: CompId, s: &mut String) {
    s.push('<');
    for (i, (p, toks)) in spec.components[comp].places.iter().zip(&m.places).enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}:", p.name);
        match &p.ty {
            PlaceType::Basic(DOTS) => {
                let _ = write!(s, "{}", toks.len());
            }
            ty => {
                if toks.len() == 1 && ty.is_net() {
                    render_token(spec, ty, &toks[0], s);
                    continue;
                }
                s.push('{');
                for (j, t) in toks.iter().enumerate() {
                    if j > 0 {
                        s.push(',');
                    }
                    render_token(spec, ty, t, s);
                }
                s.push('}');
            }
        }
    }
    s.push('>');
}

fn render_token(spec: &NpnSpec, ty: &PlaceType, t: &Token, s: &mut String) {
    match (ty, t) {
        (PlaceType::Basic(ty), Token::Basic(v)) => s.push_str(&spec.color_types[*ty].values[*v as usize]),
        (_, Token::Net(n)) => {
            let _ = write!(s, "({},", spec.components[n.component].name);
            render_into(spec, &n.marking, n.component, s);
            s.push(')');
        }
        (_, Token::Basic(v)) => {
            let _ = write!(s, "{v}");
        }
    }
}

/// Short human-readable description of a step, e.g. `t2[F#1.t3]`.
pub fn describe_step(spec: &NpnSpec, step: &Step) -> String {
    let name = |rtid: u32, t: TransRef| {
        let td = spec.transition(t);
        if rtid == 0 {
            td.name.clone()
        } else {
            format!("{}#{}.{}", spec.components[t.comp].name, rtid, td.name)
        }
    };
    match step {
        Step::Autonomous { path, firing } => name(path.host_rtid(), firing.transition),
        Step::Vertical {
            path,
            firing,
            children,
        } => {
            let kids: Vec<String> = children
                .iter()
                .map(|c| name(c.rtid, c.firing.transition))
                .collect();
            format!("{}[{}]", name(path.host_rtid(), firing.transition), kids.join(","))
        }
        Step::Horizontal {
            label,
            participants,
            ..
        } => {
            let ps: Vec<String> = participants
                .iter()
                .map(|c| name(c.rtid, c.firing.transition))
                .collect();
            format!("{}({})", spec.labels[*label].name, ps.join(","))
        }
    }
}

/// Canonical byte encoding of a marking: equal encodings iff the markings
/// are structurally equal.
pub fn encode_marking(m: &Marking, out: &mut Vec<u8>) {
    for p in &m.places {
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        for t in p {
            match t {
                Token::Basic(v) => {
                    out.push(0);
                    out.extend_from_slice(&v.to_le_bytes());
                }
                Token::Net(n) => {
                    out.push(1);
                    out.extend_from_slice(&(n.component as u32).to_le_bytes());
                    encode_marking(&n.marking, out);
                }
            }
        }
    }
}
