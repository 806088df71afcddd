//! PROMELA code generation.
//!
//! Every element net becomes a `proctype EN_<name>` whose instances are the
//! net tokens; the system net becomes `init`. Three variants are emitted:
//!
//! * `priorities` — process priorities order the regions of a step; net
//!   places carry requests *and* responses (`{pid,label,tid,type,rm}`).
//! * `no-priorities` — responses travel over the global channel, sorted by
//!   a priority field; a single loop per element net.
//! * `improved` — the global-channel ordering combined with priorities.
//!
//! The optimization flags only affect the `priorities` variant, and each one
//! is applied only where its precondition holds (see [`PromelaModel::applied`]).
//! Every firing region prints `@FIRE <component> <transition>`, which is how
//! the harness lifts verifier trails back to net steps.

mod aux;
mod emit;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::explorer::{explore, ExploreLimits, StateGraph};
use crate::model::*;
use crate::semantics::{Marking, Token};

/// Net tokens assumed per net place when no complete census is available.
pub const DEFAULT_NET_TOKEN_CAP: usize = 4;
/// Tokens assumed per colored basic place when no complete census is available.
pub const DEFAULT_TOKEN_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Priorities,
    NoPriorities,
    Improved,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Priorities, Variant::NoPriorities, Variant::Improved];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Priorities => "priorities",
            Variant::NoPriorities => "no-priorities",
            Variant::Improved => "improved",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "priorities" => Ok(Variant::Priorities),
            "no-priorities" | "nopriorities" => Ok(Variant::NoPriorities),
            "improved" => Ok(Variant::Improved),
            _ => Err(format!("unknown variant `{s}` (priorities, no-priorities, improved)")),
        }
    }
}

/// Model-size optimizations of the `priorities` variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OptFlags {
    /// Create net tokens at priority 1 when their initial marking fits in
    /// the variable declarations.
    pub init_at_decl: bool,
    /// Dispatch synchronized firings by transition identity instead of
    /// re-testing enabledness, for labels whose transitions are mutually
    /// exclusive within the element net.
    pub elide_label_test: bool,
    /// Drop the transition-identity message field when every sync label
    /// occurs at most once per element net.
    pub label_as_id: bool,
    /// Drop the removal field when no net token is ever transported.
    pub drop_transport_field: bool,
    /// Drop the removal field when no net token is ever consumed.
    pub drop_consume_field: bool,
}

impl OptFlags {
    pub fn all() -> Self {
        OptFlags {
            init_at_decl: true,
            elide_label_test: true,
            label_as_id: true,
            drop_transport_field: true,
            drop_consume_field: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == OptFlags::default()
    }

    /// Parses a comma-separated list (`initAtDecl,elide-label-test,...`, or `all`).
    pub fn parse(list: &str) -> Result<Self, String> {
        let mut f = OptFlags::default();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let key: String = item.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_lowercase();
            match key.as_str() {
                "all" => f = OptFlags::all(),
                "initatdecl" => f.init_at_decl = true,
                "elidelabeltest" => f.elide_label_test = true,
                "labelasid" => f.label_as_id = true,
                "droptransportfield" => f.drop_transport_field = true,
                "dropconsumefield" => f.drop_consume_field = true,
                _ => return Err(format!("unknown optimization `{item}`")),
            }
        }
        Ok(f)
    }

    fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (on, name) in [
            (self.init_at_decl, "initAtDecl"),
            (self.elide_label_test, "elideLabelTest"),
            (self.label_as_id, "labelAsId"),
            (self.drop_transport_field, "dropTransportField"),
            (self.drop_consume_field, "dropConsumeField"),
        ] {
            if on {
                v.push(name);
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Property {
    /// End labels at every loop head. Always emitted; accepted for symmetry.
    ValidEndStates,
    /// `accept:` label in front of the `init` loop.
    AcceptanceLabel,
    /// `assert(place <= bound)` after every firing touching a system place.
    BoundAssert { place: String, bound: u32 },
    /// Appended verbatim as `ltl prop { ... }`.
    Ltl { text: String },
    /// Globals `a` (initial count of the snapshot place) and `f` (net
    /// tokens created so far).
    Counters { snapshot: Option<String> },
    /// `assert(text)` checked by a watcher process whenever the whole
    /// model is blocked (`timeout`).
    DeadlockAssert { text: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodegenOptions {
    pub variant: Variant,
    /// Capacity overrides; must not be below the computed bound.
    pub max_tok: Option<usize>,
    pub max_msg: Option<usize>,
    pub optimizations: OptFlags,
    pub properties: Vec<Property>,
    /// `bit` for places that never hold more than one token.
    pub narrow_types: bool,
    /// Token census of a complete exploration; caps are used without it.
    pub census: Option<Census>,
}

impl Default for Variant {
    fn default() -> Self {
        Variant::Priorities
    }
}

impl CodegenOptions {
    pub fn new(variant: Variant) -> Self {
        CodegenOptions {
            variant,
            ..Default::default()
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodegenError {
    #[error("net is not valid: {0}")]
    Invalid(String),
    #[error("{what}: {count} exceed the byte range [1,254]")]
    ByteRange { what: &'static str, count: usize },
    #[error("capacity {name}={given} is below the computed bound {need}")]
    Capacity { name: &'static str, given: usize, need: usize },
    #[error("identifier `{0}` clashes with a generated or reserved name")]
    Reserved(String),
    #[error("name `{name}` is declared in both {a} and {b}")]
    NameClash { name: String, a: String, b: String },
    #[error("property: {0}")]
    Property(String),
}

/// Maximum number of tokens ever held by one instance of each place.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Census {
    pub max_tokens: BTreeMap<PlaceRef, usize>,
}

impl Census {
    pub fn from_graph(spec: &NpnSpec, g: &StateGraph) -> Self {
        fn walk(m: &Marking, comp: CompId, out: &mut BTreeMap<PlaceRef, usize>) {
            for (idx, toks) in m.places.iter().enumerate() {
                let e = out.entry(PlaceRef { comp, idx }).or_insert(0);
                *e = (*e).max(toks.len());
                for t in toks {
                    if let Token::Net(n) = t {
                        walk(&n.marking, n.component, out);
                    }
                }
            }
        }
        let mut max_tokens = BTreeMap::new();
        for (comp, c) in spec.components.iter().enumerate() {
            for idx in 0..c.places.len() {
                max_tokens.insert(PlaceRef { comp, idx }, 0);
            }
        }
        for n in &g.nodes {
            walk(&n.marking, 0, &mut max_tokens);
        }
        Census { max_tokens }
    }

    /// Census of a full exploration, or `None` when the limits cut it short.
    pub fn explore(spec: &NpnSpec, limits: &ExploreLimits) -> Option<Self> {
        let g = explore(spec, limits);
        g.is_complete().then(|| Census::from_graph(spec, &g))
    }

    fn get(&self, p: PlaceRef) -> Option<usize> {
        self.max_tokens.get(&p).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChannelSizes {
    pub max_tok: usize,
    pub max_msg: usize,
    /// Token bound assumed per place (`Comp.place`).
    pub place_bounds: BTreeMap<String, usize>,
    pub from_census: bool,
}

/// Number of request-issuing (upper or horizontal) transitions of `comp`.
fn sync_transitions(spec: &NpnSpec, comp: CompId) -> usize {
    spec.components[comp]
        .transitions
        .iter()
        .filter(|t| matches!(t.label, Some(TransLabel::Upper(_)) | Some(TransLabel::Horizontal(_))))
        .count()
}

/// Channel capacities: a net place needs one at-place message per net token
/// plus one request per request-issuing transition of the hosted net.
pub fn decide_channel_sizes(spec: &NpnSpec, census: Option<&Census>) -> ChannelSizes {
    let mut max_tok = 1;
    let mut max_msg = 1;
    let mut place_bounds = BTreeMap::new();
    for (comp, c) in spec.components.iter().enumerate() {
        for (idx, p) in c.places.iter().enumerate() {
            let r = PlaceRef { comp, idx };
            let cap = if p.ty.is_net() { DEFAULT_NET_TOKEN_CAP } else { DEFAULT_TOKEN_CAP };
            let n = census.and_then(|cs| cs.get(r)).unwrap_or(cap);
            place_bounds.insert(format!("{}.{}", c.name, p.name), n);
            match &p.ty {
                PlaceType::Net(hosted) => {
                    let u = hosted.iter().map(|&h| sync_transitions(spec, h)).max().unwrap_or(0);
                    max_msg = max_msg.max(n * (1 + u));
                }
                PlaceType::Basic(DOTS) => {}
                PlaceType::Basic(_) => max_tok = max_tok.max(n),
            }
        }
    }
    ChannelSizes {
        max_tok,
        max_msg,
        place_bounds,
        from_census: census.is_some(),
    }
}

/// Generated verifier source plus the tables needed to read its trails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PromelaModel {
    pub variant: Variant,
    pub source: String,
    /// `Comp.t` → transition identity.
    pub transition_ids: BTreeMap<String, u8>,
    /// Label name → byte; a vertical label's byte tags the requests of `~l`.
    pub label_ids: BTreeMap<String, u8>,
    /// printf marker → (component, transition).
    pub step_map: BTreeMap<String, (String, String)>,
    pub sizes: ChannelSizes,
    /// Optimizations that were requested and whose preconditions hold.
    pub applied: OptFlags,
}

impl PromelaModel {
    /// Maps a printf marker line back to (component, transition).
    pub fn lift_marker(&self, line: &str) -> Option<(&str, &str)> {
        let at = line.find("@FIRE ")?;
        let key = line[at..].trim_end();
        self.step_map.get(key).map(|(c, t)| (c.as_str(), t.as_str()))
    }
}

pub fn marker(spec: &NpnSpec, t: TransRef) -> String {
    format!("@FIRE {} {}", spec.components[t.comp].name, spec.transition(t).name)
}

/// How net variables of input arcs are used by a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NetUse {
    Consume,
    /// Moved to the given output place (possibly the same one).
    Transport(PlaceRef),
}

pub(crate) fn net_use(t: &TransitionDecl, var: &str) -> NetUse {
    t.outputs
        .iter()
        .find(|a| a.vars().any(|v| v == var))
        .map_or(NetUse::Consume, |a| NetUse::Transport(a.place))
}

fn net_var_uses(spec: &NpnSpec) -> impl Iterator<Item = NetUse> + '_ {
    spec.transitions().flat_map(move |(tr, t)| {
        t.inputs
            .iter()
            .filter(move |a| spec.place(a.place).ty.is_net())
            .flat_map(move |a| a.vars().map(move |v| net_use(spec.transition(tr), v)))
            .collect::<Vec<_>>()
    })
}

pub(crate) fn has_transport(spec: &NpnSpec) -> bool {
    net_var_uses(spec).any(|u| matches!(u, NetUse::Transport(_)))
}

pub(crate) fn has_consume(spec: &NpnSpec) -> bool {
    net_var_uses(spec).any(|u| u == NetUse::Consume)
}

pub(crate) fn creates_net_tokens(spec: &NpnSpec, t: &TransitionDecl) -> bool {
    t.outputs
        .iter()
        .any(|a| a.constants().any(|c| matches!(c, Constant::Net { .. })))
        && t.outputs.iter().any(|a| spec.place(a.place).ty.is_net())
}

pub(crate) fn is_sync(t: &TransitionDecl) -> bool {
    matches!(t.label, Some(TransLabel::Upper(_)) | Some(TransLabel::Horizontal(_)))
}

/// The initial marking of `comp` consists of uncolored tokens only.
pub(crate) fn init_fits_declarations(spec: &NpnSpec, comp: CompId) -> bool {
    spec.components[comp]
        .places
        .iter()
        .all(|p| p.init.is_empty() || p.ty.is_uncolored())
}

/// A set of local places whose token sum never increases and starts at ≤ 1
/// that covers an input place of each transition proves they are never
/// enabled together.
pub(crate) fn mutually_exclusive(spec: &NpnSpec, comp: CompId, t1: usize, t2: usize) -> bool {
    let c = &spec.components[comp];
    let weight = |arcs: &[Arc], set: &BTreeSet<usize>| -> usize {
        arcs.iter()
            .filter(|a| a.place.comp == comp && set.contains(&a.place.idx))
            .map(|a| a.terms.len())
            .sum()
    };
    let locals = |arcs: &[Arc]| -> Vec<usize> {
        arcs.iter()
            .filter(|a| a.place.comp == comp && !c.places[a.place.idx].shared)
            .map(|a| a.place.idx)
            .collect()
    };
    for &p in &locals(&c.transitions[t1].inputs) {
        for &q in &locals(&c.transitions[t2].inputs) {
            if p == q {
                continue;
            }
            let mut set: BTreeSet<usize> = [p, q].into();
            let closed = loop {
                let mut grew = false;
                let mut stuck = false;
                for t in &c.transitions {
                    if weight(&t.outputs, &set) > weight(&t.inputs, &set) {
                        let add: Vec<usize> = locals(&t.inputs).into_iter().filter(|i| !set.contains(i)).collect();
                        if add.is_empty() {
                            stuck = true;
                            break;
                        }
                        set.extend(add);
                        grew = true;
                    }
                }
                if stuck {
                    break false;
                }
                if !grew {
                    break true;
                }
            };
            if closed && set.iter().map(|&i| c.places[i].init.len()).sum::<usize>() <= 1 {
                return true;
            }
        }
    }
    false
}

/// Compiles a valid net into PROMELA.
pub fn translate(spec: &NpnSpec, options: &CodegenOptions) -> Result<PromelaModel, CodegenError> {
    let diags = crate::validate::validate(spec);
    if let Some(d) = diags.first() {
        return Err(CodegenError::Invalid(format!("{d} ({} diagnostics)", diags.len())));
    }
    emit::Gen::new(spec, options)?.run()
}

impl fmt::Display for OptFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.names();
        if n.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&n.join(","))
        }
    }
}
