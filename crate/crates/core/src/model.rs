//! Static structure of a nested Petri net: color types, synchronization
//! labels, net components with their places, variables and transitions.
//!
//! Component 0 is always the system net. Shared places are declared in the
//! system net and may be read and written by transitions of element nets
//! that host net-typed places.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

/// Index of a net component; 0 is the system net.
pub type CompId = usize;

/// Index of the builtin uncolored type.
pub const DOTS: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColorType {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LabelKind {
    Horizontal { arity: u32 },
    /// Declares the pair `l` (lower) / `~l` (upper).
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelDecl {
    pub name: String,
    #[serde(flatten)]
    pub kind: LabelKind,
}

/// Label attached to a transition, indexing [`NpnSpec::labels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "label", rename_all = "lowercase")]
pub enum TransLabel {
    Horizontal(usize),
    Lower(usize),
    Upper(usize),
}

impl TransLabel {
    pub fn index(self) -> usize {
        match self {
            TransLabel::Horizontal(i) | TransLabel::Lower(i) | TransLabel::Upper(i) => i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "of", rename_all = "lowercase")]
pub enum PlaceType {
    /// A basic color type; `Basic(DOTS)` is the uncolored type.
    Basic(usize),
    /// A set of element nets.
    Net(BTreeSet<CompId>),
}

impl PlaceType {
    pub fn is_net(&self) -> bool {
        matches!(self, PlaceType::Net(_))
    }

    pub fn is_uncolored(&self) -> bool {
        matches!(self, PlaceType::Basic(DOTS))
    }
}

/// A static constant: a color value or a net constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Constant {
    Color { ty: usize, value: u16 },
    Net { component: CompId },
}

impl Constant {
    pub const DOT: Constant = Constant::Color { ty: DOTS, value: 0 };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlaceDecl {
    pub name: String,
    pub ty: PlaceType,
    pub shared: bool,
    pub init: Vec<Constant>,
}

/// Reference to a place: owning component and index in its place list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PlaceRef {
    pub comp: CompId,
    pub idx: usize,
}

/// Reference to a transition: owning component and index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TransRef {
    pub comp: CompId,
    pub idx: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum ArcTerm {
    Const(Constant),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Arc {
    pub place: PlaceRef,
    pub terms: Vec<ArcTerm>,
}

impl Arc {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(|t| match t {
            ArcTerm::Var(v) => Some(v.as_str()),
            ArcTerm::Const(_) => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = Constant> + '_ {
        self.terms.iter().filter_map(|t| match t {
            ArcTerm::Const(c) => Some(*c),
            ArcTerm::Var(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Variable {
    pub name: String,
    pub ty: PlaceType,
    /// Desugared `_` occurrence.
    pub anonymous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionDecl {
    pub name: String,
    pub label: Option<TransLabel>,
    pub inputs: Vec<Arc>,
    pub outputs: Vec<Arc>,
    pub inhibitors: Vec<PlaceRef>,
}

impl TransitionDecl {
    pub fn input(&self, place: PlaceRef) -> Option<&Arc> {
        self.inputs.iter().find(|a| a.place == place)
    }

    pub fn output(&self, place: PlaceRef) -> Option<&Arc> {
        self.outputs.iter().find(|a| a.place == place)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetComponent {
    pub name: String,
    pub places: Vec<PlaceDecl>,
    pub variables: BTreeMap<String, Variable>,
    pub transitions: Vec<TransitionDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NpnSpec {
    pub name: String,
    /// Index 0 is the builtin `dots` type.
    pub color_types: Vec<ColorType>,
    pub labels: Vec<LabelDecl>,
    pub components: Vec<NetComponent>,
}

impl NpnSpec {
    /// A spec with only the builtin type and an empty system net.
    pub fn empty(name: &str, system: &str) -> Self {
        NpnSpec {
            name: name.to_string(),
            color_types: vec![ColorType {
                name: "dots".into(),
                values: vec!["dot".into()],
            }],
            labels: Vec::new(),
            components: vec![NetComponent {
                name: system.to_string(),
                places: Vec::new(),
                variables: BTreeMap::new(),
                transitions: Vec::new(),
            }],
        }
    }

    pub fn system(&self) -> &NetComponent {
        &self.components[0]
    }

    pub fn place(&self, p: PlaceRef) -> &PlaceDecl {
        &self.components[p.comp].places[p.idx]
    }

    pub fn transition(&self, t: TransRef) -> &TransitionDecl {
        &self.components[t.comp].transitions[t.idx]
    }

    pub fn variable(&self, comp: CompId, name: &str) -> Option<&Variable> {
        self.components[comp].variables.get(name)
    }

    pub fn component_index(&self, name: &str) -> Option<CompId> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.color_types.iter().position(|t| t.name == name)
    }

    /// Resolves a color constant name across all types.
    pub fn color_constant(&self, name: &str) -> Option<Constant> {
        self.color_types.iter().enumerate().find_map(|(ty, t)| {
            t.values
                .iter()
                .position(|v| v == name)
                .map(|v| Constant::Color { ty, value: v as u16 })
        })
    }

    pub fn shared_places(&self) -> impl Iterator<Item = PlaceRef> + '_ {
        self.system()
            .places
            .iter()
            .enumerate()
            .filter(|(_, p)| p.shared)
            .map(|(idx, _)| PlaceRef { comp: 0, idx })
    }

    pub fn place_by_name(&self, comp: CompId, name: &str) -> Option<PlaceRef> {
        self.components[comp]
            .places
            .iter()
            .position(|p| p.name == name)
            .map(|idx| PlaceRef { comp, idx })
    }

    /// Element nets whose places are all basic-typed (the segment whose
    /// tokens may appear in initial markings and shared places).
    pub fn is_basic_only(&self, comp: CompId) -> bool {
        comp != 0 && self.components[comp].places.iter().all(|p| !p.ty.is_net())
    }

    pub fn transitions(&self) -> impl Iterator<Item = (TransRef, &TransitionDecl)> {
        self.components.iter().enumerate().flat_map(|(comp, c)| {
            c.transitions
                .iter()
                .enumerate()
                .map(move |(idx, t)| (TransRef { comp, idx }, t))
        })
    }

    pub fn find_transition(&self, name: &str) -> Vec<TransRef> {
        // accepts `t` or `Comp.t`
        let (comp, tname) = match name.split_once('.') {
            Some((c, t)) => (self.component_index(c), t),
            None => (None, name),
        };
        self.transitions()
            .filter(|(r, t)| t.name == tname && comp.is_none_or(|c| c == r.comp))
            .map(|(r, _)| r)
            .collect()
    }

    pub fn constant_name(&self, c: Constant) -> &str {
        match c {
            Constant::Color { ty, value } => &self.color_types[ty].values[value as usize],
            Constant::Net { component } => &self.components[component].name,
        }
    }

    pub fn label_name(&self, l: TransLabel) -> String {
        match l {
            TransLabel::Upper(i) => format!("~{}", self.labels[i].name),
            TransLabel::Horizontal(i) | TransLabel::Lower(i) => self.labels[i].name.clone(),
        }
    }

    pub fn arity(&self, label: usize) -> Option<u32> {
        match self.labels[label].kind {
            LabelKind::Horizontal { arity } => Some(arity),
            LabelKind::Vertical => None,
        }
    }

    pub fn type_name(&self, ty: &PlaceType) -> String {
        match ty {
            PlaceType::Basic(t) => self.color_types[*t].name.clone(),
            PlaceType::Net(set) => {
                let names: Vec<&str> = set
                    .iter()
                    .map(|c| self.components[*c].name.as_str())
                    .collect();
                format!("net<{}>", names.join(","))
            }
        }
    }

    /// Type of the values an arc term denotes.
    pub fn term_type(&self, comp: CompId, term: &ArcTerm) -> Option<PlaceType> {
        match term {
            ArcTerm::Const(Constant::Color { ty, .. }) => Some(PlaceType::Basic(*ty)),
            ArcTerm::Const(Constant::Net { component }) => {
                Some(PlaceType::Net(BTreeSet::from([*component])))
            }
            ArcTerm::Var(v) => self.variable(comp, v).map(|v| v.ty.clone()),
        }
    }

    pub fn is_net_var(&self, comp: CompId, name: &str) -> bool {
        self.variable(comp, name).is_some_and(|v| v.ty.is_net())
    }
}

/// Transitions of the same component whose firing may disable `t` or be
/// disabled by it: they share an input or inhibitor place, or one produces
/// into a place the other inhibits. The relation is symmetric.
pub fn conflict_set(spec: &NpnSpec, t: TransRef) -> BTreeSet<TransRef> {
    let comp = &spec.components[t.comp];
    let touch = |tr: &TransitionDecl| -> BTreeSet<PlaceRef> {
        tr.inputs
            .iter()
            .map(|a| a.place)
            .chain(tr.inhibitors.iter().copied())
            .collect()
    };
    let outs = |tr: &TransitionDecl| -> BTreeSet<PlaceRef> {
        tr.outputs.iter().map(|a| a.place).collect()
    };
    let inh = |tr: &TransitionDecl| -> BTreeSet<PlaceRef> { tr.inhibitors.iter().copied().collect() };
    let this = &comp.transitions[t.idx];
    let (t_touch, t_out, t_inh) = (touch(this), outs(this), inh(this));
    comp.transitions
        .iter()
        .enumerate()
        .filter(|(idx, _)| *idx != t.idx)
        .filter(|(_, other)| {
            !t_touch.is_disjoint(&touch(other))
                || !t_out.is_disjoint(&inh(other))
                || !t_inh.is_disjoint(&outs(other))
        })
        .map(|(idx, _)| TransRef { comp: t.comp, idx })
        .collect()
}
