//! Well-formedness conditions for net systems.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::model::*;

/// Which well-formedness rule a diagnostic reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    /// Color types non-empty with distinct values; unique names.
    TypeDecl,
    /// Horizontal arity >= 2, unique label names.
    LabelDecl,
    /// Unique component, place and transition names.
    UniqueName,
    /// Shared places belong to the system net and do not collide with
    /// element-net place names (cond. 1).
    SharedPlace,
    /// Net-typed shared places hold only basic-only element nets; no place
    /// hosts system-net tokens (cond. 3).
    PlaceType,
    /// Initial markings are type-correct and contain only net constants of
    /// basic-only element nets (cond. 4).
    InitialMarking,
    /// System-net transitions carry only lower vertical labels (cond. 6).
    SystemLabel,
    /// Arcs of basic-only nets stay local; horizontal and upper transitions
    /// have no shared input or inhibitor place (cond. 7).
    ArcPlaces,
    /// (a) no net constants in input arc expressions.
    NetConstInInput,
    /// (b) single occurrence per input arc; net variables once per output arc.
    RepeatedVariable,
    /// (c) input arcs of a transition share no variables.
    SharedInputVariable,
    /// (d) output variables are bound by inputs; a net variable feeds at
    /// most one output arc.
    UnboundOutputVariable,
    /// (e) no anonymous net-typed variable in output arcs.
    AnonymousNetOutput,
    /// Term types agree with the place they annotate.
    TypeAgreement,
    /// A lower-labeled transition must bind at least one net token.
    LowerWithoutNetInput,
}

impl Rule {
    pub fn condition(self) -> &'static str {
        match self {
            Rule::TypeDecl | Rule::LabelDecl | Rule::UniqueName => "structure",
            Rule::SharedPlace => "1",
            Rule::PlaceType => "3",
            Rule::InitialMarking => "4",
            Rule::SystemLabel => "6",
            Rule::ArcPlaces => "7",
            Rule::NetConstInInput => "8(a)",
            Rule::RepeatedVariable => "8(b)",
            Rule::SharedInputVariable => "8(c)",
            Rule::UnboundOutputVariable => "8(d)",
            Rule::AnonymousNetOutput => "8(e)",
            Rule::TypeAgreement => "typing",
            Rule::LowerWithoutNetInput => "labeling",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub rule: Rule,
    pub component: String,
    pub transition: Option<String>,
    pub place: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule.condition(), self.component)?;
        if let Some(t) = &self.transition {
            write!(f, ".{t}")?;
        }
        if let Some(p) = &self.place {
            write!(f, " @{p}")?;
        }
        write!(f, ": {}", self.message)
    }
}

struct Ctx<'a> {
    spec: &'a NpnSpec,
    out: Vec<Diagnostic>,
}

impl Ctx<'_> {
    fn push(&mut self, rule: Rule, comp: CompId, t: Option<&str>, place: Option<PlaceRef>, message: String) {
        self.out.push(Diagnostic {
            rule,
            component: self.spec.components[comp].name.clone(),
            transition: t.map(str::to_string),
            place: place.map(|p| self.spec.place(p).name.clone()),
            message,
        });
    }
}

/// Checks every well-formedness condition; an empty result means the spec
/// is valid. Diagnostics are ordered by location.
pub fn validate(spec: &NpnSpec) -> Vec<Diagnostic> {
    let mut cx = Ctx { spec, out: Vec::new() };
    check_declarations(&mut cx);
    for comp in 0..spec.components.len() {
        check_places(&mut cx, comp);
        for (idx, t) in spec.components[comp].transitions.iter().enumerate() {
            check_transition(&mut cx, TransRef { comp, idx }, t);
        }
    }
    cx.out
}

fn check_declarations(cx: &mut Ctx) {
    let spec = cx.spec;
    let mut names = HashSet::new();
    for t in &spec.color_types {
        let distinct: HashSet<&String> = t.values.iter().collect();
        if t.values.is_empty() || distinct.len() != t.values.len() || !names.insert(&t.name) {
            cx.push(Rule::TypeDecl, 0, None, None, format!("malformed color type `{}`", t.name));
        }
    }
    if spec.color_types.first().is_none_or(|d| d.values.len() != 1) {
        cx.push(Rule::TypeDecl, 0, None, None, "`dots` must have exactly one value".into());
    }
    let mut labels = HashSet::new();
    for l in &spec.labels {
        if !labels.insert(&l.name) {
            cx.push(Rule::LabelDecl, 0, None, None, format!("duplicate label `{}`", l.name));
        }
        if let LabelKind::Horizontal { arity } = l.kind {
            if arity < 2 {
                cx.push(Rule::LabelDecl, 0, None, None, format!("label `{}` has arity {arity} < 2", l.name));
            }
        }
    }
    let mut comps = HashSet::new();
    for (ci, c) in spec.components.iter().enumerate() {
        if !comps.insert(&c.name) {
            cx.push(Rule::UniqueName, ci, None, None, "duplicate component name".into());
        }
    }
}

fn check_places(cx: &mut Ctx, comp: CompId) {
    let spec = cx.spec;
    let shared: HashSet<&str> = spec
        .shared_places()
        .map(|p| spec.place(p).name.as_str())
        .collect();
    let mut seen = HashSet::new();
    for (idx, p) in spec.components[comp].places.iter().enumerate() {
        let pr = Some(PlaceRef { comp, idx });
        if !seen.insert(&p.name) {
            cx.push(Rule::UniqueName, comp, None, pr, "duplicate place name".into());
        }
        if comp != 0 && p.shared {
            cx.push(Rule::SharedPlace, comp, None, pr, "only system-net places can be shared".into());
        }
        if comp != 0 && shared.contains(p.name.as_str()) {
            cx.push(Rule::SharedPlace, comp, None, pr, "element-net place collides with a shared place".into());
        }
        match &p.ty {
            PlaceType::Basic(t) if *t >= spec.color_types.len() => {
                cx.push(Rule::PlaceType, comp, None, pr, "unknown color type".into());
            }
            PlaceType::Net(set) => {
                if set.is_empty() || set.iter().any(|c| *c == 0 || *c >= spec.components.len()) {
                    cx.push(Rule::PlaceType, comp, None, pr, "net type must list element nets".into());
                } else if p.shared && !set.iter().all(|c| spec.is_basic_only(*c)) {
                    cx.push(
                        Rule::PlaceType,
                        comp,
                        None,
                        pr,
                        "shared net places may only hold element nets whose places are all basic".into(),
                    );
                }
            }
            _ => {}
        }
        for k in &p.init {
            let ok = match (*k, &p.ty) {
                (Constant::Color { ty, value }, PlaceType::Basic(t)) => {
                    ty == *t && (value as usize) < spec.color_types[ty].values.len()
                }
                (Constant::Net { component }, PlaceType::Net(set)) => {
                    set.contains(&component) && spec.is_basic_only(component)
                }
                _ => false,
            };
            if !ok {
                cx.push(
                    Rule::InitialMarking,
                    comp,
                    None,
                    pr,
                    format!("initial token `{}` does not fit the place", spec.constant_name(*k)),
                );
            }
        }
    }
}

fn check_transition(cx: &mut Ctx, tr: TransRef, t: &TransitionDecl) {
    let spec = cx.spec;
    let comp = tr.comp;
    let tn = Some(t.name.as_str());
    let is_shared = |p: PlaceRef| p.comp == 0 && comp != 0;

    if comp == 0 && matches!(t.label, Some(TransLabel::Horizontal(_) | TransLabel::Upper(_))) {
        cx.push(
            Rule::SystemLabel,
            comp,
            tn,
            None,
            format!("system-net transitions cannot carry label `{}`", spec.label_name(t.label.unwrap())),
        );
    }
    let all_places = t
        .inputs
        .iter()
        .map(|a| a.place)
        .chain(t.outputs.iter().map(|a| a.place))
        .chain(t.inhibitors.iter().copied());
    for p in all_places {
        let legal = p.comp == comp || (p.comp == 0 && spec.place(p).shared && !spec.is_basic_only(comp));
        if !legal {
            cx.push(Rule::ArcPlaces, comp, tn, Some(p), "arc to a place outside the component".into());
        }
    }
    if matches!(t.label, Some(TransLabel::Horizontal(_) | TransLabel::Upper(_))) {
        for p in t.inputs.iter().map(|a| a.place).chain(t.inhibitors.iter().copied()) {
            if is_shared(p) {
                cx.push(
                    Rule::ArcPlaces,
                    comp,
                    tn,
                    Some(p),
                    "synchronizing transitions cannot read shared places".into(),
                );
            }
        }
    }

    // typing
    for a in t.inputs.iter().chain(&t.outputs) {
        let pty = &spec.place(a.place).ty;
        for term in &a.terms {
            let ok = match spec.term_type(comp, term) {
                None => false,
                Some(PlaceType::Basic(x)) => *pty == PlaceType::Basic(x),
                Some(PlaceType::Net(set)) => match pty {
                    PlaceType::Net(pset) => set.is_subset(pset),
                    PlaceType::Basic(_) => false,
                },
            };
            if !ok {
                let what = match term {
                    ArcTerm::Var(v) => v.clone(),
                    ArcTerm::Const(k) => spec.constant_name(*k).to_string(),
                };
                cx.push(
                    Rule::TypeAgreement,
                    comp,
                    tn,
                    Some(a.place),
                    format!("term `{what}` does not match place type {}", spec.type_name(pty)),
                );
            }
        }
    }

    // 8(a)
    for a in &t.inputs {
        if a.constants().any(|k| matches!(k, Constant::Net { .. })) {
            cx.push(Rule::NetConstInInput, comp, tn, Some(a.place), "net constant in input arc".into());
        }
    }
    // 8(b)
    for a in &t.inputs {
        let mut seen = HashSet::new();
        for v in a.vars() {
            if !seen.insert(v) {
                cx.push(
                    Rule::RepeatedVariable,
                    comp,
                    tn,
                    Some(a.place),
                    format!("variable `{v}` occurs more than once in an input arc"),
                );
            }
        }
    }
    for a in &t.outputs {
        let mut seen = HashSet::new();
        for v in a.vars().filter(|v| spec.is_net_var(comp, v)) {
            if !seen.insert(v) {
                cx.push(
                    Rule::RepeatedVariable,
                    comp,
                    tn,
                    Some(a.place),
                    format!("net variable `{v}` occurs more than once in an output arc"),
                );
            }
        }
    }
    // 8(c)
    let mut owner: BTreeMap<&str, PlaceRef> = BTreeMap::new();
    for a in &t.inputs {
        for v in a.vars().collect::<BTreeSet<_>>() {
            if let Some(prev) = owner.insert(v, a.place) {
                if prev != a.place {
                    cx.push(
                        Rule::SharedInputVariable,
                        comp,
                        tn,
                        Some(a.place),
                        format!("variable `{v}` also occurs on input arc from `{}`", spec.place(prev).name),
                    );
                }
            }
        }
    }
    // 8(d), 8(e)
    let mut net_outputs: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &t.outputs {
        for v in a.vars().collect::<BTreeSet<_>>() {
            let var = spec.variable(comp, v);
            let anonymous = var.is_some_and(|v| v.anonymous);
            if anonymous {
                if var.is_some_and(|v| v.ty.is_net()) {
                    cx.push(
                        Rule::AnonymousNetOutput,
                        comp,
                        tn,
                        Some(a.place),
                        "anonymous net-typed term in output arc".into(),
                    );
                }
                continue;
            }
            if !owner.contains_key(v) {
                cx.push(
                    Rule::UnboundOutputVariable,
                    comp,
                    tn,
                    Some(a.place),
                    format!("output variable `{v}` is not bound by any input arc"),
                );
            }
            if spec.is_net_var(comp, v) {
                *net_outputs.entry(v).or_default() += 1;
            }
        }
    }
    for (v, n) in net_outputs {
        if n > 1 {
            cx.push(
                Rule::UnboundOutputVariable,
                comp,
                tn,
                None,
                format!("net variable `{v}` occurs on {n} output arcs"),
            );
        }
    }
    if matches!(t.label, Some(TransLabel::Lower(_)))
        && !t.inputs.iter().any(|a| a.vars().any(|v| spec.is_net_var(comp, v)))
    {
        cx.push(
            Rule::LowerWithoutNetInput,
            comp,
            tn,
            None,
            "lower-labeled transition binds no net token".into(),
        );
    }
}
