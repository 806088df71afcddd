//! Text emission for the three variants.

use std::collections::{BTreeMap, BTreeSet};

use super::*;

/// Field layout of net-place messages.
///
/// `priorities`: `{pid, label, [tid], type, [rm]}`; the global-channel
/// variants: `{pid, label, tid}` (responses travel over `gbChan`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub variant: Variant,
    pub tid: bool,
    pub rm: bool,
}

impl Layout {
    fn gb(&self) -> bool {
        self.variant != Variant::Priorities
    }

    pub fn byte_fields(&self) -> usize {
        2 + self.tid as usize
    }

    pub fn field_count(&self) -> usize {
        if self.gb() {
            self.byte_fields()
        } else {
            self.byte_fields() + 1 + self.rm as usize
        }
    }

    pub fn type_field(&self) -> Option<usize> {
        (!self.gb()).then(|| self.byte_fields())
    }

    pub fn msg(&self, pid: &str, label: &str, tid: &str, ty: &str, rm: &str) -> String {
        let mut f = vec![pid, label];
        if self.tid {
            f.push(tid);
        }
        if !self.gb() {
            f.push(ty);
            if self.rm {
                f.push(rm);
            }
        }
        f.join(",")
    }

    /// A type-0 (request or at-place) message.
    pub fn pattern(&self, pid: &str, label: &str, tid: &str) -> String {
        self.msg(pid, label, tid, "0", "0")
    }

    pub fn key_params(&self) -> Vec<String> {
        let n = self.byte_fields();
        (0..n).map(|k| format!("f{k}")).collect()
    }

    pub fn msg_pattern(&self, keys: &[String]) -> String {
        let tid = if self.tid { keys[2].as_str() } else { "_" };
        self.pattern(&keys[0], &keys[1], tid)
    }

    pub fn any_pattern(&self) -> String {
        vec!["_"; self.field_count()].join(",")
    }

    /// Response telling net token `nt` at channel `ch` it was removed
    /// without synchronization (body lines of `consNetsAtPlace`).
    pub fn removal_response(&self, nt: &str, ch: &str) -> String {
        let ind = "       ";
        match self.variant {
            Variant::Priorities => format!(
                "{ind}{ch} ! {};\n{ind}set_priority({nt}, 3)\n",
                self.msg(nt, "0", "0", "1", "1")
            ),
            Variant::NoPriorities => format!("{ind}gbChan !! 3,{nt},255,{ch},1\n"),
            Variant::Improved => format!("{ind}gbChan !! 3,{nt},255,{ch},1;\n{ind}set_priority({nt}, 3)\n"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    /// Inside `d_step`: choices are resolved deterministically.
    DStep,
    Atomic,
}

type Subst = BTreeMap<String, u16>;

const RESERVED: &[&str] = &[
    "nt", "lt", "it", "rm", "cha", "chb", "v0", "v1", "v2", "gbChan", "ppChan", "recMsg", "recTok", "consNetTok",
    "consNetsAtPlace", "transpNetTok", "rmConf", "numMsg", "numTok", "BasicPlace", "NetPlace", "MaxTok", "MaxMsg",
    "QNP", "QBP", "init", "active", "proctype", "byte", "bit", "bool", "short", "int", "unsigned", "chan", "mtype",
    "do", "od", "if", "fi", "atomic", "d_step", "unless", "else", "break", "goto", "skip", "run", "len", "empty",
    "full", "nempty", "nfull", "true", "false", "printf", "printm", "assert", "timeout", "np_", "_pid", "_", "eval",
    "never", "ltl", "typedef", "hidden", "show", "local", "xr", "xs", "of", "provided", "priority", "set_priority",
    "get_priority", "enabled", "pc_value", "c_code", "c_expr", "c_decl", "c_state", "c_track", "select", "for",
    "in", "d", "now", "inline", "prop", "end", "accept", "progress", "_nr_pr", "_last", "always", "eventually",
    "until", "weakuntil", "stronguntil", "implies", "equivalent", "release",
];

pub(crate) struct Gen<'a> {
    spec: &'a NpnSpec,
    variant: Variant,
    layout: Layout,
    tid: BTreeMap<TransRef, u8>,
    applied: OptFlags,
    init_decl: Vec<bool>,
    elided: BTreeSet<TransRef>,
    sizes: ChannelSizes,
    census: Option<&'a Census>,
    narrow: bool,
    sn_global: bool,
    counters: Option<(String, usize)>,
    bounds: Vec<(PlaceRef, u32)>,
    transport: bool,
    consume: bool,
    accept: bool,
    ltl: Vec<String>,
    deadlock: Vec<String>,
}

fn and(a: &str, b: &str) -> String {
    match (a, b) {
        ("true", _) => b.to_string(),
        (_, "true") => a.to_string(),
        _ => format!("{a} && {b}"),
    }
}

impl<'a> Gen<'a> {
    pub fn new(spec: &'a NpnSpec, opts: &'a CodegenOptions) -> Result<Self, CodegenError> {
        let variant = opts.variant;
        let mut tid = BTreeMap::new();
        for (n, (tr, _)) in spec.transitions().enumerate() {
            tid.insert(tr, (n + 1).min(255) as u8);
        }
        if tid.len() > 254 {
            return Err(CodegenError::ByteRange {
                what: "transitions",
                count: tid.len(),
            });
        }
        if spec.labels.len() > 254 {
            return Err(CodegenError::ByteRange {
                what: "labels",
                count: spec.labels.len(),
            });
        }
        let transport = has_transport(spec);
        let consume = has_consume(spec);

        // optimizations: priorities variant only, and only where they hold
        let req = if variant == Variant::Priorities {
            opts.optimizations
        } else {
            OptFlags::default()
        };
        let elements = 1..spec.components.len();
        let init_decl: Vec<bool> = (0..spec.components.len())
            .map(|c| c > 0 && req.init_at_decl && init_fits_declarations(spec, c))
            .collect();
        let label_as_id = req.label_as_id
            && elements.clone().all(|c| {
                let comp = &spec.components[c];
                let mut seen = BTreeSet::new();
                comp.transitions.iter().all(|t| {
                    if is_sync(t) {
                        seen.insert(t.label.unwrap().index())
                    } else {
                        !creates_net_tokens(spec, t)
                    }
                })
            });
        let mut elided = BTreeSet::new();
        if req.elide_label_test && !label_as_id {
            for c in elements.clone() {
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (i, t) in spec.components[c].transitions.iter().enumerate() {
                    if is_sync(t) {
                        groups.entry(t.label.unwrap().index()).or_default().push(i);
                    }
                }
                for g in groups.values() {
                    let ok = g.iter().enumerate().all(|(k, &i)| {
                        g[k + 1..].iter().all(|&j| mutually_exclusive(spec, c, i, j))
                    });
                    if ok {
                        elided.extend(g.iter().map(|&idx| TransRef { comp: c, idx }));
                    }
                }
            }
        }
        let drop_transport = req.drop_transport_field && !transport;
        let drop_consume = req.drop_consume_field && !consume;
        let applied = OptFlags {
            init_at_decl: init_decl.iter().any(|b| *b),
            elide_label_test: !elided.is_empty(),
            label_as_id,
            drop_transport_field: drop_transport,
            drop_consume_field: drop_consume,
        };
        let layout = Layout {
            variant,
            tid: !label_as_id,
            rm: !(drop_transport || drop_consume),
        };

        let sizes = decide_channel_sizes(spec, opts.census.as_ref());
        for (name, given, need) in [("maxTok", opts.max_tok, sizes.max_tok), ("maxMsg", opts.max_msg, sizes.max_msg)] {
            if let Some(g) = given {
                if g < need {
                    return Err(CodegenError::Capacity { name, given: g, need });
                }
            }
        }
        let mut sizes = sizes;
        sizes.max_tok = opts.max_tok.unwrap_or(sizes.max_tok);
        sizes.max_msg = opts.max_msg.unwrap_or(sizes.max_msg);

        let mut g = Gen {
            spec,
            variant,
            layout,
            tid,
            applied,
            init_decl,
            elided,
            sizes,
            census: opts.census.as_ref(),
            narrow: opts.narrow_types,
            sn_global: false,
            counters: None,
            bounds: Vec::new(),
            transport,
            consume,
            accept: false,
            ltl: Vec::new(),
            deadlock: Vec::new(),
        };
        g.properties(&opts.properties)?;
        g.check_names()?;
        Ok(g)
    }

    fn properties(&mut self, props: &[Property]) -> Result<(), CodegenError> {
        let spec = self.spec;
        let sn_place = |name: &str| {
            spec.place_by_name(0, name)
                .ok_or_else(|| CodegenError::Property(format!("`{name}` is not a system-net place")))
        };
        for p in props {
            match p {
                Property::ValidEndStates => {}
                Property::AcceptanceLabel => self.accept = true,
                Property::BoundAssert { place, bound } => {
                    let r = sn_place(place)?;
                    if spec.place(r).ty.is_net() {
                        return Err(CodegenError::Property(format!("bound on net place `{place}` is not supported")));
                    }
                    self.bounds.push((r, *bound));
                    self.sn_global = true;
                }
                Property::Ltl { text } => {
                    let sn: BTreeSet<&str> = spec.system().places.iter().map(|p| p.name.as_str()).collect();
                    for id in identifiers(text) {
                        let elsewhere = spec.components[1..]
                            .iter()
                            .any(|c| c.places.iter().any(|p| p.name == id));
                        if elsewhere && !sn.contains(id) {
                            return Err(CodegenError::Property(format!(
                                "ltl refers to `{id}`, which is not a global (system-net) place"
                            )));
                        }
                    }
                    self.ltl.push(text.clone());
                    self.sn_global = true;
                }
                Property::DeadlockAssert { text } => {
                    self.deadlock.push(text.clone());
                    self.sn_global = true;
                }
                Property::Counters { snapshot } => {
                    let snap = match snapshot {
                        Some(s) => s.clone(),
                        None => crate::predicate::default_snapshot(spec)
                            .map(|r| spec.place(r).name.clone())
                            .ok_or_else(|| CodegenError::Property("no uncolored shared place for `a`".into()))?,
                    };
                    let r = sn_place(&snap)?;
                    self.counters = Some((snap, spec.place(r).init.len()));
                    self.sn_global = true;
                }
            }
        }
        Ok(())
    }

    fn is_global(&self, p: PlaceRef) -> bool {
        p.comp == 0 && (self.spec.place(p).shared || self.sn_global)
    }

    fn check_names(&self) -> Result<(), CodegenError> {
        let spec = self.spec;
        let mut globals: BTreeMap<String, String> = BTreeMap::new();
        if self.counters.is_some() {
            globals.insert("a".into(), "the counters".into());
            globals.insert("f".into(), "the counters".into());
        }
        for (idx, p) in spec.system().places.iter().enumerate() {
            if self.is_global(PlaceRef { comp: 0, idx }) {
                if let Some(prev) = globals.insert(p.name.clone(), spec.system().name.clone()) {
                    return Err(CodegenError::NameClash {
                        name: p.name.clone(),
                        a: prev,
                        b: spec.system().name.clone(),
                    });
                }
            }
        }
        for (comp, c) in spec.components.iter().enumerate() {
            let mut local: BTreeSet<&str> = BTreeSet::new();
            let names = c
                .places
                .iter()
                .enumerate()
                .filter(|(idx, _)| !self.is_global(PlaceRef { comp, idx: *idx }))
                .map(|(_, p)| p.name.as_str())
                .chain(c.variables.values().filter(|v| !v.anonymous).map(|v| v.name.as_str()));
            for n in names {
                if RESERVED.contains(&n) {
                    return Err(CodegenError::Reserved(n.to_string()));
                }
                if let Some(g) = globals.get(n) {
                    return Err(CodegenError::NameClash {
                        name: n.to_string(),
                        a: g.clone(),
                        b: c.name.clone(),
                    });
                }
                if !local.insert(n) {
                    return Err(CodegenError::NameClash {
                        name: n.to_string(),
                        a: c.name.clone(),
                        b: c.name.clone(),
                    });
                }
            }
        }
        for n in globals.keys() {
            if RESERVED.contains(&n.as_str()) {
                return Err(CodegenError::Reserved(n.clone()));
            }
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // names and numbers

    fn proc_prefix(&self, comp: CompId) -> String {
        if comp == 0 {
            "Pinit->".into()
        } else {
            format!("PEN_{}->", self.spec.components[comp].name)
        }
    }

    fn cref(&self, p: PlaceRef) -> String {
        let pre = if self.is_global(p) { "now.".to_string() } else { self.proc_prefix(p.comp) };
        format!("{pre}{}", self.spec.place(p).name)
    }

    fn pname(&self, p: PlaceRef) -> &str {
        &self.spec.place(p).name
    }

    fn tid(&self, t: TransRef) -> u8 {
        self.tid[&t]
    }

    /// `-Lvl(t)`: the complement label matched by a lower transition, 255 otherwise.
    fn neg_lvl(&self, t: TransRef) -> u8 {
        match self.spec.transition(t).label {
            Some(TransLabel::Lower(l)) => l as u8 + 1,
            _ => 255,
        }
    }

    fn req_label(&self, t: TransRef) -> u8 {
        self.spec.transition(t).label.map_or(0, |l| l.index() as u8 + 1)
    }

    fn color(&self, p: PlaceRef, term: &ArcTerm, subst: &Subst) -> Option<u16> {
        match term {
            ArcTerm::Const(Constant::Color { value, .. }) => Some(*value),
            ArcTerm::Var(v) => subst.get(v).copied(),
            ArcTerm::Const(Constant::Net { .. }) => {
                let _ = p;
                None
            }
        }
    }

    fn var_type(&self, comp: CompId, v: &str) -> Option<usize> {
        match self.spec.variable(comp, v).map(|v| &v.ty) {
            Some(PlaceType::Basic(ty)) => Some(*ty),
            _ => None,
        }
    }

    fn is_anon(&self, comp: CompId, v: &str) -> bool {
        self.spec.variable(comp, v).is_some_and(|v| v.anonymous)
    }

    fn place_int_type(&self, p: PlaceRef) -> &'static str {
        match self.census.and_then(|c| c.max_tokens.get(&p)) {
            Some(&n) if self.narrow && n <= 1 => "bit",
            Some(&n) if n > 255 => "short",
            _ => "byte",
        }
    }

    // ------------------------------------------------------------------
    // per-transition pieces

    /// Color assignments enumerated for a `d_step` firing: input variables of
    /// basic places and anonymous outputs, so that no choice is left to the
    /// deterministic step.
    fn unfoldings(&self, t: TransRef) -> Vec<Subst> {
        let td = self.spec.transition(t);
        let mut vars: BTreeMap<String, usize> = BTreeMap::new();
        for a in td.inputs.iter().chain(td.outputs.iter()) {
            let pt = &self.spec.place(a.place).ty;
            if matches!(pt, PlaceType::Basic(ty) if *ty != DOTS) {
                for v in a.vars() {
                    let is_input = td.inputs.iter().any(|i| i.vars().any(|x| x == v));
                    if is_input || self.is_anon(t.comp, v) {
                        if let Some(ty) = self.var_type(t.comp, v) {
                            vars.insert(v.to_string(), ty);
                        }
                    }
                }
            }
        }
        let total: usize = vars.values().map(|&ty| self.spec.color_types[ty].values.len()).product();
        if vars.is_empty() || total > 256 {
            return vec![Subst::new()];
        }
        let mut out = vec![Subst::new()];
        for (v, ty) in &vars {
            let n = self.spec.color_types[*ty].values.len() as u16;
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..n).map(move |c| {
                        let mut s = s.clone();
                        s.insert(v.clone(), c);
                        s
                    })
                })
                .collect();
        }
        out
    }

    /// Conjunction: uncolored tests, colored length and membership tests,
    /// net-place request tests, inhibitor tests.
    pub fn enable_test(&self, t: TransRef, subst: &Subst) -> String {
        let td = self.spec.transition(t);
        let mut unc = Vec::new();
        let mut col = Vec::new();
        let mut net = Vec::new();
        for a in &td.inputs {
            let p = a.place;
            let name = self.pname(p);
            let n = a.terms.len();
            match &self.spec.place(p).ty {
                PlaceType::Basic(DOTS) => unc.push(if n == 1 { format!("{name} > 0") } else { format!("{name} >= {n}") }),
                PlaceType::Basic(_) => {
                    col.push(format!("len({name}.d) >= {n}"));
                    let mut mult: Vec<(u16, usize)> = Vec::new();
                    for term in &a.terms {
                        if let Some(c) = self.color(p, term, subst) {
                            match mult.iter_mut().find(|(x, _)| *x == c) {
                                Some(e) => e.1 += 1,
                                None => mult.push((c, 1)),
                            }
                        }
                    }
                    for (c, k) in mult {
                        col.push(if k == 1 {
                            format!("{name}.d ?? [{c}]")
                        } else {
                            format!("c_expr{{ numTok(qptr({}.d - 1), {c}) >= {k} }}", self.cref(p))
                        });
                    }
                }
                PlaceType::Net(_) => {
                    let lbl = self.neg_lvl(t).to_string();
                    net.push(if n == 1 {
                        format!("{name}.d ?? [{}]", self.layout.pattern("_", &lbl, "_"))
                    } else {
                        format!("c_expr{{ numMsg(qptr({}.d - 1), {lbl}) >= {n} }}", self.cref(p))
                    });
                }
            }
        }
        let inh = td.inhibitors.iter().map(|&p| {
            let name = self.pname(p);
            match &self.spec.place(p).ty {
                PlaceType::Basic(DOTS) => format!("{name} == 0"),
                PlaceType::Basic(_) => format!("len({name}.d) == 0"),
                PlaceType::Net(_) => format!("!{name}.d ?? [{}]", self.layout.pattern("_", "255", "_")),
            }
        });
        let all: Vec<String> = unc.into_iter().chain(col).chain(net).chain(inh).collect();
        if all.is_empty() {
            "true".into()
        } else {
            all.join(" && ")
        }
    }

    fn prio_field(&self, p: u8) -> u8 {
        match self.variant {
            Variant::Improved => 6 - p,
            _ => p,
        }
    }

    /// Tells net token `nt` about its fate via the global channel
    /// (global-channel variants).
    fn gb_response(&self, prio: u8, label: u8, ch: &str, rm: u8, out: &mut Vec<String>) {
        out.push(format!("gbChan !! {},nt,{label},{ch},{rm}", self.prio_field(prio)));
        if self.variant == Variant::Improved {
            out.push(format!("set_priority(nt, {prio})"));
        }
    }

    fn consume(&self, t: TransRef, ctx: Ctx, subst: &Subst) -> Vec<String> {
        let td = self.spec.transition(t);
        let l = &self.layout;
        let neg = self.neg_lvl(t);
        let lvl0 = neg == 255;
        let mut out = Vec::new();
        for a in &td.inputs {
            let p = a.place;
            let name = self.pname(p);
            match &self.spec.place(p).ty {
                PlaceType::Basic(DOTS) => {
                    let n = a.terms.len();
                    out.push(if n == 1 { format!("{name}--") } else { format!("{name} = {name} - {n}") });
                }
                PlaceType::Basic(_) => {
                    let consts = a.terms.iter().filter(|x| matches!(x, ArcTerm::Const(_)));
                    let vars = a.terms.iter().filter(|x| matches!(x, ArcTerm::Var(_)));
                    for term in consts.chain(vars) {
                        if let Some(c) = self.color(p, term, subst) {
                            out.push(format!("{name}.d ?? {c}"));
                            continue;
                        }
                        let ArcTerm::Var(v) = term else { continue };
                        let target = if self.is_anon(t.comp, v) { "v0" } else { v.as_str() };
                        out.push(match ctx {
                            Ctx::Atomic => format!("recTok({name}.d, {target})"),
                            Ctx::DStep => format!("{name}.d ?? {target}"),
                        });
                    }
                }
                PlaceType::Net(_) => {
                    for v in a.vars() {
                        let usage = net_use(td, v);
                        if usage == NetUse::Transport(p) && lvl0 {
                            // stays where it is; nothing to tell the token
                            continue;
                        }
                        out.push(match (ctx, l.tid) {
                            (Ctx::Atomic, true) => format!("recMsg({name}.d, nt, {neg}, it)"),
                            (Ctx::Atomic, false) => format!("recMsg({name}.d, nt, {neg})"),
                            (Ctx::DStep, _) => format!("{name}.d ?? {}", l.pattern("nt", &neg.to_string(), "it")),
                        });
                        let ch = format!("{name}.d");
                        match usage {
                            NetUse::Consume => {
                                out.push(format!("consNetTok({ch}, nt)"));
                                let prio = if lvl0 { 3 } else { 5 };
                                if l.gb() {
                                    self.gb_response(prio, neg, &ch, 1, &mut out);
                                } else {
                                    out.push(format!("{ch} ! {}", l.msg("nt", &neg.to_string(), "it", "1", "1")));
                                    out.push(format!("set_priority(nt, {prio})"));
                                }
                            }
                            NetUse::Transport(o) if o == p => {
                                if l.gb() {
                                    self.gb_response(5, neg, &ch, 0, &mut out);
                                } else {
                                    out.push(format!("{ch} ! {}", l.msg("nt", &neg.to_string(), "it", "1", "0")));
                                    out.push("set_priority(nt, 5)".into());
                                }
                            }
                            NetUse::Transport(o) => {
                                let och = format!("{}.d", self.pname(o));
                                out.push(format!("transpNetTok({ch}, {och}, nt)"));
                                if l.gb() {
                                    if lvl0 {
                                        out.push(format!("{och} ! {}", l.pattern("nt", "255", "0")));
                                        self.gb_response(3, neg, &och, 0, &mut out);
                                    } else {
                                        self.gb_response(5, neg, &och, 0, &mut out);
                                    }
                                } else {
                                    out.push(format!("gbChan ! nt,{och},{neg},it,0"));
                                    if lvl0 {
                                        out.push("set_priority(nt, 3)".into());
                                        out.push(format!("{och} ! {}", l.pattern("nt", "255", "0")));
                                    } else {
                                        out.push("set_priority(nt, 5)".into());
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn create(&self, comp: CompId, p: PlaceRef, out: &mut Vec<String>) {
        let l = &self.layout;
        let en = &self.spec.components[comp].name;
        let ch = format!("{}.d", self.pname(p));
        match self.variant {
            Variant::Priorities => {
                let prio = if self.init_decl[comp] { 1 } else { 2 };
                out.push(format!("nt = run EN_{en}({ch}) priority {prio}"));
                out.push(format!("{ch} ! {}", l.pattern("nt", "255", "0")));
            }
            Variant::NoPriorities => {
                out.push(format!("nt = run EN_{en}()"));
                out.push(format!("{ch} ! {}", l.pattern("nt", "255", "0")));
                out.push(format!("gbChan !! 2,nt,255,{ch},0"));
            }
            Variant::Improved => {
                out.push(format!("nt = run EN_{en}() priority 2"));
                out.push(format!("{ch} ! {}", l.pattern("nt", "255", "0")));
                out.push(format!("gbChan !! {},nt,255,{ch},0", self.prio_field(2)));
            }
        }
        if self.counters.is_some() {
            out.push("f++".into());
        }
    }

    fn produce(&self, t: TransRef, ctx: Ctx, subst: &Subst) -> Vec<String> {
        let td = self.spec.transition(t);
        let mut out = Vec::new();
        for a in &td.outputs {
            let p = a.place;
            let name = self.pname(p);
            match &self.spec.place(p).ty {
                PlaceType::Basic(DOTS) => {
                    let n = a.terms.len();
                    out.push(if n == 1 { format!("{name}++") } else { format!("{name} = {name} + {n}") });
                }
                PlaceType::Basic(ty) => {
                    for term in &a.terms {
                        if let Some(c) = self.color(p, term, subst) {
                            out.push(format!("{name}.d ! {c}"));
                            continue;
                        }
                        let ArcTerm::Var(v) = term else { continue };
                        if self.is_anon(t.comp, v) {
                            let n = self.spec.color_types[*ty].values.len();
                            let opts: Vec<String> = (0..n).map(|c| format!(":: {name}.d ! {c}")).collect();
                            let _ = ctx;
                            out.push(format!("if {} fi", opts.join(" ")));
                        } else {
                            out.push(format!("{name}.d ! {v}"));
                        }
                    }
                }
                PlaceType::Net(_) => {
                    for c in a.constants() {
                        if let Constant::Net { component } = c {
                            self.create(component, p, &mut out);
                        }
                    }
                }
            }
        }
        for (p, bound) in &self.bounds {
            let touches = td.inputs.iter().chain(td.outputs.iter()).any(|a| a.place == *p)
                || td.inhibitors.contains(p);
            if touches {
                let name = self.pname(*p);
                out.push(if self.spec.place(*p).ty.is_uncolored() {
                    format!("assert({name} <= {bound})")
                } else {
                    format!("assert(len({name}.d) <= {bound})")
                });
            }
        }
        out
    }

    /// Removal of requests of conflicting synchronized transitions.
    pub fn rm_conf(&self, t: TransRef) -> Vec<String> {
        if t.comp == 0 {
            return Vec::new();
        }
        conflict_set(self.spec, t)
            .into_iter()
            .filter(|o| is_sync(self.spec.transition(*o)))
            .map(|o| {
                if self.layout.tid {
                    format!("rmConf({})", self.tid(o))
                } else {
                    format!("rmConf({})", self.req_label(o))
                }
            })
            .collect()
    }

    fn fire_marker(&self, t: TransRef) -> String {
        format!("printf(\"{}\\n\")", marker(self.spec, t))
    }

    /// Statements local variables must hold for the completion of a split firing.
    fn assignments(&self, t: TransRef, subst: &Subst) -> Vec<String> {
        subst
            .iter()
            .filter(|(v, _)| !self.is_anon(t.comp, v))
            .map(|(v, c)| format!("{v} = {c}"))
            .collect()
    }

    // ------------------------------------------------------------------
    // layout helpers

    fn option(ind: &str, region: &str, guard: &str, body: &[String]) -> String {
        let pad = format!("{ind}     ");
        if body.is_empty() {
            return format!("{ind}:: {region} {{ {guard} -> skip }}\n");
        }
        format!("{ind}:: {region} {{ {guard} ->\n{pad}{} }}\n", body.join(&format!(";\n{pad}")))
    }

    fn branch(ind: &str, guard: &str, body: &[String]) -> String {
        let pad = format!("{ind}     ");
        if body.is_empty() {
            return format!("{ind}:: {guard} -> skip\n");
        }
        format!("{ind}:: {guard} ->\n{pad}{}\n", body.join(&format!(";\n{pad}")))
    }

    fn declarations(&self, comp: CompId, ind: &str) -> String {
        let c = &self.spec.components[comp];
        let mut s = String::new();
        for idx in 0..c.places.len() {
            let r = PlaceRef { comp, idx };
            if self.is_global(r) {
                continue;
            }
            s.push_str(&self.place_decl(r, ind));
        }
        for v in c.variables.values() {
            if !v.anonymous && matches!(v.ty, PlaceType::Basic(ty) if ty != DOTS) {
                s.push_str(&format!("{ind}byte {};\n", v.name));
            }
        }
        s
    }

    fn place_decl(&self, r: PlaceRef, ind: &str) -> String {
        let p = self.spec.place(r);
        match &p.ty {
            PlaceType::Basic(DOTS) => format!("{ind}{} {} = {};\n", self.place_int_type(r), p.name, p.init.len()),
            PlaceType::Basic(_) => format!("{ind}BasicPlace {};\n", p.name),
            PlaceType::Net(_) => format!("{ind}NetPlace {};\n", p.name),
        }
    }

    /// Statements producing the non-uncolored initial tokens of `comp`.
    fn initial_tokens(&self, comp: CompId, only_global: Option<bool>) -> Vec<String> {
        let mut out = Vec::new();
        for (idx, p) in self.spec.components[comp].places.iter().enumerate() {
            let r = PlaceRef { comp, idx };
            if let Some(g) = only_global {
                if self.is_global(r) != g {
                    continue;
                }
            }
            for k in &p.init {
                match *k {
                    Constant::Color { value, .. } if !p.ty.is_uncolored() => out.push(format!("{}.d ! {value}", p.name)),
                    Constant::Net { component } => self.create(component, r, &mut out),
                    _ => {}
                }
            }
        }
        out
    }

    fn local_net_places(&self, comp: CompId) -> Vec<String> {
        self.spec.components[comp]
            .places
            .iter()
            .enumerate()
            .filter(|(idx, p)| p.ty.is_net() && !self.is_global(PlaceRef { comp, idx: *idx }))
            .map(|(_, p)| format!("{}.d", p.name))
            .collect()
    }

    // ------------------------------------------------------------------
    // processes

    fn init_proc(&self) -> String {
        let spec = self.spec;
        let prio = self.variant != Variant::NoPriorities;
        let gb = self.variant != Variant::Priorities;
        let mut s = String::from("init {\n");
        s.push_str(&self.declarations(0, "  "));
        let init = self.initial_tokens(0, None);
        if !init.is_empty() {
            let mut body = Vec::new();
            if prio {
                body.push("set_priority(_pid, 2)".to_string());
            }
            body.extend(init);
            if prio {
                body.push("set_priority(_pid, 1)".to_string());
            }
            s.push_str(&format!("  atomic {{ {} }}\n", body.join(";\n           ")));
        }
        let labels = if self.accept { "end: accept:" } else { "end:" };
        s.push_str(&format!("{labels}\n  do\n"));
        let mut any = false;
        for (idx, td) in spec.system().transitions.iter().enumerate() {
            let t = TransRef { comp: 0, idx };
            let needs_atomic = gb
                || creates_net_tokens(spec, td)
                || td.inputs.iter().any(|a| spec.place(a.place).ty.is_net())
                || td.inputs.iter().chain(td.outputs.iter()).any(|a| {
                    matches!(spec.place(a.place).ty, PlaceType::Basic(ty) if ty != DOTS)
                        && a.vars().next().is_some()
                });
            let ctx = if needs_atomic { Ctx::Atomic } else { Ctx::DStep };
            let region = if needs_atomic { "atomic" } else { "d_step" };
            let none = Subst::new();
            let mut guard = self.enable_test(t, &none);
            if gb {
                guard = and("empty(gbChan)", &guard);
            }
            let mut body = Vec::new();
            if prio {
                body.push("set_priority(_pid, 6)".to_string());
            }
            body.extend(self.consume(t, ctx, &none));
            body.extend(self.produce(t, ctx, &none));
            body.push(self.fire_marker(t));
            if prio {
                body.push("set_priority(_pid, 1)".to_string());
            }
            s.push_str(&Self::option("  ", region, &guard, &body));
            any = true;
        }
        if !any {
            s.push_str("  :: false\n");
        }
        s.push_str("  od\n}\n\n");
        s
    }

    /// Inner-loop options of the priorities variant (Op1–Op4).
    fn inner_options(&self, comp: CompId, ind: &str) -> String {
        let spec = self.spec;
        let l = &self.layout;
        let mut s = String::new();
        for (idx, td) in spec.components[comp].transitions.iter().enumerate() {
            let t = TransRef { comp, idx };
            let tid = self.tid(t);
            if is_sync(td) {
                // Op3: request
                let lab = self.req_label(t).to_string();
                let which = if self.elided.contains(&t) { tid.to_string() } else { "_".into() };
                let guard = and(
                    &self.enable_test(t, &Subst::new()),
                    &format!("!ppChan ?? [{}]", l.pattern("eval(_pid)", &lab, &which)),
                );
                let body = vec![format!("ppChan ! {}", l.pattern("_pid", &lab, &tid.to_string()))];
                s.push_str(&Self::option(ind, "d_step", &guard, &body));
                continue;
            }
            let split = creates_net_tokens(spec, td);
            for subst in self.unfoldings(t) {
                let guard = self.enable_test(t, &subst);
                let mut body = vec!["set_priority(_pid, 6)".to_string()];
                body.extend(self.consume(t, Ctx::DStep, &subst));
                if split {
                    // Op2: the creation happens in the outer dispatch
                    body.extend(self.assignments(t, &subst));
                    body.extend(self.rm_conf(t));
                    body.push(format!("ppChan ! {}", l.msg("_pid", "0", &tid.to_string(), "1", "0")));
                } else {
                    // Op1
                    body.extend(self.produce(t, Ctx::DStep, &subst));
                    body.extend(self.rm_conf(t));
                    body.push(self.fire_marker(t));
                    body.push("set_priority(_pid, 1)".into());
                }
                s.push_str(&Self::option(ind, "d_step", &guard, &body));
            }
        }
        for (lab, ar) in self.horizontal_labels(comp) {
            s.push_str(&self.horizontal_option(comp, lab, ar, ind));
        }
        if s.is_empty() {
            s.push_str(&format!("{ind}:: false\n"));
        }
        s
    }

    fn horizontal_labels(&self, comp: CompId) -> Vec<(u8, u32)> {
        let mut v: BTreeSet<(u8, u32)> = BTreeSet::new();
        for t in &self.spec.components[comp].transitions {
            if let Some(TransLabel::Horizontal(l)) = t.label {
                v.insert((l as u8 + 1, self.spec.arity(l).unwrap_or(2)));
            }
        }
        v.into_iter().collect()
    }

    fn horizontal_option(&self, comp: CompId, lab: u8, ar: u32, ind: &str) -> String {
        let l = &self.layout;
        let lab_s = lab.to_string();
        let mut guard = format!(
            "ppChan ?? [{}] && c_expr{{ numMsg(qptr({}ppChan - 1), {lab}) >= {ar} }}",
            l.pattern("eval(_pid)", &lab_s, "_"),
            self.proc_prefix(comp)
        );
        let mut body = Vec::new();
        match self.variant {
            Variant::Priorities => {
                body.push("set_priority(_pid, 6)".to_string());
                body.push(format!("ppChan ?? {}", l.pattern("eval(_pid)", &lab_s, "it")));
                body.push(format!("ppChan ! {}", l.msg("_pid", &lab_s, "it", "1", "0")));
                for _ in 1..ar {
                    body.push(format!("ppChan ?? {}", l.pattern("nt", &lab_s, "it")));
                    body.push(format!("ppChan ! {}", l.msg("nt", &lab_s, "it", "1", "0")));
                    body.push("set_priority(nt, 4)".into());
                }
            }
            Variant::NoPriorities | Variant::Improved => {
                guard = and("empty(gbChan)", &guard);
                let imp = self.variant == Variant::Improved;
                if imp {
                    body.push("set_priority(_pid, 6)".to_string());
                }
                body.push(format!("ppChan ?? {}", l.pattern("eval(_pid)", &lab_s, "it")));
                body.push(format!("gbChan !! {},_pid,{lab},ppChan,0", if imp { 0 } else { 4 }));
                for _ in 1..ar {
                    body.push(format!("ppChan ?? {}", l.pattern("nt", &lab_s, "it")));
                    body.push(format!("gbChan !! {},nt,{lab},ppChan,0", self.prio_field(4)));
                    if imp {
                        body.push("set_priority(nt, 4)".into());
                    }
                }
            }
        }
        Self::option(ind, "d_step", &guard, &body)
    }

    /// Outer dispatch branches of the priorities variant.
    fn dispatch_branches(&self, comp: CompId, ind: &str) -> String {
        let spec = self.spec;
        let l = &self.layout;
        let mut s = String::new();
        let none = Subst::new();
        for (idx, td) in spec.components[comp].transitions.iter().enumerate() {
            let t = TransRef { comp, idx };
            let tid = self.tid(t);
            if is_sync(td) {
                let guard = if !l.tid {
                    format!("lt == {}", self.req_label(t))
                } else if self.elided.contains(&t) {
                    format!("it == {tid}")
                } else {
                    and(&format!("lt == {}", self.req_label(t)), &self.enable_test(t, &none))
                };
                let mut body = self.consume(t, Ctx::Atomic, &none);
                body.extend(self.produce(t, Ctx::Atomic, &none));
                body.extend(self.rm_conf(t));
                body.push(self.fire_marker(t));
                if !l.rm && matches!(td.label, Some(TransLabel::Upper(_))) {
                    body.push("break".into());
                }
                s.push_str(&Self::branch(ind, &guard, &body));
            } else if creates_net_tokens(spec, td) {
                let mut body = self.produce(t, Ctx::Atomic, &none);
                body.push(self.fire_marker(t));
                s.push_str(&Self::branch(ind, &format!("it == {tid}"), &body));
            }
        }
        let unsynced = if l.tid { "lt == 255 || it == 0" } else { "lt == 255 || lt == 0" };
        if l.rm {
            s.push_str(&Self::branch(ind, unsynced, &[]));
        } else if self.consume {
            let g = if l.tid { "it == 0" } else { unsynced };
            s.push_str(&Self::branch(ind, g, &["break".into()]));
        } else if self.transport {
            s.push_str(&Self::branch(ind, "lt == 255", &[]));
        }
        if s.is_empty() {
            s.push_str(&format!("{ind}:: else -> skip\n"));
        }
        s
    }

    fn element_priorities(&self, comp: CompId) -> String {
        let l = &self.layout;
        let name = &self.spec.components[comp].name;
        let mut s = format!("proctype EN_{name}(chan ppChan) {{\n");
        s.push_str(&self.declarations(comp, "  "));
        if !self.init_decl[comp] {
            let mut body = self.initial_tokens(comp, None);
            body.push("set_priority(_pid, 1)".into());
            s.push_str(&format!("  atomic {{ {} }}\n", body.join(";\n           ")));
        }
        s.push_str("  do\n  :: { end:\n       do\n");
        s.push_str(&self.inner_options(comp, "       "));
        s.push_str("       od }\n");
        let head = if self.transport {
            format!(
                "gbChan ?? [eval(_pid),_,_,_,_] || ppChan ?? [{}] ->\n       \
                 if\n       \
                 :: gbChan ?? [eval(_pid),_,_,_,_] -> gbChan ?? eval(_pid),ppChan,lt,it,rm; rm = 0\n       \
                 :: else -> ppChan ?? {}\n       \
                 fi;\n",
                l.msg("eval(_pid)", "_", "_", "1", "_"),
                l.msg("eval(_pid)", "lt", "it", "1", "rm"),
            )
        } else {
            format!("ppChan ?? {} ->\n", l.msg("eval(_pid)", "lt", "it", "1", "rm"))
        };
        s.push_str(&format!("     unless atomic {{ {head}"));
        s.push_str("       if\n");
        s.push_str(&self.dispatch_branches(comp, "       "));
        s.push_str("       fi;\n");
        if l.rm {
            s.push_str("       if :: rm -> break :: else -> set_priority(_pid, 1) fi }\n");
        } else {
            s.push_str("       set_priority(_pid, 1) }\n");
        }
        s.push_str("  od;\n");
        let nets = self.local_net_places(comp);
        if !nets.is_empty() {
            let sweep: Vec<String> = nets.iter().map(|ch| format!("consNetsAtPlace({ch})")).collect();
            s.push_str(&format!("  d_step {{ {} }};\n", sweep.join("; ")));
        }
        s.push_str("  set_priority(_pid, 1)\n}\n\n");
        s
    }

    fn element_global_channel(&self, comp: CompId) -> String {
        let spec = self.spec;
        let l = &self.layout;
        let imp = self.variant == Variant::Improved;
        let name = &spec.components[comp].name;
        let none = Subst::new();
        let mut s = format!("proctype EN_{name}() {{\n  chan ppChan;\n");
        s.push_str(&self.declarations(comp, "  "));
        let mut init = vec![format!("gbChan ? {},eval(_pid),255,ppChan,0", self.prio_field(2))];
        init.extend(self.initial_tokens(comp, None));
        if imp {
            init.push("set_priority(_pid, 1)".into());
        }
        s.push_str(&format!("  atomic {{ {} }}\n", init.join(";\n           ")));
        s.push_str("end:\n  do\n");
        let ind = "  ";
        for (idx, td) in spec.components[comp].transitions.iter().enumerate() {
            let t = TransRef { comp, idx };
            let tid = self.tid(t);
            if is_sync(td) {
                let lab = self.req_label(t).to_string();
                let guard = and(
                    &and("empty(gbChan)", &self.enable_test(t, &none)),
                    &format!("!ppChan ?? [{}]", l.pattern("eval(_pid)", &lab, "_")),
                );
                let body = vec![format!("ppChan ! {}", l.pattern("_pid", &lab, &tid.to_string()))];
                s.push_str(&Self::option(ind, "d_step", &guard, &body));
            } else {
                let guard = and("empty(gbChan)", &self.enable_test(t, &none));
                let mut body = Vec::new();
                if imp {
                    body.push("set_priority(_pid, 6)".to_string());
                }
                body.extend(self.consume(t, Ctx::Atomic, &none));
                body.extend(self.produce(t, Ctx::Atomic, &none));
                body.extend(self.rm_conf(t));
                body.push(self.fire_marker(t));
                if imp {
                    body.push("set_priority(_pid, 1)".into());
                }
                s.push_str(&Self::option(ind, "atomic", &guard, &body));
            }
        }
        for (lab, ar) in self.horizontal_labels(comp) {
            s.push_str(&self.horizontal_option(comp, lab, ar, ind));
        }
        // responses
        s.push_str("  :: atomic { gbChan ? _,eval(_pid),lt,ppChan,rm ->\n       if\n");
        for (idx, td) in spec.components[comp].transitions.iter().enumerate() {
            let t = TransRef { comp, idx };
            if !is_sync(td) {
                continue;
            }
            let guard = and(&format!("lt == {}", self.req_label(t)), &self.enable_test(t, &none));
            let mut body = self.consume(t, Ctx::Atomic, &none);
            body.extend(self.produce(t, Ctx::Atomic, &none));
            body.extend(self.rm_conf(t));
            body.push(self.fire_marker(t));
            s.push_str(&Self::branch("       ", &guard, &body));
        }
        s.push_str(&Self::branch("       ", "lt == 255", &[]));
        s.push_str("       fi;\n");
        if imp {
            s.push_str("       if :: rm -> break :: else -> skip fi;\n       set_priority(_pid, 1) }\n");
        } else {
            s.push_str("       if :: rm -> break :: else -> skip fi }\n");
        }
        let nets = self.local_net_places(comp);
        if nets.is_empty() && !imp {
            s.push_str("  od\n}\n\n");
            return s;
        }
        s.push_str("  od");
        if !nets.is_empty() {
            let sweep: Vec<String> = nets.iter().map(|ch| format!("consNetsAtPlace({ch})")).collect();
            s.push_str(&format!(";\n  d_step {{ {} }}", sweep.join("; ")));
        }
        if imp {
            s.push_str(";\n  set_priority(_pid, 1)");
        }
        s.push_str("\n}\n\n");
        s
    }

    pub fn element_net(&self, comp: CompId) -> String {
        match self.variant {
            Variant::Priorities => self.element_priorities(comp),
            _ => self.element_global_channel(comp),
        }
    }

    // ------------------------------------------------------------------

    fn header(&self) -> String {
        let spec = self.spec;
        let mut s = format!("/* {} -- PROMELA model, variant {}\n", spec.name, self.variant);
        s.push_str(&format!(" * optimizations: {}\n", self.applied));
        if self.variant != Variant::NoPriorities {
            s.push_str(" * Process priorities are used: compile the verifier with -DNOREDUCE\n");
            s.push_str(" * (priorities are incompatible with partial-order reduction).\n");
        }
        s.push_str(" *\n * transitions:");
        for (tr, t) in spec.transitions() {
            s.push_str(&format!(" {}.{}={}", spec.components[tr.comp].name, t.name, self.tid(tr)));
        }
        s.push('\n');
        if !spec.labels.is_empty() {
            s.push_str(" * labels:");
            for (i, l) in spec.labels.iter().enumerate() {
                s.push_str(&format!(" {}={}", l.name, i + 1));
            }
            s.push('\n');
        }
        for ty in &spec.color_types[1..] {
            let vals: Vec<String> = ty.values.iter().enumerate().map(|(i, v)| format!("{v}={i}")).collect();
            s.push_str(&format!(" * colors {}: {}\n", ty.name, vals.join(" ")));
        }
        s.push_str(" */\n\n");
        s.push_str(&format!("#define MaxTok {}\n#define MaxMsg {}\n\n", self.sizes.max_tok, self.sizes.max_msg));
        s
    }

    fn channel_decls(&self) -> String {
        let l = &self.layout;
        let types: Vec<&str> = (0..l.field_count())
            .map(|k| if k < l.byte_fields() { "byte" } else { "bit" })
            .collect();
        let mut s = String::from("typedef BasicPlace { chan d = [MaxTok] of {byte} }\n");
        s.push_str(&format!("typedef NetPlace {{ chan d = [MaxMsg] of {{{}}} }}\n", types.join(",")));
        s.push_str(match self.variant {
            Variant::Priorities => "chan gbChan = [MaxMsg] of {byte,chan,byte,byte,bit};\n\n",
            _ => "chan gbChan = [MaxMsg] of {byte,byte,byte,chan,bit};\n\n",
        });
        s
    }

    fn globals(&self) -> String {
        let mut s = String::new();
        for (idx, _) in self.spec.system().places.iter().enumerate() {
            let r = PlaceRef { comp: 0, idx };
            if self.is_global(r) {
                s.push_str(&self.place_decl(r, ""));
            }
        }
        if let Some((_, a)) = &self.counters {
            s.push_str(&format!("byte a = {a};\nbyte f = 0;\n"));
        }
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }

    pub fn run(self) -> Result<PromelaModel, CodegenError> {
        let spec = self.spec;
        let mut src = self.header();
        src.push_str(&self.channel_decls());
        src.push_str(&super::aux::aux_text(&self.layout));
        src.push_str(&self.globals());
        for comp in 1..spec.components.len() {
            src.push_str(&self.element_net(comp));
        }
        src.push_str(&self.init_proc());
        if !self.deadlock.is_empty() {
            let checks: Vec<String> = self.deadlock.iter().map(|t| format!("assert({t})")).collect();
            src.push_str(&format!(
                "active proctype Watch() {{\nend:\n  timeout -> {}\n}}\n\n",
                checks.join("; ")
            ));
        }
        for (i, text) in self.ltl.iter().enumerate() {
            let name = if i == 0 { "prop".to_string() } else { format!("prop{i}") };
            src.push_str(&format!("ltl {name} {{ {text} }}\n"));
        }
        let mut step_map = BTreeMap::new();
        let mut transition_ids = BTreeMap::new();
        for (tr, t) in spec.transitions() {
            let cname = spec.components[tr.comp].name.clone();
            step_map.insert(marker(spec, tr), (cname.clone(), t.name.clone()));
            transition_ids.insert(format!("{cname}.{}", t.name), self.tid(tr));
        }
        let label_ids = spec
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.clone(), i as u8 + 1))
            .collect();
        Ok(PromelaModel {
            variant: self.variant,
            source: src,
            transition_ids,
            label_ids,
            step_map,
            sizes: self.sizes,
            applied: self.applied,
        })
    }
}

fn identifiers(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| w.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_'))
}
