//! Test support: a random well-formed net generator and an independent
//! brute-force semantics used as an oracle.
//!
//! The oracle shares nothing with the library's semantics beyond the parsed
//! spec: markings are plain nested vectors without runtime ids, bindings are
//! found by trying every injective selection of token positions, and no
//! deduplication happens before results are collected into sets.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nestpn_core::semantics::{Marking, Step, Token};
use nestpn_core::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod mutations;

// ---------------------------------------------------------------------------
// random nets

struct Gen {
    rng: ChaCha8Rng,
    var: usize,
}

#[derive(Clone)]
struct GPlace {
    name: String,
    /// "dots", "T" or the list of element nets for a net place
    ty: GTy,
    shared: bool,
}

#[derive(Clone, PartialEq)]
enum GTy {
    Dots,
    Color,
    Net(Vec<&'static str>),
}

impl Gen {
    fn fresh(&mut self) -> String {
        self.var += 1;
        format!("v{}", self.var)
    }

    /// One transition over `own` places (plus `shared` ones the component
    /// may touch). `system` restricts labels to lower ones.
    fn transition(&mut self, name: &str, own: &[GPlace], shared: &[GPlace], system: bool) -> String {
        let rng = &mut self.rng;
        let mut pool: Vec<&GPlace> = own.iter().collect();
        pool.extend(shared.iter());
        let n_in = rng.gen_range(0..=2usize).min(pool.len());
        let n_out = rng.gen_range(0..=2usize).min(pool.len());
        let ins: Vec<GPlace> = pool.choose_multiple(rng, n_in).map(|p| (*p).clone()).collect();
        let outs: Vec<GPlace> = pool.choose_multiple(rng, n_out).map(|p| (*p).clone()).collect();

        let mut body = String::new();
        let mut color_vars: Vec<String> = Vec::new();
        let mut net_vars: Vec<(String, &'static str)> = Vec::new();
        let mut shared_in = false;
        for p in &ins {
            shared_in |= p.shared;
            let expr = match &p.ty {
                GTy::Dots => format!("{}", self.rng.gen_range(1..=2)),
                GTy::Color => {
                    let k = self.rng.gen_range(1..=2);
                    let mut terms = Vec::new();
                    for _ in 0..k {
                        match self.rng.gen_range(0..3) {
                            0 => terms.push(["u", "v"][self.rng.gen_range(0..2)].to_string()),
                            1 => terms.push("_".to_string()),
                            _ => {
                                let v = self.fresh();
                                terms.push(format!("{v}:T"));
                                color_vars.push(v);
                            }
                        }
                    }
                    format!("[{}]", terms.join(", "))
                }
                GTy::Net(comps) => {
                    let c = comps[self.rng.gen_range(0..comps.len())];
                    let v = self.fresh();
                    net_vars.push((v.clone(), c));
                    format!("[{v}:{c}]")
                }
            };
            let _ = writeln!(body, "      in {}: {};", p.name, expr);
        }
        let mut transported = BTreeSet::new();
        for p in &outs {
            let expr = match &p.ty {
                GTy::Dots => format!("{}", self.rng.gen_range(1..=2)),
                GTy::Color => {
                    let k = self.rng.gen_range(1..=2);
                    let mut terms = Vec::new();
                    for _ in 0..k {
                        match self.rng.gen_range(0..3) {
                            0 => terms.push(["u", "v"][self.rng.gen_range(0..2)].to_string()),
                            1 if !color_vars.is_empty() => {
                                terms.push(color_vars[self.rng.gen_range(0..color_vars.len())].clone())
                            }
                            _ => terms.push("_".to_string()),
                        }
                    }
                    format!("[{}]", terms.join(", "))
                }
                GTy::Net(comps) => {
                    let movable = net_vars
                        .iter()
                        .find(|(v, c)| comps.contains(c) && !transported.contains(v) && self.rng.gen_bool(0.7));
                    match movable {
                        Some((v, _)) => {
                            transported.insert(v.clone());
                            format!("[{v}]")
                        }
                        None => format!("[new {}]", comps[self.rng.gen_range(0..comps.len())]),
                    }
                }
            };
            let _ = writeln!(body, "      out {}: {};", p.name, expr);
        }
        let mut shared_inh = false;
        if self.rng.gen_bool(0.15) {
            let p = pool[self.rng.gen_range(0..pool.len())];
            shared_inh = p.shared;
            let _ = writeln!(body, "      inhibit {};", p.name);
        }
        let label = if system {
            if !net_vars.is_empty() && self.rng.gen_bool(0.6) {
                " label lam"
            } else {
                ""
            }
        } else {
            let sync_ok = !shared_in && !shared_inh;
            match self.rng.gen_range(0..5) {
                0 | 1 if sync_ok => " label ~lam",
                2 if sync_ok => " label h",
                3 if !net_vars.is_empty() => " label lam",
                _ => "",
            }
        };
        format!("    trans {name}{label} {{\n{body}    }}\n")
    }
}

fn place_decl(p: &GPlace, init: &str) -> String {
    let ty = match &p.ty {
        GTy::Dots => "dots".to_string(),
        GTy::Color => "T".to_string(),
        GTy::Net(c) => format!("net<{}>", c.join(",")),
    };
    let shared = if p.shared { " shared" } else { "" };
    let init = if init.is_empty() { String::new() } else { format!(" init {init}") };
    format!("    place {}: {ty}{shared}{init};\n", p.name)
}

fn pl(name: &str, ty: GTy) -> GPlace {
    GPlace {
        name: name.into(),
        ty,
        shared: false,
    }
}

fn random_text(rng: ChaCha8Rng) -> String {
    let mut g = Gen { rng, var: 0 };
    let with_b = g.rng.gen_bool(0.5);
    let with_c = g.rng.gen_bool(0.5);

    let mut sn = vec![pl("s", GTy::Dots), pl("c0", GTy::Color)];
    sn[0].shared = true;
    let mut hosted = vec!["A"];
    if with_c {
        hosted.push("C");
    }
    sn.push(pl("n0", GTy::Net(hosted.clone())));
    let shared: Vec<GPlace> = sn.iter().filter(|p| p.shared).cloned().collect();

    let a = vec![pl("a0", GTy::Dots), pl("a1", GTy::Color)];
    let b = vec![pl("b0", GTy::Dots), pl("b1", GTy::Color)];
    let mut c = vec![pl("c1", GTy::Dots)];
    if with_b {
        c.push(pl("c2", GTy::Net(vec!["B"])));
    }

    let colors = |g: &mut Gen| {
        let mut v: Vec<&str> = Vec::new();
        for _ in 0..g.rng.gen_range(0..=2) {
            v.push(["u", "v"][g.rng.gen_range(0..2)]);
        }
        if v.is_empty() {
            String::new()
        } else {
            format!("[{}]", v.join(", "))
        }
    };
    let dots = |g: &mut Gen| match g.rng.gen_range(0..=2) {
        0 => String::new(),
        n => n.to_string(),
    };

    let mut out = String::from("npn \"random\" {\n  type T { u, v }\n  label vertical lam\n  label horizontal h: 2\n");
    out.push_str("  component SN system {\n");
    let n0_init = {
        let k = g.rng.gen_range(0..=3);
        if k == 0 {
            String::new()
        } else {
            format!("[{}]", vec!["A"; k].join(", "))
        }
    };
    let inits = [dots(&mut g), colors(&mut g), n0_init];
    for (p, i) in sn.iter().zip(inits.iter()) {
        out.push_str(&place_decl(p, i));
    }
    for t in 0..g.rng.gen_range(1..=3) {
        let s = g.transition(&format!("t{t}"), &sn, &[], true);
        out.push_str(&s);
    }
    out.push_str("  }\n");

    let element = |g: &mut Gen, name: &str, places: &[GPlace], sh: &[GPlace], out: &mut String| {
        let _ = writeln!(out, "  component {name} {{");
        for p in places {
            let init = match p.ty {
                GTy::Dots => dots(g),
                GTy::Color => colors(g),
                GTy::Net(_) => String::new(),
            };
            out.push_str(&place_decl(p, &init));
        }
        for t in 0..g.rng.gen_range(1..=3) {
            let s = g.transition(&format!("{}t{t}", name.to_lowercase()), places, sh, false);
            out.push_str(&s);
        }
        out.push_str("  }\n");
    };
    element(&mut g, "A", &a, &[], &mut out);
    if with_b {
        element(&mut g, "B", &b, &[], &mut out);
    }
    if with_c {
        element(&mut g, "C", &c, &shared, &mut out);
    }
    out.push_str("}\n");
    out
}

fn total_tokens(m: &Marking) -> usize {
    m.places
        .iter()
        .flatten()
        .map(|t| match t {
            Token::Basic(_) => 1,
            Token::Net(n) => 1 + total_tokens(&n.marking),
        })
        .sum()
}

/// A valid random net with at most 4 components and 12 initial tokens.
pub fn random_net(seed: u64) -> NpnSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let sub = ChaCha8Rng::seed_from_u64(rng.gen());
        let text = random_text(sub);
        let spec = parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        if validate(&spec).is_empty() && total_tokens(&semantics::initial_marking(&spec)) <= 12 {
            return spec;
        }
    }
}

// ---------------------------------------------------------------------------
// oracle semantics

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OT {
    B(u16),
    N(usize, OM),
}

pub type OM = Vec<Vec<OT>>;

pub fn to_om(m: &Marking) -> OM {
    m.places
        .iter()
        .map(|p| {
            let mut v: Vec<OT> = p
                .iter()
                .map(|t| match t {
                    Token::Basic(x) => OT::B(*x),
                    Token::Net(n) => OT::N(n.component, to_om(&n.marking)),
                })
                .collect();
            v.sort();
            v
        })
        .collect()
}

fn norm(m: &mut OM) {
    for p in m.iter_mut() {
        for t in p.iter_mut() {
            if let OT::N(_, inner) = t {
                norm(inner);
            }
        }
        p.sort();
    }
}

pub fn om_initial(spec: &NpnSpec, comp: usize) -> OM {
    let mut m: OM = spec.components[comp]
        .places
        .iter()
        .map(|p| {
            p.init
                .iter()
                .map(|k| match *k {
                    Constant::Color { value, .. } => OT::B(value),
                    Constant::Net { component } => OT::N(component, om_initial(spec, component)),
                })
                .collect()
        })
        .collect();
    norm(&mut m);
    m
}

/// Position of a net token: (place, index) pairs from the root.
type Pos = Vec<(usize, usize)>;

fn host<'a>(root: &'a OM, pos: &[(usize, usize)]) -> (&'a OM, usize) {
    let mut m = root;
    let mut comp = 0;
    for &(p, i) in pos {
        match &m[p][i] {
            OT::N(c, inner) => {
                m = inner;
                comp = *c;
            }
            OT::B(_) => panic!("position does not address a net token"),
        }
    }
    (m, comp)
}

fn host_mut<'a>(root: &'a mut OM, pos: &[(usize, usize)]) -> &'a mut OM {
    let mut m = root;
    for &(p, i) in pos {
        match &mut m[p][i] {
            OT::N(_, inner) => m = inner,
            OT::B(_) => panic!("position does not address a net token"),
        }
    }
    m
}

fn all_hosts(root: &OM) -> Vec<Pos> {
    fn go(m: &OM, pos: &mut Pos, out: &mut Vec<Pos>) {
        out.push(pos.clone());
        for (p, toks) in m.iter().enumerate() {
            for (i, t) in toks.iter().enumerate() {
                if let OT::N(_, inner) = t {
                    pos.push((p, i));
                    go(inner, pos, out);
                    pos.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(root, &mut Vec::new(), &mut out);
    out
}

/// One oracle firing: the token positions consumed per input arc and the
/// binding they induce.
#[derive(Debug, Clone)]
pub struct OFiring {
    pub host: Pos,
    pub t: TransRef,
    pub picks: Vec<Vec<usize>>,
    pub binding: BTreeMap<String, OT>,
}

fn injective(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in injective(n, k - 1) {
        for i in 0..n {
            if !rest.contains(&i) {
                let mut v = rest.clone();
                v.push(i);
                out.push(v);
            }
        }
    }
    out
}

pub fn oracle_firings(spec: &NpnSpec, root: &OM, hpos: &Pos, t: TransRef) -> Vec<OFiring> {
    let (hm, comp) = host(root, hpos);
    let td = spec.transition(t);
    let avail = |p: PlaceRef| -> &Vec<OT> {
        if p.comp == comp {
            &hm[p.idx]
        } else {
            &root[p.idx]
        }
    };
    if td.inhibitors.iter().any(|p| !avail(*p).is_empty()) {
        return Vec::new();
    }
    let mut partial: Vec<(Vec<Vec<usize>>, BTreeMap<String, OT>)> = vec![(Vec::new(), BTreeMap::new())];
    for arc in &td.inputs {
        let toks = avail(arc.place);
        let mut options = Vec::new();
        'sel: for sel in injective(toks.len(), arc.terms.len()) {
            let mut b = BTreeMap::new();
            for (term, &i) in arc.terms.iter().zip(&sel) {
                let tok = &toks[i];
                match term {
                    ArcTerm::Const(Constant::Color { value, .. }) => {
                        if *tok != OT::B(*value) {
                            continue 'sel;
                        }
                    }
                    ArcTerm::Const(Constant::Net { .. }) => continue 'sel,
                    ArcTerm::Var(v) => {
                        let ok = match (&spec.variable(comp, v).unwrap().ty, tok) {
                            (PlaceType::Net(set), OT::N(c, _)) => set.contains(c),
                            (PlaceType::Basic(_), OT::B(_)) => true,
                            _ => false,
                        };
                        if !ok {
                            continue 'sel;
                        }
                        b.insert(v.clone(), tok.clone());
                    }
                }
            }
            options.push((sel, b));
        }
        let mut next = Vec::new();
        for (picks, b) in &partial {
            for (sel, ob) in &options {
                let mut picks = picks.clone();
                picks.push(sel.clone());
                let mut b = b.clone();
                b.extend(ob.clone());
                next.push((picks, b));
            }
        }
        partial = next;
    }
    for arc in &td.outputs {
        for v in arc.vars() {
            if partial.first().is_some_and(|(_, b)| b.contains_key(v)) {
                continue;
            }
            if let PlaceType::Basic(ty) = spec.variable(comp, v).unwrap().ty {
                let n = spec.color_types[ty].values.len() as u16;
                partial = partial
                    .into_iter()
                    .flat_map(|(p, b)| {
                        (0..n).map(move |x| {
                            let mut b = b.clone();
                            b.insert(v.to_string(), OT::B(x));
                            (p.clone(), b)
                        })
                    })
                    .collect();
            }
        }
    }
    partial
        .into_iter()
        .map(|(picks, binding)| OFiring {
            host: hpos.clone(),
            t,
            picks,
            binding,
        })
        .collect()
}

fn labelled(spec: &NpnSpec, root: &OM, hpos: &Pos, label: Option<TransLabel>) -> Vec<OFiring> {
    let (_, comp) = host(root, hpos);
    (0..spec.components[comp].transitions.len())
        .map(|idx| TransRef { comp, idx })
        .filter(|t| spec.transition(*t).label == label)
        .flat_map(|t| oracle_firings(spec, root, hpos, t))
        .collect()
}

/// Applies one firing in place; net tokens keep their positions until the
/// final normalization, so several firings of a step can be applied in turn.
fn apply_firing(spec: &NpnSpec, root: &mut OM, f: &OFiring) {
    let comp = host(root, &f.host).1;
    let td = spec.transition(f.t);
    let mut bound = f.binding.clone();
    // read current values of consumed tokens (children may have fired)
    for (arc, sel) in td.inputs.iter().zip(&f.picks) {
        for (term, &i) in arc.terms.iter().zip(sel) {
            if let ArcTerm::Var(v) = term {
                let tok = if arc.place.comp == comp {
                    host(root, &f.host).0[arc.place.idx][i].clone()
                } else {
                    root[arc.place.idx][i].clone()
                };
                bound.insert(v.clone(), tok);
            }
        }
    }
    for (arc, sel) in td.inputs.iter().zip(&f.picks) {
        let mut sel = sel.clone();
        sel.sort_unstable_by(|a, b| b.cmp(a));
        let place = if arc.place.comp == comp {
            &mut host_mut(root, &f.host)[arc.place.idx]
        } else {
            &mut root[arc.place.idx]
        };
        for i in sel {
            place.remove(i);
        }
    }
    for arc in &td.outputs {
        for term in &arc.terms {
            let tok = match term {
                ArcTerm::Const(Constant::Color { value, .. }) => OT::B(*value),
                ArcTerm::Const(Constant::Net { component }) => OT::N(*component, om_initial(spec, *component)),
                ArcTerm::Var(v) => bound[v].clone(),
            };
            if arc.place.comp == comp {
                host_mut(root, &f.host)[arc.place.idx].push(tok);
            } else {
                root[arc.place.idx].push(tok);
            }
        }
    }
}

fn path_sig(root: &OM, pos: &Pos) -> String {
    let mut s = String::new();
    let mut m = root;
    for &(p, i) in pos {
        let _ = write!(s, "{p}:{:?}/", m[p][i]);
        if let OT::N(_, inner) = &m[p][i] {
            m = inner;
        }
    }
    s
}

fn firing_sig(spec: &NpnSpec, host_sig: &str, t: TransRef, b: &BTreeMap<String, OT>) -> String {
    format!("{host_sig}|{}.{}|{b:?}", spec.components[t.comp].name, spec.transition(t).name)
}

/// Every enabled step of the oracle as `kind|firings => successor`.
pub fn oracle_steps(spec: &NpnSpec, root: &OM) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let finish = |mut m: OM| {
        norm(&mut m);
        m
    };
    for hpos in all_hosts(root) {
        let (hm, comp) = host(root, &hpos);
        let hsig = path_sig(root, &hpos);
        for (idx, td) in spec.components[comp].transitions.iter().enumerate() {
            let t = TransRef { comp, idx };
            match td.label {
                None => {
                    for f in oracle_firings(spec, root, &hpos, t) {
                        let mut m = root.clone();
                        apply_firing(spec, &mut m, &f);
                        out.insert(format!("A|{} => {:?}", firing_sig(spec, &hsig, t, &f.binding), finish(m)));
                    }
                }
                Some(TransLabel::Lower(l)) => {
                    for f in oracle_firings(spec, root, &hpos, t) {
                        // children: positions of the consumed net tokens
                        let mut kids: Vec<Pos> = Vec::new();
                        for (arc, sel) in td.inputs.iter().zip(&f.picks) {
                            for (term, &i) in arc.terms.iter().zip(sel) {
                                let is_net = matches!(term, ArcTerm::Var(v) if spec.is_net_var(comp, v));
                                if is_net {
                                    let mut p = if arc.place.comp == comp { hpos.clone() } else { Vec::new() };
                                    p.push((arc.place.idx, i));
                                    kids.push(p);
                                }
                            }
                        }
                        if kids.is_empty() {
                            let mut m = root.clone();
                            apply_firing(spec, &mut m, &f);
                            out.insert(format!("A|{} => {:?}", firing_sig(spec, &hsig, t, &f.binding), finish(m)));
                            continue;
                        }
                        let options: Vec<Vec<OFiring>> = kids
                            .iter()
                            .map(|k| labelled(spec, root, k, Some(TransLabel::Upper(l))))
                            .collect();
                        for combo in product(&options) {
                            let mut m = root.clone();
                            for c in &combo {
                                apply_firing(spec, &mut m, c);
                            }
                            apply_firing(spec, &mut m, &f);
                            let mut ks: Vec<String> = combo
                                .iter()
                                .map(|c| firing_sig(spec, &path_sig(root, &c.host), c.t, &c.binding))
                                .collect();
                            ks.sort();
                            out.insert(format!(
                                "V|{}|{ks:?} => {:?}",
                                firing_sig(spec, &hsig, t, &f.binding),
                                finish(m)
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
        for (p, toks) in hm.iter().enumerate() {
            for (l, decl) in spec.labels.iter().enumerate() {
                let LabelKind::Horizontal { arity } = decl.kind else { continue };
                let nets: Vec<usize> = (0..toks.len()).filter(|i| matches!(toks[*i], OT::N(..))).collect();
                for subset in subsets(&nets, arity as usize) {
                    let options: Vec<Vec<OFiring>> = subset
                        .iter()
                        .map(|&i| {
                            let mut pos = hpos.clone();
                            pos.push((p, i));
                            labelled(spec, root, &pos, Some(TransLabel::Horizontal(l)))
                        })
                        .collect();
                    for combo in product(&options) {
                        let mut m = root.clone();
                        for c in &combo {
                            apply_firing(spec, &mut m, c);
                        }
                        let mut ps: Vec<String> = combo
                            .iter()
                            .map(|c| firing_sig(spec, &path_sig(root, &c.host), c.t, &c.binding))
                            .collect();
                        ps.sort();
                        out.insert(format!("H|{hsig}{p}|{l}|{ps:?} => {:?}", finish(m)));
                    }
                }
            }
        }
    }
    out
}

fn product<T: Clone>(sets: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut acc = vec![Vec::new()];
    for s in sets {
        let mut next = Vec::new();
        for a in &acc {
            for x in s {
                let mut v: Vec<T> = a.clone();
                v.push(x.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out = Vec::new();
    for mut rest in subsets(&items[1..], k - 1) {
        rest.insert(0, items[0]);
        out.push(rest);
    }
    out.extend(subsets(&items[1..], k));
    out
}

// ---------------------------------------------------------------------------
// mapping library steps into oracle signatures

fn lib_path_sig(root: &Marking, rtid: u32) -> String {
    fn go(m: &Marking, rtid: u32, acc: &mut Vec<(usize, OT)>) -> bool {
        for (p, toks) in m.places.iter().enumerate() {
            for t in toks {
                if let Token::Net(n) = t {
                    acc.push((p, OT::N(n.component, to_om(&n.marking))));
                    if n.rtid == rtid || go(&n.marking, rtid, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
        }
        false
    }
    if rtid == 0 {
        return String::new();
    }
    let mut acc = Vec::new();
    assert!(go(root, rtid, &mut acc), "rtid {rtid} not found");
    acc.iter().map(|(p, t)| format!("{p}:{t:?}/")).collect()
}

fn lib_binding(b: &semantics::Binding) -> BTreeMap<String, OT> {
    b.iter()
        .map(|(k, v)| {
            let t = match v {
                Token::Basic(x) => OT::B(*x),
                Token::Net(n) => OT::N(n.component, to_om(&n.marking)),
            };
            (k.clone(), t)
        })
        .collect()
}

/// Signature of a library step in the oracle's format.
pub fn lib_step_sig(spec: &NpnSpec, root: &Marking, step: &Step) -> String {
    let next = to_om(&semantics::apply_step(spec, root, step).expect("enabled step applies"));
    let fsig = |rtid: u32, f: &semantics::Firing| {
        firing_sig(spec, &lib_path_sig(root, rtid), f.transition, &lib_binding(&f.binding))
    };
    match step {
        Step::Autonomous { path, firing } => format!("A|{} => {next:?}", fsig(path.host_rtid(), firing)),
        Step::Vertical {
            path,
            firing,
            children,
        } => {
            let mut ks: Vec<String> = children.iter().map(|c| fsig(c.rtid, &c.firing)).collect();
            ks.sort();
            format!("V|{}|{ks:?} => {next:?}", fsig(path.host_rtid(), firing))
        }
        Step::Horizontal {
            path,
            place,
            label,
            participants,
        } => {
            let mut ps: Vec<String> = participants.iter().map(|c| fsig(c.rtid, &c.firing)).collect();
            ps.sort();
            format!("H|{}{place}|{label}|{ps:?} => {next:?}", lib_path_sig(root, path.host_rtid()))
        }
    }
}

// ---------------------------------------------------------------------------
// independent state-space enumeration

/// Depth-first enumeration of reachable oracle states and their successor
/// edges, stopping once `max` states are known. Returns `None` if the limit
/// was hit.
pub fn oracle_graph(spec: &NpnSpec, max: usize) -> Option<(BTreeSet<OM>, BTreeSet<(OM, OM)>)> {
    let start = to_om(&semantics::initial_marking(spec));
    let mut seen = BTreeSet::from([start.clone()]);
    let mut edges = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(m) = stack.pop() {
        for succ in oracle_successors(spec, &m) {
            edges.insert((m.clone(), succ.clone()));
            if seen.insert(succ.clone()) {
                if seen.len() > max {
                    return None;
                }
                stack.push(succ);
            }
        }
    }
    Some((seen, edges))
}

/// Successor markings of the oracle (as values).
pub fn oracle_successors(spec: &NpnSpec, root: &OM) -> BTreeSet<OM> {
    let mut out = BTreeSet::new();
    for hpos in all_hosts(root) {
        let (hm, comp) = host(root, &hpos);
        for (idx, td) in spec.components[comp].transitions.iter().enumerate() {
            let t = TransRef { comp, idx };
            match td.label {
                None => {
                    for f in oracle_firings(spec, root, &hpos, t) {
                        let mut m = root.clone();
                        apply_firing(spec, &mut m, &f);
                        norm(&mut m);
                        out.insert(m);
                    }
                }
                Some(TransLabel::Lower(l)) => {
                    for f in oracle_firings(spec, root, &hpos, t) {
                        let mut kids: Vec<Pos> = Vec::new();
                        for (arc, sel) in td.inputs.iter().zip(&f.picks) {
                            for (term, &i) in arc.terms.iter().zip(sel) {
                                if matches!(term, ArcTerm::Var(v) if spec.is_net_var(comp, v)) {
                                    let mut p = if arc.place.comp == comp { hpos.clone() } else { Vec::new() };
                                    p.push((arc.place.idx, i));
                                    kids.push(p);
                                }
                            }
                        }
                        let options: Vec<Vec<OFiring>> = kids
                            .iter()
                            .map(|k| labelled(spec, root, k, Some(TransLabel::Upper(l))))
                            .collect();
                        for combo in product(&options) {
                            let mut m = root.clone();
                            for c in &combo {
                                apply_firing(spec, &mut m, c);
                            }
                            apply_firing(spec, &mut m, &f);
                            norm(&mut m);
                            out.insert(m);
                        }
                    }
                }
                _ => {}
            }
        }
        for (p, toks) in hm.iter().enumerate() {
            for (l, decl) in spec.labels.iter().enumerate() {
                let LabelKind::Horizontal { arity } = decl.kind else { continue };
                let nets: Vec<usize> = (0..toks.len()).filter(|i| matches!(toks[*i], OT::N(..))).collect();
                for subset in subsets(&nets, arity as usize) {
                    let options: Vec<Vec<OFiring>> = subset
                        .iter()
                        .map(|&i| {
                            let mut pos = hpos.clone();
                            pos.push((p, i));
                            labelled(spec, root, &pos, Some(TransLabel::Horizontal(l)))
                        })
                        .collect();
                    for combo in product(&options) {
                        let mut m = root.clone();
                        for c in &combo {
                            apply_firing(spec, &mut m, c);
                        }
                        norm(&mut m);
                        out.insert(m);
                    }
                }
            }
        }
    }
    out
}
