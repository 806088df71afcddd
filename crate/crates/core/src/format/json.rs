//! JSON views of markings, steps, traces, state graphs and verdicts.
//!
//! Objects use sorted keys, so the text is deterministic. A marking maps
//! place names to a count (uncolored places), a sorted list of color names,
//! or a list of net tokens `{"net", "id", "marking"}`.

use serde_json::{json, Map, Value};

use crate::explorer::{StateGraph, Trace, Verdict};
use crate::model::*;
use crate::semantics::{Binding, Firing, Marking, Path, Step, Token};

pub fn marking_json(spec: &NpnSpec, m: &Marking) -> Value {
    component_json(spec, m, 0)
}

fn component_json(spec: &NpnSpec, m: &Marking, comp: CompId) -> Value {
    let mut obj = Map::new();
    for (p, toks) in spec.components[comp].places.iter().zip(&m.places) {
        let v = match &p.ty {
            PlaceType::Basic(DOTS) => json!(toks.len()),
            ty => Value::Array(toks.iter().map(|t| token_json(spec, ty, t)).collect()),
        };
        obj.insert(p.name.clone(), v);
    }
    Value::Object(obj)
}

fn token_json(spec: &NpnSpec, ty: &PlaceType, t: &Token) -> Value {
    match (t, ty) {
        (Token::Basic(v), PlaceType::Basic(ty)) => json!(spec.color_types[*ty].values[*v as usize]),
        (Token::Basic(v), _) => json!(v),
        (Token::Net(n), _) => json!({
            "net": spec.components[n.component].name,
            "id": n.rtid,
            "marking": component_json(spec, &n.marking, n.component),
        }),
    }
}

fn binding_json(spec: &NpnSpec, comp: CompId, b: &Binding) -> Value {
    let mut obj = Map::new();
    for (var, tok) in b {
        let v = match tok {
            Token::Net(n) => json!({ "net": spec.components[n.component].name, "id": n.rtid }),
            Token::Basic(x) => match spec.variable(comp, var).map(|v| &v.ty) {
                Some(PlaceType::Basic(ty)) => json!(spec.color_types[*ty].values[*x as usize]),
                _ => json!(x),
            },
        };
        obj.insert(var.clone(), v);
    }
    Value::Object(obj)
}

/// Path of the net token `rtid` within `m` (empty for the system net).
pub fn path_of(m: &Marking, rtid: u32) -> Option<Path> {
    fn go(m: &Marking, rtid: u32, acc: &mut Vec<(usize, u32)>) -> bool {
        for (p, toks) in m.places.iter().enumerate() {
            for t in toks {
                if let Token::Net(n) = t {
                    acc.push((p, n.rtid));
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
        return Some(Path::default());
    }
    let mut acc = Vec::new();
    go(m, rtid, &mut acc).then_some(Path(acc))
}

fn firing_json(spec: &NpnSpec, pre: &Marking, rtid: u32, f: &Firing) -> Value {
    let path = path_of(pre, rtid).unwrap_or_default();
    let mut hops = Vec::new();
    let mut cur = pre;
    let mut comp = 0;
    for &(place, id) in &path.0 {
        hops.push(json!({ "place": spec.components[comp].places[place].name, "id": id }));
        if let Some(n) = cur.places[place].iter().filter_map(Token::as_net).find(|n| n.rtid == id) {
            comp = n.component;
            cur = &n.marking;
        }
    }
    let t = f.transition;
    json!({
        "path": hops,
        "transition": format!("{}.{}", spec.components[t.comp].name, spec.transition(t).name),
        "binding": binding_json(spec, t.comp, &f.binding),
    })
}

/// A step as JSON; `pre` is the marking it is enabled in.
pub fn step_json(spec: &NpnSpec, pre: &Marking, step: &Step) -> Value {
    let (label, firings): (Option<String>, Vec<Value>) = match step {
        Step::Autonomous { path, firing } => (None, vec![firing_json(spec, pre, path.host_rtid(), firing)]),
        Step::Vertical {
            path,
            firing,
            children,
        } => {
            let mut fs = vec![firing_json(spec, pre, path.host_rtid(), firing)];
            fs.extend(children.iter().map(|c| firing_json(spec, pre, c.rtid, &c.firing)));
            (spec.transition(firing.transition).label.map(|l| spec.label_name(l)), fs)
        }
        Step::Horizontal {
            label,
            participants,
            ..
        } => (
            Some(spec.labels[*label].name.clone()),
            participants
                .iter()
                .map(|c| firing_json(spec, pre, c.rtid, &c.firing))
                .collect(),
        ),
    };
    let mut v = json!({
        "kind": step.kind(),
        "text": crate::semantics::describe_step(spec, step),
        "firings": firings,
    });
    if let Some(l) = label {
        v["label"] = json!(l);
    }
    v
}

pub fn trace_json(spec: &NpnSpec, trace: &Trace) -> Value {
    let steps: Vec<Value> = trace
        .steps
        .iter()
        .zip(trace.states.windows(2))
        .map(|(s, w)| {
            let mut v = step_json(spec, &w[0], s);
            v["result"] = marking_json(spec, &w[1]);
            v
        })
        .collect();
    json!({
        "initial": marking_json(spec, &trace.states[0]),
        "steps": steps,
    })
}

pub fn export_trace(spec: &NpnSpec, trace: &Trace) -> String {
    serde_json::to_string_pretty(&trace_json(spec, trace)).expect("json")
}

pub fn graph_json(spec: &NpnSpec, g: &StateGraph) -> Value {
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| {
            let mut v = json!({
                "id": id,
                "marking": marking_json(spec, &n.marking),
                "text": crate::semantics::render(spec, &n.marking),
                "dead": n.is_dead(),
            });
            if let Some(l) = n.truncated {
                v["truncated"] = json!(l.to_string());
            }
            v
        })
        .collect();
    let edges: Vec<Value> = g
        .edges
        .iter()
        .map(|e| {
            json!({
                "from": e.from,
                "to": e.to,
                "step": step_json(spec, &g.nodes[e.from].marking, &e.step),
            })
        })
        .collect();
    json!({ "nodes": nodes, "edges": edges })
}

pub fn export_graph(spec: &NpnSpec, g: &StateGraph) -> String {
    serde_json::to_string_pretty(&graph_json(spec, g)).expect("json")
}

pub fn verdict_json(spec: &NpnSpec, v: &Verdict) -> Value {
    let mut out = json!({ "verdict": v.name() });
    match v {
        Verdict::InfiniteRun { stem, cycle } => {
            out["stem"] = trace_json(spec, stem);
            out["cycle"] = trace_json(spec, cycle);
        }
        Verdict::BoundExceeded { trace, limit } => {
            out["limit"] = json!(limit.to_string());
            out["trace"] = trace_json(spec, trace);
        }
        Verdict::Holds { witness: Some(w) } => out["witness"] = trace_json(spec, w),
        Verdict::CounterExample { trace } => out["trace"] = trace_json(spec, trace),
        Verdict::Unbounded { place, trace } => {
            out["place"] = json!(place);
            out["trace"] = trace_json(spec, trace);
        }
        _ => {}
    }
    out
}
