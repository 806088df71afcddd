//! Bounded explicit-state exploration: reachability graph, termination,
//! boundedness and predicate checks.
//!
//! The search is breadth-first and level-synchronous. Successors of a level
//! are computed in parallel and merged in a fixed order, so the resulting
//! graph does not depend on the number of worker threads.

use std::collections::{HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::*;
use crate::predicate::{Counters, Predicate};
use crate::semantics::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExploreLimits {
    pub max_states: usize,
    pub max_depth: usize,
    /// Cap on live net tokens, the analog of SPIN's process limit.
    pub max_net_tokens: usize,
    pub max_tokens_per_place: usize,
}

impl Default for ExploreLimits {
    fn default() -> Self {
        ExploreLimits {
            max_states: 1_000_000,
            max_depth: 10_000,
            max_net_tokens: 254,
            max_tokens_per_place: 255,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Limit {
    MaxStates,
    MaxDepth,
    MaxNetTokens,
    MaxTokensPerPlace,
    /// Not a size limit: a dead-state check is inapplicable because the
    /// graph has a cycle.
    Cycle,
}

impl std::fmt::Display for Limit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Limit::MaxStates => "maxStates",
            Limit::MaxDepth => "maxDepth",
            Limit::MaxNetTokens => "maxNetTokens",
            Limit::MaxTokensPerPlace => "maxTokensPerPlace",
            Limit::Cycle => "cycle",
        })
    }
}

/// Canonical byte key of a state; rtids are not part of it.
pub type StateKey = Vec<u8>;

pub fn state_key(m: &Marking, created: Option<u32>) -> StateKey {
    let mut out = Vec::new();
    encode_marking(m, &mut out);
    if let Some(c) = created {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone)]
pub struct Node {
    pub marking: Marking,
    pub depth: usize,
    /// Edge through which the node was first reached.
    pub parent: Option<usize>,
    pub created: u32,
    pub truncated: Option<Limit>,
    pub out: Vec<usize>,
}

impl Node {
    pub fn is_dead(&self) -> bool {
        self.out.is_empty() && self.truncated.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub step: Step,
}

#[derive(Debug, Clone, Default)]
pub struct ExploreOptions {
    pub limits: ExploreLimits,
    /// Make the created-net-token counter part of the state.
    pub track_created: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct StateGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub index: HashMap<StateKey, usize>,
    pub track_created: bool,
}

/// A replayable sequence of steps and the markings it visits
/// (`states.len() == steps.len() + 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub steps: Vec<Step>,
    pub states: Vec<Marking>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Terminating,
    InfiniteRun { stem: Trace, cycle: Trace },
    BoundExceeded { trace: Trace, limit: Limit },
    /// For existential checks, `witness` reaches a satisfying state.
    Holds { witness: Option<Trace> },
    /// A trace to a violating state. For an existential check that fails on
    /// a complete graph the trace is empty.
    CounterExample { trace: Trace },
    Bounded,
    Unbounded { place: String, trace: Trace },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Terminating => "Terminating",
            Verdict::InfiniteRun { .. } => "InfiniteRun",
            Verdict::BoundExceeded { .. } => "BoundExceeded",
            Verdict::Holds { .. } => "Holds",
            Verdict::CounterExample { .. } => "CounterExample",
            Verdict::Bounded => "Bounded",
            Verdict::Unbounded { .. } => "Unbounded",
        }
    }

    /// Whether the verdict reports a property violation.
    pub fn is_violation(&self) -> bool {
        matches!(
            self,
            Verdict::InfiniteRun { .. } | Verdict::CounterExample { .. } | Verdict::Unbounded { .. }
        )
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("unknown system-net place `{0}`")]
    UnknownPlace(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

fn exceeded(m: &Marking, limits: &ExploreLimits) -> Option<Limit> {
    let nets = m.net_tokens();
    if nets.len() > limits.max_net_tokens {
        return Some(Limit::MaxNetTokens);
    }
    let too_full = |mk: &Marking| mk.places.iter().any(|p| p.len() > limits.max_tokens_per_place);
    if too_full(m) || nets.iter().any(|n| too_full(&n.marking)) {
        return Some(Limit::MaxTokensPerPlace);
    }
    None
}

pub fn explore(spec: &NpnSpec, limits: &ExploreLimits) -> StateGraph {
    explore_with(
        spec,
        &ExploreOptions {
            limits: *limits,
            ..Default::default()
        },
    )
}

pub fn explore_with(spec: &NpnSpec, opts: &ExploreOptions) -> StateGraph {
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(|| run(spec, opts)),
        None => run(spec, opts),
    }
}

fn run(spec: &NpnSpec, opts: &ExploreOptions) -> StateGraph {
    let limits = &opts.limits;
    let key_of = |m: &Marking, c: u32| state_key(m, opts.track_created.then_some(c));
    let m0 = initial_marking(spec);
    let mut g = StateGraph {
        nodes: Vec::new(),
        edges: Vec::new(),
        index: HashMap::new(),
        track_created: opts.track_created,
    };
    g.index.insert(key_of(&m0, 0), 0);
    g.nodes.push(Node {
        truncated: exceeded(&m0, limits),
        marking: m0,
        depth: 0,
        parent: None,
        created: 0,
        out: Vec::new(),
    });
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let expandable: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&n| g.nodes[n].truncated.is_none())
            .collect();
        let succs: Vec<Vec<(Step, Marking, u32)>> = expandable
            .par_iter()
            .map(|&n| {
                let node = &g.nodes[n];
                enabled_steps(spec, &node.marking)
                    .into_iter()
                    .map(|s| {
                        let k = s.firings().len();
                        let order: Vec<usize> = (0..k).collect();
                        let (m, c) = apply_step_ordered(spec, &node.marking, &s, &order)
                            .expect("enumerated step applies");
                        (s, m, node.created + c)
                    })
                    .collect()
            })
            .collect();
        let mut next = Vec::new();
        for (&n, succ) in expandable.iter().zip(succs) {
            if succ.is_empty() {
                continue;
            }
            if g.nodes[n].depth >= limits.max_depth {
                g.nodes[n].truncated = Some(Limit::MaxDepth);
                continue;
            }
            for (step, m, created) in succ {
                let key = key_of(&m, created);
                let to = match g.index.get(&key) {
                    Some(&to) => to,
                    None => {
                        if g.nodes.len() >= limits.max_states {
                            g.nodes[n].truncated = Some(Limit::MaxStates);
                            break;
                        }
                        let to = g.nodes.len();
                        g.index.insert(key, to);
                        g.nodes.push(Node {
                            truncated: exceeded(&m, limits),
                            marking: m,
                            depth: g.nodes[n].depth + 1,
                            parent: Some(g.edges.len()),
                            created,
                            out: Vec::new(),
                        });
                        next.push(to);
                        to
                    }
                };
                g.nodes[n].out.push(g.edges.len());
                g.edges.push(Edge { from: n, to, step });
            }
        }
        frontier = next;
    }
    g
}

impl StateGraph {
    pub fn is_complete(&self) -> bool {
        self.nodes.iter().all(|n| n.truncated.is_none())
    }

    /// First truncated node in discovery order (a shortest witness).
    pub fn first_truncation(&self) -> Option<(usize, Limit)> {
        self.nodes
            .iter()
            .enumerate()
            .find_map(|(i, n)| n.truncated.map(|l| (i, l)))
    }

    pub fn dead_nodes(&self) -> Vec<usize> {
        let mut dead: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].is_dead()).collect();
        dead.sort_by(|a, b| self.nodes[*a].marking.cmp(&self.nodes[*b].marking));
        dead
    }

    /// Dead markings in canonical order.
    pub fn dead_markings(&self) -> Vec<&Marking> {
        self.dead_nodes().into_iter().map(|i| &self.nodes[i].marking).collect()
    }

    fn node_path(&self, mut node: usize) -> Vec<usize> {
        let mut path = vec![node];
        while let Some(e) = self.nodes[node].parent {
            node = self.edges[e].from;
            path.push(node);
        }
        path.reverse();
        path
    }

    /// Replays a node sequence from the initial marking. Stored steps refer
    /// to the representative marking of their source node, so each step is
    /// re-selected against the actual marking reached by the replay.
    pub fn replay_nodes(&self, spec: &NpnSpec, nodes: &[usize], start: &Marking, created: u32) -> Trace {
        let mut trace = Trace {
            steps: Vec::new(),
            states: vec![start.clone()],
        };
        let mut cur = start.clone();
        let mut c = created;
        for w in nodes.windows(2) {
            let want = &self.nodes[w[1]];
            let want_key = state_key(&want.marking, self.track_created.then_some(want.created));
            let (step, m, nc) = enabled_steps(spec, &cur)
                .into_iter()
                .find_map(|s| {
                    let order: Vec<usize> = (0..s.firings().len()).collect();
                    let (m, dc) = apply_step_ordered(spec, &cur, &s, &order).ok()?;
                    (state_key(&m, self.track_created.then_some(c + dc)) == want_key).then_some((s, m, c + dc))
                })
                .expect("graph edge is replayable");
            trace.steps.push(step);
            trace.states.push(m.clone());
            cur = m;
            c = nc;
        }
        trace
    }

    /// Shortest trace from the initial marking to `node`.
    pub fn trace_to(&self, spec: &NpnSpec, node: usize) -> Trace {
        let path = self.node_path(node);
        self.replay_nodes(spec, &path, &self.nodes[0].marking, 0)
    }

    /// A reachable cycle as (stem to the cycle entry, cycle back to it).
    pub fn find_cycle(&self, spec: &NpnSpec) -> Option<(Trace, Trace)> {
        let mut dg = DiGraph::<(), ()>::with_capacity(self.nodes.len(), self.edges.len());
        for _ in &self.nodes {
            dg.add_node(());
        }
        for e in &self.edges {
            dg.add_edge((e.from as u32).into(), (e.to as u32).into(), ());
        }
        let scc = tarjan_scc(&dg)
            .into_iter()
            .filter(|c| {
                c.len() > 1 || self.nodes[c[0].index()].out.iter().any(|&e| self.edges[e].to == c[0].index())
            })
            .min_by_key(|c| c.iter().map(|n| n.index()).min())?;
        let members: Vec<usize> = scc.iter().map(|n| n.index()).collect();
        let entry = *members.iter().min().unwrap();
        // BFS inside the component from entry back to entry
        let mut prev: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([entry]);
        let mut back = None;
        'bfs: while let Some(n) = queue.pop_front() {
            for &e in &self.nodes[n].out {
                let to = self.edges[e].to;
                if to == entry {
                    back = Some(n);
                    break 'bfs;
                }
                if members.contains(&to) && !prev.contains_key(&to) {
                    prev.insert(to, n);
                    queue.push_back(to);
                }
            }
        }
        let mut inner = Vec::new();
        let mut n = back?;
        while n != entry {
            inner.push(n);
            n = prev[&n];
        }
        inner.reverse();
        let mut cyc = vec![entry];
        cyc.extend(inner);
        cyc.push(entry);
        let stem = self.trace_to(spec, entry);
        let start = stem.states.last().unwrap().clone();
        let cycle = self.replay_nodes(spec, &cyc, &start, self.nodes[entry].created);
        Some((stem, cycle))
    }
}

pub fn check_termination(spec: &NpnSpec, limits: &ExploreLimits) -> Verdict {
    let g = explore(spec, limits);
    termination_verdict(spec, &g)
}

pub fn termination_verdict(spec: &NpnSpec, g: &StateGraph) -> Verdict {
    if let Some((stem, cycle)) = g.find_cycle(spec) {
        return Verdict::InfiniteRun { stem, cycle };
    }
    match g.first_truncation() {
        Some((n, limit)) => Verdict::BoundExceeded {
            trace: g.trace_to(spec, n),
            limit,
        },
        None => Verdict::Terminating,
    }
}

pub fn check_bounded(spec: &NpnSpec, limits: &ExploreLimits, place: &str, bound: usize) -> Result<Verdict, ExploreError> {
    let p = spec
        .place_by_name(0, place)
        .ok_or_else(|| ExploreError::UnknownPlace(place.to_string()))?;
    let g = explore(spec, limits);
    if let Some(n) = (0..g.nodes.len()).find(|&n| g.nodes[n].marking.count(p.idx) > bound) {
        return Ok(Verdict::CounterExample {
            trace: g.trace_to(spec, n),
        });
    }
    Ok(match g.first_truncation() {
        Some((n, Limit::MaxTokensPerPlace)) if g.nodes[n].marking.count(p.idx) > limits.max_tokens_per_place => {
            Verdict::Unbounded {
                place: place.to_string(),
                trace: g.trace_to(spec, n),
            }
        }
        Some((n, limit)) => Verdict::BoundExceeded {
            trace: g.trace_to(spec, n),
            limit,
        },
        None => Verdict::Bounded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// Invariant: holds in every reachable state.
    AG,
    /// Reachability: holds in some reachable state.
    EF,
    /// Holds in every dead state of a terminating net.
    AtDead,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ag" => Ok(Mode::AG),
            "ef" => Ok(Mode::EF),
            "atdead" | "at-dead" | "dead" => Ok(Mode::AtDead),
            _ => Err(format!("unknown mode `{s}` (expected AG, EF or AtDead)")),
        }
    }
}

pub fn check_predicate(spec: &NpnSpec, limits: &ExploreLimits, mode: Mode, p: &Predicate) -> Verdict {
    let g = explore_with(
        spec,
        &ExploreOptions {
            limits: *limits,
            track_created: p.uses_created(),
            threads: None,
        },
    );
    predicate_verdict(spec, &g, mode, p)
}

pub fn predicate_verdict(spec: &NpnSpec, g: &StateGraph, mode: Mode, p: &Predicate) -> Verdict {
    let holds = |n: usize| {
        let node = &g.nodes[n];
        p.eval(
            &node.marking,
            Counters {
                created: node.created,
            },
        )
    };
    let truncated = || {
        let (n, limit) = g.first_truncation().unwrap();
        Verdict::BoundExceeded {
            trace: g.trace_to(spec, n),
            limit,
        }
    };
    match mode {
        Mode::AG => match (0..g.nodes.len()).find(|&n| !holds(n)) {
            Some(n) => Verdict::CounterExample {
                trace: g.trace_to(spec, n),
            },
            None if g.is_complete() => Verdict::Holds { witness: None },
            None => truncated(),
        },
        Mode::EF => match (0..g.nodes.len()).find(|&n| holds(n)) {
            Some(n) => Verdict::Holds {
                witness: Some(g.trace_to(spec, n)),
            },
            None if g.is_complete() => Verdict::CounterExample {
                trace: g.trace_to(spec, 0),
            },
            None => truncated(),
        },
        Mode::AtDead => {
            if let Some((stem, cycle)) = g.find_cycle(spec) {
                // a dead-state property says nothing about infinite runs
                let mut trace = stem;
                trace.steps.extend(cycle.steps);
                trace.states.extend(cycle.states.into_iter().skip(1));
                return Verdict::BoundExceeded {
                    trace,
                    limit: Limit::Cycle,
                };
            }
            if !g.is_complete() {
                return truncated();
            }
            match g.dead_nodes().into_iter().find(|&n| !holds(n)) {
                Some(n) => Verdict::CounterExample {
                    trace: g.trace_to(spec, n),
                },
                None => Verdict::Holds { witness: None },
            }
        }
    }
}
