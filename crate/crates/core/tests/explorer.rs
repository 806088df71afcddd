mod common;

use std::collections::BTreeSet;

use nestpn_core::explorer::*;
use nestpn_core::predicate::Predicate;
use nestpn_core::semantics::*;
use nestpn_core::*;

fn factorial(a: usize) -> NpnSpec {
    let mut spec = parse(include_str!("../../../nets/factorial.npn")).unwrap();
    let p1 = spec.place_by_name(0, "p1").unwrap();
    spec.components[0].places[p1.idx].init = vec![Constant::DOT; a];
    spec
}

fn names(spec: &NpnSpec, t: &Trace) -> Vec<String> {
    t.steps.iter().map(|s| describe_step(spec, s)).collect()
}

fn assert_replays(spec: &NpnSpec, t: &Trace) {
    let mut m = initial_marking(spec);
    assert_eq!(m, t.states[0]);
    for (s, want) in t.steps.iter().zip(&t.states[1..]) {
        m = apply_step(spec, &m, s).unwrap();
        assert_eq!(&m, want);
    }
}

#[test]
fn factorial_one_has_six_states_two_dead() {
    let spec = factorial(1);
    let g = explore(&spec, &ExploreLimits::default());
    assert!(g.is_complete());
    assert_eq!(g.nodes.len(), 6);
    assert_eq!(g.dead_markings().len(), 2);
    let (nodes, _) = common::oracle_graph(&spec, 100).unwrap();
    assert_eq!(nodes.len(), 6);
}

#[test]
fn factorial_matches_the_independent_enumerator() {
    for a in 0..=3 {
        let spec = factorial(a);
        let g = explore(&spec, &ExploreLimits::default());
        let (nodes, edges) = common::oracle_graph(&spec, 10_000).unwrap();
        let lib: BTreeSet<common::OM> = g.nodes.iter().map(|n| common::to_om(&n.marking)).collect();
        assert_eq!(lib, nodes);
        assert_eq!(g.edges.len(), edges.len());
    }
}

#[test]
fn factorial_dead_marking_law() {
    for a in 0..=6usize {
        let spec = factorial(a);
        let g = explore(&spec, &ExploreLimits::default());
        assert!(g.is_complete());
        assert!(g.find_cycle(&spec).is_none());
        let got: BTreeSet<String> = g.dead_markings().iter().map(|m| render(&spec, m)).collect();
        let want: BTreeSet<String> = (0..=a)
            .map(|b| format!("<p1:{},p2:0,p3:{{}},p4:1,p5:{}>", a - b, b + 1))
            .collect();
        assert_eq!(got, want, "a = {a}");
    }
}

#[test]
fn empty_net_is_a_single_dead_state() {
    let spec = parse(r#"npn "e" { component SN system { place p: dots; } }"#).unwrap();
    let g = explore(&spec, &ExploreLimits::default());
    assert_eq!(g.nodes.len(), 1);
    assert!(g.edges.is_empty());
    assert_eq!(g.dead_markings().len(), 1);
}

#[test]
fn unbounded_recursion_hits_the_net_token_cap() {
    let spec = parse(include_str!("../../../nets/factorial_unbounded.npn")).unwrap();
    let limits = ExploreLimits {
        max_net_tokens: 5,
        ..ExploreLimits::default()
    };
    let Verdict::BoundExceeded { trace, limit } = check_termination(&spec, &limits) else {
        panic!("expected BoundExceeded")
    };
    assert_eq!(limit, Limit::MaxNetTokens);
    let n = names(&spec, &trace);
    assert_eq!(n[..5], ["t1", "F#1.t4", "F#2.t4", "F#3.t4", "F#4.t4"]);
    assert_replays(&spec, &trace);
}

#[test]
fn termination_verdicts() {
    assert_eq!(check_termination(&factorial(4), &ExploreLimits::default()), Verdict::Terminating);
    let spec = parse(include_str!("../../../nets/pingpong.npn")).unwrap();
    let Verdict::InfiniteRun { stem, cycle } = check_termination(&spec, &ExploreLimits::default()) else {
        panic!("expected InfiniteRun")
    };
    assert!(stem.steps.is_empty());
    assert_eq!(names(&spec, &cycle), ["t", "u"]);
    assert_eq!(cycle.states.first(), cycle.states.last());
}

#[test]
fn boundedness() {
    let spec = factorial(4);
    let l = ExploreLimits::default();
    assert_eq!(check_bounded(&spec, &l, "p5", 5).unwrap(), Verdict::Bounded);
    let Verdict::CounterExample { trace } = check_bounded(&spec, &l, "p5", 3).unwrap() else {
        panic!()
    };
    assert_eq!(trace.states.last().unwrap().count(4), 4);
    assert_replays(&spec, &trace);
    let Verdict::CounterExample { trace } = check_bounded(&spec, &l, "p1", 0).unwrap() else {
        panic!()
    };
    assert!(trace.steps.is_empty());
    assert!(check_bounded(&spec, &l, "nope", 1).is_err());
}

#[test]
fn predicates() {
    let spec = factorial(4);
    let l = ExploreLimits::default();
    let p = Predicate::parse(
        &spec,
        "p4==1 && p2==0 && size(p3)==0 && p1==a-f+1 && p5==f",
        None,
    )
    .unwrap();
    assert_eq!(check_predicate(&spec, &l, Mode::AtDead, &p), Verdict::Holds { witness: None });

    let p = Predicate::parse(&spec, "p4==1", None).unwrap();
    let Verdict::Holds { witness: Some(w) } = check_predicate(&spec, &l, Mode::EF, &p) else {
        panic!()
    };
    assert_eq!(w.steps.len(), 2);
    assert_replays(&spec, &w);

    let p = Predicate::parse(&spec, "false", None).unwrap();
    let Verdict::CounterExample { trace } = check_predicate(&spec, &l, Mode::AG, &p) else {
        panic!()
    };
    assert!(trace.steps.is_empty());

    let p = Predicate::parse(&spec, "p5 <= 5", None).unwrap();
    assert_eq!(check_predicate(&spec, &l, Mode::AG, &p), Verdict::Holds { witness: None });

    let wrong = Predicate::parse(&spec, "p5 == 1", None).unwrap();
    let Verdict::CounterExample { trace } = check_predicate(&spec, &l, Mode::AtDead, &wrong) else {
        panic!()
    };
    assert_replays(&spec, &trace);
}

#[test]
fn dead_state_checks_are_inapplicable_on_cycles() {
    let spec = parse(include_str!("../../../nets/pingpong.npn")).unwrap();
    let p = Predicate::parse(&spec, "p == 1", None).unwrap();
    let v = check_predicate(&spec, &ExploreLimits::default(), Mode::AtDead, &p);
    assert!(matches!(v, Verdict::BoundExceeded { limit: Limit::Cycle, .. }));
}
