use std::collections::BTreeSet;

use nestpn_core::semantics::*;
use nestpn_core::*;

fn factorial() -> NpnSpec {
    parse(include_str!("../../../nets/factorial.npn")).unwrap()
}

/// Picks the unique enabled step whose description matches, ignoring rtids.
fn step_named(spec: &NpnSpec, m: &Marking, want: &str) -> Step {
    let strip = |s: &str| {
        let mut out = String::new();
        let mut skip = false;
        for ch in s.chars() {
            if ch == '#' {
                skip = true;
            } else if skip && ch.is_ascii_digit() {
                continue;
            } else {
                skip = false;
                out.push(ch);
            }
        }
        out
    };
    let found: Vec<Step> = enabled_steps(spec, m)
        .into_iter()
        .filter(|s| strip(&describe_step(spec, s)) == want)
        .collect();
    assert_eq!(found.len(), 1, "step {want} among {:?}", enabled_steps(spec, m).iter().map(|s| describe_step(spec, s)).collect::<Vec<_>>());
    found.into_iter().next().unwrap()
}

#[test]
fn factorial_initial_marking() {
    let spec = factorial();
    let m = initial_marking(&spec);
    assert_eq!(render(&spec, &m), "<p1:4,p2:1,p3:{},p4:0,p5:0>");
}

#[test]
fn factorial_recursive_sequence_replays() {
    let spec = factorial();
    let mut m = initial_marking(&spec);
    let script = [
        ("t1", "<p1:4,p2:0,p3:(F,<p6:1,p7:{},p8:0>),p4:0,p5:0>"),
        ("F.t4", "<p1:3,p2:0,p3:(F,<p6:0,p7:(F,<p6:1,p7:{},p8:0>),p8:0>),p4:0,p5:0>"),
        ("F.t5[F.t3]", "<p1:3,p2:0,p3:(F,<p6:0,p7:{},p8:1>),p4:0,p5:1>"),
        ("t2[F.t6]", "<p1:3,p2:0,p3:{},p4:1,p5:2>"),
    ];
    for (step, want) in script {
        let s = step_named(&spec, &m, step);
        m = apply_step(&spec, &m, &s).unwrap();
        assert_eq!(render(&spec, &m), want, "after {step}");
        type_check(&spec, &m).unwrap();
    }
    assert!(enabled_steps(&spec, &m).is_empty());
}

#[test]
fn factorial_short_sequence_replays() {
    let spec = factorial();
    let m = initial_marking(&spec);
    let m = apply_step(&spec, &m, &step_named(&spec, &m, "t1")).unwrap();
    let names: BTreeSet<String> = enabled_steps(&spec, &m)
        .iter()
        .map(|s| describe_step(&spec, s))
        .collect();
    assert_eq!(names.len(), 2);
    let m = apply_step(&spec, &m, &step_named(&spec, &m, "t2[F.t3]")).unwrap();
    assert_eq!(render(&spec, &m), "<p1:4,p2:0,p3:{},p4:1,p5:1>");
}

#[test]
fn initial_transition_bindings() {
    let spec = factorial();
    let m = initial_marking(&spec);
    let t1 = spec.find_transition("t1")[0];
    let t2 = spec.find_transition("t2")[0];
    assert_eq!(enabled_bindings(&spec, &m, &Path::default(), t1).unwrap(), vec![Binding::new()]);
    assert!(enabled_bindings(&spec, &m, &Path::default(), t2).unwrap().is_empty());
}

#[test]
fn stale_step_is_rejected() {
    let spec = factorial();
    let m0 = initial_marking(&spec);
    let s = step_named(&spec, &m0, "t1");
    let m1 = apply_step(&spec, &m0, &s).unwrap();
    assert!(matches!(apply_step(&spec, &m1, &s), Err(SemanticsError::NotEnabled(_))));
}

#[test]
fn multiset_aware_binding_dedup() {
    let spec = parse(
        r#"npn "b" {
          type Task { a, c, r }
          component SN system {
            place p2: Task init [a, a, c];
            place q: Task;
            trans t { in p2: [x:Task]; out q: [x]; }
          }
        }"#,
    )
    .unwrap();
    let m = initial_marking(&spec);
    let b = enabled_bindings(&spec, &m, &Path::default(), spec.find_transition("t")[0]).unwrap();
    let vals: Vec<&Token> = b.iter().map(|b| &b["x"]).collect();
    assert_eq!(vals, vec![&Token::Basic(0), &Token::Basic(1)]);
}

#[test]
fn anonymous_output_branches_over_colors() {
    let spec = parse(
        r#"npn "b" {
          type Task { a, c, r }
          component SN system {
            place s: dots init 1;
            place q: Task;
            trans t { in s: 1; out q: [_]; }
          }
        }"#,
    )
    .unwrap();
    let m = initial_marking(&spec);
    let outs: BTreeSet<String> = enabled_steps(&spec, &m)
        .iter()
        .map(|s| render(&spec, &apply_step(&spec, &m, s).unwrap()))
        .collect();
    assert_eq!(outs.len(), 3);
    assert!(outs.contains("<s:0,q:{r}>"));
}

fn agents(n: usize) -> NpnSpec {
    // n structurally distinct agents (k extra dots) at one place, ar(c) = 3
    let mut comps = String::new();
    let mut inits = Vec::new();
    for i in 0..n {
        comps.push_str(&format!(
            "component A{i} {{ place w: dots init {}; place d: dots; trans tc label c {{ in w: 1; out d: 1; }} }}\n",
            i + 1
        ));
        inits.push(format!("A{i}"));
    }
    let set: Vec<String> = (0..n).map(|i| format!("A{i}")).collect();
    parse(&format!(
        r#"npn "h" {{ label horizontal c: 3
          component SN system {{ place L: net<{}> init [{}]; }}
          {comps} }}"#,
        set.join(","),
        inits.join(",")
    ))
    .unwrap()
}

#[test]
fn horizontal_participant_sets() {
    for (n, want) in [(2usize, 0usize), (3, 1), (4, 4), (5, 10)] {
        let spec = agents(n);
        assert!(validate(&spec).is_empty());
        let m = initial_marking(&spec);
        let steps = enabled_steps(&spec, &m);
        assert_eq!(steps.len(), want, "{n} agents");
        for s in &steps {
            let Step::Horizontal { participants, .. } = s else { panic!() };
            let ids: BTreeSet<u32> = participants.iter().map(|p| p.rtid).collect();
            assert_eq!(ids.len(), 3);
        }
    }
}

#[test]
fn identical_tokens_can_synchronize() {
    let spec = parse(
        r#"npn "h" { label horizontal c: 2
          component SN system { place L: net<A> init [A, A, A]; }
          component A { place w: dots init 1; place d: dots; trans tc label c { in w: 1; out d: 1; } }
        }"#,
    )
    .unwrap();
    let m = initial_marking(&spec);
    let steps = enabled_steps(&spec, &m);
    assert_eq!(steps.len(), 1);
    let m = apply_step(&spec, &m, &steps[0]).unwrap();
    assert_eq!(
        render(&spec, &m),
        "<L:{(A,<w:0,d:1>),(A,<w:0,d:1>),(A,<w:1,d:0>)}>"
    );
}

#[test]
fn consuming_a_parent_removes_descendants() {
    let spec = parse(
        r#"npn "d" {
          component SN system {
            place s: dots init 1;
            place q: net<F>;
            place done: dots;
            trans mk { in s: 1; out q: [new F]; }
            trans kill { in q: [x:F]; out done: 1; }
          }
          component F {
            place a: dots init 1;
            place kids: net<G>;
            trans spawn { in a: 1; out kids: [new G]; }
          }
          component G { place g: dots init 2; }
        }"#,
    )
    .unwrap();
    assert!(validate(&spec).is_empty());
    let mut m = initial_marking(&spec);
    for name in ["mk", "F.spawn"] {
        m = apply_step(&spec, &m, &step_named(&spec, &m, name)).unwrap();
    }
    assert_eq!(m.net_tokens().len(), 2);
    m = apply_step(&spec, &m, &step_named(&spec, &m, "kill")).unwrap();
    assert_eq!(m.net_tokens().len(), 0);
    assert_eq!(render(&spec, &m), "<s:0,q:{},done:1>");
}

#[test]
fn firing_order_within_a_step_is_irrelevant() {
    let spec = factorial();
    let mut m = initial_marking(&spec);
    for name in ["t1", "F.t4", "F.t4"] {
        m = apply_step(&spec, &m, &step_named(&spec, &m, name)).unwrap();
    }
    for s in enabled_steps(&spec, &m) {
        let n = s.firings().len();
        let fwd: Vec<usize> = (0..n).collect();
        let rev: Vec<usize> = (0..n).rev().collect();
        let a = apply_step_ordered(&spec, &m, &s, &fwd).unwrap();
        let b = apply_step_ordered(&spec, &m, &s, &rev).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn inhibitor_blocks_when_marked() {
    let spec = parse(
        r#"npn "i" {
          component SN system {
            place s: dots init 1;
            place block: dots init 1;
            trans t { in s: 1; inhibit block; }
            trans u { in block: 1; }
          }
        }"#,
    )
    .unwrap();
    let m = initial_marking(&spec);
    let names: Vec<String> = enabled_steps(&spec, &m).iter().map(|s| describe_step(&spec, s)).collect();
    assert_eq!(names, vec!["u"]);
    let m = apply_step(&spec, &m, &step_named(&spec, &m, "u")).unwrap();
    let names: Vec<String> = enabled_steps(&spec, &m).iter().map(|s| describe_step(&spec, s)).collect();
    assert_eq!(names, vec!["t"]);
}
