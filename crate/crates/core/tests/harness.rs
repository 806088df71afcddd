//! The SPIN driver: report parsing, trail lifting, and the tool pipeline
//! against stand-in tools. Tests needing a real SPIN skip without one.

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use nestpn_core::codegen::*;
use nestpn_core::explorer::ExploreLimits;
use nestpn_core::harness::*;
use nestpn_core::semantics::describe_step;
use nestpn_core::*;

fn load(name: &str) -> NpnSpec {
    let path = format!("{}/../../nets/{name}.npn", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const NO_ERRORS: &str = "\
(Spin Version 6.5.2 -- 6 December 2019)
\t+ Partial Order Reduction

Full statespace search for:
\tnever claim         \t- (none specified)
\tassertion violations\t+
\tacceptance   cycles \t- (not selected)
\tinvalid end states\t+

State-vector 116 byte, depth reached 61, errors: 0
      187 states, stored
      101 states, matched
      288 transitions (= stored+matched)
       14 atomic steps
hash conflicts:         0 (resolved)

Stats on memory usage (in Megabytes):
    0.027\tequivalent memory usage for states (stored*(State-vector + overhead))
    0.286\tactual memory usage for states
  128.000\tmemory used for hash table (-w24)
    0.534\tmemory used for DFS stack (-m10000)
  128.730\ttotal actual memory usage


unreached in proctype EN_F
\tmodel.pml:112, state 40, \"-end-\"
\t(1 of 40 states)
unreached in init
\t(0 of 25 states)

pan: elapsed time 0 seconds
";

fn violation(first: &str) -> String {
    format!(
        "{first}\npan: wrote model.pml.trail\n\n(Spin Version 6.5.2 -- 6 December 2019)\n\
         Warning: Search not completed\n\nState-vector 124 byte, depth reached 23, errors: 1\n       \
         40 states, stored\n  128.730\ttotal actual memory usage\n"
    )
}

#[test]
fn parses_verifier_reports() {
    let r = parse_pan_output(NO_ERRORS, false);
    assert_eq!(r.outcome, Outcome::NoErrors);
    assert_eq!(r.states_stored, Some(187));
    assert_eq!(r.depth_reached, Some(61));
    assert_eq!(r.memory_mb, Some(128.73));
    assert_eq!(r.unreached_states, vec!["proctype EN_F: model.pml:112, state 40, \"-end-\"".to_string()]);
    assert!(r.trail.is_none());

    let cases = [
        ("pan:1: invalid end state (at depth 23)", false, Outcome::InvalidEndState),
        ("pan:1: assertion violated (p5<=4) (at depth 12)", false, Outcome::AssertionViolation),
        ("pan:1: acceptance cycle (at depth 8)", false, Outcome::AcceptanceCycle),
        ("pan:1: acceptance cycle (at depth 8)", true, Outcome::LtlViolation),
        ("pan:1: claim violated! (at depth 5)", false, Outcome::LtlViolation),
    ];
    for (first, claim, want) in cases {
        let r = parse_pan_output(&violation(first), claim);
        assert_eq!(r.outcome, want, "{first}");
        assert_eq!((r.states_stored, r.depth_reached), (Some(40), Some(23)));
    }
    assert_eq!(parse_pan_output("pan: out of memory\n", false).outcome, Outcome::ToolError);
    let junk = parse_pan_output("segmentation fault\n", false);
    assert_eq!(junk.outcome, Outcome::ToolError);
    assert_eq!(junk.raw, "segmentation fault\n");
}

const REPLAY: &str = "\
  1:\tproc  0 (:init::1) model.pml:150 (state 1)\t[p2 > 0]
                  @FIRE SN t1
  2:\tproc  0 (:init::1) model.pml:155 (state 6)\t[printf('@FIRE SN t1\\n')]
                      @FIRE F t4
  <<<<<START OF CYCLE>>>>>
                      @FIRE F t3
                      @FIRE F t5
              @FIRE SN t2
                      @FIRE F t6
spin: trail ends after 40 steps
";

#[test]
fn extracts_markers() {
    let (m, cycle) = extract_markers(REPLAY);
    assert_eq!(m, ["@FIRE SN t1", "@FIRE F t4", "@FIRE F t3", "@FIRE F t5", "@FIRE SN t2", "@FIRE F t6"]);
    assert_eq!(cycle, Some(2));
}

#[test]
fn lifts_markers_to_npn_steps() {
    let spec = load("factorial");
    let model = translate(&spec, &CodegenOptions::default()).unwrap();
    let (markers, _) = extract_markers(REPLAY);
    let lifted = lift_trail(&spec, &model, markers, None);
    assert_eq!(lifted.lifted, 6);
    let trace = lifted.trace.unwrap();
    let names: Vec<String> = trace.steps.iter().map(|s| describe_step(&spec, s)).collect();
    assert_eq!(names, ["t1", "F#1.t4", "F#1.t5[F#2.t3]", "t2[F#1.t6]"]);
    // the lifted trace replays through the semantics
    for (k, s) in trace.steps.iter().enumerate() {
        let next = semantics::apply_step(&spec, &trace.states[k], s).unwrap();
        assert_eq!(next, trace.states[k + 1]);
    }
}

#[test]
fn lifting_stops_at_unexplained_markers() {
    let spec = load("factorial");
    let model = translate(&spec, &CodegenOptions::default()).unwrap();
    let markers: Vec<String> = ["@FIRE SN t1", "@FIRE F t6", "@FIRE SN t1"].map(String::from).to_vec();
    let lifted = lift_trail(&spec, &model, markers, None);
    assert_eq!(lifted.lifted, 1);
    assert_eq!(lifted.trace.unwrap().steps.len(), 1);
}

/// Stand-in tools: `spin -a` writes a `pan.c` printing a canned report,
/// `spin -t` prints a canned replay.
struct FakeTools {
    _dir: tempfile::TempDir,
    spin: PathBuf,
}

fn script(path: &Path, body: &str) {
    std::fs::write(path, format!("#!/bin/sh\n{body}")).unwrap();
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755)).unwrap();
}

fn fake_tools(report: &str, replay: &str) -> FakeTools {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.txt");
    let rep = dir.path().join("replay.txt");
    std::fs::write(&out, report).unwrap();
    std::fs::write(&rep, replay).unwrap();
    let pan_c = format!(
        "#include <stdio.h>\nint main(void) {{ FILE *f = fopen(\"{}\", \"r\"); int c; \
         while ((c = fgetc(f)) != EOF) putchar(c); return 0; }}\n",
        out.display()
    );
    std::fs::write(dir.path().join("pan.c.in"), pan_c).unwrap();
    let spin = dir.path().join("spin");
    script(
        &spin,
        &format!(
            "case \"$1\" in\n\
             -a) if grep -q GARBAGE \"$2\"; then echo \"spin: $2:1, Error: syntax error\tsaw 'an identifier'\"; exit 1; fi\n\
             \x20   cp {} pan.c ;;\n\
             -t) cat {} ;;\n\
             esac\n",
            dir.path().join("pan.c.in").display(),
            rep.display()
        ),
    );
    FakeTools { _dir: dir, spin }
}

fn have_cc() -> bool {
    SpinRunConfig::default().cc().is_ok()
}

#[test]
fn pipeline_with_stand_in_tools() {
    if !have_cc() {
        eprintln!("SKIP: no C compiler");
        return;
    }
    let spec = load("factorial");
    let model = translate(&spec, &CodegenOptions::default()).unwrap();

    let tools = fake_tools(NO_ERRORS, "");
    let cfg = SpinRunConfig {
        spin_path: Some(tools.spin.clone()),
        ..Default::default()
    };
    let r = run_verification(&spec, &model, &cfg).unwrap();
    assert_eq!(r.outcome, Outcome::NoErrors);
    assert!(r.trail.is_none());

    let tools = fake_tools(&violation("pan:1: invalid end state (at depth 23)"), REPLAY);
    let cfg = SpinRunConfig {
        spin_path: Some(tools.spin.clone()),
        ..Default::default()
    };
    let r = run_verification(&spec, &model, &cfg).unwrap();
    assert_eq!(r.outcome, Outcome::InvalidEndState);
    let trail = r.trail.unwrap();
    assert_eq!(trail.lifted, 6);
    assert_eq!(trail.cycle_start, Some(2));

    // a model SPIN rejects
    let mut bad = model.clone();
    bad.source.push_str("GARBAGE\n");
    let r = run_verification(&spec, &bad, &cfg).unwrap();
    assert_eq!(r.outcome, Outcome::ToolError);
    assert!(r.raw.contains("syntax error"));
}

#[test]
fn tool_failures() {
    let spec = load("factorial");
    let model = translate(&spec, &CodegenOptions::default()).unwrap();
    let missing = SpinRunConfig {
        spin_path: Some("/nonexistent/spin".into()),
        ..Default::default()
    };
    assert!(matches!(run_verification(&spec, &model, &missing), Err(HarnessError::ToolNotFound(_))));

    let tools = fake_tools(NO_ERRORS, "");
    let zero = SpinRunConfig {
        spin_path: Some(tools.spin.clone()),
        timeout_seconds: 0,
        ..Default::default()
    };
    assert!(matches!(run_verification(&spec, &model, &zero), Err(HarnessError::Config(_))));

    let broken_cc = tools.spin.with_file_name("cc-broken");
    script(&broken_cc, "echo 'pan.c:1: error: boom' >&2\nexit 1\n");
    let cfg = SpinRunConfig {
        spin_path: Some(tools.spin.clone()),
        cc_path: Some(broken_cc),
        ..Default::default()
    };
    match run_verification(&spec, &model, &cfg) {
        Err(HarnessError::CompileFailed(msg)) => assert!(msg.contains("boom")),
        other => panic!("{other:?}"),
    }

    let slow = tools.spin.with_file_name("spin-slow");
    script(&slow, "sleep 5\n");
    let cfg = SpinRunConfig {
        spin_path: Some(slow),
        timeout_seconds: 1,
        ..Default::default()
    };
    assert!(matches!(run_verification(&spec, &model, &cfg), Err(HarnessError::Timeout(_))));
}

#[test]
fn valuation_expressions() {
    let spec = load("factorial");
    let m = semantics::initial_marking(&spec);
    let e = valuation_expr(&spec, &m);
    assert!(e.starts_with("(p1 == 4 && p2 == 1 && c_expr{ numMsg(qptr(now.p3.d - 1), 255) == 0 }"));
}

// ---------------------------------------------------------------------------
// with a real SPIN

fn spin_or_skip() -> bool {
    if spin_available() {
        true
    } else {
        eprintln!("SKIP: no SPIN binary");
        false
    }
}

#[test]
fn spin_factorial_safety() {
    if !spin_or_skip() {
        return;
    }
    let spec = load("factorial");
    for v in Variant::ALL {
        let model = translate(&spec, &CodegenOptions::new(v)).unwrap();
        let r = run_verification(&spec, &model, &SpinRunConfig::default()).unwrap();
        assert_eq!(r.outcome, Outcome::NoErrors, "{v}: {}", r.raw);
    }
}

#[test]
fn spin_unbounded_factorial() {
    if !spin_or_skip() {
        return;
    }
    let spec = load("factorial_unbounded");
    let model = translate(&spec, &CodegenOptions::default()).unwrap();
    let r = run_verification(&spec, &model, &SpinRunConfig::default()).unwrap();
    assert_eq!(r.outcome, Outcome::InvalidEndState, "{}", r.raw);
    let trace = r.trail.unwrap().trace.unwrap();
    let names: Vec<String> = trace.steps.iter().take(3).map(|s| describe_step(&spec, s)).collect();
    assert_eq!(names[0], "t1");
    assert!(names[1..].iter().all(|n| n.ends_with(".t4")), "{names:?}");
}

#[test]
fn spin_rejects_garbage() {
    if !spin_or_skip() {
        return;
    }
    let spec = load("factorial");
    let mut model = translate(&spec, &CodegenOptions::default()).unwrap();
    model.source = "proctype { garbage".into();
    let r = run_verification(&spec, &model, &SpinRunConfig::default()).unwrap();
    assert_eq!(r.outcome, Outcome::ToolError);
}

#[test]
fn spin_crosscheck_detects_dropped_conflict_removal() {
    if !spin_or_skip() {
        return;
    }
    let spec = parse(&std::fs::read_to_string(format!("{}/../../nets/factorial.npn", env!("CARGO_MANIFEST_DIR"))).unwrap().replace("init 4", "init 2")).unwrap();
    let opts = CodegenOptions::default();
    let limits = ExploreLimits::default();
    let ok = crosscheck(&spec, &opts, &limits, &SpinRunConfig::default()).unwrap();
    assert!(ok.agree(), "{:?}", ok.disagreements);
    let drop_rm_conf = |m: &mut PromelaModel| {
        let start = m.source.find("inline rmConf(k) {").unwrap();
        let end = start + m.source[start..].find("fi }").unwrap() + 4;
        m.source.replace_range(start..end, "inline rmConf(k) { skip }");
    };
    let broken = crosscheck_with(&spec, &opts, &limits, &SpinRunConfig::default(), &drop_rm_conf).unwrap();
    assert!(!broken.agree());
}
