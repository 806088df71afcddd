//! Driver for the external SPIN model checker.
//!
//! A run generates the verifier (`spin -a`), compiles it (`cc`), executes
//! `pan`, and on a violation replays the trail (`spin -t -p`). The printf
//! markers of the replay are lifted back to an NPN firing sequence by a
//! guided search over the native semantics.
//!
//! Everything happens inside a per-run temporary directory. The tool paths
//! come from the configuration, then from `NESTPN_SPIN` / `NESTPN_CC`, then
//! from `PATH`.

use std::collections::HashSet;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::codegen::{marker, translate, CodegenError, CodegenOptions, PromelaModel, Property, Variant};
use crate::explorer::{explore, termination_verdict, ExploreLimits, Trace, Verdict};
use crate::model::*;
use crate::semantics::{apply_step, enabled_steps, initial_marking, Marking, Step, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RunMode {
    /// Invalid end states and assertions (phase 1).
    #[default]
    Safety,
    /// Acceptance cycles, `pan -a` (phase 2).
    AcceptanceCycles,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinRunConfig {
    pub spin_path: Option<PathBuf>,
    pub cc_path: Option<PathBuf>,
    /// Extra compile flags, e.g. `-DVECTORSZ=2048`, `-DCOLLAPSE`, `-DBITSTATE`.
    pub compile_flags: Vec<String>,
    pub mode: RunMode,
    /// Extra verifier options, e.g. `-m100000`.
    pub run_options: Vec<String>,
    pub timeout_seconds: u64,
}

impl Default for SpinRunConfig {
    fn default() -> Self {
        SpinRunConfig {
            spin_path: None,
            cc_path: None,
            compile_flags: Vec::new(),
            mode: RunMode::Safety,
            run_options: vec!["-m1000000".into()],
            timeout_seconds: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    NoErrors,
    InvalidEndState,
    AssertionViolation,
    AcceptanceCycle,
    LtlViolation,
    Timeout,
    ToolError,
}

impl Outcome {
    pub fn is_violation(self) -> bool {
        matches!(
            self,
            Outcome::InvalidEndState | Outcome::AssertionViolation | Outcome::AcceptanceCycle | Outcome::LtlViolation
        )
    }
}

/// Counterexample of a violation: the raw markers and their lifting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LiftedTrail {
    /// `@FIRE` markers in execution order.
    pub markers: Vec<String>,
    /// Index into `markers` where the accepting cycle starts.
    pub cycle_start: Option<usize>,
    /// Longest NPN firing sequence explaining a prefix of `markers`.
    pub trace: Option<Trace>,
    /// Number of markers explained by `trace`.
    pub lifted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinReport {
    pub outcome: Outcome,
    pub states_stored: Option<u64>,
    pub depth_reached: Option<u64>,
    pub memory_mb: Option<f64>,
    /// Present exactly when the outcome is a violation.
    pub trail: Option<LiftedTrail>,
    pub unreached_states: Vec<String>,
    /// Captured output of the failing or final tool.
    pub raw: String,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("tool not found: {0}")]
    ToolNotFound(String),
    #[error("compiling the verifier failed:\n{0}")]
    CompileFailed(String),
    #[error("{0} timed out")]
    Timeout(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn find_in_path(name: &str) -> Option<PathBuf> {
    let p = Path::new(name);
    if p.components().count() > 1 {
        return p.is_file().then(|| p.to_path_buf());
    }
    std::env::split_paths(&std::env::var_os("PATH")?)
        .map(|d| d.join(name))
        .find(|c| c.is_file())
}

fn resolve(given: &Option<PathBuf>, env: &str, default: &str) -> Result<PathBuf, HarnessError> {
    let want = given
        .clone()
        .or_else(|| std::env::var_os(env).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default));
    find_in_path(&want.to_string_lossy()).ok_or_else(|| HarnessError::ToolNotFound(want.display().to_string()))
}

impl SpinRunConfig {
    pub fn spin(&self) -> Result<PathBuf, HarnessError> {
        resolve(&self.spin_path, "NESTPN_SPIN", "spin")
    }

    pub fn cc(&self) -> Result<PathBuf, HarnessError> {
        resolve(&self.cc_path, "NESTPN_CC", "cc")
    }
}

/// Whether a SPIN binary can be found (config-free discovery).
pub fn spin_available() -> bool {
    SpinRunConfig::default().spin().is_ok()
}

struct Captured {
    status: Option<i32>,
    text: String,
}

fn run_tool(cmd: &mut Command, timeout: Duration) -> Result<Option<Captured>, HarnessError> {
    let mut child = cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn()?;
    let mut out = child.stdout.take().expect("piped");
    let mut err = child.stderr.take().expect("piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = out.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = err.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break st;
        }
        if start.elapsed() > timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let mut text = reader.join().unwrap_or_default();
    text.push_str(&err_reader.join().unwrap_or_default());
    Ok(Some(Captured {
        status: status.code(),
        text,
    }))
}

/// Generate, compile and run the verifier for `model`.
pub fn run_verification(spec: &NpnSpec, model: &PromelaModel, config: &SpinRunConfig) -> Result<SpinReport, HarnessError> {
    if config.timeout_seconds == 0 {
        return Err(HarnessError::Config("timeout must be positive".into()));
    }
    let spin = config.spin()?;
    let cc = config.cc()?;
    let timeout = Duration::from_secs(config.timeout_seconds);
    let dir = tempfile::tempdir()?;
    let pml = dir.path().join("model.pml");
    std::fs::write(&pml, &model.source)?;

    let gen = run_tool(Command::new(&spin).current_dir(dir.path()).args(["-a", "model.pml"]), timeout)?
        .ok_or_else(|| HarnessError::Timeout("spin -a".into()))?;
    if gen.status != Some(0) || !dir.path().join("pan.c").exists() || gen.text.contains("syntax error") {
        return Ok(tool_error(gen.text));
    }

    let mut cc_cmd = Command::new(&cc);
    cc_cmd.current_dir(dir.path()).args(["-O2", "-w", "-o", "pan", "pan.c"]);
    if model.variant != Variant::NoPriorities && !config.compile_flags.iter().any(|f| f == "-DNOREDUCE") {
        cc_cmd.arg("-DNOREDUCE");
    }
    cc_cmd.args(&config.compile_flags);
    let built = run_tool(&mut cc_cmd, timeout)?.ok_or_else(|| HarnessError::Timeout("cc".into()))?;
    if built.status != Some(0) {
        return Err(HarnessError::CompileFailed(built.text));
    }

    let has_claim = model.source.contains("\nltl ");
    let mut pan = Command::new(dir.path().join("pan"));
    pan.current_dir(dir.path());
    match config.mode {
        RunMode::Safety if has_claim => {
            pan.arg("-noclaim");
        }
        RunMode::Safety => {}
        RunMode::AcceptanceCycles => {
            pan.arg("-a");
        }
    }
    pan.args(&config.run_options);
    let Some(ran) = run_tool(&mut pan, timeout)? else {
        return Ok(SpinReport {
            outcome: Outcome::Timeout,
            states_stored: None,
            depth_reached: None,
            memory_mb: None,
            trail: None,
            unreached_states: Vec::new(),
            raw: String::new(),
        });
    };
    let mut report = parse_pan_output(&ran.text, has_claim && config.mode == RunMode::AcceptanceCycles);
    if report.outcome.is_violation() {
        let replay = run_tool(
            Command::new(&spin).current_dir(dir.path()).args(["-t", "-p", "model.pml"]),
            timeout,
        )?
        .ok_or_else(|| HarnessError::Timeout("spin -t".into()))?;
        let (markers, cycle_start) = extract_markers(&replay.text);
        report.trail = Some(lift_trail(spec, model, markers, cycle_start));
    }
    Ok(report)
}

fn tool_error(raw: String) -> SpinReport {
    SpinReport {
        outcome: Outcome::ToolError,
        states_stored: None,
        depth_reached: None,
        memory_mb: None,
        trail: None,
        unreached_states: Vec::new(),
        raw,
    }
}

/// Number directly in front of `key` on the same line, e.g. `"41 states, stored"`.
fn number_before(text: &str, key: &str) -> Option<f64> {
    let at = text.find(key)?;
    let head = text[..at].trim_end();
    let start = head.rfind(|c: char| c.is_whitespace()).map_or(0, |i| i + 1);
    head[start..].parse().ok()
}

fn number_after(text: &str, key: &str) -> Option<f64> {
    let at = text.find(key)? + key.len();
    let tail = text[at..].trim_start();
    let end = tail.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(tail.len());
    tail[..end].parse().ok()
}

/// Reads the verifier's report. Only stable substrings are relied upon;
/// anything unrecognized becomes [`Outcome::ToolError`].
pub fn parse_pan_output(raw: &str, claim_active: bool) -> SpinReport {
    // verdict lines start with "pan:"; the search-mode header mentions the
    // same phrases and must not count
    let pan_lines: String = raw
        .lines()
        .filter(|l| l.trim_start().starts_with("pan"))
        .map(|l| l.to_lowercase() + "\n")
        .collect();
    let says = |s: &str| pan_lines.contains(s);
    let errors = number_after(raw, "errors:");
    let outcome = if says("out of memory") {
        Outcome::ToolError
    } else if says("claim violated") {
        Outcome::LtlViolation
    } else if says("acceptance cycle") {
        if claim_active {
            Outcome::LtlViolation
        } else {
            Outcome::AcceptanceCycle
        }
    } else if says("assertion violated") {
        Outcome::AssertionViolation
    } else if says("invalid end state") {
        Outcome::InvalidEndState
    } else if errors == Some(0.0) {
        Outcome::NoErrors
    } else {
        Outcome::ToolError
    };
    let mut unreached = Vec::new();
    let mut proc_name = None;
    for line in raw.lines() {
        if let Some(rest) = line.trim().strip_prefix("unreached in ") {
            proc_name = Some(rest.trim().to_string());
        } else if let Some(p) = &proc_name {
            let t = line.trim();
            if t.contains(", state ") {
                unreached.push(format!("{p}: {t}"));
            } else if !t.starts_with('(') {
                proc_name = None;
            }
        }
    }
    SpinReport {
        outcome,
        states_stored: number_before(raw, "states, stored").map(|n| n as u64),
        depth_reached: number_after(raw, "depth reached").map(|n| n as u64),
        memory_mb: number_before(raw, "total actual memory usage"),
        trail: None,
        unreached_states: unreached,
        raw: raw.to_string(),
    }
}

/// Markers printed during a trail replay, and the index where an accepting
/// cycle starts (if the replay shows one).
pub fn extract_markers(replay: &str) -> (Vec<String>, Option<usize>) {
    let mut markers = Vec::new();
    let mut cycle = None;
    for line in replay.lines() {
        let t = line.trim();
        if t.contains("START OF CYCLE") {
            cycle = Some(markers.len());
        } else if t.starts_with("@FIRE ") {
            markers.push(t.to_string());
        }
    }
    (markers, cycle)
}

fn step_markers(spec: &NpnSpec, step: &Step) -> Vec<String> {
    let mut v: Vec<String> = step.firings().iter().map(|(_, f)| marker(spec, f.transition)).collect();
    v.sort();
    v
}

/// Lifts markers to an NPN firing sequence. Markers of one step appear
/// contiguously, in an order that depends on scheduling; a search with
/// backtracking picks, at each state, an enabled step whose markers form
/// the next block.
pub fn lift_trail(spec: &NpnSpec, model: &PromelaModel, markers: Vec<String>, cycle_start: Option<usize>) -> LiftedTrail {
    let known: Vec<String> = markers
        .iter()
        .filter(|m| model.step_map.contains_key(m.as_str()))
        .cloned()
        .collect();
    let mut search = Lift {
        spec,
        markers: &known,
        failed: HashSet::new(),
        budget: 200_000,
        best: (0, Vec::new(), Vec::new()),
    };
    let m0 = initial_marking(spec);
    let mut steps = Vec::new();
    let mut states = vec![m0.clone()];
    search.go(&m0, 0, &mut steps, &mut states);
    let (lifted, steps, states) = search.best;
    LiftedTrail {
        markers,
        cycle_start,
        trace: Some(Trace {
            steps,
            states: if states.is_empty() { vec![m0] } else { states },
        }),
        lifted,
    }
}

struct Lift<'s> {
    spec: &'s NpnSpec,
    markers: &'s [String],
    failed: HashSet<(Vec<u8>, usize)>,
    budget: usize,
    best: (usize, Vec<Step>, Vec<Marking>),
}

impl Lift<'_> {
    fn go(&mut self, m: &Marking, i: usize, steps: &mut Vec<Step>, states: &mut Vec<Marking>) -> bool {
        if i > self.best.0 || self.best.2.is_empty() {
            self.best = (i, steps.clone(), states.clone());
        }
        if i == self.markers.len() {
            return true;
        }
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        let mut key = Vec::new();
        crate::semantics::encode_marking(m, &mut key);
        if self.failed.contains(&(key.clone(), i)) {
            return false;
        }
        for s in enabled_steps(self.spec, m) {
            let want = step_markers(self.spec, &s);
            let k = want.len();
            if i + k > self.markers.len() {
                continue;
            }
            let mut got: Vec<String> = self.markers[i..i + k].to_vec();
            got.sort();
            if got != want {
                continue;
            }
            let Ok(next) = apply_step(self.spec, m, &s) else { continue };
            steps.push(s);
            states.push(next.clone());
            if self.go(&next, i + k, steps, states) {
                return true;
            }
            steps.pop();
            states.pop();
        }
        self.failed.insert((key, i));
        false
    }
}

// ---------------------------------------------------------------------------
// crosscheck

/// PROMELA condition that holds exactly when the system places carry the
/// counts of `m` (colors per value; net tokens by their at-place messages).
pub fn valuation_expr(spec: &NpnSpec, m: &Marking) -> String {
    let mut parts = Vec::new();
    for (p, toks) in spec.system().places.iter().zip(&m.places) {
        match &p.ty {
            PlaceType::Basic(DOTS) => parts.push(format!("{} == {}", p.name, toks.len())),
            PlaceType::Basic(ty) => {
                parts.push(format!("len({}.d) == {}", p.name, toks.len()));
                for c in 0..spec.color_types[*ty].values.len() {
                    let k = toks.iter().filter(|t| matches!(t, Token::Basic(v) if *v as usize == c)).count();
                    parts.push(format!("c_expr{{ numTok(qptr(now.{}.d - 1), {c}) == {k} }}", p.name));
                }
            }
            PlaceType::Net(_) => {
                parts.push(format!("c_expr{{ numMsg(qptr(now.{}.d - 1), 255) == {} }}", p.name, toks.len()))
            }
        }
    }
    if parts.is_empty() {
        "true".into()
    } else {
        format!("({})", parts.join(" && "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disagreement {
    pub aspect: String,
    pub native: String,
    pub spin: String,
    /// Shortest native trace or lifted SPIN trail illustrating it.
    pub witness: Option<Trace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub variant: Variant,
    pub native_termination: String,
    pub spin_termination: Outcome,
    pub dead_states: usize,
    pub disagreements: Vec<Disagreement>,
}

impl CrosscheckReport {
    pub fn agree(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Runs the explorer and SPIN on the same net and compares (i) the
/// termination class, (ii) the system-place valuations of dead states and
/// (iii) bound assertions listed in `options.properties`.
pub fn crosscheck(
    spec: &NpnSpec,
    options: &CodegenOptions,
    limits: &ExploreLimits,
    config: &SpinRunConfig,
) -> Result<CrosscheckReport, HarnessError> {
    crosscheck_with(spec, options, limits, config, &|_| {})
}

/// [`crosscheck`] with a hook applied to every generated model before it is
/// verified; used to check that broken translations are caught.
pub fn crosscheck_with(
    spec: &NpnSpec,
    options: &CodegenOptions,
    limits: &ExploreLimits,
    config: &SpinRunConfig,
    mutate: &dyn Fn(&mut PromelaModel),
) -> Result<CrosscheckReport, HarnessError> {
    let build = |o: &CodegenOptions| -> Result<PromelaModel, HarnessError> {
        let mut m = translate(spec, o)?;
        mutate(&mut m);
        Ok(m)
    };
    let g = explore(spec, limits);
    let native = termination_verdict(spec, &g);
    let mut out = CrosscheckReport {
        variant: options.variant,
        native_termination: native.name().into(),
        spin_termination: Outcome::ToolError,
        dead_states: 0,
        disagreements: Vec::new(),
    };

    // (i) termination: acceptance cycles through the `init` loop
    let mut o = options.clone();
    o.properties.push(Property::AcceptanceLabel);
    let model = build(&o)?;
    let cfg = SpinRunConfig {
        mode: RunMode::AcceptanceCycles,
        ..config.clone()
    };
    let rep = run_verification(spec, &model, &cfg)?;
    out.spin_termination = rep.outcome;
    let native_terminates = matches!(native, Verdict::Terminating);
    let native_diverges = matches!(native, Verdict::InfiniteRun { .. });
    let spin_terminates = rep.outcome == Outcome::NoErrors;
    if (native_terminates && !spin_terminates) || (native_diverges && spin_terminates) {
        out.disagreements.push(Disagreement {
            aspect: "termination".into(),
            native: native.name().into(),
            spin: format!("{:?}", rep.outcome),
            witness: rep.trail.and_then(|t| t.trace),
        });
    }

    // (ii) dead states, only meaningful on a complete graph
    if g.is_complete() {
        let dead: Vec<&Marking> = g.dead_markings();
        out.dead_states = dead.len();
        let any: Vec<String> = dead.iter().map(|m| valuation_expr(spec, m)).collect();
        let any = if any.is_empty() { "false".to_string() } else { any.join(" || ") };
        // every SPIN deadlock is a native dead valuation
        let rep = check_deadlock(spec, options, &any, config, &build)?;
        if rep.outcome != Outcome::NoErrors {
            out.disagreements.push(Disagreement {
                aspect: "dead states".into(),
                native: format!("{} dead markings", dead.len()),
                spin: format!("{:?}: deadlock outside the native set", rep.outcome),
                witness: rep.trail.and_then(|t| t.trace),
            });
        }
        // every native dead valuation is reached by SPIN
        for (n, m) in g.dead_nodes().into_iter().zip(&dead) {
            let cond = format!("!{}", valuation_expr(spec, m));
            let rep = check_deadlock(spec, options, &cond, config, &build)?;
            if rep.outcome != Outcome::AssertionViolation {
                out.disagreements.push(Disagreement {
                    aspect: "dead states".into(),
                    native: crate::semantics::render(spec, m),
                    spin: format!("{:?}: valuation not reached", rep.outcome),
                    witness: Some(g.trace_to(spec, n)),
                });
            }
        }
    }

    // (iii) bounds
    for p in &options.properties {
        if let Property::BoundAssert { place, bound } = p {
            let native = crate::explorer::check_bounded(spec, limits, place, *bound as usize)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let model = build(options)?;
            let rep = run_verification(spec, &model, config)?;
            let native_bad = matches!(native, Verdict::Unbounded { .. } | Verdict::CounterExample { .. });
            let spin_bad = rep.outcome == Outcome::AssertionViolation;
            if native_bad != spin_bad {
                out.disagreements.push(Disagreement {
                    aspect: format!("bound {place} <= {bound}"),
                    native: native.name().into(),
                    spin: format!("{:?}", rep.outcome),
                    witness: rep.trail.and_then(|t| t.trace),
                });
            }
        }
    }
    Ok(out)
}

fn check_deadlock(
    spec: &NpnSpec,
    options: &CodegenOptions,
    cond: &str,
    config: &SpinRunConfig,
    build: &dyn Fn(&CodegenOptions) -> Result<PromelaModel, HarnessError>,
) -> Result<SpinReport, HarnessError> {
    let mut o = options.clone();
    o.properties.retain(|p| !matches!(p, Property::BoundAssert { .. } | Property::Ltl { .. }));
    o.properties.push(Property::DeadlockAssert { text: cond.to_string() });
    let model = build(&o)?;
    let cfg = SpinRunConfig {
        mode: RunMode::Safety,
        ..config.clone()
    };
    run_verification(spec, &model, &cfg)
}
