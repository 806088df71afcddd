//! Command-line front end: `parse`, `simulate`, `explore`, `check`,
//! `translate`, `verify` and `serve`.
//!
//! Exit codes: 0 on success or when the checked property holds, 1 when a
//! violation was found (the trace is printed), 2 on usage, input or tool
//! errors. Diagnostics go to standard error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nestpn_core::codegen::{translate, Census, CodegenOptions, OptFlags, Property, Variant};
use nestpn_core::explorer::{self, ExploreLimits, Mode, Trace, Verdict};
use nestpn_core::format::json::{export_graph, export_trace, trace_json, verdict_json};
use nestpn_core::harness::{self, RunMode, SpinRunConfig};
use nestpn_core::predicate::Predicate;
use nestpn_core::semantics::{describe_step, render};
use nestpn_core::{parse, serialize, validate, NpnSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub mod serve;
pub mod session;

use session::Session;

#[derive(Parser, Debug)]
#[command(name = "nestpn", version, about = "Nested Petri net workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a net; prints the canonical text.
    Parse {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Fire a scripted, random or interactive sequence of steps.
    Simulate(SimulateArgs),
    /// Build the reachability graph and summarize it.
    Explore {
        file: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
        /// Print the whole graph as JSON.
        #[arg(long)]
        graph: bool,
        #[arg(long)]
        json: bool,
    },
    /// Check a property with the native explorer.
    Check(CheckArgs),
    /// Translate to PROMELA.
    Translate {
        file: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the model with its tables as JSON instead of the source.
        #[arg(long)]
        json: bool,
    },
    /// Translate, then verify with SPIN.
    Verify(VerifyArgs),
    /// Serve the JSON API for an interactive session.
    Serve {
        file: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Args, Debug, Clone)]
pub struct LimitArgs {
    #[arg(long)]
    pub max_states: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub max_net_tokens: Option<usize>,
    #[arg(long)]
    pub max_tokens_per_place: Option<usize>,
}

impl LimitArgs {
    fn limits(&self) -> ExploreLimits {
        let d = ExploreLimits::default();
        ExploreLimits {
            max_states: self.max_states.unwrap_or(d.max_states),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            max_net_tokens: self.max_net_tokens.unwrap_or(d.max_net_tokens),
            max_tokens_per_place: self.max_tokens_per_place.unwrap_or(d.max_tokens_per_place),
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    file: PathBuf,
    /// Comma-separated steps, e.g. `t1,t4,t5|t3`.
    #[arg(long)]
    script: Option<String>,
    /// Random run: number of steps (stops early at a dead marking).
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Choose steps from standard input.
    #[arg(long, short)]
    interactive: bool,
    #[arg(long)]
    json: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Every run ends in a dead marking.
    Termination,
    /// Each `--bound place=n` holds in every reachable marking.
    Bounded,
    /// `--pred` holds in every reachable marking.
    Invariant,
    /// `--pred` holds in some reachable marking.
    Reachable,
    /// `--pred` holds in every dead marking of a terminating net.
    Dead,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    mode: CheckMode,
    file: PathBuf,
    #[arg(long)]
    pred: Option<String>,
    /// Place whose initial count `a` denotes in predicates.
    #[arg(long)]
    snapshot: Option<String>,
    #[arg(long, value_parser = parse_bound)]
    bound: Vec<(String, u32)>,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long, default_value = "priorities")]
    variant: Variant,
    /// Optimizations, comma-separated, or `all`.
    #[arg(long)]
    opt: Option<String>,
    #[arg(long)]
    ltl: Vec<String>,
    #[arg(long, value_parser = parse_bound)]
    bound: Vec<(String, u32)>,
    /// Declare the counters `a` and `f`.
    #[arg(long)]
    counters: bool,
    /// Label the `init` loop as accepting.
    #[arg(long)]
    accept: bool,
    #[arg(long)]
    max_tok: Option<usize>,
    #[arg(long)]
    max_msg: Option<usize>,
    /// Use `bit` for places that never exceed one token.
    #[arg(long)]
    narrow: bool,
    /// Skip the exploration that sizes channels from actual token counts.
    #[arg(long)]
    no_census: bool,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    Safety,
    Acceptance,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    file: PathBuf,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, value_enum, default_value = "safety")]
    mode: VerifyMode,
    #[arg(long)]
    spin: Option<PathBuf>,
    #[arg(long)]
    cc: Option<PathBuf>,
    /// Extra compile flag for the verifier, e.g. `-DCOLLAPSE`.
    #[arg(long = "cflag", allow_hyphen_values = true)]
    cflags: Vec<String>,
    #[arg(long, default_value_t = 300)]
    timeout: u64,
    /// Compare SPIN with the native explorer instead of a single run.
    #[arg(long)]
    crosscheck: bool,
    #[arg(long)]
    json: bool,
}

fn parse_bound(s: &str) -> Result<(String, u32), String> {
    let (p, n) = s.split_once('=').ok_or("expected <place>=<n>")?;
    let n = n.trim().parse().map_err(|_| format!("bad bound `{n}`"))?;
    Ok((p.trim().to_string(), n))
}

pub fn main_with(cli: Cli) -> i32 {
    let mut out = std::io::stdout().lock();
    match run(cli, &mut out) {
        Ok(code) => code,
        // the reader went away (`| head`); nothing left to report
        Err(e)
            if e
                .downcast_ref::<std::io::Error>()
                .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn read_spec(path: &Path) -> anyhow::Result<NpnSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn load_valid(path: &Path) -> anyhow::Result<NpnSpec> {
    let spec = read_spec(path)?;
    let diags = validate(&spec);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("{}: {d}", path.display());
        }
        bail!("{} is not a valid net ({} problems)", path.display(), diags.len());
    }
    Ok(spec)
}

fn print_trace(out: &mut dyn Write, spec: &NpnSpec, trace: &Trace) -> std::io::Result<()> {
    writeln!(out, "{}", render(spec, &trace.states[0]))?;
    for (s, m) in trace.steps.iter().zip(&trace.states[1..]) {
        writeln!(out, "  --[{}]-->", describe_step(spec, s))?;
        writeln!(out, "{}", render(spec, m))?;
    }
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match cli.command {
        Command::Parse { file, json } => {
            let spec = read_spec(&file)?;
            let diags = validate(&spec);
            if json {
                let v = json!({ "valid": diags.is_empty(), "diagnostics": diags, "spec": spec });
                writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
            } else if diags.is_empty() {
                write!(out, "{}", serialize(&spec))?;
            }
            for d in &diags {
                eprintln!("{}: {d}", file.display());
            }
            Ok(if diags.is_empty() { 0 } else { 1 })
        }
        Command::Simulate(a) => simulate(a, out),
        Command::Explore {
            file,
            limits,
            graph,
            json,
        } => {
            let spec = load_valid(&file)?;
            let g = explorer::explore(&spec, &limits.limits());
            if graph {
                writeln!(out, "{}", export_graph(&spec, &g))?;
                return Ok(0);
            }
            let trunc = g.first_truncation().map(|(_, l)| l.to_string());
            if json {
                let v = json!({
                    "states": g.nodes.len(),
                    "edges": g.edges.len(),
                    "dead": g.dead_nodes().len(),
                    "complete": g.is_complete(),
                    "truncation": trunc,
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
            } else {
                writeln!(out, "states: {}", g.nodes.len())?;
                writeln!(out, "edges: {}", g.edges.len())?;
                writeln!(out, "dead: {}", g.dead_nodes().len())?;
                match trunc {
                    None => writeln!(out, "complete")?,
                    Some(l) => writeln!(out, "truncated: {l}")?,
                }
                for m in g.dead_markings() {
                    writeln!(out, "  dead {}", render(&spec, m))?;
                }
            }
            Ok(0)
        }
        Command::Check(a) => check(a, out),
        Command::Translate { file, gen, output, json } => {
            let spec = load_valid(&file)?;
            let model = translate(&spec, &gen.options(&spec)?)?;
            let text = if json {
                serde_json::to_string_pretty(&model)? + "\n"
            } else {
                model.source
            };
            match output {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => write!(out, "{text}")?,
            }
            Ok(0)
        }
        Command::Verify(a) => verify(a, out),
        Command::Serve { file, port } => {
            let spec = load_valid(&file)?;
            serve::run(Session::new(spec), port)?;
            Ok(0)
        }
    }
}

impl GenArgs {
    fn options(&self, spec: &NpnSpec) -> anyhow::Result<CodegenOptions> {
        let mut o = CodegenOptions::new(self.variant);
        if let Some(list) = &self.opt {
            o.optimizations = OptFlags::parse(list).map_err(|e| anyhow!(e))?;
        }
        o.max_tok = self.max_tok;
        o.max_msg = self.max_msg;
        o.narrow_types = self.narrow;
        if self.counters {
            o.properties.push(Property::Counters { snapshot: None });
        }
        if self.accept {
            o.properties.push(Property::AcceptanceLabel);
        }
        for (place, bound) in &self.bound {
            o.properties.push(Property::BoundAssert {
                place: place.clone(),
                bound: *bound,
            });
        }
        for text in &self.ltl {
            o.properties.push(Property::Ltl { text: text.clone() });
        }
        if !self.no_census {
            o.census = Census::explore(spec, &self.limits.limits());
        }
        Ok(o)
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let spec = load_valid(&a.file)?;
    let mut s = Session::new(spec);
    if let Some(script) = &a.script {
        for item in script.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            if s.fire_named(item).is_err() {
                let offered: Vec<String> = s.enabled().iter().map(|st| describe_step(&s.spec, st)).collect();
                bail!(
                    "step `{item}` is not enabled after {} steps; enabled: {}",
                    s.depth(),
                    if offered.is_empty() { "none".into() } else { offered.join(", ") }
                );
            }
        }
    } else if a.interactive {
        interactive(&mut s, out)?;
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        for _ in 0..a.steps {
            if s.fire_random(&mut rng).is_none() {
                break;
            }
        }
    }
    let trace = s.trace();
    if a.json {
        writeln!(out, "{}", export_trace(&s.spec, &trace))?;
    } else {
        print_trace(out, &s.spec, &trace)?;
        if s.enabled().is_empty() {
            writeln!(out, "dead")?;
        }
    }
    Ok(0)
}

fn interactive(s: &mut Session, out: &mut dyn Write) -> anyhow::Result<()> {
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        writeln!(out, "{}", render(&s.spec, s.current()))?;
        for (i, st) in s.enabled().iter().enumerate() {
            writeln!(out, "  [{i}] {}", describe_step(&s.spec, st))?;
        }
        if s.enabled().is_empty() {
            writeln!(out, "  (dead)")?;
        }
        write!(out, "step index, u(ndo), r(edo), q(uit)> ")?;
        out.flush()?;
        let Some(line) = lines.next() else { break };
        let line = line?;
        let res = match line.trim() {
            "q" | "quit" => break,
            "u" | "undo" => s.undo(),
            "r" | "redo" => s.redo(),
            n => match n.parse::<usize>() {
                Ok(i) => s.fire_index(i),
                Err(_) => s.fire_named(n),
            },
        };
        if let Err(e) = res {
            writeln!(out, "  ! {e}")?;
        }
    }
    writeln!(out)?;
    Ok(())
}

fn verdict_exit(v: &Verdict) -> i32 {
    match v {
        Verdict::Terminating | Verdict::Holds { .. } | Verdict::Bounded => 0,
        _ => 1,
    }
}

fn print_verdict(out: &mut dyn Write, spec: &NpnSpec, v: &Verdict, json: bool) -> anyhow::Result<()> {
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&verdict_json(spec, v))?)?;
        return Ok(());
    }
    writeln!(out, "{}", v.name())?;
    match v {
        Verdict::InfiniteRun { stem, cycle } => {
            writeln!(out, "stem:")?;
            print_trace(out, spec, stem)?;
            writeln!(out, "cycle:")?;
            print_trace(out, spec, cycle)?;
        }
        Verdict::BoundExceeded { trace, limit } => {
            writeln!(out, "limit: {limit}")?;
            print_trace(out, spec, trace)?;
        }
        Verdict::CounterExample { trace } | Verdict::Unbounded { trace, .. } => print_trace(out, spec, trace)?,
        Verdict::Holds { witness: Some(w) } => print_trace(out, spec, w)?,
        _ => {}
    }
    Ok(())
}

fn check(a: CheckArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let spec = load_valid(&a.file)?;
    let limits = a.limits.limits();
    let pred = || -> anyhow::Result<Predicate> {
        let text = a.pred.as_deref().ok_or_else(|| anyhow!("--pred is required for this mode"))?;
        Predicate::parse(&spec, text, a.snapshot.as_deref()).map_err(|e| anyhow!("predicate: {e}"))
    };
    let verdict = match a.mode {
        CheckMode::Termination => explorer::check_termination(&spec, &limits),
        CheckMode::Bounded => {
            if a.bound.is_empty() {
                bail!("--bound <place>=<n> is required for this mode");
            }
            let mut v = Verdict::Bounded;
            for (place, n) in &a.bound {
                v = explorer::check_bounded(&spec, &limits, place, *n as usize)?;
                if verdict_exit(&v) != 0 {
                    break;
                }
            }
            v
        }
        CheckMode::Invariant => explorer::check_predicate(&spec, &limits, Mode::AG, &pred()?),
        CheckMode::Reachable => explorer::check_predicate(&spec, &limits, Mode::EF, &pred()?),
        CheckMode::Dead => explorer::check_predicate(&spec, &limits, Mode::AtDead, &pred()?),
    };
    print_verdict(out, &spec, &verdict, a.json)?;
    Ok(verdict_exit(&verdict))
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let spec = load_valid(&a.file)?;
    let opts = a.gen.options(&spec)?;
    let cfg = SpinRunConfig {
        spin_path: a.spin.clone(),
        cc_path: a.cc.clone(),
        compile_flags: a.cflags.clone(),
        mode: match a.mode {
            VerifyMode::Safety => RunMode::Safety,
            VerifyMode::Acceptance => RunMode::AcceptanceCycles,
        },
        timeout_seconds: a.timeout,
        ..Default::default()
    };
    if a.crosscheck {
        let rep = harness::crosscheck(&spec, &opts, &a.gen.limits.limits(), &cfg)?;
        if a.json {
            writeln!(out, "{}", serde_json::to_string_pretty(&rep)?)?;
        } else {
            writeln!(out, "native: {}", rep.native_termination)?;
            writeln!(out, "spin: {:?}", rep.spin_termination)?;
            writeln!(out, "dead states: {}", rep.dead_states)?;
            for d in &rep.disagreements {
                writeln!(out, "DISAGREE {}: native {} / spin {}", d.aspect, d.native, d.spin)?;
            }
            writeln!(out, "{}", if rep.agree() { "agree" } else { "disagree" })?;
        }
        return Ok(if rep.agree() { 0 } else { 1 });
    }
    let model = translate(&spec, &opts)?;
    let rep = harness::run_verification(&spec, &model, &cfg)?;
    if a.json {
        let mut v = serde_json::to_value(&rep)?;
        if let Some(t) = rep.trail.as_ref().and_then(|t| t.trace.as_ref()) {
            v["trail"]["trace"] = trace_json(&spec, t);
        }
        writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    } else {
        writeln!(out, "{:?}", rep.outcome)?;
        if let Some(n) = rep.states_stored {
            writeln!(out, "states stored: {n}")?;
        }
        if let Some(n) = rep.depth_reached {
            writeln!(out, "depth reached: {n}")?;
        }
        if let Some(t) = &rep.trail {
            writeln!(out, "trail: {} markers, {} lifted", t.markers.len(), t.lifted)?;
            if let Some(tr) = &t.trace {
                print_trace(out, &spec, tr)?;
            }
        }
        if rep.outcome == harness::Outcome::ToolError {
            eprintln!("{}", rep.raw);
        }
    }
    Ok(match rep.outcome {
        harness::Outcome::NoErrors => 0,
        o if o.is_violation() => 1,
        _ => 2,
    })
}
