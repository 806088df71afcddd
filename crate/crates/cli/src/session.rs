//! A token-game session: current marking, undo/redo stacks and step lookup
//! by name. Shared by `simulate` and `serve`.

use nestpn_core::explorer::Trace;
use nestpn_core::semantics::{apply_step, describe_step, enabled_steps, initial_marking, Marking, Step};
use nestpn_core::NpnSpec;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionError {
    /// The step is not (or no longer) offered.
    Stale(String),
    NothingToUndo,
    NothingToRedo,
    Semantics(String),
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionError::Stale(s) => write!(f, "step {s} is not enabled"),
            SessionError::NothingToUndo => write!(f, "nothing to undo"),
            SessionError::NothingToRedo => write!(f, "nothing to redo"),
            SessionError::Semantics(s) => write!(f, "{s}"),
        }
    }
}

pub struct Session {
    pub spec: NpnSpec,
    states: Vec<Marking>,
    steps: Vec<Step>,
    redo: Vec<Step>,
    enabled: Vec<Step>,
    /// Bumped on every mutation; step ids carry it so stale ids are detected.
    pub version: u64,
}

impl Session {
    pub fn new(spec: NpnSpec) -> Self {
        let m0 = initial_marking(&spec);
        let enabled = enabled_steps(&spec, &m0);
        Session {
            spec,
            states: vec![m0],
            steps: Vec::new(),
            redo: Vec::new(),
            enabled,
            version: 0,
        }
    }

    pub fn current(&self) -> &Marking {
        self.states.last().expect("at least the initial marking")
    }

    pub fn enabled(&self) -> &[Step] {
        &self.enabled
    }

    pub fn trace(&self) -> Trace {
        Trace {
            steps: self.steps.clone(),
            states: self.states.clone(),
        }
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    fn refresh(&mut self) {
        self.enabled = enabled_steps(&self.spec, self.current());
        self.version += 1;
    }

    fn push(&mut self, step: Step) -> Result<(), SessionError> {
        let next = apply_step(&self.spec, self.current(), &step).map_err(|e| SessionError::Semantics(e.to_string()))?;
        self.states.push(next);
        self.steps.push(step);
        self.refresh();
        Ok(())
    }

    /// Fires the `index`-th enabled step.
    pub fn fire_index(&mut self, index: usize) -> Result<(), SessionError> {
        let step = self
            .enabled
            .get(index)
            .cloned()
            .ok_or_else(|| SessionError::Stale(format!("#{index}")))?;
        self.redo.clear();
        self.push(step)
    }

    /// Fires the step named by a script item (see [`find_step`]).
    pub fn fire_named(&mut self, item: &str) -> Result<(), SessionError> {
        let i = find_step(&self.spec, &self.enabled, item).ok_or_else(|| SessionError::Stale(item.to_string()))?;
        self.fire_index(i)
    }

    pub fn fire_random(&mut self, rng: &mut impl Rng) -> Option<String> {
        if self.enabled.is_empty() {
            return None;
        }
        let i = rng.gen_range(0..self.enabled.len());
        let name = describe_step(&self.spec, &self.enabled[i]);
        self.fire_index(i).ok()?;
        Some(name)
    }

    pub fn undo(&mut self) -> Result<(), SessionError> {
        let step = self.steps.pop().ok_or(SessionError::NothingToUndo)?;
        self.states.pop();
        self.redo.push(step);
        self.refresh();
        Ok(())
    }

    pub fn redo(&mut self) -> Result<(), SessionError> {
        let step = self.redo.pop().ok_or(SessionError::NothingToRedo)?;
        self.push(step)
    }

    pub fn reset(&mut self) {
        self.states.truncate(1);
        self.steps.clear();
        self.redo.clear();
        self.refresh();
    }
}

/// Index of the enabled step matching a script item.
///
/// An item is either the exact step description (`F#1.t5[F#2.t3]`), or a
/// `|`-separated list of the transitions firing together, in any order and
/// written bare (`t5|t3`) or qualified (`F.t5|F.t3`). Among several matches
/// the first enabled one is taken.
pub fn find_step(spec: &NpnSpec, enabled: &[Step], item: &str) -> Option<usize> {
    let item = item.trim();
    if let Some(i) = enabled.iter().position(|s| describe_step(spec, s) == item) {
        return Some(i);
    }
    let mut want: Vec<&str> = item.split('|').map(str::trim).collect();
    want.sort();
    enabled.iter().position(|s| {
        let fired: Vec<(String, String)> = s
            .firings()
            .iter()
            .map(|(_, f)| {
                let t = f.transition;
                (spec.components[t.comp].name.clone(), spec.transition(t).name.clone())
            })
            .collect();
        if fired.len() != want.len() {
            return false;
        }
        // greedy matching is enough: names are compared as a multiset
        let mut left: Vec<&str> = want.clone();
        fired.iter().all(|(c, t)| {
            let q = format!("{c}.{t}");
            match left.iter().position(|w| *w == t || *w == q) {
                Some(k) => {
                    left.remove(k);
                    true
                }
                None => false,
            }
        })
    })
}
