//! Multi-instant execution.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ast::{Definitions, Name, Program, Value};
use crate::eoi::{self, EoiError};
use crate::lts::{canonical, is_suspended, tau_steps, Bounds, CanonMode, ExploreError, Explorer, LtsError, Universe};
use crate::surface::{self, SProc};
use crate::typecheck::{type_of_value, TypeEnv};

pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    First,
    Random(u64),
    Enumerate,
}

/// Emissions injected at the start of each instant.
pub type Script = Vec<Vec<(Name, Value)>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub max_instants: usize,
    pub tau_budget: usize,
    pub policy: Policy,
    pub script: Script,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_instants: 10,
            tau_budget: 10_000,
            policy: Policy::First,
            script: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Lts(#[from] LtsError),
    #[error(transparent)]
    Eoi(#[from] EoiError),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("budgets must be positive")]
    BadConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Step {
    pub action: &'static str,
    pub state: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Instant {
    pub index: usize,
    pub injected: Vec<String>,
    pub steps: Vec<Step>,
    pub suspended: Option<String>,
    pub choice: Option<String>,
    pub next: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The instant limit was reached.
    Completed,
    /// The program became `0` with nothing left to inject.
    Terminated,
    /// The τ budget ran out before the program suspended.
    DivergenceSuspected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub version: u32,
    pub policy: String,
    pub instants: Vec<Instant>,
    pub outcome: Outcome,
    pub final_state: String,
}

/// Enumerate mode: the sets of programs reached at each instant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrontierInstant {
    pub index: usize,
    pub injected: Vec<String>,
    pub start: Vec<String>,
    pub suspended: Vec<String>,
    pub diverging: Vec<String>,
    pub next: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Enumeration {
    pub version: u32,
    pub policy: String,
    pub instants: Vec<FrontierInstant>,
    pub outcome: Outcome,
    pub final_states: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum RunResult {
    Trace(Trace),
    Enumeration(Enumeration),
}

impl RunResult {
    pub fn outcome(&self) -> Outcome {
        match self {
            RunResult::Trace(t) => t.outcome,
            RunResult::Enumeration(e) => e.outcome,
        }
    }
}

fn canon(p: &Program) -> Program {
    canonical(p, CanonMode::Structural)
}

fn inject(p: &Program, emissions: &[(Name, Value)]) -> Program {
    let mut q = p.clone();
    for (s, v) in emissions {
        q = Program::par(q, Program::Emit(s.clone(), v.to_expr()));
    }
    canon(&q)
}

fn show_injected(emissions: &[(Name, Value)]) -> Vec<String> {
    emissions
        .iter()
        .map(|(s, v)| Program::Emit(s.clone(), v.to_expr()).to_string())
        .collect()
}

pub fn run(p: &Program, defs: &Definitions, cfg: &RunConfig) -> Result<RunResult, RunError> {
    if cfg.tau_budget == 0 {
        return Err(RunError::BadConfig);
    }
    match cfg.policy {
        Policy::Enumerate => enumerate(p, defs, cfg).map(RunResult::Enumeration),
        _ => simulate(p, defs, cfg).map(RunResult::Trace),
    }
}

fn pick<T>(items: &mut Vec<T>, rng: &mut Option<ChaCha8Rng>) -> T {
    let i = match rng {
        Some(r) => r.gen_range(0..items.len()),
        None => 0,
    };
    items.swap_remove(i)
}

/// One execution, resolving every choice by `cfg.policy`.
pub fn simulate(p: &Program, defs: &Definitions, cfg: &RunConfig) -> Result<Trace, RunError> {
    let mut rng = match cfg.policy {
        Policy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut state = canon(p);
    let mut instants = Vec::new();
    let mut outcome = Outcome::Completed;
    for index in 0..cfg.max_instants {
        let injected = cfg.script.get(index).cloned().unwrap_or_default();
        if state == Program::Nil && injected.is_empty() && index >= cfg.script.len() {
            outcome = Outcome::Terminated;
            break;
        }
        state = inject(&state, &injected);
        let mut inst = Instant {
            index,
            injected: show_injected(&injected),
            steps: Vec::new(),
            suspended: None,
            choice: None,
            next: None,
        };
        while !is_suspended(&state) {
            if inst.steps.len() >= cfg.tau_budget {
                break;
            }
            let succ: BTreeSet<Program> = tau_steps(&state, defs)?.iter().map(canon).collect();
            let mut succ: Vec<Program> = succ.into_iter().collect();
            state = pick(&mut succ, &mut rng);
            inst.steps.push(Step {
                action: "tau",
                state: state.to_string(),
            });
        }
        if !is_suspended(&state) {
            instants.push(inst);
            outcome = Outcome::DivergenceSuspected;
            break;
        }
        inst.suspended = Some(state.to_string());
        let mut options: Vec<(eoi::ValueChoice, Program)> = eoi::instants(&state, eoi::DEFAULT_CAP)?
            .into_iter()
            .flat_map(|(v, succ)| succ.into_iter().map(move |q| (v.clone(), q)))
            .collect();
        let (v, next) = pick(&mut options, &mut rng);
        inst.choice = Some(v.to_string());
        inst.next = Some(next.to_string());
        state = next;
        instants.push(inst);
    }
    Ok(Trace {
        version: TRACE_VERSION,
        policy: policy_name(cfg.policy),
        instants,
        outcome,
        final_state: state.to_string(),
    })
}

fn policy_name(p: Policy) -> String {
    match p {
        Policy::First => "first".into(),
        Policy::Random(seed) => format!("random({seed})"),
        Policy::Enumerate => "enumerate".into(),
    }
}

fn sorted_strings(ps: &BTreeSet<Program>) -> Vec<String> {
    let mut v: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
    v.sort();
    v
}

/// Every execution at once: the sets of reachable programs per instant.
pub fn enumerate(p: &Program, defs: &Definitions, cfg: &RunConfig) -> Result<Enumeration, RunError> {
    let bounds = Bounds {
        max_states: cfg.tau_budget,
        mode: CanonMode::Structural,
    };
    let mut frontier = BTreeSet::from([canon(p)]);
    let mut instants = Vec::new();
    let mut outcome = Outcome::Completed;
    for index in 0..cfg.max_instants {
        let injected = cfg.script.get(index).cloned().unwrap_or_default();
        if frontier.iter().all(|q| *q == Program::Nil) && index >= cfg.script.len() {
            outcome = Outcome::Terminated;
            break;
        }
        let start: BTreeSet<Program> = frontier.iter().map(|q| inject(q, &injected)).collect();
        let mut ex = Explorer::new(defs.clone(), Universe::new(TypeEnv::default()), bounds);
        let mut suspended = BTreeSet::new();
        let mut diverging = BTreeSet::new();
        let mut exhausted = false;
        for q in &start {
            let closure = ex.intern(q).and_then(|id| ex.tau_closure(id));
            match closure {
                Ok(ids) => {
                    let mut any = false;
                    for &id in ids.iter() {
                        if ex.is_suspended(id) {
                            suspended.insert(ex.program(id).clone());
                            any = true;
                        }
                    }
                    if !any {
                        diverging.insert(q.clone());
                    }
                }
                Err(ExploreError::Lts(e)) => return Err(e.into()),
                Err(_) => {
                    exhausted = true;
                    diverging.insert(q.clone());
                }
            }
        }
        let mut next = BTreeSet::new();
        for q in &suspended {
            next.extend(eoi::next_instants(q)?);
        }
        instants.push(FrontierInstant {
            index,
            injected: show_injected(&injected),
            start: sorted_strings(&start),
            suspended: sorted_strings(&suspended),
            diverging: sorted_strings(&diverging),
            next: sorted_strings(&next),
        });
        if exhausted || (next.is_empty() && !diverging.is_empty()) {
            outcome = Outcome::DivergenceSuspected;
            frontier = next;
            break;
        }
        frontier = next;
    }
    Ok(Enumeration {
        version: TRACE_VERSION,
        policy: policy_name(Policy::Enumerate),
        instants,
        outcome,
        final_states: sorted_strings(&frontier),
    })
}

/// Parse a script: one line per instant, each a parallel composition of
/// emissions (an empty line injects nothing).
pub fn parse_script(text: &str, env: &TypeEnv) -> Result<Script, RunError> {
    let decls = env.constructors.decls();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| RunError::Script { line: line_no, message };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            out.push(Vec::new());
            continue;
        }
        let proc = surface::parse_program(trimmed, &decls).map_err(|e| err(e.to_string()))?;
        let mut emissions = Vec::new();
        collect_emissions(&proc, &mut emissions).map_err(err)?;
        for (s, v) in &emissions {
            let sty = env
                .name_type(s)
                .ok_or_else(|| err(format!("unknown signal `{s}`")))?;
            let vty = type_of_value(v, env).map_err(|e| err(e.to_string()))?;
            if sty.carried() != Some(&vty) {
                return Err(err(format!("`{s}` has type {sty} but is given a value of type {vty}")));
            }
        }
        out.push(emissions);
    }
    Ok(out)
}

fn collect_emissions(p: &SProc, out: &mut Vec<(Name, Value)>) -> Result<(), String> {
    match p {
        SProc::Nil => Ok(()),
        SProc::Par(a, b) => {
            collect_emissions(a, out)?;
            collect_emissions(b, out)
        }
        SProc::Emit(s, e) => {
            let v = e.to_value().ok_or_else(|| format!("`{e}` is not a value"))?;
            out.push((Name::Src(s.clone()), v));
            Ok(())
        }
        other => Err(format!("only emissions may be injected, found `{}`", SProcDisplay(other))),
    }
}

struct SProcDisplay<'a>(&'a SProc);

impl std::fmt::Display for SProcDisplay<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        surface::print::write_sproc(&mut s, self.0)?;
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typecheck::check;

    fn file(src: &str) -> crate::typecheck::TypedFile {
        check(&surface::parse(src).unwrap()).unwrap()
    }

    #[test]
    fn omega_diverges() {
        let f = file("def O() = O()\nrun s! | O()");
        let cfg = RunConfig {
            tau_budget: 50,
            ..RunConfig::default()
        };
        let t = simulate(&f.run, &f.defs, &cfg).unwrap();
        assert_eq!(t.outcome, Outcome::DivergenceSuspected);
        assert_eq!(t.instants.len(), 1);
        let cfg = RunConfig {
            policy: Policy::Enumerate,
            tau_budget: 50,
            ..RunConfig::default()
        };
        assert_eq!(enumerate(&f.run, &f.defs, &cfg).unwrap().outcome, Outcome::DivergenceSuspected);
    }

    #[test]
    fn pause_chain_runs_every_instant() {
        let f = file("def A() = pause.A()\nrun A()");
        let cfg = RunConfig {
            max_instants: 3,
            ..RunConfig::default()
        };
        let t = simulate(&f.run, &f.defs, &cfg).unwrap();
        assert_eq!(t.outcome, Outcome::Completed);
        assert_eq!(t.instants.len(), 3);
        assert!(t.instants.iter().all(|i| i.suspended.is_some()));
    }

    #[test]
    fn seeded_runs_repeat() {
        let f = file("run (a! (+) b!) | (c! (+) d!)");
        let cfg = RunConfig {
            policy: Policy::Random(7),
            ..RunConfig::default()
        };
        assert_eq!(simulate(&f.run, &f.defs, &cfg).unwrap(), simulate(&f.run, &f.defs, &cfg).unwrap());
    }

    #[test]
    fn script_reaches_reader() {
        let f = file("signal s : sig(unit)\ndef K() = 0\nrun when s do a! else K()");
        let script = parse_script("s!*\n", &f.env).unwrap();
        let cfg = RunConfig {
            max_instants: 1,
            script,
            ..RunConfig::default()
        };
        let t = simulate(&f.run, &f.defs, &cfg).unwrap();
        assert!(t.instants[0].suspended.as_ref().unwrap().contains("a!"));
        assert!(parse_script("s![]", &f.env).is_err());
        assert!(parse_script("when s do 0 else 0", &f.env).is_err());
    }
}
