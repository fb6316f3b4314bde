use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::checker::{check, CheckConfig, Game, Verdict};
use crate::ast::{Definitions, Name, Program, Type};
use crate::lts::{LtsError, Universe};

/// Static contexts: `[] | C|P | new s in C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Context {
    Hole,
    Par(Box<Context>, Program),
    New(Name, Type, Box<Context>),
}

impl Context {
    pub fn par(c: Context, p: Program) -> Context {
        Context::Par(Box::new(c), p)
    }

    pub fn new_sig(s: Name, ty: Type, c: Context) -> Context {
        Context::New(s, ty, Box::new(c))
    }

    pub fn fill(&self, p: &Program) -> Program {
        match self {
            Context::Hole => p.clone(),
            Context::Par(c, q) => Program::par(c.fill(p), q.clone()),
            Context::New(s, ty, c) => Program::new_sig(s.clone(), ty.clone(), c.fill(p)),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Hole => write!(f, "[]"),
            Context::Par(c, q) => write!(f, "({c} | {q})"),
            Context::New(s, ty, c) => write!(f, "new {s} : {ty} in {c}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub context: String,
    pub verdict: &'static str,
    pub clause: Option<String>,
    pub reason: Option<String>,
    pub pairs: usize,
    pub states: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub game: String,
    pub checked: usize,
    pub equivalent: usize,
    pub alarms: Vec<ProbeResult>,
    pub bound_exceeded: usize,
    pub results: Vec<ProbeResult>,
}

/// Check `C[p]` against `C[q]` for every context. Any `Inequivalent` is an
/// alarm: the game is not preserved by that context.
pub fn congruence_probe(
    game: Game,
    p: &Program,
    q: &Program,
    contexts: &[Context],
    defs: &Definitions,
    u: &Universe,
    cfg: CheckConfig,
    jobs: usize,
) -> Result<ProbeReport, LtsError> {
    let work = || -> Result<Vec<(String, Verdict)>, LtsError> {
        contexts
            .par_iter()
            .map(|c| Ok((c.to_string(), check(game, &c.fill(p), &c.fill(q), defs, u, cfg)?)))
            .collect()
    };
    let verdicts = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(work)?,
        Err(_) => work()?,
    };
    let results: Vec<ProbeResult> = verdicts
        .iter()
        .map(|(c, v)| ProbeResult {
            context: c.clone(),
            verdict: v.kind(),
            clause: v.failed_clause().map(|c| c.to_string()),
            reason: match v {
                Verdict::BoundExceeded { reason, .. } => Some(reason.clone()),
                _ => None,
            },
            pairs: v.stats().pairs,
            states: v.stats().states,
        })
        .collect();
    Ok(ProbeReport {
        game: game.to_string(),
        checked: results.len(),
        equivalent: verdicts.iter().filter(|(_, v)| v.is_equivalent()).count(),
        alarms: results.iter().filter(|r| r.verdict == "inequivalent").cloned().collect(),
        bound_exceeded: verdicts.iter().filter(|(_, v)| matches!(v, Verdict::BoundExceeded { .. })).count(),
        results,
    })
}
