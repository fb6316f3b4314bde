use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use serde::Serialize;
use serde_json::json;

use super::{suspends_state, SuspensionKind};
use crate::ast::{Definitions, Name, Program};
use crate::eoi::{self, EoiError};
use crate::lts::{output_subjects, Action, Bounds, ExploreError, Explorer, LtsError, StateId, Universe};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Clause {
    S1,
    S2,
    L1,
    L2,
    L3,
    L4,
    B1,
    B2,
    B3,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Which emission contexts `S` are tried in the end-of-instant clauses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ContextMode {
    #[default]
    Full,
    EmptyOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckConfig {
    pub bounds: Bounds,
    pub max_pairs: usize,
    pub contexts: ContextMode,
    pub max_contexts: usize,
    pub eoi_cap: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            bounds: Bounds::default(),
            max_pairs: 200_000,
            contexts: ContextMode::Full,
            max_contexts: 256,
            eoi_cap: 5040,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Game {
    Strong,
    Labelled(SuspensionKind),
    Barbed(SuspensionKind),
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Game::Strong => write!(f, "strong"),
            Game::Labelled(k) => write!(f, "labelled({k})"),
            Game::Barbed(k) => write!(f, "barbed({k})"),
        }
    }
}

type Pair = (StateId, StateId);

#[derive(Clone, Debug)]
struct Obligation {
    clause: Clause,
    side: Side,
    label: String,
    context: Option<Program>,
    /// The defender wins if every pair of some alternative is related.
    alternatives: Vec<Vec<Pair>>,
}

enum Fail {
    Bound(String),
    Hard(LtsError),
}

impl From<ExploreError> for Fail {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::Lts(e) => Fail::Hard(e),
            other => Fail::Bound(other.to_string()),
        }
    }
}

impl From<EoiError> for Fail {
    fn from(e: EoiError) -> Self {
        Fail::Bound(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub game: String,
    pub pairs: usize,
    pub unknown_pairs: usize,
    pub states: usize,
    pub max_states: usize,
    pub max_pairs: usize,
    pub universe_depth: usize,
    pub fresh_quota: usize,
}

/// One round of a distinguishing play.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub left: Program,
    pub right: Program,
    pub clause: Clause,
    pub attacker: Side,
    pub label: String,
    pub context: Option<Program>,
    pub answers: usize,
    pub reply: Option<(Program, Program)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub pairs: Vec<(Program, Program)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equivalent { relation: Relation, stats: Stats },
    Inequivalent { play: Vec<Round>, stats: Stats },
    BoundExceeded { reason: String, stats: Stats },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent { .. })
    }

    pub fn is_inequivalent(&self) -> bool {
        matches!(self, Verdict::Inequivalent { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Equivalent { .. } => "equivalent",
            Verdict::Inequivalent { .. } => "inequivalent",
            Verdict::BoundExceeded { .. } => "bound_exceeded",
        }
    }

    pub fn stats(&self) -> &Stats {
        match self {
            Verdict::Equivalent { stats, .. } | Verdict::Inequivalent { stats, .. } | Verdict::BoundExceeded { stats, .. } => stats,
        }
    }

    /// Clause tags cited in a play, in order.
    pub fn clauses(&self) -> Vec<Clause> {
        match self {
            Verdict::Inequivalent { play, .. } => play.iter().map(|r| r.clause).collect(),
            _ => Vec::new(),
        }
    }

    /// The clause on which the defender finally has no answer.
    pub fn failed_clause(&self) -> Option<Clause> {
        match self {
            Verdict::Inequivalent { play, .. } => play.last().map(|r| r.clause),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let stats = serde_json::to_value(self.stats()).expect("stats serialize");
        match self {
            Verdict::Equivalent { relation, .. } => json!({
                "verdict": self.kind(),
                "relation_size": relation.pairs.len(),
                "relation": relation.pairs.iter().map(|(a, b)| json!([a.to_string(), b.to_string()])).collect::<Vec<_>>(),
                "stats": stats,
            }),
            Verdict::Inequivalent { play, .. } => json!({
                "verdict": self.kind(),
                "clause": self.failed_clause().map(|c| c.to_string()),
                "play": play.iter().map(|r| json!({
                    "left": r.left.to_string(),
                    "right": r.right.to_string(),
                    "clause": r.clause.to_string(),
                    "attacker": r.attacker,
                    "move": r.label,
                    "context": r.context.as_ref().map(|c| c.to_string()),
                    "answers": r.answers,
                    "reply": r.reply.as_ref().map(|(a, b)| json!([a.to_string(), b.to_string()])),
                })).collect::<Vec<_>>(),
                "stats": stats,
            }),
            Verdict::BoundExceeded { reason, .. } => json!({
                "verdict": self.kind(),
                "reason": reason,
                "stats": stats,
            }),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Equivalent { relation, stats } => {
                writeln!(f, "Equivalent ({}, relation of {} pairs)", stats.game, relation.pairs.len())
            }
            Verdict::Inequivalent { play, stats } => {
                writeln!(f, "Inequivalent ({})", stats.game)?;
                for (i, r) in play.iter().enumerate() {
                    writeln!(f, "  round {}: {}  vs  {}", i + 1, r.left, r.right)?;
                    let who = match r.attacker {
                        Side::Left => "left",
                        Side::Right => "right",
                    };
                    write!(f, "    ({}) {who} plays {}", r.clause, r.label)?;
                    if let Some(c) = &r.context {
                        write!(f, " under S = {c}")?;
                    }
                    writeln!(f)?;
                    match &r.reply {
                        Some((a, b)) => writeln!(f, "    {} answer(s); continuing with {a}  vs  {b}", r.answers)?,
                        None => writeln!(f, "    no answer")?,
                    }
                }
                Ok(())
            }
            Verdict::BoundExceeded { reason, stats } => {
                writeln!(f, "BoundExceeded ({}): {reason}; {} pairs, {} unexplored", stats.game, stats.pairs, stats.unknown_pairs)
            }
        }
    }
}

/// Bisimulation games over one shared state graph.
pub struct Checker {
    pub ex: Explorer,
    pub cfg: CheckConfig,
    pub game: Game,
    next: HashMap<StateId, Rc<Vec<StateId>>>,
    composed: HashMap<(StateId, Program), StateId>,
}

/// Emissions among the top-level parallel components of `p`.
fn top_emissions(p: &Program, out: &mut Vec<Program>) {
    match p {
        Program::Emit(..) => out.push(p.clone()),
        Program::Par(a, b) => {
            top_emissions(a, out);
            top_emissions(b, out);
        }
        _ => {}
    }
}

fn orient(side: Side, a: StateId, d: StateId) -> Pair {
    match side {
        Side::Left => (a, d),
        Side::Right => (d, a),
    }
}

impl Checker {
    pub fn new(defs: Definitions, universe: Universe, cfg: CheckConfig, game: Game) -> Self {
        Checker {
            ex: Explorer::new(defs, universe, cfg.bounds),
            cfg,
            game,
            next: HashMap::new(),
            composed: HashMap::new(),
        }
    }

    fn scope(&self, a: StateId, b: StateId) -> BTreeSet<Name> {
        let mut s = self.ex.free_names(a).clone();
        s.extend(self.ex.free_names(b).iter().cloned());
        s
    }

    fn next_instants(&mut self, id: StateId) -> Result<Rc<Vec<StateId>>, Fail> {
        if let Some(n) = self.next.get(&id) {
            return Ok(n.clone());
        }
        let succ = eoi::next_instants_capped(self.ex.program(id), self.cfg.eoi_cap)?;
        let mut ids = BTreeSet::new();
        for q in succ {
            ids.insert(self.ex.intern(&q)?);
        }
        let ids = Rc::new(ids.into_iter().collect::<Vec<_>>());
        self.next.insert(id, ids.clone());
        Ok(ids)
    }

    fn compose(&mut self, id: StateId, s: &Program) -> Result<StateId, Fail> {
        if *s == Program::Nil {
            return Ok(id);
        }
        if let Some(&c) = self.composed.get(&(id, s.clone())) {
            return Ok(c);
        }
        let p = self.ex.program(id).clone();
        let mut present = Vec::new();
        top_emissions(&p, &mut present);
        let mut added = Vec::new();
        top_emissions(s, &mut added);
        added.retain(|e| !present.contains(e));
        let c = if added.is_empty() {
            id
        } else {
            self.ex.intern(&Program::par(p, Program::par_all(added)))?
        };
        self.composed.insert((id, s.clone()), c);
        Ok(c)
    }

    /// Emission contexts on free signals whose value lists are observable.
    fn contexts(&mut self, a: StateId, d: StateId, scope: &BTreeSet<Name>) -> Result<Vec<Program>, Fail> {
        if self.cfg.contexts == ContextMode::EmptyOnly {
            return Ok(vec![Program::Nil]);
        }
        let mut signals = eoi::dereferenced(self.ex.program(a));
        signals.extend(eoi::dereferenced(self.ex.program(d)));
        let mut items = Vec::new();
        for s in signals.iter().filter(|s| scope.contains(*s)) {
            let Some(ty) = self.ex.universe.env.name_type(s) else { continue };
            let Some(carried) = ty.carried() else { continue };
            let values = self
                .ex
                .universe
                .values(carried, scope)
                .map_err(|e| Fail::Bound(e.to_string()))?;
            for v in values {
                items.push(Program::Emit(s.clone(), v.to_expr()));
            }
        }
        if items.len() >= usize::BITS as usize || (1usize << items.len()) > self.cfg.max_contexts {
            return Err(Fail::Bound(format!("{} emission contexts exceed {}", items.len(), self.cfg.max_contexts)));
        }
        let mut out = Vec::new();
        for mask in 0usize..(1 << items.len()) {
            let chosen = items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, e)| e.clone());
            out.push(Program::par_all(chosen));
        }
        Ok(out)
    }

    fn suspends(&mut self, id: StateId, kind: SuspensionKind) -> Result<bool, Fail> {
        Ok(suspends_state(&mut self.ex, id, kind)?)
    }

    fn obligations(&mut self, l: StateId, r: StateId) -> Result<Vec<Obligation>, Fail> {
        let scope = self.scope(l, r);
        let mut out = Vec::new();
        self.attacks(l, r, &scope, Side::Left, &mut out)?;
        self.attacks(r, l, &scope, Side::Right, &mut out)?;
        Ok(out)
    }

    fn attacks(&mut self, a: StateId, d: StateId, scope: &BTreeSet<Name>, side: Side, out: &mut Vec<Obligation>) -> Result<(), Fail> {
        match self.game {
            Game::Strong => {
                let d_moves = self.ex.transitions_in(d, scope)?;
                for (alpha, a2) in self.ex.transitions_in(a, scope)? {
                    let alternatives = d_moves
                        .iter()
                        .filter(|(b, _)| *b == alpha)
                        .map(|(_, d2)| vec![orient(side, a2, *d2)])
                        .collect();
                    out.push(Obligation {
                        clause: Clause::S1,
                        side,
                        label: alpha.to_string(),
                        context: None,
                        alternatives,
                    });
                }
                self.end_of_instant(a, d, scope, side, Clause::S2, out)
            }
            Game::Labelled(kind) => {
                self.tau_clause(a, d, side, Clause::L1, out)?;
                let visible = self.ex.visible(a, scope)?;
                let gate = if visible.iter().any(|(b, _)| matches!(b, Action::Output { .. })) {
                    self.suspends(a, kind)?
                } else {
                    false
                };
                for (alpha, a2) in visible.iter() {
                    match alpha {
                        Action::Output { .. } if gate => {
                            let alternatives = self
                                .ex
                                .weak_transitions(d, alpha, scope)?
                                .into_iter()
                                .map(|d2| vec![orient(side, *a2, d2)])
                                .collect();
                            out.push(Obligation {
                                clause: Clause::L2,
                                side,
                                label: alpha.to_string(),
                                context: None,
                                alternatives,
                            });
                        }
                        Action::Input { signal, value } => {
                            let mut alternatives: Vec<Vec<Pair>> = self
                                .ex
                                .weak_transitions(d, alpha, scope)?
                                .into_iter()
                                .map(|d2| vec![orient(side, *a2, d2)])
                                .collect();
                            let emit = Program::Emit(signal.clone(), value.to_expr());
                            for &d2 in self.ex.tau_closure(d)?.iter() {
                                let d3 = self.compose(d2, &emit)?;
                                alternatives.push(vec![orient(side, *a2, d3)]);
                            }
                            out.push(Obligation {
                                clause: Clause::L3,
                                side,
                                label: alpha.to_string(),
                                context: None,
                                alternatives,
                            });
                        }
                        _ => {}
                    }
                }
                self.end_of_instant(a, d, scope, side, Clause::L4, out)
            }
            Game::Barbed(kind) => {
                self.tau_clause(a, d, side, Clause::B1, out)?;
                let subjects = output_subjects(self.ex.program(a));
                if !subjects.is_empty() && self.suspends(a, kind)? {
                    let closure = self.ex.tau_closure(d)?;
                    for s in subjects {
                        let alternatives = closure
                            .iter()
                            .filter(|&&d2| output_subjects(self.ex.program(d2)).contains(&s))
                            .map(|&d2| vec![orient(side, a, d2)])
                            .collect();
                        out.push(Obligation {
                            clause: Clause::B2,
                            side,
                            label: format!("commits on {s}"),
                            context: None,
                            alternatives,
                        });
                    }
                }
                self.end_of_instant(a, d, scope, side, Clause::B3, out)
            }
        }
    }

    fn tau_clause(&mut self, a: StateId, d: StateId, side: Side, clause: Clause, out: &mut Vec<Obligation>) -> Result<(), Fail> {
        let taus = self.ex.tau(a)?;
        if taus.is_empty() {
            return Ok(());
        }
        let closure = self.ex.tau_closure(d)?;
        for &a2 in taus.iter() {
            out.push(Obligation {
                clause,
                side,
                label: Action::Tau.to_string(),
                context: None,
                alternatives: closure.iter().map(|&d2| vec![orient(side, a2, d2)]).collect(),
            });
        }
        Ok(())
    }

    fn end_of_instant(
        &mut self,
        a: StateId,
        d: StateId,
        scope: &BTreeSet<Name>,
        side: Side,
        clause: Clause,
        out: &mut Vec<Obligation>,
    ) -> Result<(), Fail> {
        let contexts = if clause == Clause::B3 {
            vec![Program::Nil]
        } else {
            if !self.ex.is_suspended(a) {
                return Ok(());
            }
            self.contexts(a, d, scope)?
        };
        for s in contexts {
            let a_s = self.compose(a, &s)?;
            if !self.ex.is_suspended(a_s) {
                continue;
            }
            let d_s = self.compose(d, &s)?;
            let a_next = self.next_instants(a_s)?;
            let context = (s != Program::Nil).then(|| s.clone());
            if clause == Clause::S2 {
                let d_next = if self.ex.is_suspended(d_s) {
                    self.next_instants(d_s)?
                } else {
                    Rc::new(Vec::new())
                };
                for &a2 in a_next.iter() {
                    let alternatives = d_next
                        .iter()
                        .map(|&d2| vec![orient(side, a_s, d_s), orient(side, a2, d2)])
                        .collect();
                    out.push(Obligation {
                        clause,
                        side,
                        label: format!("end of instant to {}", self.ex.program(a2)),
                        context: context.clone(),
                        alternatives,
                    });
                }
                continue;
            }
            let mut answers = Vec::new();
            for &d2 in self.ex.tau_closure(d_s)?.iter() {
                if self.ex.is_suspended(d2) {
                    for &d3 in self.next_instants(d2)?.iter() {
                        answers.push((d2, d3));
                    }
                }
            }
            for &a2 in a_next.iter() {
                out.push(Obligation {
                    clause,
                    side,
                    label: format!("end of instant to {}", self.ex.program(a2)),
                    context: context.clone(),
                    alternatives: answers
                        .iter()
                        .map(|&(d2, d3)| vec![orient(side, a_s, d2), orient(side, a2, d3)])
                        .collect(),
                });
            }
        }
        Ok(())
    }

    fn stats(&self, pairs: usize, unknown: usize) -> Stats {
        Stats {
            game: self.game.to_string(),
            pairs,
            unknown_pairs: unknown,
            states: self.ex.len(),
            max_states: self.cfg.bounds.max_states,
            max_pairs: self.cfg.max_pairs,
            universe_depth: self.ex.universe.depth,
            fresh_quota: self.ex.universe.fresh_quota,
        }
    }

    /// Decide whether `p` and `q` are related by the largest bisimulation of
    /// the configured game, within the explored graph.
    pub fn run(&mut self, p: &Program, q: &Program) -> Result<Verdict, LtsError> {
        let (l, r) = match (self.ex.intern(p), self.ex.intern(q)) {
            (Ok(l), Ok(r)) => (l, r),
            (Err(ExploreError::Lts(e)), _) | (_, Err(ExploreError::Lts(e))) => return Err(e),
            (Err(e), _) | (_, Err(e)) => {
                return Ok(Verdict::BoundExceeded {
                    reason: e.to_string(),
                    stats: self.stats(0, 1),
                })
            }
        };
        if l == r {
            return Ok(Verdict::Equivalent {
                relation: Relation {
                    pairs: vec![(self.ex.program(l).clone(), self.ex.program(r).clone())],
                },
                stats: self.stats(1, 0),
            });
        }
        let mut table = Table::default();
        table.add((l, r), 0);
        let mut reason = None;
        let mut checkpoint = CHECKPOINT;
        while let Some(Reverse((cost, _, i))) = table.queue.pop() {
            if table.entries.len() > self.cfg.max_pairs {
                reason.get_or_insert_with(|| format!("pair bound of {} exceeded", self.cfg.max_pairs));
                break;
            }
            if table.entries.len() > checkpoint {
                checkpoint += CHECKPOINT;
                if !table.fixpoint(true).alive[0] {
                    break;
                }
            }
            let (a, b) = table.entries[i].key;
            match self.obligations(a, b) {
                Ok(obs) => {
                    for ob in &obs {
                        let step = if ob.is_input() { INPUT_COST } else { 1 };
                        for alt in &ob.alternatives {
                            for &pr in alt {
                                if pr.0 != pr.1 {
                                    let j = table.add(pr, cost + step);
                                    table.deps[j].push(i);
                                }
                            }
                        }
                    }
                    table.entries[i].obligations = Some(obs);
                }
                Err(Fail::Bound(msg)) => {
                    reason.get_or_insert(msg);
                }
                Err(Fail::Hard(e)) => return Err(e),
            }
        }
        let unknown = table.entries.iter().filter(|e| e.obligations.is_none()).count();
        let optimistic = table.fixpoint(true);
        let pairs = table.entries.len();
        if !optimistic.alive[0] {
            let play = self.play(&table, &optimistic);
            return Ok(Verdict::Inequivalent {
                play,
                stats: self.stats(pairs, unknown),
            });
        }
        if unknown == 0 {
            return Ok(Verdict::Equivalent {
                relation: self.relation(&table, &optimistic),
                stats: self.stats(pairs, 0),
            });
        }
        let pessimistic = table.fixpoint(false);
        if pessimistic.alive[0] {
            return Ok(Verdict::Equivalent {
                relation: self.relation(&table, &pessimistic),
                stats: self.stats(pairs, unknown),
            });
        }
        Ok(Verdict::BoundExceeded {
            reason: reason.unwrap_or_else(|| "exploration incomplete".into()),
            stats: self.stats(pairs, unknown),
        })
    }

    fn relation(&self, table: &Table, fp: &Fixpoint) -> Relation {
        let pairs = table
            .entries
            .iter()
            .zip(&fp.alive)
            .filter(|(e, &alive)| alive && e.obligations.is_some())
            .map(|(e, _)| (self.ex.program(e.key.0).clone(), self.ex.program(e.key.1).clone()))
            .collect();
        Relation { pairs }
    }

    fn play(&self, table: &Table, fp: &Fixpoint) -> Vec<Round> {
        let mut rounds = Vec::new();
        let mut i = 0;
        loop {
            let entry = &table.entries[i];
            let k = fp.killer[i].expect("dead explored pair has a failing obligation");
            let ob = &entry.obligations.as_ref().expect("explored")[k];
            let next = ob.alternatives.first().map(|alt| {
                alt.iter()
                    .filter(|pr| pr.0 != pr.1)
                    .map(|pr| table.index[pr])
                    .filter(|&j| !fp.alive[j])
                    .min_by_key(|&j| fp.removed_at[j])
                    .expect("failed alternative has a dead pair")
            });
            let (a, b) = entry.key;
            rounds.push(Round {
                left: self.ex.program(a).clone(),
                right: self.ex.program(b).clone(),
                clause: ob.clause,
                attacker: ob.side,
                label: ob.label.clone(),
                context: ob.context.clone(),
                answers: ob.alternatives.len(),
                reply: next.map(|j| {
                    let (x, y) = table.entries[j].key;
                    (self.ex.program(x).clone(), self.ex.program(y).clone())
                }),
            });
            match next {
                Some(j) => i = j,
                None => return rounds,
            }
        }
    }
}

struct Entry {
    key: Pair,
    obligations: Option<Vec<Obligation>>,
}

#[derive(Default)]
struct Table {
    entries: Vec<Entry>,
    index: HashMap<Pair, usize>,
    deps: Vec<Vec<usize>>,
    /// Pairs to explore, cheapest first; ties in insertion order.
    queue: BinaryHeap<Reverse<(usize, usize, usize)>>,
}

/// Pairs reached through inputs are explored after those reached through
/// internal and output moves, since the input universe dominates the table.
const INPUT_COST: usize = 4;
const CHECKPOINT: usize = 2000;

impl Obligation {
    fn is_input(&self) -> bool {
        self.clause == Clause::L3 || (self.clause == Clause::S1 && self.label.contains('?'))
    }
}

struct Fixpoint {
    alive: Vec<bool>,
    removed_at: Vec<usize>,
    killer: Vec<Option<usize>>,
}

impl Table {
    fn add(&mut self, key: Pair, cost: usize) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.entries.len();
        self.entries.push(Entry { key, obligations: None });
        self.index.insert(key, i);
        self.deps.push(Vec::new());
        self.queue.push(Reverse((cost, i, i)));
        i
    }

    fn holds(&self, ob: &Obligation, alive: &[bool]) -> bool {
        ob.alternatives
            .iter()
            .any(|alt| alt.iter().all(|pr| pr.0 == pr.1 || alive[self.index[pr]]))
    }

    /// Greatest fixpoint; unexplored pairs are kept iff `optimistic`.
    fn fixpoint(&self, optimistic: bool) -> Fixpoint {
        let n = self.entries.len();
        let mut fp = Fixpoint {
            alive: self.entries.iter().map(|e| optimistic || e.obligations.is_some()).collect(),
            removed_at: vec![0; n],
            killer: vec![None; n],
        };
        let mut clock = 1;
        let mut work: VecDeque<usize> = (0..n).collect();
        while let Some(i) = work.pop_front() {
            if !fp.alive[i] {
                continue;
            }
            let Some(obs) = &self.entries[i].obligations else { continue };
            if let Some(k) = obs.iter().position(|ob| !self.holds(ob, &fp.alive)) {
                fp.alive[i] = false;
                fp.removed_at[i] = clock;
                fp.killer[i] = Some(k);
                clock += 1;
                work.extend(self.deps[i].iter().copied());
            }
        }
        fp
    }
}

pub fn check(game: Game, p: &Program, q: &Program, defs: &Definitions, u: &Universe, cfg: CheckConfig) -> Result<Verdict, LtsError> {
    Checker::new(defs.clone(), u.clone(), cfg, game).run(p, q)
}

pub fn strong_bisim(p: &Program, q: &Program, defs: &Definitions, u: &Universe, cfg: CheckConfig) -> Result<Verdict, LtsError> {
    check(Game::Strong, p, q, defs, u, cfg)
}

pub fn labelled_bisim(
    p: &Program,
    q: &Program,
    defs: &Definitions,
    u: &Universe,
    cfg: CheckConfig,
    susp: SuspensionKind,
) -> Result<Verdict, LtsError> {
    check(Game::Labelled(susp), p, q, defs, u, cfg)
}

pub fn barbed_bisim(
    p: &Program,
    q: &Program,
    defs: &Definitions,
    u: &Universe,
    cfg: CheckConfig,
    susp: SuspensionKind,
) -> Result<Verdict, LtsError> {
    check(Game::Barbed(susp), p, q, defs, u, cfg)
}

fn fresh_obligations(ch: &mut Checker, l: &Program, r: &Program) -> Result<(Pair, Vec<Obligation>), String> {
    let a = ch.ex.intern(l).map_err(|e| e.to_string())?;
    let b = ch.ex.intern(r).map_err(|e| e.to_string())?;
    match ch.obligations(a, b) {
        Ok(obs) => Ok(((a, b), obs)),
        Err(Fail::Bound(m)) => Err(m),
        Err(Fail::Hard(e)) => Err(e.to_string()),
    }
}

/// Re-check, from scratch, that a relation satisfies every clause of `game`.
pub fn validate_relation(game: Game, relation: &Relation, defs: &Definitions, u: &Universe, cfg: CheckConfig) -> Result<(), String> {
    let mut ch = Checker::new(defs.clone(), u.clone(), cfg, game);
    let mut keys = BTreeSet::new();
    for (l, r) in &relation.pairs {
        let a = ch.ex.intern(l).map_err(|e| e.to_string())?;
        let b = ch.ex.intern(r).map_err(|e| e.to_string())?;
        keys.insert((a, b));
    }
    for (l, r) in &relation.pairs {
        let (_, obs) = fresh_obligations(&mut ch, l, r)?;
        for ob in obs {
            let ok = ob
                .alternatives
                .iter()
                .any(|alt| alt.iter().all(|pr| pr.0 == pr.1 || keys.contains(pr)));
            if !ok {
                return Err(format!("pair ({l}, {r}) fails ({}) on {}", ob.clause, ob.label));
            }
        }
    }
    Ok(())
}

/// Replay a distinguishing play: every attack exists, every reply is a
/// defender answer, and the last attack has no answer.
pub fn replay(game: Game, play: &[Round], defs: &Definitions, u: &Universe, cfg: CheckConfig) -> Result<(), String> {
    let mut ch = Checker::new(defs.clone(), u.clone(), cfg, game);
    for (i, round) in play.iter().enumerate() {
        let (_, obs) = fresh_obligations(&mut ch, &round.left, &round.right)?;
        let attacks: Vec<&Obligation> = obs
            .iter()
            .filter(|ob| ob.clause == round.clause && ob.side == round.attacker && ob.label == round.label && ob.context == round.context)
            .collect();
        if attacks.is_empty() {
            return Err(format!("round {}: attack ({}) {} not available", i + 1, round.clause, round.label));
        }
        match &round.reply {
            Some((x, y)) => {
                let x = ch.ex.intern(x).map_err(|e| e.to_string())?;
                let y = ch.ex.intern(y).map_err(|e| e.to_string())?;
                if !attacks.iter().any(|ob| ob.alternatives.iter().any(|alt| alt.contains(&(x, y)))) {
                    return Err(format!("round {}: reply is not a defender answer", i + 1));
                }
            }
            None => {
                if attacks.iter().all(|ob| !ob.alternatives.is_empty()) {
                    return Err(format!("round {}: defender still has an answer", i + 1));
                }
            }
        }
    }
    Ok(())
}
