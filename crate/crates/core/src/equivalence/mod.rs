//! Suspension predicates, commitments and bounded bisimulation checkers.

mod checker;
mod probe;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::ast::{Cont, Definitions, Expr, Name, Program, Value};
use crate::lts::{output_subjects, Action, Bounds, ExploreError, Explorer, Universe};

pub use checker::{
    barbed_bisim, check, labelled_bisim, replay, strong_bisim, validate_relation, CheckConfig, Checker, Clause, ContextMode, Game,
    Relation, Round, Side, Stats, Verdict,
};
pub use probe::{congruence_probe, Context, ProbeReport, ProbeResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuspensionKind {
    /// `P↓`
    Immediate,
    /// `P⇓`
    Weak,
    /// `P⇓_L`
    Labelled,
}

impl FromStr for SuspensionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "immediate" => Ok(SuspensionKind::Immediate),
            "weak" => Ok(SuspensionKind::Weak),
            "labelled" | "labeled" => Ok(SuspensionKind::Labelled),
            other => Err(format!("unknown suspension kind `{other}`")),
        }
    }
}

impl fmt::Display for SuspensionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuspensionKind::Immediate => "immediate",
            SuspensionKind::Weak => "weak",
            SuspensionKind::Labelled => "labelled",
        })
    }
}

/// The suspension predicate of the given kind, on an interned state.
pub fn suspends_state(ex: &mut Explorer, id: usize, kind: SuspensionKind) -> Result<bool, ExploreError> {
    match kind {
        SuspensionKind::Immediate => Ok(ex.is_suspended(id)),
        SuspensionKind::Weak => ex.weakly_suspends(id),
        SuspensionKind::Labelled => ex.l_suspends(id),
    }
}

pub fn suspends(p: &Program, kind: SuspensionKind, defs: &Definitions, u: &Universe, bounds: Bounds) -> Result<bool, ExploreError> {
    let mut ex = Explorer::new(defs.clone(), u.clone(), bounds);
    let id = ex.intern(p)?;
    suspends_state(&mut ex, id, kind)
}

/// `P ↘ s̄`: `P` can output on `s`.
pub fn commits(p: &Program, s: &Name) -> bool {
    output_subjects(p).contains(s)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WitnessError {
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("the program does not L-suspend within the explored graph")]
    NotLSuspending,
}

/// A receiver for the output `s̄v` continuing as `q` with the names of `v`
/// that were extruded bound in `q`.
fn receiver(s: &Name, v: &Value, extruded: &[Name], q: Program) -> Program {
    if let Value::Sig(t) = v {
        return Program::present(s.clone(), t.clone(), q, Cont::Nil);
    }
    let x = Name::fresh();
    let pattern = pattern_of(v, extruded);
    Program::present(
        s.clone(),
        x.clone(),
        Program::match_val(Expr::Name(x), pattern, q, Program::Nil),
        Cont::Nil,
    )
}

fn pattern_of(v: &Value, extruded: &[Name]) -> Expr {
    match v {
        Value::Sig(n) if extruded.contains(n) => Expr::Name(n.clone()),
        Value::Sig(_) => Expr::Name(Name::fresh()),
        Value::Con(c, args) => Expr::Con(c.clone(), args.iter().map(|a| pattern_of(a, extruded)).collect()),
    }
}

/// Build `Q` with `(P | Q)⇓` from a transition sequence of `P` ending in a
/// suspended state.
pub fn witness_from_path(path: &[Action]) -> Program {
    let mut q = Program::Nil;
    for a in path.iter().rev() {
        q = match a {
            Action::Tau => q,
            Action::Input { signal, value } => Program::par(q, Program::Emit(signal.clone(), value.to_expr())),
            Action::Output {
                extruded,
                signal,
                value,
            } => receiver(signal, value, extruded, q),
        };
    }
    q
}

/// A program `Q` with `(P | Q)⇓`, built from a shortest path witnessing `P⇓_L`.
pub fn witness_for_lsuspension(p: &Program, defs: &Definitions, u: &Universe, bounds: Bounds) -> Result<Program, WitnessError> {
    let mut ex = Explorer::new(defs.clone(), u.clone(), bounds);
    let id = ex.intern(p)?;
    let path = ex.l_suspension_path(id)?.ok_or(WitnessError::NotLSuspending)?;
    let actions: Vec<Action> = path.into_iter().map(|(a, _)| a).collect();
    Ok(witness_from_path(&actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::CanonMode;
    use crate::typecheck::{check as typecheck, TypedFile};

    fn load(name: &str) -> TypedFile {
        let path = format!("{}/examples/{name}.spi", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(path).unwrap();
        typecheck(&crate::surface::parse(&text).unwrap()).unwrap()
    }

    fn pair(l: &str, r: &str, game: Game, cfg: CheckConfig) -> Verdict {
        let (a, b) = (load(l), load(r));
        let (env, defs) = a.merge_with(&b).unwrap();
        check(game, &a.run, &b.run, &defs, &Universe::new(env), cfg).unwrap()
    }

    fn weak() -> Game {
        Game::Labelled(SuspensionKind::Weak)
    }

    #[test]
    fn reader_and_nil_are_labelled_equivalent() {
        let v = pair("reader", "nil", Game::Labelled(SuspensionKind::Immediate), CheckConfig::default());
        assert!(v.is_equivalent(), "{v}");
        let v = pair("reader", "nil", Game::Strong, CheckConfig::default());
        assert!(v.is_inequivalent(), "{v}");
    }

    #[test]
    fn dereference_needs_contexts() {
        let v = pair("deref_left", "deref_right", weak(), CheckConfig::default());
        assert_eq!(v.clauses().first(), Some(&Clause::L4), "{v}");
        let cfg = CheckConfig {
            contexts: ContextMode::EmptyOnly,
            ..CheckConfig::default()
        };
        assert!(pair("deref_left", "deref_right", weak(), cfg).is_equivalent());
    }

    #[test]
    fn choice_distinguishes_barbed_but_not_labelled() {
        let g = Game::Labelled(SuspensionKind::Immediate);
        let v = pair("choice_left", "choice_right", g, CheckConfig::default());
        assert!(v.is_equivalent(), "{v}");
        let v = pair("choice_left", "choice_right", Game::Barbed(SuspensionKind::Weak), CheckConfig::default());
        assert_eq!(v.failed_clause(), Some(Clause::B2), "{v}");
    }

    #[test]
    fn barbed_is_not_preserved_by_parallel_emission() {
        let g = Game::Barbed(SuspensionKind::Weak);
        assert!(pair("barbed_left", "barbed_right", g, CheckConfig::default()).is_equivalent());
        let (a, b) = (load("barbed_left"), load("barbed_right"));
        let (env, defs) = a.merge_with(&b).unwrap();
        let s = Program::emit("s", Expr::unit());
        let ctx = Context::par(Context::Hole, s);
        let report = congruence_probe(g, &a.run, &b.run, &[ctx], &defs, &Universe::new(env), CheckConfig::default(), 2).unwrap();
        assert_eq!(report.alarms.len(), 1);
    }

    #[test]
    fn extrusion_separates_weak_suspension() {
        let v = pair("extrusion_left", "extrusion_right", weak(), CheckConfig::default());
        assert!(v.is_equivalent(), "{v}");
        let v = pair("extrusion_left", "extrusion_right", Game::Labelled(SuspensionKind::Labelled), CheckConfig::default());
        assert!(v.is_inequivalent(), "{v}");
    }

    #[test]
    fn plays_replay_and_relations_validate() {
        let (a, b) = (load("choice_left"), load("choice_right"));
        let (env, defs) = a.merge_with(&b).unwrap();
        let u = Universe::new(env);
        let cfg = CheckConfig::default();
        let g = Game::Barbed(SuspensionKind::Weak);
        match check(g, &a.run, &b.run, &defs, &u, cfg).unwrap() {
            Verdict::Inequivalent { play, stats } => replay(g, &play, &defs, &u, cfg).unwrap_or_else(|e| panic!("{e}\n{}", Verdict::Inequivalent { play, stats })),
            other => panic!("{other}"),
        }
        let g = Game::Labelled(SuspensionKind::Immediate);
        match check(g, &a.run, &b.run, &defs, &u, cfg).unwrap() {
            Verdict::Equivalent { relation, .. } => validate_relation(g, &relation, &defs, &u, cfg).unwrap(),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn strong_laws_hold_up_to_alpha() {
        let f = typecheck(&crate::surface::parse("signal a, b : sig(unit)\nrun 0").unwrap()).unwrap();
        let u = Universe::new(f.env.clone());
        let cfg = CheckConfig {
            bounds: Bounds {
                mode: CanonMode::Alpha,
                ..Bounds::default()
            },
            ..CheckConfig::default()
        };
        let a = Program::emit("a", Expr::unit());
        let b = Program::present(Name::src("b"), Name::fresh(), Program::Nil, Cont::Nil);
        let l = Program::par(a.clone(), b.clone());
        let r = Program::par(b, a);
        assert!(strong_bisim(&l, &r, &f.defs, &u, cfg).unwrap().is_equivalent());
    }

    #[test]
    fn witness_makes_composition_suspend() {
        let f = load("extrusion_left");
        let u = Universe::new(f.env.clone());
        let b = Bounds::default();
        assert!(!suspends(&f.run, SuspensionKind::Weak, &f.defs, &u, b).unwrap());
        assert!(suspends(&f.run, SuspensionKind::Labelled, &f.defs, &u, b).unwrap());
        let w = witness_for_lsuspension(&f.run, &f.defs, &u, b).unwrap();
        let both = Program::par(f.run.clone(), w);
        assert!(suspends(&both, SuspensionKind::Weak, &f.defs, &u, b).unwrap());
    }

    #[test]
    fn weak_labelled_is_not_preserved_by_composition() {
        let (a, b, r) = (load("extrusion_left"), load("extrusion_right"), load("extrusion_observer"));
        let (env, defs) = a.merge_with(&b).unwrap();
        let env = env.merge(&r.env).unwrap();
        let ctx = Context::par(Context::Hole, r.run.clone());
        let report = congruence_probe(weak(), &a.run, &b.run, &[Context::Hole, ctx], &defs, &Universe::new(env), CheckConfig::default(), 2).unwrap();
        assert_eq!(report.equivalent, 1, "{:?}", report.results);
        assert_eq!(report.alarms.len(), 1, "{:?}", report.results);
    }
}
