//! The labelled transition system of an instant.
//!
//! Transitions are computed on arbitrary programs whose only free variables
//! are signal names. Bound names that are extruded or would be captured are
//! renamed to fresh `Tmp` names; the explorer later turns extruded names into
//! `Gen` names and canonicalizes states.

mod canon;
mod explorer;
mod universe;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::ast::{Cont, Definitions, Expr, Name, Program, Subst, Type, Value};

pub use canon::{canonical, CanonMode};
pub use explorer::{Bounds, Explorer, ExploreError, GraphDump, StateId};
pub use universe::{Universe, UniverseError};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Tau,
    Input { signal: Name, value: Value },
    Output { extruded: Vec<Name>, signal: Name, value: Value },
}

impl Action {
    pub fn free_names(&self) -> BTreeSet<Name> {
        match self {
            Action::Tau => BTreeSet::new(),
            Action::Input { signal, value } => {
                let mut s = value.names();
                s.insert(signal.clone());
                s
            }
            Action::Output {
                extruded,
                signal,
                value,
            } => {
                let mut s = value.names();
                s.insert(signal.clone());
                for t in extruded {
                    s.remove(t);
                }
                s
            }
        }
    }

    pub fn bound_names(&self) -> BTreeSet<Name> {
        match self {
            Action::Output { extruded, .. } => extruded.iter().cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        let mut s = self.free_names();
        s.extend(self.bound_names());
        s
    }

    /// Extruded names are distinct, occur in the value and differ from the subject.
    pub fn well_formed(&self) -> bool {
        match self {
            Action::Output {
                extruded,
                signal,
                value,
            } => {
                let distinct: BTreeSet<&Name> = extruded.iter().collect();
                distinct.len() == extruded.len()
                    && extruded.iter().all(|t| value.mentions(t) && t != signal)
            }
            _ => true,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Action::Tau => "tau",
            Action::Input { .. } => "input",
            Action::Output { .. } => "output",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Tau => write!(f, "tau"),
            Action::Input { signal, value } => write!(f, "{signal}?{value}"),
            Action::Output {
                extruded,
                signal,
                value,
            } => {
                if !extruded.is_empty() {
                    let ts: Vec<String> = extruded.iter().map(|t| t.to_string()).collect();
                    write!(f, "(new {}) ", ts.join(", "))?;
                }
                write!(f, "{signal}!{value}")
            }
        }
    }
}

/// JSON view of an action.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ActionJson {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extruded: Vec<String>,
}

impl From<&Action> for ActionJson {
    fn from(a: &Action) -> Self {
        match a {
            Action::Tau => ActionJson {
                kind: "tau",
                signal: None,
                value: None,
                extruded: Vec::new(),
            },
            Action::Input { signal, value } => ActionJson {
                kind: "input",
                signal: Some(signal.to_string()),
                value: Some(value.to_string()),
                extruded: Vec::new(),
            },
            Action::Output {
                extruded,
                signal,
                value,
            } => ActionJson {
                kind: "output",
                signal: Some(signal.to_string()),
                value: Some(value.to_string()),
                extruded: extruded.iter().map(|t| t.to_string()).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LtsError {
    #[error("call to undefined `{0}`")]
    UnboundDefinition(String),
    #[error("`{0}` is called with {1} argument(s) but defined with {2}")]
    ArityMismatch(String, usize, usize),
    #[error("expression `{0}` is not closed")]
    OpenExpression(String),
}

/// `match(v, p)`: the substitution `σ` with `dom(σ) = FV(p)` and `σp = v`, if any.
pub fn match_value(v: &Value, p: &Expr) -> Option<Subst> {
    fn go(v: &Value, p: &Expr, acc: &mut BTreeMap<Name, Value>) -> bool {
        match (p, v) {
            (Expr::Name(x), _) => match acc.get(x) {
                Some(w) => w == v,
                None => {
                    acc.insert(x.clone(), v.clone());
                    true
                }
            },
            (Expr::Con(c, ps), Value::Con(d, vs)) => {
                c == d && ps.len() == vs.len() && ps.iter().zip(vs).all(|(p, v)| go(v, p, acc))
            }
            _ => false,
        }
    }
    let mut acc = BTreeMap::new();
    go(v, p, &mut acc).then(|| acc.into_iter().collect())
}

/// A raw output transition: extruded names (fresh `Tmp` names with their
/// types), subject, value and residual.
#[derive(Clone, Debug)]
pub struct RawOutput {
    pub extruded: Vec<(Name, Type)>,
    pub signal: Name,
    pub value: Value,
    pub residual: Program,
}

fn closed_value(e: &Expr) -> Result<Value, LtsError> {
    e.to_value().ok_or_else(|| LtsError::OpenExpression(e.to_string()))
}

/// All output transitions, by rules (out), (par), (ν) and (ν_ex).
pub fn outputs(p: &Program) -> Result<Vec<RawOutput>, LtsError> {
    match p {
        Program::Emit(s, e) => Ok(vec![RawOutput {
            extruded: Vec::new(),
            signal: s.clone(),
            value: closed_value(e)?,
            residual: p.clone(),
        }]),
        Program::Par(a, b) => {
            let mut out = Vec::new();
            for o in outputs(a)? {
                out.push(RawOutput {
                    residual: Program::par(o.residual, (**b).clone()),
                    ..o
                });
            }
            for o in outputs(b)? {
                out.push(RawOutput {
                    residual: Program::par((**a).clone(), o.residual),
                    ..o
                });
            }
            Ok(out)
        }
        Program::New(t, ty, body) => {
            let mut out = Vec::new();
            for o in outputs(body)? {
                if &o.signal == t {
                    continue;
                }
                if o.value.mentions(t) {
                    let fresh = Name::fresh();
                    let ren = BTreeMap::from([(t.clone(), fresh.clone())]);
                    let mut extruded = vec![(fresh, ty.clone())];
                    extruded.extend(o.extruded);
                    out.push(RawOutput {
                        extruded,
                        signal: o.signal,
                        value: o.value.rename(&ren),
                        residual: o.residual.rename(&ren),
                    });
                } else {
                    out.push(RawOutput {
                        residual: Program::new_sig(t.clone(), ty.clone(), o.residual),
                        ..o
                    });
                }
            }
            Ok(out)
        }
        _ => Ok(Vec::new()),
    }
}

/// Free subjects of output transitions.
pub fn output_subjects(p: &Program) -> BTreeSet<Name> {
    match p {
        Program::Emit(s, _) => BTreeSet::from([s.clone()]),
        Program::Par(a, b) => {
            let mut s = output_subjects(a);
            s.extend(output_subjects(b));
            s
        }
        Program::New(t, _, body) => {
            let mut s = output_subjects(body);
            s.remove(t);
            s
        }
        _ => BTreeSet::new(),
    }
}

/// Free signals with an active reader (input transitions are possible on them).
pub fn input_signals(p: &Program) -> BTreeSet<Name> {
    match p {
        Program::Present { signal, .. } => BTreeSet::from([signal.clone()]),
        Program::Par(a, b) => {
            let mut s = input_signals(a);
            s.extend(input_signals(b));
            s
        }
        Program::New(t, _, body) => {
            let mut s = input_signals(body);
            s.remove(t);
            s
        }
        _ => BTreeSet::new(),
    }
}

/// Residuals of `p --s v-->`, by rules (in), (par) and (ν).
pub fn input_at(p: &Program, s: &Name, v: &Value) -> Vec<Program> {
    match p {
        Program::Present {
            signal, binder, body, ..
        } if signal == s => {
            let next = body.substitute(&Subst::single(binder.clone(), v.clone()));
            vec![Program::par(next, Program::Emit(s.clone(), v.to_expr()))]
        }
        Program::Par(a, b) => {
            let mut out: Vec<Program> = input_at(a, s, v)
                .into_iter()
                .map(|a2| Program::par(a2, (**b).clone()))
                .collect();
            out.extend(input_at(b, s, v).into_iter().map(|b2| Program::par((**a).clone(), b2)));
            out
        }
        Program::New(t, ty, body) => {
            if t == s {
                return Vec::new();
            }
            if v.mentions(t) {
                let fresh = Name::fresh();
                let body = body.rename(&BTreeMap::from([(t.clone(), fresh.clone())]));
                return input_at(&body, s, v)
                    .into_iter()
                    .map(|b| Program::new_sig(fresh.clone(), ty.clone(), b))
                    .collect();
            }
            input_at(body, s, v)
                .into_iter()
                .map(|b| Program::new_sig(t.clone(), ty.clone(), b))
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Can `p` perform a τ-transition? Does not need definitions: every call unfolds.
pub fn has_tau(p: &Program) -> bool {
    match p {
        Program::Call(..) | Program::MatchSig { .. } | Program::MatchVal { .. } => true,
        Program::Par(a, b) => {
            has_tau(a)
                || has_tau(b)
                || !output_subjects(a).is_disjoint(&input_signals(b))
                || !output_subjects(b).is_disjoint(&input_signals(a))
        }
        Program::New(_, _, body) => has_tau(body),
        _ => false,
    }
}

/// `P↓`: no τ-transition.
pub fn is_suspended(p: &Program) -> bool {
    !has_tau(p)
}

/// All τ-successors (not canonicalized).
pub fn tau_steps(p: &Program, defs: &Definitions) -> Result<Vec<Program>, LtsError> {
    match p {
        Program::Call(id, args) => {
            let def = defs.get(id).ok_or_else(|| LtsError::UnboundDefinition(id.to_string()))?;
            if def.params.len() != args.len() {
                return Err(LtsError::ArityMismatch(id.to_string(), args.len(), def.params.len()));
            }
            let vs = args.iter().map(closed_value).collect::<Result<Vec<_>, _>>()?;
            Ok(vec![defs.unfold(id, &vs).expect("checked above")])
        }
        Program::MatchSig {
            left,
            right,
            then,
            otherwise,
        } => Ok(vec![if left == right { (**then).clone() } else { (**otherwise).clone() }]),
        Program::MatchVal {
            scrutinee,
            pattern,
            then,
            otherwise,
        } => {
            let v = closed_value(scrutinee)?;
            Ok(vec![match match_value(&v, pattern) {
                Some(sigma) => then.substitute(&sigma),
                None => (**otherwise).clone(),
            }])
        }
        Program::Par(a, b) => {
            let mut out: Vec<Program> = tau_steps(a, defs)?
                .into_iter()
                .map(|a2| Program::par(a2, (**b).clone()))
                .collect();
            out.extend(tau_steps(b, defs)?.into_iter().map(|b2| Program::par((**a).clone(), b2)));
            synch(a, b, false, &mut out)?;
            synch(b, a, true, &mut out)?;
            Ok(out)
        }
        Program::New(t, ty, body) => Ok(tau_steps(body, defs)?
            .into_iter()
            .map(|b| Program::new_sig(t.clone(), ty.clone(), b))
            .collect()),
        _ => Ok(Vec::new()),
    }
}

/// Rule (synch): an output of `emitter` received by `receiver`.
fn synch(emitter: &Program, receiver: &Program, swapped: bool, out: &mut Vec<Program>) -> Result<(), LtsError> {
    let readers = input_signals(receiver);
    if readers.is_disjoint(&output_subjects(emitter)) {
        return Ok(());
    }
    for o in outputs(emitter)? {
        if !readers.contains(&o.signal) {
            continue;
        }
        for r in input_at(receiver, &o.signal, &o.value) {
            let mut p = if swapped {
                Program::par(r, o.residual.clone())
            } else {
                Program::par(o.residual.clone(), r)
            };
            for (t, ty) in o.extruded.iter().rev() {
                p = Program::new_sig(t.clone(), ty.clone(), p);
            }
            out.push(p);
        }
    }
    Ok(())
}

/// Turn the extruded `Tmp` names of a top-level output into `Gen` names, in
/// order of first occurrence in the value, using the smallest indices not in
/// `avoid`.
pub fn name_extrusion(o: &RawOutput, avoid: &BTreeSet<u32>) -> (Action, Program) {
    let order = o.value.names_in_order();
    let mut ext: Vec<&(Name, Type)> = o.extruded.iter().collect();
    ext.sort_by_key(|(t, _)| order.iter().position(|n| n == t));
    let mut ren = BTreeMap::new();
    let mut next = 0u32;
    let mut names = Vec::new();
    for (t, ty) in ext {
        while avoid.contains(&next) {
            next += 1;
        }
        let g = Name::gen(next, ty.clone());
        next += 1;
        ren.insert(t.clone(), g.clone());
        names.push(g);
    }
    (
        Action::Output {
            extruded: names,
            signal: o.signal.clone(),
            value: o.value.rename(&ren),
        },
        o.residual.rename(&ren),
    )
}

/// Indices of `Gen` names free in `p`.
pub fn gen_indices<'a>(names: impl IntoIterator<Item = &'a Name>) -> BTreeSet<u32> {
    names.into_iter().filter_map(Name::gen_index).collect()
}

/// All transitions of `p`, with inputs drawn from `u`. Successors are in
/// canonical form (per `mode`) and deduplicated.
pub fn transitions(p: &Program, defs: &Definitions, u: &Universe, mode: CanonMode) -> Result<Vec<(Action, Program)>, TransitionError> {
    transitions_in(p, defs, u, mode, &p.free_names())
}

/// As `transitions`, with `scope` (a superset of `fn(p)`) deciding which
/// names count as known when naming extruded and fresh input names.
pub fn transitions_in(
    p: &Program,
    defs: &Definitions,
    u: &Universe,
    mode: CanonMode,
    scope: &BTreeSet<Name>,
) -> Result<Vec<(Action, Program)>, TransitionError> {
    let mut out = BTreeSet::new();
    for q in tau_steps(p, defs)? {
        out.insert((Action::Tau, canonical(&q, mode)));
    }
    let avoid = gen_indices(scope);
    for o in outputs(p)? {
        let (a, q) = name_extrusion(&o, &avoid);
        out.insert((a, canonical(&q, mode)));
    }
    for (s, v) in u.inputs(&input_signals(p), scope)? {
        for q in input_at(p, &s, &v) {
            out.insert((
                Action::Input {
                    signal: s.clone(),
                    value: v.clone(),
                },
                canonical(&q, mode),
            ));
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TransitionError {
    #[error(transparent)]
    Lts(#[from] LtsError),
    #[error(transparent)]
    Universe(#[from] UniverseError),
}

/// Continuations of suspended readers, for end-of-instant purposes.
pub fn suspended_continuations(p: &Program) -> Vec<&Cont> {
    fn go<'a>(p: &'a Program, out: &mut Vec<&'a Cont>) {
        match p {
            Program::Present { cont, .. } => out.push(cont),
            Program::Par(a, b) => {
                go(a, out);
                go(b, out);
            }
            Program::New(_, _, b) => go(b, out),
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(p, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::alpha_equal;
    use crate::surface::parse_program;
    use crate::typecheck::check;

    fn core(src: &str) -> (Program, Definitions) {
        let f = check(&crate::surface::parse(src).unwrap()).unwrap();
        (f.run, f.defs)
    }

    #[test]
    fn match_examples() {
        let s = Value::sig("s");
        let sigma = match_value(&Value::list([s.clone()]), &Expr::list([Expr::name("s'")])).unwrap();
        assert_eq!(sigma.get(&Name::src("s'")), Some(&s));
        let x = match_value(&s, &Expr::name("x")).unwrap();
        assert_eq!(x.get(&Name::src("x")), Some(&s));
        let a = Value::list([Value::sig("a")]);
        assert!(match_value(&a, &Expr::list([Expr::name("x"), Expr::name("y")])).is_none());
        let ss = Value::list([s.clone(), s.clone()]);
        let p = Expr::list([Expr::name("x"), Expr::name("x")]);
        assert!(match_value(&ss, &p).is_some());
        assert!(match_value(&Value::list([s, Value::sig("t")]), &p).is_none());
    }

    #[test]
    fn emission_is_persistent() {
        let p = Program::emit("s", Expr::unit());
        let outs = outputs(&p).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].residual, p);
    }

    #[test]
    fn input_leaves_emission_behind() {
        let p = parse_program("when s(x) do x! else 0", &[]).unwrap();
        let (p, _) = core(&format!("run {p}"));
        let next = input_at(&p, &Name::src("s"), &Value::sig("a"));
        assert_eq!(next.len(), 1);
        let expected = Program::par(Program::emit("a", Expr::unit()), Program::Emit(Name::src("s"), Expr::name("a")));
        assert_eq!(next[0], expected);
    }

    #[test]
    fn signal_match_is_deterministic() {
        let (p, defs) = core("run if s = s then a! else b!");
        assert_eq!(tau_steps(&p, &defs).unwrap(), vec![Program::emit("a", Expr::unit())]);
        let (p, defs) = core("signal s, t : sig(unit)\nrun if s = t then a! else b!");
        assert_eq!(tau_steps(&p, &defs).unwrap(), vec![Program::emit("b", Expr::unit())]);
    }

    #[test]
    fn scope_extrusion_output() {
        let (p, _) = core("signal s : sig(sig(unit))\nrun new t : sig(unit) in (s!t | t!)");
        let outs = outputs(&p).unwrap();
        assert_eq!(outs.len(), 1);
        let (a, q) = name_extrusion(&outs[0], &BTreeSet::new());
        let g = Name::gen(0, Type::sig(Type::Unit));
        assert_eq!(
            a,
            Action::Output {
                extruded: vec![g.clone()],
                signal: Name::src("s"),
                value: Value::Sig(g.clone())
            }
        );
        let expected = Program::par(Program::Emit(Name::src("s"), Expr::Name(g.clone())), Program::Emit(g, Expr::unit()));
        assert!(alpha_equal(&q, &expected));
    }

    #[test]
    fn restricted_subject_blocks_output() {
        let (p, _) = core("run new s : sig(unit) in s!");
        assert!(outputs(&p).unwrap().is_empty());
    }

    #[test]
    fn looping_call_is_not_suspended() {
        let (p, defs) = core("def A() = A()\nrun A()");
        assert!(!is_suspended(&p));
        assert_eq!(tau_steps(&p, &defs).unwrap(), vec![p.clone()]);
    }

    #[test]
    fn emitter_and_reader_synchronise() {
        let (p, defs) = core("run s! | when s do 0 else 0");
        assert!(!is_suspended(&p));
        assert_eq!(tau_steps(&p, &defs).unwrap().len(), 1);
    }
}
