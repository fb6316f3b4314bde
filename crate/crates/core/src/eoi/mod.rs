//! End of instant: collecting emissions, choosing value lists for
//! dereferenced signals, and moving suspended programs to the next instant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;

use crate::ast::{Cont, Expr, Name, Program, Value};
use crate::lts::{canonical, is_suspended, suspended_continuations, CanonMode};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EoiError {
    #[error("program is not suspended")]
    NotSuspended,
    #[error("rule ({rule}) does not apply: {detail}")]
    PreconditionViolated { rule: &'static str, detail: String },
    #[error("more than {cap} end-of-instant choices")]
    CombinatoricBound { cap: usize },
}

/// `E`: the values emitted on each signal during an instant.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EmissionMap(BTreeMap<Name, BTreeSet<Value>>);

impl EmissionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &Name) -> BTreeSet<Value> {
        self.0.get(s).cloned().unwrap_or_default()
    }

    pub fn insert(&mut self, s: Name, v: Value) {
        self.0.entry(s).or_default().insert(v);
    }

    pub fn union(&mut self, other: EmissionMap) {
        for (s, vs) in other.0 {
            self.0.entry(s).or_default().extend(vs);
        }
    }

    /// `E[∅/s]`.
    pub fn erase(&mut self, s: &Name) {
        self.0.remove(s);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &BTreeSet<Value>)> {
        self.0.iter()
    }

    pub fn signals(&self) -> impl Iterator<Item = &Name> {
        self.0.keys()
    }
}

impl FromIterator<(Name, Value)> for EmissionMap {
    fn from_iter<I: IntoIterator<Item = (Name, Value)>>(iter: I) -> Self {
        let mut e = EmissionMap::new();
        for (s, v) in iter {
            e.insert(s, v);
        }
        e
    }
}

impl fmt::Display for EmissionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(s, vs)| format!("{{{}}}/{s}", vs.iter().join(", ")))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// `V`: for each signal, a list of values (empty lists are not stored).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueChoice(BTreeMap<Name, Vec<Value>>);

impl ValueChoice {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &Name) -> &[Value] {
        self.0.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `V[ℓ/s]`.
    pub fn set(&mut self, s: Name, l: Vec<Value>) {
        if l.is_empty() {
            self.0.remove(&s);
        } else {
            self.0.insert(s, l);
        }
    }

    pub fn with(&self, s: Name, l: Vec<Value>) -> ValueChoice {
        let mut v = self.clone();
        v.set(s, l);
        v
    }

    pub fn in_domain(&self, s: &Name) -> bool {
        self.0.contains_key(s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Vec<Value>)> {
        self.0.iter()
    }

    /// `V(K)`: replace every `!s` by the list `V(s)`.
    pub fn apply_cont(&self, k: &Cont) -> Program {
        match k {
            Cont::Nil => Program::Nil,
            Cont::Call(id, args) => Program::Call(id.clone(), args.iter().map(|a| self.apply_expr(a)).collect()),
        }
    }

    fn apply_expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Deref(s) => Value::list(self.get(s).iter().cloned()).to_expr(),
            Expr::Name(_) => e.clone(),
            Expr::Con(c, args) => Expr::Con(c.clone(), args.iter().map(|a| self.apply_expr(a)).collect()),
        }
    }

    /// `V ⊩ E` on every signal.
    pub fn represents(&self, e: &EmissionMap) -> bool {
        e.iter().all(|(s, m)| represents(self.get(s), m)) && self.0.keys().all(|s| !e.get(s).is_empty())
    }
}

impl FromIterator<(Name, Vec<Value>)> for ValueChoice {
    fn from_iter<I: IntoIterator<Item = (Name, Vec<Value>)>>(iter: I) -> Self {
        let mut v = ValueChoice::new();
        for (s, l) in iter {
            v.set(s, l);
        }
        v
    }
}

impl fmt::Display for ValueChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(s, l)| format!("{}/{s}", Value::list(l.iter().cloned())))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// `ℓ ⊩ M`: `ℓ` lists the elements of `M` without repetition.
pub fn represents(l: &[Value], m: &BTreeSet<Value>) -> bool {
    let set: BTreeSet<&Value> = l.iter().collect();
    set.len() == l.len() && l.len() == m.len() && l.iter().all(|v| m.contains(v))
}

fn collect(p: &Program) -> EmissionMap {
    match p {
        Program::Emit(s, e) => match e.to_value() {
            Some(v) => EmissionMap::from_iter([(s.clone(), v)]),
            None => EmissionMap::new(),
        },
        Program::Par(a, b) => {
            let mut e = collect(a);
            e.union(collect(b));
            e
        }
        Program::New(s, _, body) => {
            let mut e = collect(body);
            e.erase(s);
            e
        }
        _ => EmissionMap::new(),
    }
}

/// The emissions `E` of a suspended program.
pub fn emissions(p: &Program) -> Result<EmissionMap, EoiError> {
    if !is_suspended(p) {
        return Err(EoiError::NotSuspended);
    }
    Ok(collect(p))
}

/// Decides `V'(s)` for a restricted signal `s` from the set it must represent.
pub type Chooser<'a> = dyn FnMut(&Name, &BTreeSet<Value>) -> Vec<Value> + 'a;

/// `P ⇓(E,V) P'`, listing the values of restricted signals in sorted order.
pub fn eoi_step(p: &Program, v: &ValueChoice) -> Result<Program, EoiError> {
    eoi_step_with(p, v, &mut |_, m| m.iter().cloned().collect())
}

/// `P ⇓(E,V) P'` with `choose` picking the lists of restricted signals.
pub fn eoi_step_with(p: &Program, v: &ValueChoice, choose: &mut Chooser<'_>) -> Result<Program, EoiError> {
    if !is_suspended(p) {
        return Err(EoiError::NotSuspended);
    }
    step(p, v, choose)
}

fn step(p: &Program, v: &ValueChoice, choose: &mut Chooser<'_>) -> Result<Program, EoiError> {
    match p {
        Program::Nil => Ok(Program::Nil),
        Program::Emit(s, e) => {
            let val = e.to_value().ok_or_else(|| EoiError::PreconditionViolated {
                rule: "out",
                detail: format!("`{p}` emits an open expression"),
            })?;
            if v.get(s).contains(&val) {
                Ok(Program::Nil)
            } else {
                Err(EoiError::PreconditionViolated {
                    rule: "out",
                    detail: format!("{val} does not occur in V({s})"),
                })
            }
        }
        Program::Present { signal, cont, .. } => {
            if v.in_domain(signal) {
                Err(EoiError::PreconditionViolated {
                    rule: "in",
                    detail: format!("reader on {signal}, which is in dom(V)"),
                })
            } else {
                Ok(v.apply_cont(cont))
            }
        }
        Program::Par(a, b) => Ok(Program::par(step(a, v, choose)?, step(b, v, choose)?)),
        Program::New(s, ty, body) => {
            let m = collect(body).get(s);
            let l = choose(s, &m);
            if !represents(&l, &m) {
                return Err(EoiError::PreconditionViolated {
                    rule: "ν",
                    detail: format!("chosen list for {s} does not represent its emissions"),
                });
            }
            let inner = v.with(s.clone(), l);
            Ok(Program::new_sig(s.clone(), ty.clone(), step(body, &inner, choose)?))
        }
        Program::Call(..) | Program::MatchSig { .. } | Program::MatchVal { .. } => Err(EoiError::NotSuspended),
    }
}

/// Signals whose value lists can influence the next instant.
pub fn dereferenced(p: &Program) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    for k in suspended_continuations(p) {
        out.extend(k.derefs());
    }
    out
}

fn orderings(m: &BTreeSet<Value>, matters: bool) -> Vec<Vec<Value>> {
    if matters {
        m.iter().cloned().permutations(m.len()).collect()
    } else {
        vec![m.iter().cloned().collect()]
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).fold(1usize, |a, b| a.saturating_mul(b))
}

/// Every top-level `V ⊩ E` that can make a difference (lists of signals
/// that are never dereferenced are kept in sorted order).
pub fn top_choices(p: &Program, cap: usize) -> Result<Vec<ValueChoice>, EoiError> {
    let e = emissions(p)?;
    let derefs = dereferenced(p);
    let mut count = 1usize;
    for (s, m) in e.iter() {
        if derefs.contains(s) {
            count = count.saturating_mul(factorial(m.len()));
        }
    }
    if count > cap {
        return Err(EoiError::CombinatoricBound { cap });
    }
    let per_signal: Vec<Vec<(Name, Vec<Value>)>> = e
        .iter()
        .map(|(s, m)| orderings(m, derefs.contains(s)).into_iter().map(|l| (s.clone(), l)).collect())
        .collect();
    let mut out: Vec<ValueChoice> = per_signal
        .into_iter()
        .multi_cartesian_product()
        .map(|c| c.into_iter().collect())
        .collect();
    if out.is_empty() {
        out.push(ValueChoice::new());
    }
    Ok(out)
}

/// All `P'` with `P ⇓(E,V) P'`, over every choice for restricted signals.
pub fn all_steps(p: &Program, v: &ValueChoice, cap: usize) -> Result<Vec<Program>, EoiError> {
    if !is_suspended(p) {
        return Err(EoiError::NotSuspended);
    }
    let derefs = dereferenced(p);
    let out = all(p, v, &derefs, cap)?;
    Ok(out)
}

fn all(p: &Program, v: &ValueChoice, derefs: &BTreeSet<Name>, cap: usize) -> Result<Vec<Program>, EoiError> {
    match p {
        Program::Par(a, b) => {
            let xs = all(a, v, derefs, cap)?;
            let ys = all(b, v, derefs, cap)?;
            if xs.len().saturating_mul(ys.len()) > cap {
                return Err(EoiError::CombinatoricBound { cap });
            }
            Ok(xs
                .iter()
                .cartesian_product(ys.iter())
                .map(|(x, y)| Program::par(x.clone(), y.clone()))
                .collect())
        }
        Program::New(s, ty, body) => {
            let m = collect(body).get(s);
            let matters = derefs.contains(s);
            if matters && factorial(m.len()) > cap {
                return Err(EoiError::CombinatoricBound { cap });
            }
            let mut out = Vec::new();
            for l in orderings(&m, matters) {
                for q in all(body, &v.with(s.clone(), l), derefs, cap)? {
                    out.push(Program::new_sig(s.clone(), ty.clone(), q));
                }
                if out.len() > cap {
                    return Err(EoiError::CombinatoricBound { cap });
                }
            }
            Ok(out)
        }
        _ => Ok(vec![step(p, v, &mut |_, m| m.iter().cloned().collect())?]),
    }
}

pub const DEFAULT_CAP: usize = 40_320;

/// Each top-level choice `V` with the canonical successors it allows.
pub fn instants(p: &Program, cap: usize) -> Result<Vec<(ValueChoice, Vec<Program>)>, EoiError> {
    let mut out = Vec::new();
    for v in top_choices(p, cap)? {
        let succ: BTreeSet<Program> = all_steps(p, &v, cap)?
            .iter()
            .map(|q| canonical(q, CanonMode::Structural))
            .collect();
        out.push((v, succ.into_iter().collect()));
    }
    Ok(out)
}

/// `{P' | P ↦ P'}`, canonicalized.
pub fn next_instants(p: &Program) -> Result<BTreeSet<Program>, EoiError> {
    next_instants_capped(p, DEFAULT_CAP)
}

pub fn next_instants_capped(p: &Program, cap: usize) -> Result<BTreeSet<Program>, EoiError> {
    Ok(instants(p, cap)?.into_iter().flat_map(|(_, s)| s).collect())
}

/// Check a judgement `P ⇓(E,V) P'` rule by rule.
pub fn derives(p: &Program, e: &EmissionMap, v: &ValueChoice, q: &Program) -> bool {
    if collect(p) != *e {
        return false;
    }
    match (p, q) {
        (Program::Nil, Program::Nil) => true,
        (Program::Emit(s, x), Program::Nil) => x.to_value().is_some_and(|val| v.get(s).contains(&val)),
        (Program::Present { signal, cont, .. }, _) => !v.in_domain(signal) && v.apply_cont(cont) == *q,
        (Program::Par(a, b), Program::Par(c, d)) => derives(a, &collect(a), v, c) && derives(b, &collect(b), v, d),
        (Program::New(s, ty, body), Program::New(t, ty2, body2)) if s == t && ty == ty2 => {
            let be = collect(body);
            let m = be.get(s);
            m.iter()
                .cloned()
                .permutations(m.len())
                .any(|l| derives(body, &be, &v.with(s.clone(), l), body2))
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typecheck::check;

    fn core(src: &str) -> Program {
        check(&crate::surface::parse(src).unwrap()).unwrap().run
    }

    #[test]
    fn representation() {
        let v1 = Value::sig("v1");
        let v2 = Value::sig("v2");
        let m = BTreeSet::from([v1.clone(), v2.clone()]);
        assert!(represents(&[], &BTreeSet::new()));
        assert!(represents(&[v1.clone(), v2.clone()], &m));
        assert!(represents(&[v2.clone(), v1.clone()], &m));
        assert!(!represents(&[v1.clone(), v1.clone()], &BTreeSet::from([v1])));
    }

    #[test]
    fn restricted_emissions_are_erased() {
        assert_eq!(emissions(&Program::Nil).unwrap(), EmissionMap::new());
        assert_eq!(emissions(&core("run new s : sig(unit) in s!")).unwrap(), EmissionMap::new());
    }

    #[test]
    fn unsuspended_programs_are_rejected() {
        assert_eq!(emissions(&core("run a! | when a do 0 else 0")), Err(EoiError::NotSuspended));
    }

    #[test]
    fn pause_takes_continuation() {
        let p = core("def K() = 0\nrun pause.K()");
        let q = eoi_step(&p, &ValueChoice::new()).unwrap();
        match q {
            Program::New(_, _, body) => assert_eq!(*body, Program::call("K", vec![])),
            other => panic!("unexpected {other}"),
        }
        assert_eq!(next_instants(&Program::Nil).unwrap(), BTreeSet::from([Program::Nil]));
    }

    #[test]
    fn reader_on_emitted_signal_is_a_violation() {
        let p = core("run when s do 0 else 0");
        let v = ValueChoice::from_iter([(Name::src("s"), vec![Value::unit()])]);
        assert!(matches!(eoi_step(&p, &v), Err(EoiError::PreconditionViolated { rule: "in", .. })));
    }

    #[test]
    fn permutation_count() {
        let p = core("signal s : sig(list(unit))\ndef A(l) = 0\nrun s![] | s![*] | s![*; *] | when t do 0 else A(!s)");
        let all: usize = instants(&p, DEFAULT_CAP).unwrap().iter().map(|(_, s)| s.len()).sum();
        assert_eq!(all, 6);
    }
}
