use std::collections::{BTreeMap, BTreeSet};

use super::{Cont, Expr, Name, Program, Value};

/// Simultaneous substitution of values for variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    map: BTreeMap<Name, Value>,
}

impl FromIterator<(Name, Value)> for Subst {
    fn from_iter<I: IntoIterator<Item = (Name, Value)>>(iter: I) -> Self {
        Subst {
            map: iter.into_iter().collect(),
        }
    }
}

impl Subst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(x: Name, v: Value) -> Self {
        let mut s = Self::new();
        s.insert(x, v);
        s
    }

    /// Injective renaming of names.
    pub fn renaming<'a>(pairs: impl IntoIterator<Item = (&'a Name, &'a Name)>) -> Self {
        pairs
            .into_iter()
            .map(|(a, b)| (a.clone(), Value::Sig(b.clone())))
            .collect()
    }

    pub fn insert(&mut self, x: Name, v: Value) {
        self.map.insert(x, v);
    }

    pub fn get(&self, x: &Name) -> Option<&Value> {
        self.map.get(x)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value)> {
        self.map.iter()
    }

    fn range_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for v in self.map.values() {
            v.collect_names(&mut out);
        }
        out
    }

    fn without(&self, xs: &[Name]) -> Subst {
        let mut s = self.clone();
        for x in xs {
            s.map.remove(x);
        }
        s
    }

    pub fn apply_value(&self, v: &Value) -> Value {
        match v {
            Value::Sig(n) => self.map.get(n).cloned().unwrap_or_else(|| v.clone()),
            Value::Con(c, args) => Value::Con(c.clone(), args.iter().map(|a| self.apply_value(a)).collect()),
        }
    }

    pub fn apply_expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Name(n) => match self.map.get(n) {
                Some(v) => v.to_expr(),
                None => e.clone(),
            },
            Expr::Deref(n) => Expr::Deref(self.signal(n)),
            Expr::Con(c, args) => Expr::Con(c.clone(), args.iter().map(|a| self.apply_expr(a)).collect()),
        }
    }

    /// Image of a name in signal position.
    fn signal(&self, n: &Name) -> Name {
        match self.map.get(n) {
            None => n.clone(),
            Some(Value::Sig(m)) => m.clone(),
            Some(v) => panic!("ill-typed substitution: value {v} for signal {n}"),
        }
    }

    /// Restrict the substitution below binders `xs`, renaming binders that
    /// would capture a name of the range. Returns the new binders and the
    /// substitution for the scope.
    fn under(&self, xs: &[Name]) -> (Vec<Name>, Subst) {
        let mut inner = self.without(xs);
        if inner.is_empty() {
            return (xs.to_vec(), inner);
        }
        let range = inner.range_names();
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            if range.contains(x) {
                let fresh = Name::fresh();
                inner.map.insert(x.clone(), Value::Sig(fresh.clone()));
                out.push(fresh);
            } else {
                out.push(x.clone());
            }
        }
        (out, inner)
    }

    pub fn apply(&self, p: &Program) -> Program {
        if self.is_empty() {
            return p.clone();
        }
        match p {
            Program::Nil => Program::Nil,
            Program::Call(id, args) => Program::Call(id.clone(), args.iter().map(|a| self.apply_expr(a)).collect()),
            Program::Emit(s, e) => Program::Emit(self.signal(s), self.apply_expr(e)),
            Program::Present {
                signal,
                binder,
                body,
                cont,
            } => {
                let (xs, inner) = self.under(std::slice::from_ref(binder));
                Program::Present {
                    signal: self.signal(signal),
                    binder: xs.into_iter().next().unwrap(),
                    body: Box::new(inner.apply(body)),
                    cont: self.apply_cont(cont),
                }
            }
            Program::MatchSig {
                left,
                right,
                then,
                otherwise,
            } => Program::MatchSig {
                left: self.signal(left),
                right: self.signal(right),
                then: Box::new(self.apply(then)),
                otherwise: Box::new(self.apply(otherwise)),
            },
            Program::MatchVal {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => {
                let vars = pattern.pattern_vars();
                let (xs, inner) = self.under(&vars);
                let rename: BTreeMap<Name, Name> = vars.into_iter().zip(xs).collect();
                Program::MatchVal {
                    scrutinee: self.apply_expr(scrutinee),
                    pattern: rename_expr(pattern, &rename),
                    then: Box::new(inner.apply(then)),
                    otherwise: Box::new(self.apply(otherwise)),
                }
            }
            Program::New(t, ty, body) => {
                let (xs, inner) = self.under(std::slice::from_ref(t));
                Program::New(xs.into_iter().next().unwrap(), ty.clone(), Box::new(inner.apply(body)))
            }
            Program::Par(a, b) => Program::par(self.apply(a), self.apply(b)),
        }
    }

    pub fn apply_cont(&self, k: &Cont) -> Cont {
        match k {
            Cont::Nil => Cont::Nil,
            Cont::Call(id, args) => Cont::Call(id.clone(), args.iter().map(|a| self.apply_expr(a)).collect()),
        }
    }
}

pub(crate) fn rename_expr(e: &Expr, map: &BTreeMap<Name, Name>) -> Expr {
    match e {
        Expr::Name(n) => Expr::Name(map.get(n).cloned().unwrap_or_else(|| n.clone())),
        Expr::Deref(n) => Expr::Deref(map.get(n).cloned().unwrap_or_else(|| n.clone())),
        Expr::Con(c, args) => Expr::Con(c.clone(), args.iter().map(|a| rename_expr(a, map)).collect()),
    }
}

impl Program {
    /// Capture-avoiding simultaneous substitution.
    pub fn substitute(&self, sigma: &Subst) -> Program {
        sigma.apply(self)
    }

    /// Rename free names according to `map` (capture-avoiding).
    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> Program {
        Subst::renaming(map.iter()).apply(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{alpha_equal, Type};

    #[test]
    fn emit_payload_substituted() {
        let p = Program::emit("s", Expr::name("x"));
        let q = p.substitute(&Subst::single(Name::src("x"), Value::sig("v")));
        assert_eq!(q, Program::emit("s", Expr::name("v")));
    }

    #[test]
    fn binder_is_renamed_to_avoid_capture() {
        // (new t in s!x)[t/x] must not capture t.
        let p = Program::new_sig(
            Name::src("t"),
            Type::sig(Type::Unit),
            Program::par(Program::emit("s", Expr::name("x")), Program::emit("t", Expr::unit())),
        );
        let q = p.substitute(&Subst::single(Name::src("x"), Value::sig("t")));
        assert!(q.free_names().contains(&Name::src("t")));
        let Program::New(b, _, _) = &q else { panic!() };
        assert_ne!(b, &Name::src("t"));
    }

    #[test]
    fn shadowed_variable_untouched() {
        let p = Program::present(
            Name::src("s"),
            Name::src("x"),
            Program::emit("s", Expr::name("x")),
            Cont::Nil,
        );
        let q = p.substitute(&Subst::single(Name::src("x"), Value::unit()));
        assert!(alpha_equal(&p, &q));
    }
}
