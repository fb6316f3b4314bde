//! Core syntax: names, values, expressions, programs and definitions.
//!
//! All trees are immutable values. Binders are `New`, the variable of a
//! `Present`, every name of a value pattern, and definition parameters.

mod alpha;
mod subst;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use alpha::alpha_equal;
pub use subst::Subst;

pub type Sym = Arc<str>;

/// Constructor symbol of the unit value.
pub const UNIT: &str = "*";
pub const NIL: &str = "nil";
pub const CONS: &str = "cons";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Unit,
    Sig(Box<Type>),
    List(Box<Type>),
    /// User inductive type, introduced by constructor declarations.
    Data(Sym),
    /// Inference variable; never present after elaboration.
    Var(u32),
}

impl Type {
    pub fn sig(t: Type) -> Type {
        Type::Sig(Box::new(t))
    }

    pub fn list(t: Type) -> Type {
        Type::List(Box::new(t))
    }

    /// Payload type of a signal type.
    pub fn carried(&self) -> Option<&Type> {
        match self {
            Type::Sig(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Type::Var(_) => false,
            Type::Sig(t) | Type::List(t) => t.is_ground(),
            Type::Unit | Type::Data(_) => true,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Unit => write!(f, "unit"),
            Type::Sig(t) => write!(f, "sig({t})"),
            Type::List(t) => write!(f, "list({t})"),
            Type::Data(d) => write!(f, "{d}"),
            Type::Var(v) => write!(f, "?{v}"),
        }
    }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// A signal name or variable.
///
/// `Src` names come from source text. `Gen` names are free names created by
/// the semantics (extruded or freshly input); they carry their type so that a
/// state is self-describing. `Bound` names only ever occur bound: they are
/// the de Bruijn levels assigned by canonicalization. `Tmp` names are globally
/// unique and used for capture-avoiding renaming.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Name {
    Src(Sym),
    Gen(u32, Arc<Type>),
    Bound(u32),
    Tmp(u64),
}

impl Name {
    pub fn src(s: &str) -> Name {
        Name::Src(Arc::from(s))
    }

    pub fn fresh() -> Name {
        Name::Tmp(TMP_COUNTER.fetch_add(1, Ordering::Relaxed))
    }

    pub fn gen(index: u32, ty: Type) -> Name {
        Name::Gen(index, Arc::new(ty))
    }

    pub fn gen_index(&self) -> Option<u32> {
        match self {
            Name::Gen(i, _) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Name::Src(s) => write!(f, "{s}"),
            Name::Gen(i, _) => write!(f, "${i}"),
            Name::Bound(i) => write!(f, "#{i}"),
            Name::Tmp(i) => write!(f, "~{i}"),
        }
    }
}

/// Closed runtime values: signal names and constructor applications.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Sig(Name),
    Con(Sym, Vec<Value>),
}

impl Value {
    pub fn unit() -> Value {
        Value::Con(Arc::from(UNIT), Vec::new())
    }

    pub fn nil() -> Value {
        Value::Con(Arc::from(NIL), Vec::new())
    }

    pub fn cons(head: Value, tail: Value) -> Value {
        Value::Con(Arc::from(CONS), vec![head, tail])
    }

    pub fn con(c: &str, args: Vec<Value>) -> Value {
        Value::Con(Arc::from(c), args)
    }

    pub fn sig(s: &str) -> Value {
        Value::Sig(Name::src(s))
    }

    pub fn list(items: impl IntoIterator<Item = Value>) -> Value {
        let items: Vec<Value> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(Value::nil(), |tail, head| Value::cons(head, tail))
    }

    /// Elements of a `nil`/`cons` chain, or `None` if not a proper list.
    pub fn as_list(&self) -> Option<Vec<&Value>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Value::Con(c, args) if &**c == NIL && args.is_empty() => return Some(out),
                Value::Con(c, args) if &**c == CONS && args.len() == 2 => {
                    out.push(&args[0]);
                    cur = &args[1];
                }
                _ => return None,
            }
        }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    pub fn collect_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Value::Sig(n) => {
                out.insert(n.clone());
            }
            Value::Con(_, args) => args.iter().for_each(|a| a.collect_names(out)),
        }
    }

    /// Names in order of first occurrence (preorder).
    pub fn names_in_order(&self) -> Vec<Name> {
        fn go(v: &Value, out: &mut Vec<Name>) {
            match v {
                Value::Sig(n) => {
                    if !out.contains(n) {
                        out.push(n.clone())
                    }
                }
                Value::Con(_, args) => args.iter().for_each(|a| go(a, out)),
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn mentions(&self, n: &Name) -> bool {
        match self {
            Value::Sig(m) => m == n,
            Value::Con(_, args) => args.iter().any(|a| a.mentions(n)),
        }
    }

    /// Atoms have depth 0; `c(v1..vn)` with n > 0 has depth 1 + max depth(vi).
    pub fn depth(&self) -> usize {
        match self {
            Value::Sig(_) => 0,
            Value::Con(_, args) => args.iter().map(|a| a.depth() + 1).max().unwrap_or(0),
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            Value::Sig(n) => Expr::Name(n.clone()),
            Value::Con(c, args) => Expr::Con(c.clone(), args.iter().map(Value::to_expr).collect()),
        }
    }

    pub fn rename(&self, map: &BTreeMap<Name, Name>) -> Value {
        match self {
            Value::Sig(n) => Value::Sig(map.get(n).cloned().unwrap_or_else(|| n.clone())),
            Value::Con(c, args) => Value::Con(c.clone(), args.iter().map(|a| a.rename(map)).collect()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(items) = self.as_list() {
            write!(f, "[")?;
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    write!(f, "; ")?;
                }
                write!(f, "{v}")?;
            }
            return write!(f, "]");
        }
        match self {
            Value::Sig(n) => write!(f, "{n}"),
            Value::Con(c, args) if args.is_empty() => write!(f, "{c}"),
            Value::Con(c, args) => {
                write!(f, "{c}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Expressions, patterns and dereferencing expressions share one tree.
/// `Deref` is only well-formed inside continuation arguments, and patterns
/// never contain it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Name(Name),
    Con(Sym, Vec<Expr>),
    Deref(Name),
}

impl Expr {
    pub fn name(s: &str) -> Expr {
        Expr::Name(Name::src(s))
    }

    pub fn con(c: &str, args: Vec<Expr>) -> Expr {
        Expr::Con(Arc::from(c), args)
    }

    pub fn unit() -> Expr {
        Expr::con(UNIT, Vec::new())
    }

    pub fn nil() -> Expr {
        Expr::con(NIL, Vec::new())
    }

    pub fn list(items: impl IntoIterator<Item = Expr>) -> Expr {
        let items: Vec<Expr> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(Expr::nil(), |tail, head| Expr::con(CONS, vec![head, tail]))
    }

    /// The value denoted by a closed expression (names read as signals).
    pub fn to_value(&self) -> Option<Value> {
        match self {
            Expr::Name(n) => Some(Value::Sig(n.clone())),
            Expr::Con(c, args) => Some(Value::Con(
                c.clone(),
                args.iter().map(Expr::to_value).collect::<Option<Vec<_>>>()?,
            )),
            Expr::Deref(_) => None,
        }
    }

    pub fn has_deref(&self) -> bool {
        match self {
            Expr::Name(_) => false,
            Expr::Deref(_) => true,
            Expr::Con(_, args) => args.iter().any(Expr::has_deref),
        }
    }

    pub fn collect_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Name(n) | Expr::Deref(n) => {
                out.insert(n.clone());
            }
            Expr::Con(_, args) => args.iter().for_each(|a| a.collect_names(out)),
        }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    /// Pattern variables in order of first occurrence.
    pub fn pattern_vars(&self) -> Vec<Name> {
        fn go(e: &Expr, out: &mut Vec<Name>) {
            match e {
                Expr::Name(n) | Expr::Deref(n) => {
                    if !out.contains(n) {
                        out.push(n.clone())
                    }
                }
                Expr::Con(_, args) => args.iter().for_each(|a| go(a, out)),
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    /// Signals dereferenced in this expression.
    pub fn derefs(&self, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Deref(n) => {
                out.insert(n.clone());
            }
            Expr::Name(_) => {}
            Expr::Con(_, args) => args.iter().for_each(|a| a.derefs(out)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Proper list literals print as [a; b].
        let mut items = Vec::new();
        let mut cur = self;
        let is_list = loop {
            match cur {
                Expr::Con(c, args) if &**c == NIL && args.is_empty() => break true,
                Expr::Con(c, args) if &**c == CONS && args.len() == 2 => {
                    items.push(&args[0]);
                    cur = &args[1];
                }
                _ => break false,
            }
        };
        if is_list {
            write!(f, "[")?;
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    write!(f, "; ")?;
                }
                write!(f, "{v}")?;
            }
            return write!(f, "]");
        }
        match self {
            Expr::Name(n) => write!(f, "{n}"),
            Expr::Deref(n) => write!(f, "!{n}"),
            Expr::Con(c, args) if args.is_empty() => write!(f, "{c}"),
            Expr::Con(c, args) => {
                write!(f, "{c}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// End-of-instant continuation of a `present`: the null call or `A(r1..rn)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cont {
    Nil,
    Call(Sym, Vec<Expr>),
}

impl Cont {
    pub fn call(id: &str, args: Vec<Expr>) -> Cont {
        Cont::Call(Arc::from(id), args)
    }

    pub fn derefs(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        if let Cont::Call(_, args) = self {
            args.iter().for_each(|a| a.derefs(&mut out));
        }
        out
    }

    pub fn to_program(&self) -> Program {
        match self {
            Cont::Nil => Program::Nil,
            Cont::Call(id, args) => Program::Call(id.clone(), args.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Program {
    Nil,
    Call(Sym, Vec<Expr>),
    Emit(Name, Expr),
    Present {
        signal: Name,
        binder: Name,
        body: Box<Program>,
        cont: Cont,
    },
    MatchSig {
        left: Name,
        right: Name,
        then: Box<Program>,
        otherwise: Box<Program>,
    },
    MatchVal {
        scrutinee: Expr,
        pattern: Expr,
        then: Box<Program>,
        otherwise: Box<Program>,
    },
    New(Name, Type, Box<Program>),
    Par(Box<Program>, Box<Program>),
}

impl Program {
    pub fn par(a: Program, b: Program) -> Program {
        Program::Par(Box::new(a), Box::new(b))
    }

    /// Left-associated parallel composition; `0` for an empty list.
    pub fn par_all(items: impl IntoIterator<Item = Program>) -> Program {
        let mut it = items.into_iter();
        match it.next() {
            None => Program::Nil,
            Some(first) => it.fold(first, Program::par),
        }
    }

    pub fn new_sig(name: Name, ty: Type, body: Program) -> Program {
        Program::New(name, ty, Box::new(body))
    }

    pub fn emit(s: &str, e: Expr) -> Program {
        Program::Emit(Name::src(s), e)
    }

    pub fn call(id: &str, args: Vec<Expr>) -> Program {
        Program::Call(Arc::from(id), args)
    }

    pub fn present(s: Name, x: Name, body: Program, cont: Cont) -> Program {
        Program::Present {
            signal: s,
            binder: x,
            body: Box::new(body),
            cont,
        }
    }

    pub fn match_sig(a: Name, b: Name, then: Program, otherwise: Program) -> Program {
        Program::MatchSig {
            left: a,
            right: b,
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    pub fn match_val(e: Expr, p: Expr, then: Program, otherwise: Program) -> Program {
        Program::MatchVal {
            scrutinee: e,
            pattern: p,
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    /// Free names (signal names and variables).
    pub fn free_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        let add = |n: &Name, bound: &Vec<Name>, out: &mut BTreeSet<Name>| {
            if !bound.contains(n) {
                out.insert(n.clone());
            }
        };
        let add_expr = |e: &Expr, bound: &Vec<Name>, out: &mut BTreeSet<Name>| {
            for n in e.names() {
                if !bound.contains(&n) {
                    out.insert(n);
                }
            }
        };
        match self {
            Program::Nil => {}
            Program::Call(_, args) => args.iter().for_each(|a| add_expr(a, bound, out)),
            Program::Emit(s, e) => {
                add(s, bound, out);
                add_expr(e, bound, out);
            }
            Program::Present {
                signal,
                binder,
                body,
                cont,
            } => {
                add(signal, bound, out);
                if let Cont::Call(_, args) = cont {
                    args.iter().for_each(|a| add_expr(a, bound, out));
                }
                bound.push(binder.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Program::MatchSig {
                left,
                right,
                then,
                otherwise,
            } => {
                add(left, bound, out);
                add(right, bound, out);
                then.collect_free(bound, out);
                otherwise.collect_free(bound, out);
            }
            Program::MatchVal {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => {
                add_expr(scrutinee, bound, out);
                let vars = pattern.pattern_vars();
                let k = vars.len();
                bound.extend(vars);
                then.collect_free(bound, out);
                bound.truncate(bound.len() - k);
                otherwise.collect_free(bound, out);
            }
            Program::New(t, _, body) => {
                bound.push(t.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Program::Par(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
        }
    }

    pub fn has_free(&self, n: &Name) -> bool {
        self.free_names().contains(n)
    }

    /// Size in nodes; used for generator limits and diagnostics.
    pub fn size(&self) -> usize {
        match self {
            Program::Nil | Program::Call(..) | Program::Emit(..) => 1,
            Program::Present { body, .. } => 1 + body.size(),
            Program::MatchSig { then, otherwise, .. } | Program::MatchVal { then, otherwise, .. } => {
                1 + then.size() + otherwise.size()
            }
            Program::New(_, _, b) => 1 + b.size(),
            Program::Par(a, b) => a.size() + b.size(),
        }
    }

    /// Does `Deref` occur outside continuation arguments?
    pub fn misplaced_deref(&self) -> bool {
        match self {
            Program::Nil => false,
            Program::Call(_, args) => args.iter().any(Expr::has_deref),
            Program::Emit(_, e) => e.has_deref(),
            Program::Present { body, .. } => body.misplaced_deref(),
            Program::MatchSig { then, otherwise, .. } => then.misplaced_deref() || otherwise.misplaced_deref(),
            Program::MatchVal {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => {
                scrutinee.has_deref() || pattern.has_deref() || then.misplaced_deref() || otherwise.misplaced_deref()
            }
            Program::New(_, _, b) => b.misplaced_deref(),
            Program::Par(a, b) => a.misplaced_deref() || b.misplaced_deref(),
        }
    }

    /// Identifiers of definitions called anywhere in the program.
    pub fn called(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Program::Nil | Program::Emit(..) => {}
            Program::Call(id, _) => {
                out.insert(id.clone());
            }
            Program::Present { body, cont, .. } => {
                if let Cont::Call(id, _) = cont {
                    out.insert(id.clone());
                }
                body.called(out);
            }
            Program::MatchSig { then, otherwise, .. } | Program::MatchVal { then, otherwise, .. } => {
                then.called(out);
                otherwise.called(out);
            }
            Program::New(_, _, b) => b.called(out),
            Program::Par(a, b) => {
                a.called(out);
                b.called(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub params: Vec<(Name, Type)>,
    pub body: Program,
}

/// Table of recursive definitions `A(x1..xn) = P`, one equation per identifier.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Definitions {
    map: BTreeMap<Sym, Definition>,
}

impl Definitions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` (and leaves the table unchanged) if `id` is already defined.
    pub fn insert(&mut self, id: Sym, def: Definition) -> bool {
        if self.map.contains_key(&id) {
            return false;
        }
        self.map.insert(id, def);
        true
    }

    pub fn get(&self, id: &str) -> Option<&Definition> {
        self.map.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &Definition)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Unfold `A(v1..vn)` into `[v/x]P`.
    pub fn unfold(&self, id: &str, args: &[Value]) -> Option<Program> {
        let def = self.get(id)?;
        if def.params.len() != args.len() {
            return None;
        }
        let sigma: Subst = def
            .params
            .iter()
            .map(|(x, _)| x.clone())
            .zip(args.iter().cloned())
            .collect();
        Some(def.body.substitute(&sigma))
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::surface::print::write_program(f, self, false)
    }
}

impl fmt::Display for Cont {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cont::Nil => write!(f, "0"),
            Cont::Call(id, args) => {
                write!(f, "{id}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_names_nil_is_empty() {
        assert!(Program::Nil.free_names().is_empty());
    }

    #[test]
    fn new_removes_binder() {
        let p = Program::new_sig(
            Name::src("s"),
            Type::sig(Type::Unit),
            Program::emit("s", Expr::name("v")),
        );
        assert_eq!(p.free_names(), BTreeSet::from([Name::src("v")]));
    }

    #[test]
    fn pattern_binds_in_then_only() {
        let p = Program::match_val(
            Expr::name("u"),
            Expr::list([Expr::name("x")]),
            Program::emit("x", Expr::unit()),
            Program::emit("x", Expr::unit()),
        );
        assert_eq!(p.free_names(), BTreeSet::from([Name::src("u"), Name::src("x")]));
    }

    #[test]
    fn list_values_round_trip() {
        let l = Value::list([Value::sig("a"), Value::unit()]);
        assert_eq!(l.to_string(), "[a; *]");
        assert_eq!(l.as_list().unwrap().len(), 2);
        assert_eq!(l.depth(), 2);
        assert_eq!(l.to_expr().to_value().unwrap(), l);
    }

    #[test]
    fn deref_outside_continuation_is_flagged() {
        let bad = Program::call("A", vec![Expr::Deref(Name::src("s"))]);
        assert!(bad.misplaced_deref());
        let ok = Program::present(
            Name::src("s"),
            Name::src("x"),
            Program::Nil,
            Cont::call("A", vec![Expr::Deref(Name::src("s"))]),
        );
        assert!(!ok.misplaced_deref());
    }
}
