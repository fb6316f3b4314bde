//! First-order, monomorphic type inference.
//!
//! Signals declared with `signal`, annotations on binders and constructor
//! declarations seed the inference; everything else is solved by
//! unification over the whole file. `nil` and `cons` are the only
//! polymorphic symbols. Type variables left unconstrained default to `unit`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ast::{Cont, Definition, Definitions, Expr, Name, Program, Sym, Type, CONS, NIL, UNIT};
use crate::surface::{self, desugar, lift, DesugarError, SProc, SourceFile};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("{context}: type mismatch in `{term}`: expected {expected}, found {found}")]
    Mismatch {
        context: String,
        term: String,
        expected: Type,
        found: Type,
    },
    #[error("{context}: unknown constructor `{name}` in `{term}`")]
    UnknownConstructor { context: String, name: String, term: String },
    #[error("{context}: `{name}` is not a signal in `{term}`")]
    NotASignal { context: String, name: String, term: String },
    #[error("{context}: unbound name `{name}`")]
    Unbound { context: String, name: String },
    #[error("{context}: unknown definition `{name}`")]
    UnknownDefinition { context: String, name: String },
    #[error("{context}: `{name}` expects {expected} argument(s), got {found}")]
    Arity {
        context: String,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("constructor `{name}`: {message}")]
    BadDeclaration { name: String, message: String },
    #[error(transparent)]
    Desugar(#[from] DesugarError),
}

/// Declared constructor signatures (`*`, `nil`, `cons` are built in).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Constructors {
    map: BTreeMap<Sym, (Vec<Type>, Type)>,
}

impl Constructors {
    pub fn get(&self, c: &str) -> Option<&(Vec<Type>, Type)> {
        self.map.get(c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &(Vec<Type>, Type))> {
        self.map.iter()
    }

    pub fn insert(&mut self, c: Sym, args: Vec<Type>, result: Type) {
        self.map.insert(c, (args, result));
    }

    pub fn decls(&self) -> Vec<surface::ConstructorDecl> {
        self.map
            .iter()
            .map(|(n, (a, r))| surface::ConstructorDecl {
                name: n.clone(),
                args: a.clone(),
                result: r.clone(),
            })
            .collect()
    }

    /// Constructors producing values of `ty`, with their argument types.
    pub fn producing(&self, ty: &Type) -> Vec<(Sym, Vec<Type>)> {
        match ty {
            Type::Unit => vec![(Arc::from(UNIT), Vec::new())],
            Type::List(t) => vec![
                (Arc::from(NIL), Vec::new()),
                (Arc::from(CONS), vec![(**t).clone(), ty.clone()]),
            ],
            Type::Data(d) => self
                .map
                .iter()
                .filter(|(_, (_, r))| matches!(r, Type::Data(e) if e == d))
                .map(|(n, (a, _))| (n.clone(), a.clone()))
                .collect(),
            Type::Sig(_) | Type::Var(_) => Vec::new(),
        }
    }
}

/// Everything needed to type programs of a file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeEnv {
    pub constructors: Constructors,
    /// Free signal names and their (signal) types.
    pub globals: BTreeMap<Name, Type>,
    /// Parameter types of definitions.
    pub defs: BTreeMap<Sym, Vec<Type>>,
}

impl TypeEnv {
    /// Type of a free name: declared, or carried by a generated name.
    pub fn name_type(&self, n: &Name) -> Option<Type> {
        match n {
            Name::Gen(_, t) => Some((**t).clone()),
            _ => self.globals.get(n).cloned(),
        }
    }

    /// Merge two environments; shared names must agree.
    pub fn merge(&self, other: &TypeEnv) -> Result<TypeEnv, String> {
        let mut out = self.clone();
        for (c, sig) in other.constructors.iter() {
            match out.constructors.get(c) {
                Some(s) if s != sig => return Err(format!("constructor `{c}` declared differently")),
                _ => out.constructors.insert(c.clone(), sig.0.clone(), sig.1.clone()),
            }
        }
        for (n, t) in &other.globals {
            match out.globals.get(n) {
                Some(u) if u != t => return Err(format!("signal `{n}` has type {u} in one file and {t} in the other")),
                _ => {
                    out.globals.insert(n.clone(), t.clone());
                }
            }
        }
        for (d, ts) in &other.defs {
            match out.defs.get(d) {
                Some(us) if us != ts => return Err(format!("definition `{d}` typed differently")),
                _ => {
                    out.defs.insert(d.clone(), ts.clone());
                }
            }
        }
        Ok(out)
    }
}

/// Result of checking a file: core definitions and entry program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedFile {
    pub env: TypeEnv,
    pub defs: Definitions,
    pub run: Program,
    /// The desugared source; used to desugar further programs consistently.
    pub source: SourceFile,
}

impl TypedFile {
    /// Combine with another file checked independently. Signal types must
    /// agree and definitions present in both must be identical.
    pub fn merge_with(&self, other: &TypedFile) -> Result<(TypeEnv, Definitions), String> {
        let env = self.env.merge(&other.env)?;
        let mut defs = self.defs.clone();
        for (id, d) in other.defs.iter() {
            match defs.get(id) {
                Some(e) if e != d => return Err(format!("definition `{id}` differs between the files")),
                Some(_) => {}
                None => {
                    defs.insert(id.clone(), d.clone());
                }
            }
        }
        Ok((env, defs))
    }
}

struct Infer<'a> {
    constructors: &'a Constructors,
    bindings: Vec<Option<Type>>,
    globals: BTreeMap<Sym, Type>,
    /// Whether unknown free names become new globals (file mode).
    open: bool,
    defs: BTreeMap<Sym, Vec<Type>>,
    context: String,
}

impl<'a> Infer<'a> {
    fn fresh(&mut self) -> Type {
        self.bindings.push(None);
        Type::Var(self.bindings.len() as u32 - 1)
    }

    fn instantiate(&mut self, t: &Type) -> Type {
        match t {
            Type::Var(_) => self.fresh(),
            Type::Sig(a) => Type::sig(self.instantiate(a)),
            Type::List(a) => Type::list(self.instantiate(a)),
            other => other.clone(),
        }
    }

    fn resolve(&self, t: &Type) -> Type {
        match t {
            Type::Var(v) => match &self.bindings[*v as usize] {
                Some(b) => self.resolve(b),
                None => t.clone(),
            },
            Type::Sig(a) => Type::sig(self.resolve(a)),
            Type::List(a) => Type::list(self.resolve(a)),
            other => other.clone(),
        }
    }

    /// Resolve and default remaining variables to `unit`.
    fn zonk(&self, t: &Type) -> Type {
        match self.resolve(t) {
            Type::Var(_) => Type::Unit,
            Type::Sig(a) => Type::sig(self.zonk(&a)),
            Type::List(a) => Type::list(self.zonk(&a)),
            other => other,
        }
    }

    fn occurs(&self, v: u32, t: &Type) -> bool {
        match self.resolve(t) {
            Type::Var(w) => v == w,
            Type::Sig(a) | Type::List(a) => self.occurs(v, &a),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Type, b: &Type) -> bool {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Type::Var(v), Type::Var(w)) if v == w => true,
            (Type::Var(v), t) | (t, Type::Var(v)) => {
                if self.occurs(*v, t) {
                    return false;
                }
                self.bindings[*v as usize] = Some(t.clone());
                true
            }
            (Type::Sig(x), Type::Sig(y)) | (Type::List(x), Type::List(y)) => self.unify(x, y),
            _ => a == b,
        }
    }

    fn expect(&mut self, expected: &Type, found: &Type, term: &dyn std::fmt::Display) -> Result<(), TypeError> {
        if self.unify(expected, found) {
            Ok(())
        } else {
            Err(TypeError::Mismatch {
                context: self.context.clone(),
                term: term.to_string(),
                expected: self.resolve(expected),
                found: self.resolve(found),
            })
        }
    }

    fn lookup(&mut self, scope: &[(Sym, Type)], x: &Sym) -> Result<Type, TypeError> {
        if let Some((_, t)) = scope.iter().rev().find(|(y, _)| y == x) {
            return Ok(t.clone());
        }
        if let Some(t) = self.globals.get(x) {
            return Ok(t.clone());
        }
        if !self.open {
            return Err(TypeError::Unbound {
                context: self.context.clone(),
                name: x.to_string(),
            });
        }
        let t = self.fresh();
        self.globals.insert(x.clone(), t.clone());
        Ok(t)
    }

    fn signal(&mut self, scope: &[(Sym, Type)], s: &Sym, term: &dyn std::fmt::Display) -> Result<Type, TypeError> {
        let ts = self.lookup(scope, s)?;
        let carried = self.fresh();
        if !self.unify(&ts, &Type::sig(carried.clone())) {
            return Err(TypeError::NotASignal {
                context: self.context.clone(),
                name: s.to_string(),
                term: term.to_string(),
            });
        }
        Ok(carried)
    }

    fn expr(&mut self, scope: &[(Sym, Type)], e: &Expr, term: &dyn std::fmt::Display) -> Result<Type, TypeError> {
        match e {
            Expr::Name(n) => self.lookup(scope, &name_sym(n)),
            Expr::Deref(n) => {
                let t = self.signal(scope, &name_sym(n), term)?;
                Ok(Type::list(t))
            }
            Expr::Con(c, args) => {
                let Some((params, result)) = self.constructor_sig(c) else {
                    return Err(TypeError::UnknownConstructor {
                        context: self.context.clone(),
                        name: c.to_string(),
                        term: term.to_string(),
                    });
                };
                if params.len() != args.len() {
                    return Err(TypeError::Arity {
                        context: self.context.clone(),
                        name: c.to_string(),
                        expected: params.len(),
                        found: args.len(),
                    });
                }
                for (p, a) in params.iter().zip(args) {
                    let ta = self.expr(scope, a, term)?;
                    self.expect(p, &ta, term)?;
                }
                Ok(result)
            }
        }
    }

    fn constructor_sig(&mut self, c: &str) -> Option<(Vec<Type>, Type)> {
        match c {
            UNIT => Some((Vec::new(), Type::Unit)),
            NIL => Some((Vec::new(), Type::list(self.fresh()))),
            CONS => {
                let a = self.fresh();
                Some((vec![a.clone(), Type::list(a.clone())], Type::list(a)))
            }
            _ => self.constructors.get(c).cloned(),
        }
    }

    fn call(&mut self, scope: &[(Sym, Type)], id: &Sym, args: &[Expr], term: &dyn std::fmt::Display) -> Result<(), TypeError> {
        let Some(params) = self.defs.get(id).cloned() else {
            return Err(TypeError::UnknownDefinition {
                context: self.context.clone(),
                name: id.to_string(),
            });
        };
        if params.len() != args.len() {
            return Err(TypeError::Arity {
                context: self.context.clone(),
                name: id.to_string(),
                expected: params.len(),
                found: args.len(),
            });
        }
        for (p, a) in params.iter().zip(args) {
            let ta = self.expr(scope, a, term)?;
            self.expect(p, &ta, term)?;
        }
        Ok(())
    }

    /// Check a sugar-free surface program and build the core program, with
    /// `New` types possibly containing variables.
    fn proc(&mut self, scope: &mut Vec<(Sym, Type)>, p: &SProc) -> Result<Program, TypeError> {
        match p {
            SProc::Nil => Ok(Program::Nil),
            SProc::Call(id, args) => {
                self.call(scope, id, args, p)?;
                Ok(Program::Call(id.clone(), args.clone()))
            }
            SProc::Emit(s, e) => {
                let carried = self.signal(scope, s, p)?;
                let te = self.expr(scope, e, p)?;
                self.expect(&carried, &te, p)?;
                Ok(Program::Emit(Name::Src(s.clone()), e.clone()))
            }
            SProc::When {
                signal,
                binder,
                body,
                cont,
            } => {
                let carried = self.signal(scope, signal, p)?;
                let (x, ann) = binder.clone().expect("desugared `when` has a binder");
                if let Some(t) = ann {
                    let t = self.instantiate(&t);
                    self.expect(&t, &carried, p)?;
                }
                if let Cont::Call(id, args) = cont {
                    self.call(scope, id, args, cont)?;
                }
                scope.push((x.clone(), carried));
                let body = self.proc(scope, body);
                scope.pop();
                Ok(Program::present(Name::Src(signal.clone()), Name::Src(x), body?, cont.clone()))
            }
            SProc::If {
                left,
                right,
                then,
                otherwise,
            } => {
                let tl = self.signal(scope, left, p)?;
                let tr = self.signal(scope, right, p)?;
                self.expect(&Type::sig(tl), &Type::sig(tr), p)?;
                Ok(Program::match_sig(
                    Name::Src(left.clone()),
                    Name::Src(right.clone()),
                    self.proc(scope, then)?,
                    self.proc(scope, otherwise)?,
                ))
            }
            SProc::Case {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => {
                let ts = self.expr(scope, scrutinee, p)?;
                let otherwise = self.proc(scope, otherwise)?;
                let vars = pattern.pattern_vars();
                for v in &vars {
                    let t = self.fresh();
                    scope.push((name_sym(v), t));
                }
                let result = (|| {
                    let tp = self.expr(scope, pattern, p)?;
                    self.expect(&ts, &tp, p)?;
                    self.proc(scope, then)
                })();
                scope.truncate(scope.len() - vars.len());
                Ok(Program::match_val(scrutinee.clone(), pattern.clone(), result?, otherwise))
            }
            SProc::New(bs, body) => {
                let mut tys = Vec::new();
                for (b, ann) in bs {
                    let t = match ann {
                        Some(t) => self.instantiate(t),
                        None => self.fresh(),
                    };
                    let carried = self.fresh();
                    if !self.unify(&t, &Type::sig(carried)) {
                        return Err(TypeError::NotASignal {
                            context: self.context.clone(),
                            name: b.to_string(),
                            term: p.to_string(),
                        });
                    }
                    scope.push((b.clone(), t.clone()));
                    tys.push(t);
                }
                let body = self.proc(scope, body);
                scope.truncate(scope.len() - bs.len());
                let mut out = body?;
                for ((b, _), t) in bs.iter().zip(tys).rev() {
                    out = Program::new_sig(Name::Src(b.clone()), t, out);
                }
                Ok(out)
            }
            SProc::Par(a, b) => Ok(Program::par(self.proc(scope, a)?, self.proc(scope, b)?)),
            SProc::Choice(..) | SProc::Pause(_) | SProc::Await { .. } | SProc::GMatch { .. } => {
                unreachable!("typecheck runs on desugared programs")
            }
        }
    }

    fn zonk_program(&self, p: &Program) -> Program {
        match p {
            Program::New(n, t, body) => Program::New(n.clone(), self.zonk(t), Box::new(self.zonk_program(body))),
            Program::Present {
                signal,
                binder,
                body,
                cont,
            } => Program::present(signal.clone(), binder.clone(), self.zonk_program(body), cont.clone()),
            Program::MatchSig {
                left,
                right,
                then,
                otherwise,
            } => Program::match_sig(
                left.clone(),
                right.clone(),
                self.zonk_program(then),
                self.zonk_program(otherwise),
            ),
            Program::MatchVal {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => Program::match_val(
                scrutinee.clone(),
                pattern.clone(),
                self.zonk_program(then),
                self.zonk_program(otherwise),
            ),
            Program::Par(a, b) => Program::par(self.zonk_program(a), self.zonk_program(b)),
            other => other.clone(),
        }
    }
}

fn name_sym(n: &Name) -> Sym {
    match n {
        Name::Src(s) => s.clone(),
        other => Arc::from(other.to_string()),
    }
}

fn check_declarations(file: &SourceFile) -> Result<Constructors, TypeError> {
    let mut cs = Constructors::default();
    for c in &file.constructors {
        let bad = |message: &str| TypeError::BadDeclaration {
            name: c.name.to_string(),
            message: message.to_string(),
        };
        if [UNIT, NIL, CONS].contains(&&*c.name) {
            return Err(bad("redefines a built-in constructor"));
        }
        if !matches!(c.result, Type::Data(_)) {
            return Err(bad("result type must be a declared inductive type"));
        }
        cs.insert(c.name.clone(), c.args.clone(), c.result.clone());
    }
    Ok(cs)
}

/// Desugar (if needed) and type-check a file.
pub fn check(file: &SourceFile) -> Result<TypedFile, TypeError> {
    let file = if file.has_sugar() || has_binderless_when(file) {
        desugar(file)?
    } else {
        file.clone()
    };
    let constructors = check_declarations(&file)?;
    let mut inf = Infer {
        constructors: &constructors,
        bindings: Vec::new(),
        globals: BTreeMap::new(),
        open: true,
        defs: BTreeMap::new(),
        context: String::new(),
    };
    for decl in &file.signals {
        for n in &decl.names {
            let t = inf.instantiate(&decl.ty);
            let carried = inf.fresh();
            if !inf.unify(&t, &Type::sig(carried)) {
                return Err(TypeError::NotASignal {
                    context: "signal declaration".into(),
                    name: n.to_string(),
                    term: format!("signal {n} : {}", decl.ty),
                });
            }
            inf.globals.insert(n.clone(), t);
        }
    }
    let mut param_types = Vec::new();
    for d in &file.defs {
        let ts: Vec<Type> = d
            .params
            .iter()
            .map(|(_, ann)| match ann {
                Some(t) => inf.instantiate(t),
                None => inf.fresh(),
            })
            .collect();
        inf.defs.insert(d.name.clone(), ts.clone());
        param_types.push(ts);
    }
    let mut bodies = Vec::new();
    for (d, ts) in file.defs.iter().zip(&param_types) {
        inf.context = format!("in definition `{}`", d.name);
        let mut scope: Vec<(Sym, Type)> = d.params.iter().map(|(p, _)| p.clone()).zip(ts.iter().cloned()).collect();
        bodies.push(inf.proc(&mut scope, &d.body)?);
    }
    inf.context = "in run".into();
    let run = inf.proc(&mut Vec::new(), &file.run)?;

    let mut defs = Definitions::new();
    let mut env_defs = BTreeMap::new();
    for ((d, ts), body) in file.defs.iter().zip(&param_types).zip(&bodies) {
        let params: Vec<(Name, Type)> = d
            .params
            .iter()
            .zip(ts)
            .map(|((p, _), t)| (Name::Src(p.clone()), inf.zonk(t)))
            .collect();
        env_defs.insert(d.name.clone(), params.iter().map(|(_, t)| t.clone()).collect());
        defs.insert(
            d.name.clone(),
            Definition {
                params,
                body: inf.zonk_program(body),
            },
        );
    }
    let globals = inf
        .globals
        .iter()
        .map(|(n, t)| (Name::Src(n.clone()), inf.zonk(t)))
        .collect();
    let run = inf.zonk_program(&run);
    Ok(TypedFile {
        env: TypeEnv {
            constructors,
            globals,
            defs: env_defs,
        },
        defs,
        run,
        source: file,
    })
}

fn has_binderless_when(file: &SourceFile) -> bool {
    fn go(p: &SProc) -> bool {
        match p {
            SProc::When { binder: None, .. } => true,
            SProc::When { body, .. } | SProc::New(_, body) => go(body),
            SProc::If { then, otherwise, .. } | SProc::Case { then, otherwise, .. } => go(then) || go(otherwise),
            SProc::Par(a, b) | SProc::Choice(a, b) => go(a) || go(b),
            _ => false,
        }
    }
    file.defs.iter().any(|d| go(&d.body)) || go(&file.run)
}

/// Check a core program (e.g. a reachable state) against an environment.
/// Free names must be known globals or carry their own type.
pub fn check_program(p: &Program, env: &TypeEnv) -> Result<(), TypeError> {
    let mut inf = Infer {
        constructors: &env.constructors,
        bindings: Vec::new(),
        globals: env.globals.iter().map(|(n, t)| (name_sym(n), t.clone())).collect(),
        open: false,
        defs: env.defs.clone(),
        context: "in program".into(),
    };
    for n in p.free_names() {
        if let Name::Gen(_, t) = &n {
            inf.globals.insert(name_sym(&n), (**t).clone());
        }
    }
    if p.misplaced_deref() {
        return Err(TypeError::Unbound {
            context: "in program".into(),
            name: "dereference outside a continuation".into(),
        });
    }
    inf.proc(&mut Vec::new(), &lift(p)).map(|_| ())
}

/// Infer the type of a closed value expression.
pub fn type_of_value(v: &crate::ast::Value, env: &TypeEnv) -> Result<Type, TypeError> {
    let mut inf = Infer {
        constructors: &env.constructors,
        bindings: Vec::new(),
        globals: env.globals.iter().map(|(n, t)| (name_sym(n), t.clone())).collect(),
        open: false,
        defs: BTreeMap::new(),
        context: "in value".into(),
    };
    for n in v.names() {
        if let Name::Gen(_, t) = &n {
            inf.globals.insert(name_sym(&n), (**t).clone());
        }
    }
    let t = inf.expr(&[], &v.to_expr(), v)?;
    Ok(inf.zonk(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse;

    fn check_src(src: &str) -> Result<TypedFile, TypeError> {
        check(&parse(src).unwrap())
    }

    #[test]
    fn unit_emission_is_well_typed() {
        let f = check_src("signal s : sig(unit)\nrun s!*").unwrap();
        assert_eq!(f.env.globals[&Name::src("s")], Type::sig(Type::Unit));
    }

    #[test]
    fn deref_has_list_type() {
        let f = check_src("signal s : sig(unit)\ndef A(l) = 0\nrun when s do 0 else A(!s)").unwrap();
        assert_eq!(f.env.defs["A"], vec![Type::list(Type::Unit)]);
    }

    #[test]
    fn emitting_a_signal_on_a_unit_signal_fails() {
        let e = check_src("signal s : sig(unit)\nrun s!s").unwrap_err();
        match e {
            TypeError::Mismatch { expected, found, .. } => {
                assert_eq!(expected, Type::Unit);
                assert_eq!(found, Type::sig(Type::Unit));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn monomorphic_definitions() {
        assert!(check_src("def A(x) = 0\nrun A(*) | A([])").is_err());
    }

    #[test]
    fn nil_is_polymorphic_per_occurrence() {
        assert!(check_src("run a![] | b![*] | c![[]]").is_ok());
    }

    #[test]
    fn new_types_are_resolved() {
        let f = check_src("run new s in s![*]").unwrap();
        let Program::New(_, t, _) = &f.run else { panic!() };
        assert_eq!(*t, Type::sig(Type::list(Type::Unit)));
    }

    #[test]
    fn core_program_recheck() {
        let f = check_src("signal s : sig(unit)\nrun new t : sig(unit) in (s!* | when t(x) do s!x else 0)").unwrap();
        check_program(&f.run, &f.env).unwrap();
        let bad = Program::emit("s", Expr::name("s"));
        assert!(check_program(&bad, &f.env).is_err());
    }
}
