//! Seeded generation of well-typed programs and static contexts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{Cont, Expr, Name, Program, Type};
use crate::equivalence::Context;
use crate::typecheck::{TypeEnv, TypedFile};

const VOCABULARY: &str = "\
signal a, b, c : sig(unit)
signal d : sig(list(unit))
signal e : sig(sig(unit))
def K0() = 0
def K1(l) = case l of [] -> 0 else c!
def Loop() = Loop()
def Em(x) = x!
run 0
";

/// The default vocabulary: three unit signals, a list signal, a signal of
/// signals and a few small definitions.
pub fn vocabulary() -> TypedFile {
    let file = crate::surface::parse(VOCABULARY).expect("vocabulary parses");
    crate::typecheck::check(&file).expect("vocabulary typechecks")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Parallel components at top level.
    pub max_par: usize,
    pub max_new: usize,
    /// Nesting depth of prefixes and matches.
    pub depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_par: 3,
            max_new: 2,
            depth: 2,
        }
    }
}

pub struct Generator {
    rng: ChaCha8Rng,
    env: TypeEnv,
    limits: Limits,
    counter: usize,
}

type Scope = Vec<(Name, Type)>;

impl Generator {
    pub fn new(env: TypeEnv, seed: u64) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            env,
            limits: Limits::default(),
            counter: 0,
        }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn env(&self) -> &TypeEnv {
        &self.env
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn var(&mut self, prefix: &str) -> Name {
        self.counter += 1;
        Name::src(&format!("{prefix}{}", self.counter))
    }

    fn globals(&self) -> Scope {
        self.env.globals.iter().map(|(n, t)| (n.clone(), t.clone())).collect()
    }

    fn signal_types(&self) -> Vec<Type> {
        let mut ts: Vec<Type> = self.env.globals.values().cloned().collect();
        ts.dedup();
        if ts.is_empty() {
            ts.push(Type::sig(Type::Unit));
        }
        ts
    }

    /// A program with at most `max_par` components under at most `max_new`
    /// restrictions.
    pub fn program(&mut self) -> Program {
        let mut scope = self.globals();
        let news = self.rng.gen_range(0..=self.limits.max_new);
        let mut binders = Vec::new();
        for _ in 0..news {
            let ty = self.signal_types().choose(&mut self.rng).cloned().expect("nonempty");
            let n = self.var("r");
            binders.push((n.clone(), ty.clone()));
            scope.push((n, ty));
        }
        let k = self.rng.gen_range(1..=self.limits.max_par);
        let comps: Vec<Program> = (0..k).map(|_| self.process(&scope, self.limits.depth)).collect();
        binders
            .into_iter()
            .rev()
            .fold(Program::par_all(comps), |p, (n, t)| Program::new_sig(n, t, p))
    }

    /// A single component: no top-level restriction or parallel composition.
    pub fn component(&mut self) -> Program {
        let scope = self.globals();
        self.process(&scope, self.limits.depth)
    }

    fn process(&mut self, scope: &Scope, depth: usize) -> Program {
        let mut choices = vec![0, 1, 1, 1, 2];
        if depth > 0 {
            choices.extend([3, 3, 3, 4, 5, 6]);
        }
        loop {
            let pick = *choices.choose(&mut self.rng).expect("nonempty");
            let made = match pick {
                0 => Some(Program::Nil),
                1 => self.emit(scope),
                2 => self.call(scope),
                3 => self.present(scope, depth),
                4 => self.match_sig(scope, depth),
                5 => self.match_val(scope, depth),
                _ => self.choice(scope, depth),
            };
            if let Some(p) = made {
                return p;
            }
        }
    }

    fn signals(&self, scope: &Scope) -> Vec<(Name, Type)> {
        scope.iter().filter(|(_, t)| matches!(t, Type::Sig(_))).cloned().collect()
    }

    fn emit(&mut self, scope: &Scope) -> Option<Program> {
        let (s, ty) = self.signals(scope).choose(&mut self.rng).cloned()?;
        let v = self.value(scope, ty.carried()?, 1)?;
        Some(Program::Emit(s, v))
    }

    fn call(&mut self, scope: &Scope) -> Option<Program> {
        let defs: Vec<_> = self.env.defs.iter().map(|(d, ts)| (d.clone(), ts.clone())).collect();
        let (d, ts) = defs.choose(&mut self.rng).cloned()?;
        let args = ts.iter().map(|t| self.value(scope, t, 1)).collect::<Option<Vec<_>>>()?;
        Some(Program::Call(d, args))
    }

    fn cont(&mut self, scope: &Scope) -> Cont {
        if self.rng.gen_bool(0.5) {
            return Cont::Nil;
        }
        let defs: Vec<_> = self.env.defs.iter().map(|(d, ts)| (d.clone(), ts.clone())).collect();
        let Some((d, ts)) = defs.choose(&mut self.rng).cloned() else {
            return Cont::Nil;
        };
        let mut args = Vec::new();
        for t in &ts {
            let derefs: Vec<Name> = match t {
                Type::List(inner) => self
                    .signals(scope)
                    .into_iter()
                    .filter(|(_, st)| st.carried() == Some(&**inner))
                    .map(|(n, _)| n)
                    .collect(),
                _ => Vec::new(),
            };
            if !derefs.is_empty() && self.rng.gen_bool(0.6) {
                args.push(Expr::Deref(derefs.choose(&mut self.rng).cloned().expect("nonempty")));
                continue;
            }
            match self.value(scope, t, 1) {
                Some(v) => args.push(v),
                None => return Cont::Nil,
            }
        }
        Cont::Call(d, args)
    }

    fn present(&mut self, scope: &Scope, depth: usize) -> Option<Program> {
        let (s, ty) = self.signals(scope).choose(&mut self.rng).cloned()?;
        let x = self.var("x");
        let mut inner = scope.clone();
        inner.push((x.clone(), ty.carried()?.clone()));
        let body = self.process(&inner, depth - 1);
        let k = self.cont(scope);
        Some(Program::present(s, x, body, k))
    }

    fn match_sig(&mut self, scope: &Scope, depth: usize) -> Option<Program> {
        let (s, ty) = self.signals(scope).choose(&mut self.rng).cloned()?;
        let same: Vec<Name> = self
            .signals(scope)
            .into_iter()
            .filter(|(_, t)| *t == ty)
            .map(|(n, _)| n)
            .collect();
        let t = same.choose(&mut self.rng).cloned()?;
        let p = self.process(scope, depth - 1);
        let q = self.process(scope, depth - 1);
        Some(Program::match_sig(s, t, p, q))
    }

    fn match_val(&mut self, scope: &Scope, depth: usize) -> Option<Program> {
        let vars: Vec<(Name, Type)> = scope
            .iter()
            .filter(|(_, t)| !matches!(t, Type::Sig(_) | Type::Unit))
            .cloned()
            .collect();
        let (x, ty) = vars.choose(&mut self.rng).cloned()?;
        let (c, args) = self.env.constructors.producing(&ty).choose(&mut self.rng).cloned()?;
        let mut inner = scope.clone();
        let mut pats = Vec::new();
        for t in args {
            let y = self.var("y");
            inner.push((y.clone(), t));
            pats.push(Expr::Name(y));
        }
        let p = self.process(&inner, depth - 1);
        let q = self.process(scope, depth - 1);
        Some(Program::match_val(Expr::Name(x), Expr::Con(c, pats), p, q))
    }

    /// Internal choice, encoded with a private signal carrying two lists.
    fn choice(&mut self, scope: &Scope, depth: usize) -> Option<Program> {
        let p = self.process(scope, depth - 1);
        let q = self.process(scope, depth - 1);
        let c = self.var("k");
        let x = self.var("y");
        let reader = Program::present(
            c.clone(),
            x.clone(),
            Program::match_val(Expr::Name(x), Expr::nil(), p, q),
            Cont::Nil,
        );
        let body = Program::par_all([
            reader,
            Program::Emit(c.clone(), Expr::nil()),
            Program::Emit(c.clone(), Expr::list([Expr::unit()])),
        ]);
        Some(Program::new_sig(c, Type::sig(Type::list(Type::Unit)), body))
    }

    /// A value expression of type `ty` whose constructor nesting is at most `depth`.
    fn value(&mut self, scope: &Scope, ty: &Type, depth: usize) -> Option<Expr> {
        let vars: Vec<Name> = scope.iter().filter(|(_, t)| t == ty).map(|(n, _)| n.clone()).collect();
        let cons: Vec<_> = self
            .env
            .constructors
            .producing(ty)
            .into_iter()
            .filter(|(_, a)| a.is_empty() || depth > 0)
            .collect();
        let n = vars.len() + cons.len();
        if n == 0 {
            return None;
        }
        let i = self.rng.gen_range(0..n);
        if i < vars.len() {
            return Some(Expr::Name(vars[i].clone()));
        }
        let (c, args) = cons[i - vars.len()].clone();
        let args = args
            .iter()
            .map(|t| self.value(scope, t, depth.saturating_sub(1)))
            .collect::<Option<Vec<_>>>()?;
        Some(Expr::Con(c, args))
    }

    /// A static context `[] | P`, possibly under restrictions of free signals.
    pub fn context(&mut self) -> Context {
        let mut ctx = Context::par(Context::Hole, self.component());
        if self.rng.gen_bool(0.4) {
            if let Some((s, ty)) = self.globals().choose(&mut self.rng).cloned() {
                ctx = Context::new_sig(s, ty, ctx);
            }
        }
        if self.rng.gen_bool(0.3) {
            ctx = Context::par(ctx, self.component());
        }
        ctx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typecheck::check_program;

    #[test]
    fn generated_programs_typecheck() {
        let voc = vocabulary();
        let mut g = Generator::new(voc.env.clone(), 7);
        for _ in 0..500 {
            let p = g.program();
            check_program(&p, &voc.env).unwrap_or_else(|e| panic!("{p}: {e}"));
            assert!(!p.misplaced_deref(), "{p}");
        }
        for _ in 0..50 {
            let c = g.context();
            check_program(&c.fill(&Program::Nil), &voc.env).unwrap();
        }
    }

    #[test]
    fn generation_is_seeded() {
        let voc = vocabulary();
        let a: Vec<Program> = {
            let mut g = Generator::new(voc.env.clone(), 3);
            (0..20).map(|_| g.program()).collect()
        };
        let mut g = Generator::new(voc.env.clone(), 3);
        let b: Vec<Program> = (0..20).map(|_| g.program()).collect();
        assert_eq!(a, b);
    }
}
