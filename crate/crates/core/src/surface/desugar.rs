use std::collections::BTreeSet;
use std::sync::Arc;

use super::{SDef, SProc, SourceFile};
use crate::ast::{Cont, Expr, Name, Sym, Type};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct DesugarError {
    pub message: String,
}

fn fail<T>(message: impl Into<String>) -> Result<T, DesugarError> {
    Err(DesugarError {
        message: message.into(),
    })
}

/// Source of names that clash with nothing in the file. Generated names
/// contain `#`, which the lexer accepts inside identifiers.
struct Fresh {
    used: BTreeSet<Sym>,
    next: usize,
}

impl Fresh {
    fn name(&mut self, prefix: &str) -> Sym {
        loop {
            let cand: Sym = Arc::from(format!("{prefix}#{}", self.next));
            self.next += 1;
            if self.used.insert(cand.clone()) {
                return cand;
            }
        }
    }
}

struct Desugar {
    fresh: Fresh,
    extra: Vec<SDef>,
}

fn bx(p: SProc) -> Box<SProc> {
    Box::new(p)
}

fn par(a: SProc, b: SProc) -> SProc {
    SProc::Par(bx(a), bx(b))
}

fn name(s: &Sym) -> Expr {
    Expr::Name(Name::Src(s.clone()))
}

fn if_eq(l: &Sym, r: &Sym, then: SProc, otherwise: SProc) -> SProc {
    SProc::If {
        left: l.clone(),
        right: r.clone(),
        then: bx(then),
        otherwise: bx(otherwise),
    }
}

/// `[x ∉ X]P` as a chain of name matches.
fn not_in(x: &Sym, avoid: &[Sym], p: SProc) -> SProc {
    avoid.iter().rev().fold(p, |acc, a| if_eq(x, a, SProc::Nil, acc))
}

fn expr_names(e: &Expr) -> Vec<Sym> {
    e.pattern_vars()
        .into_iter()
        .filter_map(|n| match n {
            Name::Src(s) => Some(s),
            _ => None,
        })
        .collect()
}

fn rename_expr(e: &Expr, from: &[Sym], to: &[Sym]) -> Expr {
    match e {
        Expr::Name(Name::Src(s)) => match from.iter().position(|f| f == s) {
            Some(i) => name(&to[i]),
            None => e.clone(),
        },
        Expr::Con(c, args) => Expr::Con(c.clone(), args.iter().map(|a| rename_expr(a, from, to)).collect()),
        other => other.clone(),
    }
}

impl Desugar {
    fn proc(&mut self, p: &SProc) -> Result<SProc, DesugarError> {
        Ok(match p {
            SProc::Nil | SProc::Call(..) | SProc::Emit(..) => p.clone(),
            SProc::When {
                signal,
                binder,
                body,
                cont,
            } => {
                let binder = match binder {
                    Some(b) => b.clone(),
                    None => (self.fresh.name("x"), None),
                };
                SProc::When {
                    signal: signal.clone(),
                    binder: Some(binder),
                    body: bx(self.proc(body)?),
                    cont: cont.clone(),
                }
            }
            SProc::If {
                left,
                right,
                then,
                otherwise,
            } => if_eq(left, right, self.proc(then)?, self.proc(otherwise)?),
            SProc::Case {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => SProc::Case {
                scrutinee: scrutinee.clone(),
                pattern: pattern.clone(),
                then: bx(self.proc(then)?),
                otherwise: bx(self.proc(otherwise)?),
            },
            SProc::New(bs, body) => SProc::New(bs.clone(), bx(self.proc(body)?)),
            SProc::Par(a, b) => par(self.proc(a)?, self.proc(b)?),
            SProc::Choice(a, b) => {
                let (a, b) = (self.proc(a)?, self.proc(b)?);
                let c = self.fresh.name("c");
                let x = self.fresh.name("x");
                let unit_list = Type::list(Type::Unit);
                let reader = SProc::When {
                    signal: c.clone(),
                    binder: Some((x.clone(), Some(unit_list.clone()))),
                    body: bx(SProc::Case {
                        scrutinee: name(&x),
                        pattern: Expr::nil(),
                        then: bx(a),
                        otherwise: bx(b),
                    }),
                    cont: Cont::Nil,
                };
                let body = par(
                    par(reader, SProc::Emit(c.clone(), Expr::nil())),
                    SProc::Emit(c.clone(), Expr::list([Expr::unit()])),
                );
                SProc::New(vec![(c, Some(Type::sig(unit_list)))], bx(body))
            }
            SProc::Pause(k) => {
                let s = self.fresh.name("p");
                let x = self.fresh.name("x");
                SProc::New(
                    vec![(s.clone(), Some(Type::sig(Type::Unit)))],
                    bx(SProc::When {
                        signal: s,
                        binder: Some((x, Some(Type::Unit))),
                        body: bx(SProc::Nil),
                        cont: k.clone(),
                    }),
                )
            }
            SProc::Await { signal, binder, body } => {
                let body = self.proc(body)?;
                let mut fv = free_idents(&body);
                fv.remove(&binder.0);
                fv.remove(signal);
                let params: Vec<Sym> = std::iter::once(signal.clone()).chain(fv).collect();
                let id = self.fresh.name("await");
                let call = Cont::Call(id.clone(), params.iter().map(name).collect());
                let reader = SProc::When {
                    signal: signal.clone(),
                    binder: Some(binder.clone()),
                    body: bx(body),
                    cont: call,
                };
                self.extra.push(SDef {
                    name: id,
                    params: params.into_iter().map(|p| (p, None)).collect(),
                    body: reader.clone(),
                });
                reader
            }
            SProc::GMatch {
                var,
                fresh,
                value,
                avoid,
                body,
            } => {
                let body = self.proc(body)?;
                self.gmatch(var, fresh, value, avoid, body)?
            }
        })
    }

    fn gmatch(
        &mut self,
        x: &Sym,
        fresh: &[Sym],
        v: &Expr,
        avoid: &[Sym],
        body: SProc,
    ) -> Result<SProc, DesugarError> {
        let fnv = expr_names(v);
        for (i, s) in fresh.iter().enumerate() {
            if fresh[..i].contains(s) {
                return fail(format!("generalized match: `{s}` listed twice among fresh names"));
            }
            if !fnv.contains(s) {
                return fail(format!("generalized match: fresh name `{s}` does not occur in the value"));
            }
            if avoid.contains(s) {
                return fail(format!("generalized match: fresh name `{s}` belongs to the avoided set"));
            }
        }
        if fresh.is_empty() && !avoid.is_empty() {
            return fail("generalized match: the avoided set must be empty when no name is fresh");
        }
        let free: Vec<Sym> = fnv.iter().filter(|n| !fresh.contains(n)).cloned().collect();
        if !fresh.is_empty() {
            if let Some(n) = free.iter().find(|n| !avoid.contains(n)) {
                return fail(format!("generalized match: free name `{n}` of the value must be avoided"));
            }
        }
        if let (Expr::Name(Name::Src(s)), true) = (v, fresh.is_empty()) {
            return Ok(if_eq(x, s, body, SProc::Nil));
        }
        // Every name of the pattern is a binder, so free names go through
        // auxiliary variables compared against the originals afterwards.
        let aux: Vec<Sym> = free.iter().map(|_| self.fresh.name("g")).collect();
        let pattern = rename_expr(v, &free, &aux);
        let mut guarded = body;
        for i in (0..fresh.len()).rev() {
            for j in (i + 1..fresh.len()).rev() {
                guarded = if_eq(&fresh[i], &fresh[j], SProc::Nil, guarded);
            }
        }
        for s in fresh.iter().rev() {
            guarded = not_in(s, avoid, guarded);
        }
        for (a, f) in aux.iter().zip(&free).rev() {
            guarded = if_eq(a, f, guarded, SProc::Nil);
        }
        Ok(SProc::Case {
            scrutinee: name(x),
            pattern,
            then: bx(guarded),
            otherwise: bx(SProc::Nil),
        })
    }
}

/// Free identifiers of a sugar-free program (signals and variables).
pub fn free_idents(p: &SProc) -> BTreeSet<Sym> {
    fn expr(e: &Expr, bound: &[Sym], out: &mut BTreeSet<Sym>) {
        for n in e.names() {
            if let Name::Src(s) = n {
                if !bound.contains(&s) {
                    out.insert(s);
                }
            }
        }
    }
    fn go(p: &SProc, bound: &mut Vec<Sym>, out: &mut BTreeSet<Sym>) {
        let add = |s: &Sym, bound: &Vec<Sym>, out: &mut BTreeSet<Sym>| {
            if !bound.contains(s) {
                out.insert(s.clone());
            }
        };
        match p {
            SProc::Nil | SProc::Pause(_) | SProc::Choice(..) | SProc::Await { .. } | SProc::GMatch { .. } => {}
            SProc::Call(_, args) => args.iter().for_each(|a| expr(a, bound, out)),
            SProc::Emit(s, e) => {
                add(s, bound, out);
                expr(e, bound, out);
            }
            SProc::When {
                signal,
                binder,
                body,
                cont,
            } => {
                add(signal, bound, out);
                if let Cont::Call(_, args) = cont {
                    args.iter().for_each(|a| expr(a, bound, out));
                }
                let k = binder.is_some() as usize;
                if let Some((x, _)) = binder {
                    bound.push(x.clone());
                }
                go(body, bound, out);
                bound.truncate(bound.len() - k);
            }
            SProc::If {
                left,
                right,
                then,
                otherwise,
            } => {
                add(left, bound, out);
                add(right, bound, out);
                go(then, bound, out);
                go(otherwise, bound, out);
            }
            SProc::Case {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => {
                expr(scrutinee, bound, out);
                go(otherwise, bound, out);
                let vars = expr_names(pattern);
                let k = vars.len();
                bound.extend(vars);
                go(then, bound, out);
                bound.truncate(bound.len() - k);
            }
            SProc::New(bs, body) => {
                bound.extend(bs.iter().map(|(b, _)| b.clone()));
                go(body, bound, out);
                bound.truncate(bound.len() - bs.len());
            }
            SProc::Par(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(p, &mut Vec::new(), &mut out);
    out
}

/// Eliminate internal choice, `pause`, `await`, generalized matching and
/// binder-less `when`. Generated definitions are appended to the file.
pub fn desugar(file: &SourceFile) -> Result<SourceFile, DesugarError> {
    let mut d = Desugar {
        fresh: Fresh {
            used: file.idents(),
            next: 0,
        },
        extra: Vec::new(),
    };
    let mut defs = Vec::new();
    for def in &file.defs {
        defs.push(SDef {
            name: def.name.clone(),
            params: def.params.clone(),
            body: d.proc(&def.body)?,
        });
    }
    let run = d.proc(&file.run)?;
    defs.extend(d.extra);
    Ok(SourceFile {
        signals: file.signals.clone(),
        constructors: file.constructors.clone(),
        defs,
        run,
    })
}

/// Desugar a single program against the identifiers of `file`. Generated
/// definitions are returned alongside.
pub fn desugar_program(p: &SProc, file: &SourceFile) -> Result<(SProc, Vec<SDef>), DesugarError> {
    let mut used = file.idents();
    p.collect_idents(&mut used);
    let mut d = Desugar {
        fresh: Fresh { used, next: 0 },
        extra: Vec::new(),
    };
    let out = d.proc(p)?;
    Ok((out, d.extra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse;

    #[test]
    fn desugar_removes_sugar_and_is_idempotent() {
        let f = parse("def A() = pause.A()\nrun (a! (+) b!) | await s(x).x! | A()").unwrap();
        let d = desugar(&f).unwrap();
        assert!(!d.has_sugar());
        assert_eq!(desugar(&d).unwrap(), d);
        assert_eq!(d.defs.len(), 2);
    }

    #[test]
    fn fresh_names_avoid_source_names() {
        let f = parse("run c#0! | (a! (+) b!)").unwrap();
        let d = desugar(&f).unwrap();
        let SProc::Par(_, choice) = &d.run else { panic!() };
        let SProc::New(bs, _) = &**choice else { panic!() };
        assert_ne!(&*bs[0].0, "c#0");
    }

    #[test]
    fn gmatch_side_conditions_checked() {
        let bad = parse("run match x = s avoid {t} then 0").unwrap();
        assert!(desugar(&bad).is_err());
        let bad = parse("constructor c/1 : (sig(unit)) -> d\nrun match x = new s in c(s) avoid {s} then 0").unwrap();
        assert!(desugar(&bad).is_err());
    }

    #[test]
    fn gmatch_constructor_case_matches_reference_chain() {
        let src = "constructor c/3 : (sig(unit), d, sig(unit)) -> d\n\
                   run match x = new s1, s2 in c(s1, c(s3', s2, s1), s3') avoid {s3', s4'} then P!";
        let d = desugar(&parse(src).unwrap()).unwrap();
        let printed = d.run.to_string();
        assert_eq!(
            printed,
            "case x of c(s1, c(g#0, s2, s1), g#0) -> if g#0 = s3' then \
             if s1 = s3' then 0 else if s1 = s4' then 0 else \
             if s2 = s3' then 0 else if s2 = s4' then 0 else \
             if s1 = s2 then 0 else P! else 0 else 0"
        );
    }
}
