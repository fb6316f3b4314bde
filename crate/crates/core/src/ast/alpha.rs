use std::collections::BTreeMap;

use super::{Cont, Expr, Name, Program};

struct Canon {
    /// Scoped renaming of binders; innermost last.
    env: Vec<(Name, Name)>,
    next: u32,
}

impl Canon {
    fn lookup(&self, n: &Name) -> Name {
        self.env
            .iter()
            .rev()
            .find(|(orig, _)| orig == n)
            .map(|(_, new)| new.clone())
            .unwrap_or_else(|| n.clone())
    }

    fn expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Name(n) => Expr::Name(self.lookup(n)),
            Expr::Deref(n) => Expr::Deref(self.lookup(n)),
            Expr::Con(c, args) => Expr::Con(c.clone(), args.iter().map(|a| self.expr(a)).collect()),
        }
    }

    fn bind(&mut self, n: &Name) -> Name {
        let b = Name::Bound(self.next);
        self.next += 1;
        self.env.push((n.clone(), b.clone()));
        b
    }

    fn unbind(&mut self, k: usize) {
        self.env.truncate(self.env.len() - k);
        self.next -= k as u32;
    }

    fn program(&mut self, p: &Program) -> Program {
        match p {
            Program::Nil => Program::Nil,
            Program::Call(id, args) => Program::Call(id.clone(), args.iter().map(|a| self.expr(a)).collect()),
            Program::Emit(s, e) => Program::Emit(self.lookup(s), self.expr(e)),
            Program::Present {
                signal,
                binder,
                body,
                cont,
            } => {
                let signal = self.lookup(signal);
                let cont = match cont {
                    Cont::Nil => Cont::Nil,
                    Cont::Call(id, args) => Cont::Call(id.clone(), args.iter().map(|a| self.expr(a)).collect()),
                };
                let b = self.bind(binder);
                let body = self.program(body);
                self.unbind(1);
                Program::Present {
                    signal,
                    binder: b,
                    body: Box::new(body),
                    cont,
                }
            }
            Program::MatchSig {
                left,
                right,
                then,
                otherwise,
            } => Program::MatchSig {
                left: self.lookup(left),
                right: self.lookup(right),
                then: Box::new(self.program(then)),
                otherwise: Box::new(self.program(otherwise)),
            },
            Program::MatchVal {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => {
                let scrutinee = self.expr(scrutinee);
                let otherwise = self.program(otherwise);
                let vars = pattern.pattern_vars();
                let map: BTreeMap<Name, Name> = vars.iter().map(|v| (v.clone(), self.bind(v))).collect();
                let pattern = super::subst::rename_expr(pattern, &map);
                let then = self.program(then);
                self.unbind(vars.len());
                Program::MatchVal {
                    scrutinee,
                    pattern,
                    then: Box::new(then),
                    otherwise: Box::new(otherwise),
                }
            }
            Program::New(t, ty, body) => {
                let b = self.bind(t);
                let body = self.program(body);
                self.unbind(1);
                Program::New(b, ty.clone(), Box::new(body))
            }
            Program::Par(a, b) => Program::par(self.program(a), self.program(b)),
        }
    }
}

/// Smallest level not used by a free `Bound` name of `p`.
fn base_level(p: &Program) -> u32 {
    p.free_names()
        .iter()
        .filter_map(|n| match n {
            Name::Bound(i) => Some(i + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0)
}

impl Program {
    /// Rename every binder to its de Bruijn level, starting above any free
    /// level. Two programs are alpha-equivalent iff their canonical forms are
    /// identical.
    pub fn canonical_alpha(&self) -> Program {
        self.canonical_alpha_from(base_level(self))
    }

    /// As `canonical_alpha`, numbering binders from `base`. The caller must
    /// ensure no free `Bound` name is `>= base`.
    pub fn canonical_alpha_from(&self, base: u32) -> Program {
        Canon {
            env: Vec::new(),
            next: base,
        }
        .program(self)
    }
}

pub fn alpha_equal(p: &Program, q: &Program) -> bool {
    let base = base_level(p).max(base_level(q));
    p.canonical_alpha_from(base) == q.canonical_alpha_from(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Type, Value};

    fn new_emit(binder: &str) -> Program {
        Program::new_sig(
            Name::src(binder),
            Type::sig(Type::Unit),
            Program::emit(binder, Expr::unit()),
        )
    }

    #[test]
    fn renamed_binder_is_alpha_equal() {
        assert!(alpha_equal(&new_emit("s"), &new_emit("t")));
    }

    #[test]
    fn distinct_free_names_differ() {
        assert!(!alpha_equal(
            &Program::emit("s", Expr::unit()),
            &Program::emit("t", Expr::unit())
        ));
    }

    #[test]
    fn pattern_binders_canonicalised_by_first_occurrence() {
        let mk = |x: &str, y: &str| {
            Program::match_val(
                Value::list([Value::sig("a"), Value::sig("b")]).to_expr(),
                Expr::list([Expr::name(x), Expr::name(y)]),
                Program::emit(y, Expr::name(x)),
                Program::Nil,
            )
        };
        assert!(alpha_equal(&mk("x", "y"), &mk("u", "w")));
        assert!(!alpha_equal(&mk("x", "y"), &mk("x", "x")));
    }
}
