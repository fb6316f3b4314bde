//! Concrete syntax of `.spi` files: parsing, printing and desugaring.
//!
//! ```text
//! file    := item* "run" proc
//! item    := "signal" NAME ("," NAME)* ":" type
//!          | "constructor" IDENT "/" NAT ":" (type | "(" type ("," type)* ")" "->" type)
//!          | "def" IDENT "(" (IDENT (":" type)?),* ")" "=" proc
//! proc    := choice ("|" choice)*
//! choice  := unary ("(+)" unary)*
//! unary   := "0" | IDENT "(" rexps ")" | NAME "!" expr?
//!          | "when" NAME ("(" IDENT (":" type)? ")")? "do" unary ("else" cont)?
//!          | "if" NAME "=" NAME "then" unary "else" unary
//!          | "case" expr "of" pat "->" unary "else" unary
//!          | "new" NAME (":" type)? ("," NAME (":" type)?)* "in" unary
//!          | "pause" "." cont | "await" NAME "(" IDENT ")" "." unary
//!          | "match" NAME "=" ("new" NAME,* "in")? expr ("avoid" "{" NAME,* "}")? "then" unary
//!          | "(" proc ")"
//! cont    := "0" | IDENT "(" rexps ")"
//! rexp    := "!" NAME | expr
//! expr    := NAME | IDENT "(" expr,* ")" | "*" | "[" (expr (";" expr)*)? "]"
//! ```

mod desugar;
mod lexer;
mod parser;
pub(crate) mod print;

use std::fmt;

use crate::ast::{Cont, Expr, Name, Sym, Type};

pub use desugar::{desugar, desugar_program, free_idents, DesugarError};
pub use print::lift;
pub use parser::{parse, parse_program};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructorDecl {
    pub name: Sym,
    pub args: Vec<Type>,
    pub result: Type,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignalDecl {
    pub names: Vec<Sym>,
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SDef {
    pub name: Sym,
    pub params: Vec<(Sym, Option<Type>)>,
    pub body: SProc,
}

/// A binder with an optional type annotation.
pub type Binder = (Sym, Option<Type>);

/// Surface programs, including the derived operators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SProc {
    Nil,
    Call(Sym, Vec<Expr>),
    Emit(Sym, Expr),
    When {
        signal: Sym,
        binder: Option<Binder>,
        body: Box<SProc>,
        cont: Cont,
    },
    If {
        left: Sym,
        right: Sym,
        then: Box<SProc>,
        otherwise: Box<SProc>,
    },
    Case {
        scrutinee: Expr,
        pattern: Expr,
        then: Box<SProc>,
        otherwise: Box<SProc>,
    },
    New(Vec<Binder>, Box<SProc>),
    Par(Box<SProc>, Box<SProc>),
    Choice(Box<SProc>, Box<SProc>),
    Pause(Cont),
    Await {
        signal: Sym,
        binder: Binder,
        body: Box<SProc>,
    },
    GMatch {
        var: Sym,
        fresh: Vec<Sym>,
        value: Expr,
        avoid: Vec<Sym>,
        body: Box<SProc>,
    },
}

impl SProc {
    pub fn is_sugar(&self) -> bool {
        matches!(self, SProc::Choice(..) | SProc::Pause(_) | SProc::Await { .. } | SProc::GMatch { .. })
    }

    /// Does any sugar node occur in the tree?
    pub fn has_sugar(&self) -> bool {
        if self.is_sugar() {
            return true;
        }
        match self {
            SProc::When { body, .. } | SProc::New(_, body) => body.has_sugar(),
            SProc::If { then, otherwise, .. } | SProc::Case { then, otherwise, .. } => {
                then.has_sugar() || otherwise.has_sugar()
            }
            SProc::Par(a, b) => a.has_sugar() || b.has_sugar(),
            _ => false,
        }
    }

    /// Every identifier occurring in the tree, bound or free.
    pub fn collect_idents(&self, out: &mut std::collections::BTreeSet<Sym>) {
        let expr = |e: &Expr, out: &mut std::collections::BTreeSet<Sym>| {
            for n in e.names() {
                if let Name::Src(s) = n {
                    out.insert(s);
                }
            }
        };
        let cont = |k: &Cont, out: &mut std::collections::BTreeSet<Sym>| {
            if let Cont::Call(id, args) = k {
                out.insert(id.clone());
                args.iter().for_each(|a| expr(a, out));
            }
        };
        match self {
            SProc::Nil => {}
            SProc::Call(id, args) => {
                out.insert(id.clone());
                args.iter().for_each(|a| expr(a, out));
            }
            SProc::Emit(s, e) => {
                out.insert(s.clone());
                expr(e, out);
            }
            SProc::When {
                signal,
                binder,
                body,
                cont: k,
            } => {
                out.insert(signal.clone());
                if let Some((x, _)) = binder {
                    out.insert(x.clone());
                }
                body.collect_idents(out);
                cont(k, out);
            }
            SProc::If {
                left,
                right,
                then,
                otherwise,
            } => {
                out.insert(left.clone());
                out.insert(right.clone());
                then.collect_idents(out);
                otherwise.collect_idents(out);
            }
            SProc::Case {
                scrutinee,
                pattern,
                then,
                otherwise,
            } => {
                expr(scrutinee, out);
                expr(pattern, out);
                then.collect_idents(out);
                otherwise.collect_idents(out);
            }
            SProc::New(bs, body) => {
                out.extend(bs.iter().map(|(b, _)| b.clone()));
                body.collect_idents(out);
            }
            SProc::Par(a, b) | SProc::Choice(a, b) => {
                a.collect_idents(out);
                b.collect_idents(out);
            }
            SProc::Pause(k) => cont(k, out),
            SProc::Await { signal, binder, body } => {
                out.insert(signal.clone());
                out.insert(binder.0.clone());
                body.collect_idents(out);
            }
            SProc::GMatch {
                var,
                fresh,
                value,
                avoid,
                body,
            } => {
                out.insert(var.clone());
                out.extend(fresh.iter().cloned());
                out.extend(avoid.iter().cloned());
                expr(value, out);
                body.collect_idents(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceFile {
    pub signals: Vec<SignalDecl>,
    pub constructors: Vec<ConstructorDecl>,
    pub defs: Vec<SDef>,
    pub run: SProc,
}

impl SourceFile {
    pub fn has_sugar(&self) -> bool {
        self.defs.iter().any(|d| d.body.has_sugar()) || self.run.has_sugar()
    }

    pub fn idents(&self) -> std::collections::BTreeSet<Sym> {
        let mut out = std::collections::BTreeSet::new();
        for s in &self.signals {
            out.extend(s.names.iter().cloned());
        }
        for c in &self.constructors {
            out.insert(c.name.clone());
        }
        for d in &self.defs {
            out.insert(d.name.clone());
            out.extend(d.params.iter().map(|(p, _)| p.clone()));
            d.body.collect_idents(&mut out);
        }
        self.run.collect_idents(&mut out);
        out
    }
}

impl fmt::Display for SourceFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_file(f, self)
    }
}

impl fmt::Display for SProc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_sproc(f, self)
    }
}
