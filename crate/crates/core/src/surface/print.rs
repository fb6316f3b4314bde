use std::fmt::{self, Write};
use std::sync::Arc;

use super::{Binder, SProc, SourceFile};
use crate::ast::{Cont, Expr, Name, Program, Sym};

fn sym(n: &Name) -> Sym {
    match n {
        Name::Src(s) => s.clone(),
        other => Arc::from(other.to_string()),
    }
}

/// View a core program as a (sugar-free) surface program.
pub fn lift(p: &Program) -> SProc {
    match p {
        Program::Nil => SProc::Nil,
        Program::Call(id, args) => SProc::Call(id.clone(), args.clone()),
        Program::Emit(s, e) => SProc::Emit(sym(s), e.clone()),
        Program::Present {
            signal,
            binder,
            body,
            cont,
        } => SProc::When {
            signal: sym(signal),
            binder: Some((sym(binder), None)),
            body: Box::new(lift(body)),
            cont: cont.clone(),
        },
        Program::MatchSig {
            left,
            right,
            then,
            otherwise,
        } => SProc::If {
            left: sym(left),
            right: sym(right),
            then: Box::new(lift(then)),
            otherwise: Box::new(lift(otherwise)),
        },
        Program::MatchVal {
            scrutinee,
            pattern,
            then,
            otherwise,
        } => SProc::Case {
            scrutinee: scrutinee.clone(),
            pattern: pattern.clone(),
            then: Box::new(lift(then)),
            otherwise: Box::new(lift(otherwise)),
        },
        Program::New(t, ty, body) => SProc::New(
            vec![(sym(t), ty.is_ground().then(|| ty.clone()))],
            Box::new(lift(body)),
        ),
        Program::Par(a, b) => SProc::Par(Box::new(lift(a)), Box::new(lift(b))),
    }
}

pub fn write_program(f: &mut fmt::Formatter<'_>, p: &Program, _sugar: bool) -> fmt::Result {
    write_sproc(f, &lift(p))
}

pub fn write_sproc(f: &mut impl Write, p: &SProc) -> fmt::Result {
    write_at(f, p, 0)
}

fn write_binder(f: &mut impl Write, (x, ty): &Binder) -> fmt::Result {
    match ty {
        Some(t) => write!(f, "{x} : {t}"),
        None => write!(f, "{x}"),
    }
}

fn write_emit_payload(f: &mut impl Write, e: &Expr) -> fmt::Result {
    if *e == Expr::unit() {
        Ok(())
    } else {
        write!(f, "{e}")
    }
}

/// Levels: 0 composition, 1 choice operand, 2 prefix body.
fn write_at(f: &mut impl Write, p: &SProc, level: u8) -> fmt::Result {
    match p {
        SProc::Par(a, b) => {
            if level > 0 {
                write!(f, "(")?;
            }
            write_at(f, a, 0)?;
            write!(f, " | ")?;
            write_at(f, b, 1)?;
            if level > 0 {
                write!(f, ")")?;
            }
            Ok(())
        }
        SProc::Choice(a, b) => {
            if level > 1 {
                write!(f, "(")?;
            }
            write_at(f, a, 1)?;
            write!(f, " (+) ")?;
            write_at(f, b, 2)?;
            if level > 1 {
                write!(f, ")")?;
            }
            Ok(())
        }
        SProc::Nil => write!(f, "0"),
        SProc::Call(id, args) => write!(f, "{}", Cont::Call(id.clone(), args.clone())),
        SProc::Emit(s, e) => {
            write!(f, "{s}!")?;
            write_emit_payload(f, e)
        }
        SProc::When {
            signal,
            binder,
            body,
            cont,
        } => {
            write!(f, "when {signal}")?;
            if let Some(b) = binder {
                write!(f, "(")?;
                write_binder(f, b)?;
                write!(f, ")")?;
            }
            write!(f, " do ")?;
            write_at(f, body, 2)?;
            write!(f, " else {cont}")
        }
        SProc::If {
            left,
            right,
            then,
            otherwise,
        } => {
            write!(f, "if {left} = {right} then ")?;
            write_at(f, then, 2)?;
            write!(f, " else ")?;
            write_at(f, otherwise, 2)
        }
        SProc::Case {
            scrutinee,
            pattern,
            then,
            otherwise,
        } => {
            write!(f, "case {scrutinee} of {pattern} -> ")?;
            write_at(f, then, 2)?;
            write!(f, " else ")?;
            write_at(f, otherwise, 2)
        }
        SProc::New(bs, body) => {
            write!(f, "new ")?;
            for (i, b) in bs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_binder(f, b)?;
            }
            write!(f, " in ")?;
            write_at(f, body, 2)
        }
        SProc::Pause(k) => write!(f, "pause.{k}"),
        SProc::Await { signal, binder, body } => {
            write!(f, "await {signal}(")?;
            write_binder(f, binder)?;
            write!(f, ").")?;
            write_at(f, body, 2)
        }
        SProc::GMatch {
            var,
            fresh,
            value,
            avoid,
            body,
        } => {
            write!(f, "match {var} = ")?;
            if !fresh.is_empty() {
                write!(f, "new {} in ", fresh.join(", "))?;
            }
            write!(f, "{value}")?;
            if !avoid.is_empty() {
                write!(f, " avoid {{{}}}", avoid.join(", "))?;
            }
            write!(f, " then ")?;
            write_at(f, body, 2)
        }
    }
}

pub fn write_file(f: &mut impl Write, file: &SourceFile) -> fmt::Result {
    for s in &file.signals {
        writeln!(f, "signal {} : {}", s.names.join(", "), s.ty)?;
    }
    for c in &file.constructors {
        write!(f, "constructor {}/{} : ", c.name, c.args.len())?;
        if !c.args.is_empty() {
            let args: Vec<String> = c.args.iter().map(|t| t.to_string()).collect();
            write!(f, "({}) -> ", args.join(", "))?;
        }
        writeln!(f, "{}", c.result)?;
    }
    for d in &file.defs {
        write!(f, "def {}(", d.name)?;
        for (i, b) in d.params.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write_binder(f, b)?;
        }
        write!(f, ") = ")?;
        write_sproc(f, &d.body)?;
        writeln!(f)?;
    }
    write!(f, "run ")?;
    write_sproc(f, &file.run)?;
    writeln!(f)
}
