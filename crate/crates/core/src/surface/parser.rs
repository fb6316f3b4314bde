use std::collections::BTreeMap;
use std::sync::Arc;

use super::lexer::{lex, Tok, Token};
use super::{Binder, ConstructorDecl, SDef, SProc, SignalDecl, SourceFile, SyntaxError};
use crate::ast::{Cont, Expr, Name, Sym, Type, CONS, NIL, UNIT};

const KEYWORDS: &[&str] = &[
    "run",
    "def",
    "constructor",
    "signal",
    "when",
    "do",
    "else",
    "if",
    "then",
    "case",
    "of",
    "new",
    "in",
    "pause",
    "await",
    "match",
    "avoid",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    arities: BTreeMap<String, usize>,
    /// Call sites to validate once all definitions are known.
    calls: Vec<(Sym, usize, usize, usize)>,
}

type PResult<T> = Result<T, SyntaxError>;

fn builtin_arities() -> BTreeMap<String, usize> {
    BTreeMap::from([(UNIT.to_string(), 0), (NIL.to_string(), 0), (CONS.to_string(), 2)])
}

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            arities: builtin_arities(),
            calls: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(SyntaxError::new(l, c, msg))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<Sym> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(Arc::from(s.as_str()))
            }
            t => self.err(format!("expected identifier, found {t}")),
        }
    }

    fn ident_list(&mut self) -> PResult<Vec<Sym>> {
        let mut out = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn ty(&mut self) -> PResult<Type> {
        let name = self.ident()?;
        match &*name {
            "unit" => Ok(Type::Unit),
            "sig" | "list" => {
                self.expect(&Tok::LParen)?;
                let inner = self.ty()?;
                self.expect(&Tok::RParen)?;
                Ok(if &*name == "sig" {
                    Type::sig(inner)
                } else {
                    Type::list(inner)
                })
            }
            _ => Ok(Type::Data(name)),
        }
    }

    fn file(&mut self) -> PResult<SourceFile> {
        let mut signals = Vec::new();
        let mut constructors = Vec::new();
        let mut defs: Vec<SDef> = Vec::new();
        loop {
            if self.eat_kw("signal") {
                let names = self.ident_list()?;
                self.expect(&Tok::Colon)?;
                let ty = self.ty()?;
                signals.push(SignalDecl { names, ty });
            } else if self.is_kw("constructor") {
                constructors.push(self.constructor()?);
            } else if self.is_kw("def") {
                let (l, c) = self.here();
                self.bump();
                let name = self.ident()?;
                if defs.iter().any(|d| d.name == name) {
                    return Err(SyntaxError::new(l, c, format!("definition `{name}` given twice")));
                }
                self.expect(&Tok::LParen)?;
                let params = self.binders_until(&Tok::RParen)?;
                self.expect(&Tok::Eq)?;
                let body = self.proc()?;
                defs.push(SDef { name, params, body });
            } else {
                break;
            }
        }
        self.expect_kw("run")?;
        let run = self.proc()?;
        if self.peek() != &Tok::Eof {
            return self.err(format!("unexpected {} after program", self.peek()));
        }
        for (id, n, l, c) in &self.calls {
            match defs.iter().find(|d| &d.name == id) {
                None => return Err(SyntaxError::new(*l, *c, format!("unbound identifier `{id}`"))),
                Some(d) if d.params.len() != *n => {
                    return Err(SyntaxError::new(
                        *l,
                        *c,
                        format!("`{id}` expects {} argument(s), got {n}", d.params.len()),
                    ))
                }
                _ => {}
            }
        }
        Ok(SourceFile {
            signals,
            constructors,
            defs,
            run,
        })
    }

    fn constructor(&mut self) -> PResult<ConstructorDecl> {
        self.expect_kw("constructor")?;
        let (l, c) = self.here();
        let name = self.ident()?;
        if self.arities.contains_key(&*name) {
            return Err(SyntaxError::new(l, c, format!("constructor `{name}` declared twice")));
        }
        self.expect(&Tok::Slash)?;
        let arity = match self.bump() {
            Tok::Nat(n) => n as usize,
            t => return self.err(format!("expected arity, found {t}")),
        };
        self.expect(&Tok::Colon)?;
        let (args, result) = if self.eat(&Tok::LParen) {
            let mut args = vec![self.ty()?];
            while self.eat(&Tok::Comma) {
                args.push(self.ty()?);
            }
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::Arrow)?;
            (args, self.ty()?)
        } else {
            (Vec::new(), self.ty()?)
        };
        if args.len() != arity {
            return Err(SyntaxError::new(
                l,
                c,
                format!("constructor `{name}` declared with arity {arity} but {} argument type(s)", args.len()),
            ));
        }
        self.arities.insert(name.to_string(), arity);
        Ok(ConstructorDecl { name, args, result })
    }

    fn binder(&mut self) -> PResult<Binder> {
        let x = self.ident()?;
        let ty = if self.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
        Ok((x, ty))
    }

    fn binders_until(&mut self, close: &Tok) -> PResult<Vec<Binder>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.binder()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn proc(&mut self) -> PResult<SProc> {
        let mut left = self.choice()?;
        while self.eat(&Tok::Bar) {
            let right = self.choice()?;
            left = SProc::Par(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn choice(&mut self) -> PResult<SProc> {
        let mut left = self.unary()?;
        while self.eat(&Tok::Choice) {
            let right = self.unary()?;
            left = SProc::Choice(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<SProc> {
        let (l, c) = self.here();
        match self.peek().clone() {
            Tok::Nat(0) => {
                self.bump();
                Ok(SProc::Nil)
            }
            Tok::LParen => {
                self.bump();
                let p = self.proc()?;
                self.expect(&Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "when" => {
                    self.bump();
                    let signal = self.ident()?;
                    let binder = if self.eat(&Tok::LParen) {
                        let b = self.binder()?;
                        self.expect(&Tok::RParen)?;
                        Some(b)
                    } else {
                        None
                    };
                    self.expect_kw("do")?;
                    let body = self.unary()?;
                    let cont = if self.eat_kw("else") { self.cont()? } else { Cont::Nil };
                    Ok(SProc::When {
                        signal,
                        binder,
                        body: Box::new(body),
                        cont,
                    })
                }
                "if" => {
                    self.bump();
                    let left = self.ident()?;
                    self.expect(&Tok::Eq)?;
                    let right = self.ident()?;
                    self.expect_kw("then")?;
                    let then = self.unary()?;
                    self.expect_kw("else")?;
                    let otherwise = self.unary()?;
                    Ok(SProc::If {
                        left,
                        right,
                        then: Box::new(then),
                        otherwise: Box::new(otherwise),
                    })
                }
                "case" => {
                    self.bump();
                    let scrutinee = self.expr()?;
                    self.expect_kw("of")?;
                    let pattern = self.expr()?;
                    self.expect(&Tok::Arrow)?;
                    let then = self.unary()?;
                    self.expect_kw("else")?;
                    let otherwise = self.unary()?;
                    Ok(SProc::Case {
                        scrutinee,
                        pattern,
                        then: Box::new(then),
                        otherwise: Box::new(otherwise),
                    })
                }
                "new" => {
                    self.bump();
                    let mut bs = vec![self.binder()?];
                    while self.eat(&Tok::Comma) {
                        bs.push(self.binder()?);
                    }
                    self.expect_kw("in")?;
                    let body = self.unary()?;
                    Ok(SProc::New(bs, Box::new(body)))
                }
                "pause" => {
                    self.bump();
                    self.expect(&Tok::Dot)?;
                    Ok(SProc::Pause(self.cont()?))
                }
                "await" => {
                    self.bump();
                    let signal = self.ident()?;
                    self.expect(&Tok::LParen)?;
                    let binder = self.binder()?;
                    self.expect(&Tok::RParen)?;
                    self.expect(&Tok::Dot)?;
                    let body = self.unary()?;
                    Ok(SProc::Await {
                        signal,
                        binder,
                        body: Box::new(body),
                    })
                }
                "match" => {
                    self.bump();
                    let var = self.ident()?;
                    self.expect(&Tok::Eq)?;
                    let fresh = if self.eat_kw("new") {
                        let f = self.ident_list()?;
                        self.expect_kw("in")?;
                        f
                    } else {
                        Vec::new()
                    };
                    let value = self.expr()?;
                    let avoid = if self.eat_kw("avoid") {
                        self.expect(&Tok::LBrace)?;
                        let a = if self.peek() == &Tok::RBrace {
                            Vec::new()
                        } else {
                            self.ident_list()?
                        };
                        self.expect(&Tok::RBrace)?;
                        a
                    } else {
                        Vec::new()
                    };
                    self.expect_kw("then")?;
                    let body = self.unary()?;
                    Ok(SProc::GMatch {
                        var,
                        fresh,
                        value,
                        avoid,
                        body: Box::new(body),
                    })
                }
                _ if KEYWORDS.contains(&kw.as_str()) => self.err(format!("unexpected keyword `{kw}`")),
                _ => {
                    let id = self.ident()?;
                    match self.peek() {
                        Tok::LParen => {
                            self.bump();
                            let args = self.rexps()?;
                            if args.iter().any(Expr::has_deref) {
                                return Err(SyntaxError::new(
                                    l,
                                    c,
                                    "dereference `!s` is only allowed in continuation arguments",
                                ));
                            }
                            self.calls.push((id.clone(), args.len(), l, c));
                            Ok(SProc::Call(id, args))
                        }
                        Tok::Bang => {
                            self.bump();
                            let e = if self.starts_expr() { self.expr()? } else { Expr::unit() };
                            Ok(SProc::Emit(id, e))
                        }
                        t => self.err(format!("expected `(` or `!` after `{id}`, found {t}")),
                    }
                }
            },
            t => self.err(format!("expected a program, found {t}")),
        }
    }

    fn starts_expr(&self) -> bool {
        match self.peek() {
            Tok::Star | Tok::LBrack => true,
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn cont(&mut self) -> PResult<Cont> {
        if self.eat(&Tok::Nat(0)) {
            return Ok(Cont::Nil);
        }
        let (l, c) = self.here();
        let id = self.ident()?;
        self.expect(&Tok::LParen)?;
        let args = self.rexps()?;
        self.calls.push((id.clone(), args.len(), l, c));
        Ok(Cont::Call(id, args))
    }

    /// Comma-separated rexps up to and including `)`.
    fn rexps(&mut self) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            if self.eat(&Tok::Bang) {
                out.push(Expr::Deref(Name::Src(self.ident()?)));
            } else {
                out.push(self.expr()?);
            }
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let (l, c) = self.here();
        match self.peek().clone() {
            Tok::Star => {
                self.bump();
                Ok(Expr::unit())
            }
            Tok::LBrack => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBrack) {
                    items.push(self.expr()?);
                    while self.eat(&Tok::Semi) {
                        items.push(self.expr()?);
                    }
                    self.expect(&Tok::RBrack)?;
                }
                Ok(Expr::list(items))
            }
            Tok::Ident(_) => {
                let id = self.ident()?;
                if self.peek() == &Tok::LParen {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(&Tok::Comma)?;
                        }
                    }
                    match self.arities.get(&*id) {
                        None => Err(SyntaxError::new(l, c, format!("unknown constructor `{id}`"))),
                        Some(&n) if n != args.len() => Err(SyntaxError::new(
                            l,
                            c,
                            format!("constructor `{id}` expects {n} argument(s), got {}", args.len()),
                        )),
                        _ => Ok(Expr::Con(id, args)),
                    }
                } else {
                    match self.arities.get(&*id) {
                        Some(0) => Ok(Expr::Con(id, Vec::new())),
                        Some(n) => Err(SyntaxError::new(
                            l,
                            c,
                            format!("constructor `{id}` expects {n} argument(s), got 0"),
                        )),
                        None => Ok(Expr::Name(Name::Src(id))),
                    }
                }
            }
            t => self.err(format!("expected an expression, found {t}")),
        }
    }
}

/// Parse a whole `.spi` file.
pub fn parse(text: &str) -> Result<SourceFile, SyntaxError> {
    Parser::new(text)?.file()
}

/// Parse a single program; `constructors` are the declarations in scope.
/// Calls are not resolved against definitions.
pub fn parse_program(text: &str, constructors: &[ConstructorDecl]) -> Result<SProc, SyntaxError> {
    let mut p = Parser::new(text)?;
    for c in constructors {
        p.arities.insert(c.name.to_string(), c.args.len());
    }
    let proc = p.proc()?;
    if p.peek() != &Tok::Eof {
        return p.err(format!("unexpected {} after program", p.peek()));
    }
    Ok(proc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_nil() {
        assert_eq!(parse("run 0").unwrap().run, SProc::Nil);
    }

    #[test]
    fn when_without_else_has_null_continuation() {
        let f = parse("run when s(x) do 0").unwrap();
        match f.run {
            SProc::When { cont, .. } => assert_eq!(cont, Cont::Nil),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bar_is_lowest_and_left_associative() {
        let f = parse("run a! | b! (+) c! | d!").unwrap();
        let SProc::Par(l, r) = f.run else { panic!() };
        assert!(matches!(*r, SProc::Emit(..)));
        let SProc::Par(_, mid) = *l else { panic!() };
        assert!(matches!(*mid, SProc::Choice(..)));
    }

    #[test]
    fn syntax_error_has_location() {
        let e = parse("run\n  a! |").unwrap_err();
        assert_eq!((e.line, e.col), (2, 7));
    }

    #[test]
    fn unbound_call_rejected() {
        let e = parse("run A()").unwrap_err();
        assert!(e.message.contains("unbound identifier"));
    }

    #[test]
    fn arity_mismatch_rejected() {
        assert!(parse("def A(x) = 0\nrun A()").is_err());
        assert!(parse("constructor c/1 : (unit) -> d\nrun s!c(*, *)").is_err());
    }

    #[test]
    fn deref_outside_continuation_rejected() {
        assert!(parse("def A(x) = 0\nrun A(!s)").is_err());
        assert!(parse("def A(x) = 0\nrun when s do 0 else A(!s)").is_ok());
    }
}
