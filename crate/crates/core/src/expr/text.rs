//! S-expression surface syntax for programs (`.psmp` files).
//!
//! Canonical form is a single line with single spaces, e.g.
//! `(fn [p] (if (< (safe-uc 0.0 1.0) p) 1.0 0.0))`. Binding names carry a
//! `:bool`/`:int` suffix when the type is not inferable from the bound
//! expression; a `:int` token between a `fn`'s argument vector and body
//! declares an int output. `;` starts a line comment.

use super::ast::{Expr, FnSig, Literal, Prim, Program, TypeTag};
use std::fmt::Write as _;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Number(f64),
    Symbol(String),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

type Spanned = (Token, usize, usize);

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' | b',' => {
                    self.bump();
                }
                b';' => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.bump();
                    }
                }
                b'(' => {
                    out.push((Token::LParen, self.line, self.col));
                    self.bump();
                }
                b')' => {
                    out.push((Token::RParen, self.line, self.col));
                    self.bump();
                }
                b'[' => {
                    out.push((Token::LBracket, self.line, self.col));
                    self.bump();
                }
                b']' => {
                    out.push((Token::RBracket, self.line, self.col));
                    self.bump();
                }
                _ => {
                    let (line, col) = (self.line, self.col);
                    let start = self.pos;
                    while self.pos < self.src.len()
                        && !b" \t\r\n,()[];".contains(&self.src[self.pos])
                    {
                        self.bump();
                    }
                    let word = std::str::from_utf8(&self.src[start..self.pos])
                        .map_err(|_| self.error("invalid utf-8 in token"))?;
                    let tok = if looks_numeric(word) {
                        match word.parse::<f64>() {
                            Ok(v) if v.is_finite() => Token::Number(v),
                            _ => {
                                return Err(ParseError {
                                    line,
                                    col,
                                    msg: format!("invalid number `{word}`"),
                                })
                            }
                        }
                    } else {
                        Token::Symbol(word.to_string())
                    };
                    out.push((tok, line, col));
                }
            }
        }
        Ok(out)
    }
}

fn looks_numeric(word: &str) -> bool {
    let w = word.strip_prefix('-').unwrap_or(word);
    w.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '.') && w != "." && {
        // `-` alone is the subtraction primitive.
        !word.is_empty() && word != "-"
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

#[derive(Clone)]
enum ScopeEntry {
    Var(String, TypeTag),
    Fn(String, FnSig),
}

impl Parser {
    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or((1, 1))
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _, _)| t)
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let t = self
            .tokens
            .get(self.pos)
            .map(|(t, _, _)| t.clone())
            .ok_or_else(|| self.error("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        let got = self.next()?;
        if got != want {
            return Err(self.error(format!("expected {what}")));
        }
        Ok(())
    }

    fn symbol(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next()? {
            Token::Symbol(s) => Ok(s),
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    /// Parses `name`, `name:bool`, `name:int`, `name:real`.
    fn binder(&mut self) -> Result<(String, Option<TypeTag>), ParseError> {
        let raw = self.symbol("binding name")?;
        if let Some((name, ty)) = raw.rsplit_once(':') {
            let ty = match ty {
                "real" => TypeTag::Real,
                "bool" => TypeTag::Bool,
                "int" => TypeTag::Int,
                other => return Err(self.error(format!("unknown type annotation `{other}`"))),
            };
            if name.is_empty() {
                return Err(self.error("empty binding name"));
            }
            Ok((name.to_string(), Some(ty)))
        } else {
            Ok((raw, None))
        }
    }

    fn parse_params(&mut self) -> Result<Vec<(String, TypeTag)>, ParseError> {
        self.expect(Token::LBracket, "`[` opening the argument vector")?;
        let mut params = Vec::new();
        while self.peek() != Some(&Token::RBracket) {
            let (name, ty) = self.binder()?;
            params.push((name, ty.unwrap_or(TypeTag::Real)));
        }
        self.next()?; // RBracket
        Ok(params)
    }

    /// Optional `:int` / `:bool` / `:real` return annotation.
    fn ret_annotation(&mut self) -> Result<Option<TypeTag>, ParseError> {
        if let Some(Token::Symbol(s)) = self.peek() {
            let ty = match s.as_str() {
                ":real" => Some(TypeTag::Real),
                ":bool" => Some(TypeTag::Bool),
                ":int" => Some(TypeTag::Int),
                _ => None,
            };
            if ty.is_some() {
                self.next()?;
                return Ok(ty);
            }
        }
        Ok(None)
    }

    fn lookup_var(scope: &[ScopeEntry], name: &str) -> Option<TypeTag> {
        scope.iter().rev().find_map(|e| match e {
            ScopeEntry::Var(n, t) if n == name => Some(*t),
            _ => None,
        })
    }

    fn lookup_fn(scope: &[ScopeEntry], name: &str) -> Option<FnSig> {
        scope.iter().rev().find_map(|e| match e {
            ScopeEntry::Fn(n, sig) if n == name => Some(sig.clone()),
            _ => None,
        })
    }

    /// Parses an expression, inferring structural types as it goes so that
    /// unannotated `let` binders get their bound expression's type.
    fn parse_expr(
        &mut self,
        scope: &mut Vec<ScopeEntry>,
        enclosing: Option<&FnSig>,
    ) -> Result<(Expr, TypeTag), ParseError> {
        match self.next()? {
            Token::Number(v) => Ok((Expr::Const(Literal::Real(v)), TypeTag::Real)),
            Token::Symbol(s) => match s.as_str() {
                "true" => Ok((Expr::Const(Literal::Bool(true)), TypeTag::Bool)),
                "false" => Ok((Expr::Const(Literal::Bool(false)), TypeTag::Bool)),
                name => {
                    let ty = Self::lookup_var(scope, name)
                        .ok_or_else(|| self.error(format!("unbound variable `{name}`")))?;
                    Ok((Expr::Var(name.to_string()), ty.structural()))
                }
            },
            Token::LParen => {
                let head = self.symbol("operator")?;
                let out = match head.as_str() {
                    "if" => {
                        let (cond, _) = self.parse_expr(scope, enclosing)?;
                        let (then, tt) = self.parse_expr(scope, enclosing)?;
                        let (els, _) = self.parse_expr(scope, enclosing)?;
                        (
                            Expr::If {
                                cond: Box::new(cond),
                                then: Box::new(then),
                                els: Box::new(els),
                            },
                            tt,
                        )
                    }
                    "let" => self.parse_let(scope, enclosing)?,
                    "recur" => {
                        let sig = enclosing
                            .ok_or_else(|| self.error("recur outside of any procedure"))?
                            .clone();
                        let mut args = Vec::new();
                        while self.peek() != Some(&Token::RParen) {
                            args.push(self.parse_expr(scope, enclosing)?.0);
                        }
                        (Expr::Recur(args), sig.ret.structural())
                    }
                    "fn" => return Err(self.error("`fn` form only allowed at top level or as a let binding")),
                    op => {
                        let mut args = Vec::new();
                        while self.peek() != Some(&Token::RParen) {
                            args.push(self.parse_expr(scope, enclosing)?.0);
                        }
                        if let Some(p) = Prim::from_name(op) {
                            (Expr::Prim(p, args), p.ret_type())
                        } else if let Some(sig) = Self::lookup_fn(scope, op) {
                            (Expr::Call(op.to_string(), args), sig.ret.structural())
                        } else {
                            return Err(self.error(format!("unknown procedure `{op}`")));
                        }
                    }
                };
                self.expect(Token::RParen, "`)`")?;
                Ok(out)
            }
            _ => Err(self.error("expected an expression")),
        }
    }

    fn parse_let(
        &mut self,
        scope: &mut Vec<ScopeEntry>,
        enclosing: Option<&FnSig>,
    ) -> Result<(Expr, TypeTag), ParseError> {
        self.expect(Token::LBracket, "`[` opening the let binding")?;
        let (name, annot) = self.binder()?;

        // A `(fn ...)` bound expression makes this a let-fn.
        let is_fn = matches!(
            (self.peek(), self.tokens.get(self.pos + 1)),
            (Some(Token::LParen), Some((Token::Symbol(s), _, _))) if s == "fn"
        );

        if is_fn {
            self.next()?; // LParen
            self.next()?; // fn
            let params = self.parse_params()?;
            let ret_annot = self.ret_annotation()?;
            let depth = scope.len();
            for (n, t) in &params {
                scope.push(ScopeEntry::Var(n.clone(), *t));
            }
            // The signature a nested `recur` sees; structural return type is
            // pinned after parsing the body when unannotated.
            let provisional = FnSig {
                params: params.iter().map(|(_, t)| *t).collect(),
                ret: ret_annot.unwrap_or(TypeTag::Real),
            };
            let (fn_body, body_ty) = self.parse_expr(scope, Some(&provisional))?;
            scope.truncate(depth);
            self.expect(Token::RParen, "`)` closing the fn form")?;
            let ret = ret_annot.unwrap_or(body_ty);
            self.expect(Token::RBracket, "`]` closing the let binding")?;
            let sig = FnSig {
                params: provisional.params.clone(),
                ret,
            };
            scope.push(ScopeEntry::Fn(name.clone(), sig));
            let (body, out_ty) = self.parse_expr(scope, enclosing)?;
            scope.pop();
            Ok((
                Expr::LetFn {
                    name,
                    params,
                    ret,
                    fn_body: Box::new(fn_body),
                    body: Box::new(body),
                },
                out_ty,
            ))
        } else {
            let (bound, bound_ty) = self.parse_expr(scope, enclosing)?;
            let ty = annot.unwrap_or(bound_ty);
            self.expect(Token::RBracket, "`]` closing the let binding")?;
            scope.push(ScopeEntry::Var(name.clone(), ty));
            let (body, out_ty) = self.parse_expr(scope, enclosing)?;
            scope.pop();
            Ok((
                Expr::LetVal {
                    name,
                    ty,
                    bound: Box::new(bound),
                    body: Box::new(body),
                },
                out_ty,
            ))
        }
    }
}

/// Parses a whole program from its textual form.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let tokens = Lexer::new(src).tokens()?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.expect(Token::LParen, "`(` opening the program")?;
    let head = parser.symbol("`fn`")?;
    if head != "fn" {
        return Err(parser.error("program must start with `(fn ...`"));
    }
    let params = parser.parse_params()?;
    let ret_annot = parser.ret_annotation()?;
    let mut scope: Vec<ScopeEntry> = params
        .iter()
        .map(|(n, t)| ScopeEntry::Var(n.clone(), *t))
        .collect();
    let provisional = FnSig {
        params: params.iter().map(|(_, t)| *t).collect(),
        ret: ret_annot.unwrap_or(TypeTag::Real),
    };
    let (body, body_ty) = parser.parse_expr(&mut scope, Some(&provisional))?;
    parser.expect(Token::RParen, "`)` closing the program")?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.error("trailing tokens after program"));
    }
    let ret = ret_annot.unwrap_or(body_ty);
    Ok(Program { params, ret, body })
}

fn write_binder(out: &mut String, name: &str, ty: TypeTag, inferable: TypeTag) {
    if ty == inferable {
        out.push_str(name);
    } else {
        let _ = write!(out, "{name}:{ty}");
    }
}

fn write_expr(out: &mut String, expr: &Expr) {
    match expr {
        Expr::Const(Literal::Real(v)) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::Const(Literal::Bool(b)) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(name) => out.push_str(name),
        Expr::Prim(p, args) => write_form(out, p.name(), args),
        Expr::Call(name, args) => write_form(out, name, args),
        Expr::Recur(args) => write_form(out, "recur", args),
        Expr::LetVal {
            name,
            ty,
            bound,
            body,
        } => {
            out.push_str("(let [");
            // Real and bool are re-inferred from the bound expression.
            let inferable = if *ty == TypeTag::Int { TypeTag::Real } else { *ty };
            write_binder(out, name, *ty, inferable);
            out.push(' ');
            write_expr(out, bound);
            out.push_str("] ");
            write_expr(out, body);
            out.push(')');
        }
        Expr::LetFn {
            name,
            params,
            ret,
            fn_body,
            body,
        } => {
            out.push_str("(let [");
            out.push_str(name);
            out.push_str(" (fn ");
            write_params(out, params);
            if *ret == TypeTag::Int {
                out.push_str(" :int");
            }
            out.push(' ');
            write_expr(out, fn_body);
            out.push_str(")] ");
            write_expr(out, body);
            out.push(')');
        }
        Expr::If { cond, then, els } => {
            out.push_str("(if ");
            write_expr(out, cond);
            out.push(' ');
            write_expr(out, then);
            out.push(' ');
            write_expr(out, els);
            out.push(')');
        }
    }
}

fn write_form(out: &mut String, head: &str, args: &[Expr]) {
    out.push('(');
    out.push_str(head);
    for a in args {
        out.push(' ');
        write_expr(out, a);
    }
    out.push(')');
}

fn write_params(out: &mut String, params: &[(String, TypeTag)]) {
    out.push('[');
    for (i, (name, ty)) in params.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write_binder(out, name, *ty, TypeTag::Real);
    }
    out.push(']');
}

/// Prints a program in the canonical single-line form.
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    out.push_str("(fn ");
    write_params(&mut out, &program.params);
    if program.ret == TypeTag::Int {
        out.push_str(" :int");
    }
    out.push(' ');
    write_expr(&mut out, &program.body);
    out.push(')');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ast::typecheck;

    #[test]
    fn canonical_constant_program() {
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::real(0.0),
        };
        assert_eq!(print_program(&prog), "(fn [] 0.0)");
    }

    #[test]
    fn bernoulli_round_trip() {
        let text = "(fn [p] (if (< (safe-uc 0.0 1.0) p) 1.0 0.0))";
        let prog = parse_program(text).unwrap();
        assert!(typecheck(&prog).is_ok());
        assert_eq!(print_program(&prog), text);
        let again = parse_program(&print_program(&prog)).unwrap();
        assert_eq!(prog, again);
    }

    #[test]
    fn let_fn_round_trip() {
        let text =
            "(fn [p] (let [loop (fn [k] (if (< (safe-uc 0.0 1.0) p) k (recur (inc k))))] (loop 1.0)))";
        let prog = parse_program(text).unwrap();
        assert!(typecheck(&prog).is_ok());
        assert_eq!(print_program(&prog), text);
    }

    #[test]
    fn int_annotations_survive() {
        let text = "(fn [p] :int (if (< (safe-uc 0.0 1.0) p) 1.0 0.0))";
        let prog = parse_program(text).unwrap();
        assert_eq!(prog.ret, TypeTag::Int);
        assert_eq!(print_program(&prog), text);

        let text2 = "(fn [n:int] (let [m:int (inc n)] m))";
        let prog2 = parse_program(text2).unwrap();
        assert_eq!(print_program(&prog2), text2);
    }

    #[test]
    fn bool_binding_inferred() {
        let text = "(fn [x] (let [b (< x 1.0)] (if b x 0.0)))";
        let prog = parse_program(text).unwrap();
        assert!(typecheck(&prog).is_ok());
        assert_eq!(print_program(&prog), text);
    }

    #[test]
    fn comments_and_whitespace_ignored() {
        let text = "; header comment\n(fn [p]\n  (if (< (safe-uc 0.0 1.0) p)\n    1.0 0.0))";
        let prog = parse_program(text).unwrap();
        assert_eq!(
            print_program(&prog),
            "(fn [p] (if (< (safe-uc 0.0 1.0) p) 1.0 0.0))"
        );
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_program("(fn [p]\n  (boom p))").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.msg.contains("boom"));
    }

    #[test]
    fn negative_and_scientific_numbers() {
        let prog = parse_program("(fn [] (+ -2.0 1e-3))").unwrap();
        assert_eq!(print_program(&prog), "(fn [] (+ -2.0 0.001))");
        // `-` alone is still subtraction.
        let prog2 = parse_program("(fn [] (- 1.0 2.0))").unwrap();
        assert!(matches!(prog2.body, Expr::Prim(Prim::Sub, _)));
    }
}
