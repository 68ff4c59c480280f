//! Parenthesized prefix syntax for programs, e.g.
//! `(concat (substr x 0 2) ",")`.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::expr::{Expr, Node, Signature};
use super::func::Func;
use super::value::Sort;
use super::DslError;

pub(crate) fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            f.write_char('\\')?;
        }
        f.write_char(c)?;
    }
    f.write_char('"')
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Input { name, .. } => f.write_str(name),
            Node::Str(s) => write_quoted(f, s),
            Node::Int(n) => write!(f, "{n}"),
            Node::App { func, args } => {
                write!(f, "({}", func.name())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_char(')')
            }
            Node::If { cond, then, els } => write!(f, "(if {cond} {then} {els})"),
        }
    }
}

pub fn pretty(e: &Expr) -> String {
    e.to_string()
}

#[derive(Debug, Error, PartialEq)]
#[error("at byte {pos}: {kind}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("`{name}` expects {expected} arguments, found {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("sort mismatch in {context}: expected {expected}, found {found}")]
    SortMismatch { context: String, expected: Sort, found: Sort },
    #[error("{0}")]
    Shape(String),
    #[error("syntax: {0}")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Str(String),
    Atom(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        match c {
            c if c.is_whitespace() => {
                it.next();
            }
            '(' => {
                it.next();
                out.push((pos, Tok::Open));
            }
            ')' => {
                it.next();
                out.push((pos, Tok::Close));
            }
            '"' => {
                it.next();
                let mut s = String::new();
                loop {
                    match it.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match it.next() {
                            Some((_, e @ ('"' | '\\'))) => s.push(e),
                            Some((p, e)) => {
                                return Err(ParseError {
                                    pos: p,
                                    kind: ParseErrorKind::Syntax(format!("bad escape `\\{e}`")),
                                })
                            }
                            None => break,
                        },
                        Some((_, ch)) => s.push(ch),
                        None => {
                            return Err(ParseError {
                                pos,
                                kind: ParseErrorKind::Syntax("unterminated string literal".into()),
                            })
                        }
                    }
                }
                out.push((pos, Tok::Str(s)));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, ch)) = it.peek() {
                    if ch.is_whitespace() || ch == '(' || ch == ')' || ch == '"' {
                        break;
                    }
                    s.push(ch);
                    it.next();
                }
                out.push((pos, Tok::Atom(s)));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    sig: &'a Signature,
    end: usize,
}

impl Parser<'_> {
    fn err(&self, pos: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { pos, kind }
    }

    fn peek_pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let Some((pos, tok)) = self.toks.get(self.at).cloned() else {
            return Err(self.err(self.end, ParseErrorKind::Syntax("unexpected end of input".into())));
        };
        self.at += 1;
        match tok {
            Tok::Str(s) => Ok(Expr::str_lit(s)),
            Tok::Atom(a) => self.atom(pos, &a),
            Tok::Close => Err(self.err(pos, ParseErrorKind::Syntax("unexpected `)`".into()))),
            Tok::Open => {
                let head = match self.toks.get(self.at).cloned() {
                    Some((_, Tok::Atom(h))) => h,
                    _ => {
                        return Err(
                            self.err(self.peek_pos(), ParseErrorKind::Syntax("expected a component name".into()))
                        )
                    }
                };
                self.at += 1;
                let mut args = Vec::new();
                let mut arg_pos = Vec::new();
                loop {
                    match self.toks.get(self.at) {
                        Some((_, Tok::Close)) => {
                            self.at += 1;
                            break;
                        }
                        Some(_) => {
                            arg_pos.push(self.peek_pos());
                            args.push(self.term()?);
                        }
                        None => return Err(self.err(self.end, ParseErrorKind::Syntax("missing `)`".into()))),
                    }
                }
                self.build(pos, &head, args, &arg_pos)
            }
        }
    }

    fn atom(&self, pos: usize, a: &str) -> Result<Expr, ParseError> {
        let digits = a.strip_prefix('-').unwrap_or(a);
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            return a
                .parse::<i64>()
                .map(Expr::int_lit)
                .map_err(|_| self.err(pos, ParseErrorKind::Syntax(format!("integer literal `{a}` out of range"))));
        }
        match self.sig.position(a) {
            Some(i) => Ok(self.sig.input_expr(i)),
            None => Err(self.err(pos, ParseErrorKind::UnknownComponent(a.to_owned()))),
        }
    }

    fn build(&self, pos: usize, head: &str, args: Vec<Expr>, arg_pos: &[usize]) -> Result<Expr, ParseError> {
        if head == "if" {
            if args.len() != 3 {
                return Err(self.err(pos, ParseErrorKind::Arity { name: "if".into(), expected: 3, found: args.len() }));
            }
            let mut it = args.into_iter();
            let (c, t, e) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
            return Expr::ite(c, t, e).map_err(|err| self.dsl_err(pos, err));
        }
        let Some(func) = Func::from_name(head) else {
            return Err(self.err(pos, ParseErrorKind::UnknownComponent(head.to_owned())));
        };
        if args.len() != func.arity() {
            return Err(
                self.err(pos, ParseErrorKind::Arity { name: head.into(), expected: func.arity(), found: args.len() })
            );
        }
        for (k, (a, &want)) in args.iter().zip(func.arg_sorts()).enumerate() {
            if a.sort() != want {
                return Err(self.err(
                    arg_pos[k],
                    ParseErrorKind::SortMismatch {
                        context: format!("argument {} of {head}", k + 1),
                        expected: want,
                        found: a.sort(),
                    },
                ));
            }
        }
        Expr::app(func, args).map_err(|err| self.dsl_err(pos, err))
    }

    fn dsl_err(&self, pos: usize, err: DslError) -> ParseError {
        let kind = match err {
            DslError::Arity { name, expected, found } => ParseErrorKind::Arity { name, expected, found },
            DslError::SortMismatch { context, expected, found } => {
                ParseErrorKind::SortMismatch { context, expected, found }
            }
            other => ParseErrorKind::Shape(other.to_string()),
        };
        self.err(pos, kind)
    }
}

/// Parses a program over the inputs declared in `sig` and the fixed function
/// components.
pub fn parse_expr(text: &str, sig: &Signature) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, at: 0, sig, end: text.len() };
    let e = p.term()?;
    if p.at != p.toks.len() {
        return Err(p.err(p.peek_pos(), ParseErrorKind::Syntax("trailing input after term".into())));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::strings(&["x"])
    }

    #[test]
    fn leaf_prints_as_name() {
        assert_eq!(pretty(&sig().input_expr(0)), "x");
    }

    #[test]
    fn parses_conditional() {
        let e = parse_expr(r#"(if (= x "a") "b" "a")"#, &sig()).unwrap();
        assert_eq!(e.conditions(), 1);
        assert_eq!(pretty(&e), r#"(if (= x "a") "b" "a")"#);
    }

    #[test]
    fn distinct_errors() {
        let e = parse_expr("(concat x)", &sig()).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Arity { expected: 2, found: 1, .. }));
        let e = parse_expr("(frobnicate x)", &sig()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownComponent("frobnicate".into()));
        assert_eq!(e.pos, 0);
        let e = parse_expr("(concat x 3)", &sig()).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::SortMismatch { .. }));
        assert_eq!(e.pos, 10);
        let e = parse_expr("y", &sig()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownComponent("y".into()));
    }

    #[test]
    fn escapes_and_negative_literals() {
        let e = parse_expr(r#"(concat "a\"b\\" (int_to_str (- 0 -3)))"#, &sig()).unwrap();
        assert_eq!(pretty(&e), r#"(concat "a\"b\\" (int_to_str (- 0 -3)))"#);
        let e = parse_expr("(- 1 2)", &sig()).unwrap();
        assert_eq!(e.sort(), Sort::Int);
    }
}
