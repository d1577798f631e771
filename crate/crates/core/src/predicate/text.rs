//! S-expression syntax for predicates.
//!
//! Accepts both the compact notation (`~`, `/\`, `==>`) and SMT-LIB style
//! (`not`, `and`, `=>`). Division may be written `div`/`divf`, remainder
//! `mod`/`modf`. Nullary functions are bare names.

use std::fmt;

use thiserror::Error;

use super::{Candidate, Formula, Func, Literal, Rel, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{msg} at byte {offset}")]
pub struct TextError {
    pub msg: String,
    pub offset: usize,
}

fn err<T>(msg: impl Into<String>, offset: usize) -> Result<T, TextError> {
    Err(TextError {
        msg: msg.into(),
        offset,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

/// Sexp with byte offsets, for error reporting.
#[derive(Debug)]
struct Node {
    at: usize,
    kind: NodeKind,
}

#[derive(Debug)]
enum NodeKind {
    Atom(String),
    List(Vec<Node>),
}

impl Node {
    fn to_sexp(&self) -> Sexp {
        match &self.kind {
            NodeKind::Atom(a) => Sexp::Atom(a.clone()),
            NodeKind::List(v) => Sexp::List(v.iter().map(Node::to_sexp).collect()),
        }
    }
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn node(&mut self) -> Result<Node, TextError> {
        self.skip_ws();
        let at = self.pos;
        let rest = &self.src[self.pos..];
        match rest.chars().next() {
            None => err("unexpected end of input", at),
            Some(')') => err("unexpected ')'", at),
            Some('(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.src[self.pos..].chars().next() {
                        None => return err("unclosed '('", at),
                        Some(')') => {
                            self.pos += 1;
                            return Ok(Node {
                                at,
                                kind: NodeKind::List(items),
                            });
                        }
                        Some(_) => items.push(self.node()?),
                    }
                }
            }
            Some(_) => {
                let len = rest
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                    .unwrap_or(rest.len());
                self.pos += len;
                Ok(Node {
                    at,
                    kind: NodeKind::Atom(rest[..len].to_string()),
                })
            }
        }
    }
}

fn read_one(src: &str) -> Result<Node, TextError> {
    let mut r = Reader { src, pos: 0 };
    let n = r.node()?;
    if !r.at_end() {
        return err("trailing input", r.pos);
    }
    Ok(n)
}

impl Sexp {
    pub fn parse(src: &str) -> Result<Sexp, TextError> {
        read_one(src).map(|n| n.to_sexp())
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn term(n: &Node) -> Result<Term, TextError> {
    match &n.kind {
        NodeKind::Atom(a) => atom_term(a, n.at),
        NodeKind::List(items) => {
            let Some(head) = items.first() else {
                return err("empty list", n.at);
            };
            let NodeKind::Atom(op) = &head.kind else {
                return err("expected an operator", head.at);
            };
            let args = &items[1..];
            let want = |k: usize| {
                if args.len() == k {
                    Ok(())
                } else {
                    err(format!("'{op}' takes {k} arguments"), n.at)
                }
            };
            let bin = |ctor: fn(Term, Term) -> Term| -> Result<Term, TextError> {
                want(2)?;
                Ok(ctor(term(&args[0])?, term(&args[1])?))
            };
            match op.as_str() {
                "+" => bin(Term::add),
                "-" if args.len() == 1 => Ok(Term::sub(Term::zero(), term(&args[0])?)),
                "-" => bin(Term::sub),
                "*" => bin(Term::mul),
                "div" | "divf" => bin(Term::div),
                "mod" | "modf" => bin(Term::modulo),
                "ite" => {
                    want(3)?;
                    Ok(Term::ite(ite_condition(&args[0])?, term(&args[1])?, term(&args[2])?))
                }
                name => {
                    let func: Func = name
                        .parse()
                        .or_else(|_| err(format!("unknown function '{name}'"), head.at))?;
                    if args.is_empty() {
                        return err(format!("'({name})' has no arguments"), n.at);
                    }
                    Ok(Term::App(func, args.iter().map(term).collect::<Result<_, _>>()?))
                }
            }
        }
    }
}

/// Only conditions of the form `(<= t 0)` are representable.
fn ite_condition(n: &Node) -> Result<Term, TextError> {
    if let NodeKind::List(items) = &n.kind {
        if items.len() == 3 {
            if let (NodeKind::Atom(op), NodeKind::Atom(zero)) = (&items[0].kind, &items[2].kind) {
                if op == "<=" && zero == "0" {
                    return term(&items[1]);
                }
            }
        }
    }
    err("ite condition must be (<= t 0)", n.at)
}

fn atom_term(a: &str, at: usize) -> Result<Term, TextError> {
    match a {
        "x" => return Ok(Term::Var(Var::X)),
        "y" => return Ok(Term::Var(Var::Y)),
        "z" => return Ok(Term::Var(Var::Z)),
        _ => {}
    }
    if a.chars().all(|c| c.is_ascii_digit()) {
        return a
            .parse::<u64>()
            .map(Term::numeral)
            .or_else(|_| err(format!("numeral '{a}' out of range"), at));
    }
    match a.parse::<Func>() {
        Ok(f) => Ok(Term::App(f, vec![])),
        Err(()) => err(format!("unknown atom '{a}'"), at),
    }
}

fn formula(n: &Node) -> Result<Formula, TextError> {
    let NodeKind::List(items) = &n.kind else {
        return err("expected a formula", n.at);
    };
    let Some(NodeKind::Atom(op)) = items.first().map(|h| &h.kind) else {
        return err("expected a connective or relation", n.at);
    };
    let args = &items[1..];
    let arity = |k: usize| {
        if args.len() == k {
            Ok(())
        } else {
            err(format!("'{op}' takes {k} arguments"), n.at)
        }
    };
    match op.as_str() {
        "=" | "<=" => {
            arity(2)?;
            Ok(Formula::Lit(Literal {
                rel: if op == "=" { Rel::Eq } else { Rel::Le },
                negated: false,
                lhs: term(&args[0])?,
                rhs: term(&args[1])?,
            }))
        }
        "~" | "not" => {
            arity(1)?;
            match formula(&args[0])? {
                Formula::Lit(mut l) if !l.negated => {
                    l.negated = true;
                    Ok(Formula::Lit(l))
                }
                _ => err("negation applies to a relation only", args[0].at),
            }
        }
        "/\\" | "and" => {
            arity(2)?;
            Ok(Formula::and(formula(&args[0])?, formula(&args[1])?))
        }
        "==>" | "=>" => {
            arity(2)?;
            Ok(Formula::implies(formula(&args[0])?, formula(&args[1])?))
        }
        other => err(format!("unknown connective '{other}'"), items[0].at),
    }
}

pub fn parse_formula(src: &str) -> Result<Formula, TextError> {
    formula(&read_one(src)?)
}

pub fn parse_term(src: &str) -> Result<Term, TextError> {
    term(&read_one(src)?)
}

/// Predicates separated by `|`.
pub fn parse_candidate(src: &str) -> Result<Candidate, TextError> {
    let mut preds = Vec::new();
    let mut offset = 0;
    for part in src.split('|') {
        if part.trim().is_empty() {
            return err("empty predicate", offset);
        }
        preds.push(parse_formula(part).map_err(|e| TextError {
            msg: e.msg,
            offset: e.offset + offset,
        })?);
        offset += part.len() + 1;
    }
    Ok(Candidate(preds))
}
