//! The OEIS program language: AST, concrete syntax, and interpreter.
//!
//! Programs denote functions `Z^2 -> Z`. Inside the update argument of
//! `loop`, `X` is the accumulator and `Y` the iteration counter; inside the
//! two update arguments of `loop2`, `X` and `Y` are the two components.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Program {
    Zero,
    One,
    Two,
    X,
    Y,
    Add(Box<Program>, Box<Program>),
    Sub(Box<Program>, Box<Program>),
    Mul(Box<Program>, Box<Program>),
    Div(Box<Program>, Box<Program>),
    Mod(Box<Program>, Box<Program>),
    Cond(Box<Program>, Box<Program>, Box<Program>),
    /// `loop(F, A, B)`: update, bound, initial value.
    Loop(Box<Program>, Box<Program>, Box<Program>),
    /// `loop2(F, G, A, B, C)`: two updates, bound, two initial values.
    Loop2(Box<Program>, Box<Program>, Box<Program>, Box<Program>, Box<Program>),
    /// `compr(F, A)`: the A-th integer n >= 0 with F(n, 0) <= 0.
    Compr(Box<Program>, Box<Program>),
}

/// Which of the two program variables occur free.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FreeVars {
    pub x: bool,
    pub y: bool,
}

impl FreeVars {
    pub fn union(self, other: FreeVars) -> FreeVars {
        FreeVars {
            x: self.x || other.x,
            y: self.y || other.y,
        }
    }
}

fn bx(p: Program) -> Box<Program> {
    Box::new(p)
}

impl Program {
    pub fn add(a: Program, b: Program) -> Program {
        Program::Add(bx(a), bx(b))
    }
    pub fn sub(a: Program, b: Program) -> Program {
        Program::Sub(bx(a), bx(b))
    }
    pub fn mul(a: Program, b: Program) -> Program {
        Program::Mul(bx(a), bx(b))
    }
    pub fn div(a: Program, b: Program) -> Program {
        Program::Div(bx(a), bx(b))
    }
    pub fn modulo(a: Program, b: Program) -> Program {
        Program::Mod(bx(a), bx(b))
    }
    pub fn cond(a: Program, b: Program, c: Program) -> Program {
        Program::Cond(bx(a), bx(b), bx(c))
    }
    pub fn loop1(f: Program, a: Program, b: Program) -> Program {
        Program::Loop(bx(f), bx(a), bx(b))
    }
    pub fn loop2(f: Program, g: Program, a: Program, b: Program, c: Program) -> Program {
        Program::Loop2(bx(f), bx(g), bx(a), bx(b), bx(c))
    }
    pub fn compr(f: Program, a: Program) -> Program {
        Program::Compr(bx(f), bx(a))
    }

    /// Builds a constant from 0, 1, 2 and arithmetic. Used for numeral
    /// shorthand like `17` in the concrete syntax.
    pub fn numeral(n: u64) -> Program {
        match n {
            0 => Program::Zero,
            1 => Program::One,
            2 => Program::Two,
            n if n % 2 == 0 => Program::mul(Program::Two, Program::numeral(n / 2)),
            n => Program::add(Program::One, Program::numeral(n - 1)),
        }
    }

    pub fn children(&self) -> Vec<&Program> {
        use Program::*;
        match self {
            Zero | One | Two | X | Y => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Mod(a, b) | Compr(a, b) => {
                vec![a, b]
            }
            Cond(a, b, c) | Loop(a, b, c) => vec![a, b, c],
            Loop2(a, b, c, d, e) => vec![a, b, c, d, e],
        }
    }

    pub fn is_loop(&self) -> bool {
        matches!(self, Program::Loop(..) | Program::Loop2(..) | Program::Compr(..))
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Free variables of the function this program denotes. Update
    /// arguments of loops bind their own `X`/`Y`.
    pub fn free_vars(&self) -> FreeVars {
        use Program::*;
        match self {
            Zero | One | Two => FreeVars::default(),
            X => FreeVars { x: true, y: false },
            Y => FreeVars { x: false, y: true },
            Loop(_, a, b) => a.free_vars().union(b.free_vars()),
            Loop2(_, _, a, b, c) => a.free_vars().union(b.free_vars()).union(c.free_vars()),
            Compr(_, a) => a.free_vars(),
            _ => self
                .children()
                .into_iter()
                .fold(FreeVars::default(), |acc, c| acc.union(c.free_vars())),
        }
    }

    /// Prefix rendering used by problem displays, e.g.
    /// `(loop:v0 (+ x y) x 0)` when `tags` names the loop.
    pub fn to_prefix(&self, tags: Option<&LoopRegistry>) -> String {
        let mut out = String::new();
        self.write_prefix(&mut out, tags);
        out
    }

    fn write_prefix(&self, out: &mut String, tags: Option<&LoopRegistry>) {
        use Program::*;
        let head = match self {
            Zero => return out.push('0'),
            One => return out.push('1'),
            Two => return out.push('2'),
            X => return out.push('x'),
            Y => return out.push('y'),
            Add(..) => "+".to_string(),
            Sub(..) => "-".to_string(),
            Mul(..) => "*".to_string(),
            Div(..) => "div".to_string(),
            Mod(..) => "mod".to_string(),
            Cond(..) => "cond".to_string(),
            Loop(..) | Loop2(..) | Compr(..) => {
                let op = self.operator_name();
                match tags.and_then(|r| r.entry_of(self)) {
                    Some(e) => format!("{op}:{}", e.loop_function_name()),
                    None => op.to_string(),
                }
            }
        };
        out.push('(');
        out.push_str(&head);
        for c in self.children() {
            out.push(' ');
            c.write_prefix(out, tags);
        }
        out.push(')');
    }

    fn operator_name(&self) -> &'static str {
        use Program::*;
        match self {
            Add(..) => "+",
            Sub(..) => "-",
            Mul(..) => "*",
            Div(..) => "div",
            Mod(..) => "mod",
            Cond(..) => "cond",
            Loop(..) => "loop",
            Loop2(..) => "loop2",
            Compr(..) => "compr",
            Zero | One | Two | X | Y => "",
        }
    }

    fn precedence(&self) -> u8 {
        use Program::*;
        match self {
            Add(..) | Sub(..) => 1,
            Mul(..) | Div(..) | Mod(..) => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Program::*;
        match self {
            Zero => write!(f, "0"),
            One => write!(f, "1"),
            Two => write!(f, "2"),
            X => write!(f, "X"),
            Y => write!(f, "Y"),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Mod(a, b) => {
                let prec = self.precedence();
                if a.precedence() < prec {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", self.operator_name())?;
                // binary operators associate to the left
                if b.precedence() <= prec {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Cond(..) | Loop(..) | Loop2(..) | Compr(..) => {
                write!(f, "{}(", self.operator_name())?;
                for (i, c) in self.children().into_iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl std::str::FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}

// ---------------------------------------------------------------------------
// Concrete syntax
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    BadChar(char),
    #[error("unexpected {found}, expected {expected}")]
    Unexpected { found: String, expected: String },
    #[error("operator {op} takes {expected} arguments, got {found}")]
    Arity { op: String, expected: usize, found: usize },
    #[error("numeral {0} is too large")]
    Numeral(String),
    #[error("expected `LHS = RHS`")]
    MissingEquation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Num(String),
    Ident(String),
    /// `loop:v0` and friends; the tag is informational only.
    Tagged(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Ident(s) | Tok::Tagged(s) => write!(f, "`{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexed {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(text: &str, line: usize) -> Result<Lexed, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => toks.push((Tok::Plus, line, col)),
            '-' | '−' => toks.push((Tok::Minus, line, col)),
            '*' | '×' => toks.push((Tok::Star, line, col)),
            '(' => toks.push((Tok::LParen, line, col)),
            ')' => toks.push((Tok::RParen, line, col)),
            ',' => toks.push((Tok::Comma, line, col)),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                toks.push((Tok::Num(chars[start..i].iter().collect()), line, col));
                continue;
            }
            c if c.is_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if i < chars.len() && chars[i] == ':' {
                    i += 1;
                    while i < chars.len() && chars[i].is_alphanumeric() {
                        i += 1;
                    }
                    toks.push((Tok::Tagged(word), line, col));
                } else {
                    toks.push((Tok::Ident(word), line, col));
                }
                continue;
            }
            other => {
                return Err(ParseError {
                    line,
                    col,
                    kind: ParseErrorKind::BadChar(other),
                })
            }
        }
        i += 1;
    }
    toks.push((Tok::Eof, line, chars.len() + 1));
    Ok(Lexed { toks })
}

struct Parser<'a> {
    toks: &'a [(Tok, usize, usize)],
    pos: usize,
}

fn operator_arity(name: &str) -> Option<usize> {
    match name {
        "cond" | "loop" => Some(3),
        "loop2" => Some(5),
        "compr" => Some(2),
        _ => None,
    }
}

fn build_operator(name: &str, mut args: Vec<Program>) -> Program {
    let mut next = || args.remove(0);
    match name {
        "cond" => {
            let (a, b, c) = (next(), next(), next());
            Program::cond(a, b, c)
        }
        "loop" => {
            let (f, a, b) = (next(), next(), next());
            Program::loop1(f, a, b)
        }
        "loop2" => {
            let (f, g, a, b, c) = (next(), next(), next(), next(), next());
            Program::loop2(f, g, a, b, c)
        }
        "compr" => {
            let (f, a) = (next(), next());
            Program::compr(f, a)
        }
        _ => unreachable!("not an operator: {name}"),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        let (_, line, col) = self.toks[self.pos];
        ParseError { line, col, kind }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error(ParseErrorKind::Unexpected {
            found: self.peek().to_string(),
            expected: expected.to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn mul_op(tok: &Tok) -> Option<fn(Program, Program) -> Program> {
        match tok {
            Tok::Star => Some(Program::mul),
            Tok::Ident(s) if s == "div" => Some(Program::div),
            Tok::Ident(s) if s == "mod" => Some(Program::modulo),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Program, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op: fn(Program, Program) -> Program = match self.peek() {
                Tok::Plus => Program::add,
                Tok::Minus => Program::sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = op(lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Program, ParseError> {
        let mut lhs = self.primary()?;
        while let Some(op) = Self::mul_op(self.peek()) {
            self.bump();
            let rhs = self.primary()?;
            lhs = op(lhs, rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Program, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                let value: u64 = n.parse().map_err(|_| self.error(ParseErrorKind::Numeral(n.clone())))?;
                if value > 1 << 40 {
                    return Err(self.error(ParseErrorKind::Numeral(n)));
                }
                self.bump();
                Ok(Program::numeral(value))
            }
            Tok::Ident(name) => match name.as_str() {
                "X" | "x" => {
                    self.bump();
                    Ok(Program::X)
                }
                "Y" | "y" => {
                    self.bump();
                    Ok(Program::Y)
                }
                op if operator_arity(op).is_some() => {
                    self.bump();
                    self.call_args(op)
                }
                _ => Err(self.unexpected("a program")),
            },
            Tok::LParen => self.parenthesized(),
            _ => Err(self.unexpected("a program")),
        }
    }

    /// `op(a, b, ...)` after the operator name has been consumed.
    fn call_args(&mut self, op: &str) -> Result<Program, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        self.check_arity(op, args)
    }

    fn check_arity(&self, op: &str, args: Vec<Program>) -> Result<Program, ParseError> {
        let expected = operator_arity(op).expect("known operator");
        if args.len() != expected {
            return Err(self.error(ParseErrorKind::Arity {
                op: op.to_string(),
                expected,
                found: args.len(),
            }));
        }
        Ok(build_operator(op, args))
    }

    fn parenthesized(&mut self) -> Result<Program, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let binary: Option<fn(Program, Program) -> Program> = match self.peek() {
            Tok::Plus => Some(Program::add),
            Tok::Minus => Some(Program::sub),
            t => Self::mul_op(t),
        };
        if let Some(op) = binary {
            // prefix form `(+ a b)`
            self.bump();
            let a = self.primary()?;
            let b = self.primary()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(op(a, b));
        }
        match self.peek().clone() {
            Tok::Tagged(op) if operator_arity(&op).is_some() => {
                self.bump();
                self.prefix_args(&op)
            }
            Tok::Ident(op) if operator_arity(&op).is_some() && *self.peek_at(1) != Tok::LParen => {
                self.bump();
                self.prefix_args(&op)
            }
            Tok::Ident(op) if operator_arity(&op).is_some() => {
                // `(loop (...) ...)` is prefix, `(loop(...) + 1)` is infix
                let save = self.pos;
                match self.expr().and_then(|e| self.expect(Tok::RParen, "`)`").map(|_| e)) {
                    Ok(e) => Ok(e),
                    Err(infix_err) => {
                        self.pos = save + 1;
                        self.prefix_args(&op).map_err(|_| infix_err)
                    }
                }
            }
            _ => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
        }
    }

    fn prefix_args(&mut self, op: &str) -> Result<Program, ParseError> {
        let mut args = Vec::new();
        while !matches!(self.peek(), Tok::RParen | Tok::Eof) {
            args.push(self.primary()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        self.check_arity(op, args)
    }
}

fn parse_with_line(text: &str, line: usize) -> Result<Program, ParseError> {
    let lexed = lex(text, line)?;
    let mut p = Parser {
        toks: &lexed.toks,
        pos: 0,
    };
    let prog = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok(prog)
}

/// Parses one program in either the infix surface syntax
/// (`loop(X + Y, X, 0)`) or the prefix form (`(loop (+ x y) x 0)`).
/// Numerals above 2 are shorthand for sums and products of 0, 1, 2.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_with_line(text, 1)
}

/// One line of a problem file: `[ID:] LHS = RHS`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemLine {
    pub id: Option<String>,
    pub small: Program,
    pub fast: Program,
}

/// Parses `[ID:] LHS = RHS`; `line` is used for error positions.
pub fn parse_problem_line(text: &str, line: usize) -> Result<ProblemLine, ParseError> {
    let (id, body, offset) = match text.find(':') {
        Some(i)
            if !text[..i].trim().is_empty()
                && text[..i]
                    .trim()
                    .chars()
                    .all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
                && !matches!(text[..i].trim(), "loop" | "loop2" | "compr")
                && !text[..i].contains('(') =>
        {
            (Some(text[..i].trim().to_string()), &text[i + 1..], i + 1)
        }
        _ => (None, text, 0),
    };
    let eq = body.find('=').ok_or(ParseError {
        line,
        col: 1,
        kind: ParseErrorKind::MissingEquation,
    })?;
    let shift = |mut e: ParseError, by: usize| {
        e.col += by;
        e
    };
    let small = parse_with_line(&body[..eq], line).map_err(|e| shift(e, offset))?;
    let fast = parse_with_line(&body[eq + 1..], line).map_err(|e| shift(e, offset + eq + 1))?;
    Ok(ProblemLine { id, small, fast })
}

// ---------------------------------------------------------------------------
// Semantics
// ---------------------------------------------------------------------------

/// Floor division, as in Standard ML. `None` when `b` is zero.
pub fn sml_div(a: &BigInt, b: &BigInt) -> Option<BigInt> {
    if b.is_zero() {
        None
    } else {
        Some(a.div_floor(b))
    }
}

/// Remainder whose sign follows the divisor, as in Standard ML.
pub fn sml_mod(a: &BigInt, b: &BigInt) -> Option<BigInt> {
    if b.is_zero() {
        None
    } else {
        Some(a.mod_floor(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum Abort {
    #[error("value exceeded the magnitude limit")]
    Overflow,
    #[error("step limit exceeded")]
    StepLimit,
    #[error("compr search limit exceeded")]
    ComprLimit,
    #[error("division by zero")]
    DivZero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalLimits {
    max_abs: BigUint,
    max_bits: u64,
    pub max_steps: u64,
    pub max_compr: u64,
}

impl EvalLimits {
    /// Limits with `|value| <= 10^decimal_digits`.
    pub fn new(decimal_digits: u32, max_steps: u64, max_compr: u64) -> Self {
        assert!(
            decimal_digits > 0 && max_steps > 0 && max_compr > 0,
            "evaluation limits must be positive"
        );
        let max_abs = num_traits::pow(BigUint::from(10u32), decimal_digits as usize);
        let max_bits = max_abs.bits();
        EvalLimits {
            max_abs,
            max_bits,
            max_steps,
            max_compr,
        }
    }

    pub fn max_abs(&self) -> &BigUint {
        &self.max_abs
    }
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits::new(4000, 10_000_000, 100_000)
    }
}

/// Evaluation state for one top-level call: shared step and search budgets.
pub struct Evaluator<'l> {
    limits: &'l EvalLimits,
    steps: u64,
    compr_iters: u64,
}

impl<'l> Evaluator<'l> {
    pub fn new(limits: &'l EvalLimits) -> Self {
        Evaluator {
            limits,
            steps: 0,
            compr_iters: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn tick(&mut self) -> Result<(), Abort> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            Err(Abort::StepLimit)
        } else {
            Ok(())
        }
    }

    pub fn check(&self, v: BigInt) -> Result<BigInt, Abort> {
        let bits = v.bits();
        if bits < self.limits.max_bits || v.magnitude() <= &self.limits.max_abs {
            Ok(v)
        } else {
            Err(Abort::Overflow)
        }
    }

    pub fn eval(&mut self, p: &Program, x: &BigInt, y: &BigInt) -> Result<BigInt, Abort> {
        use Program::*;
        self.tick()?;
        match p {
            Zero => Ok(BigInt::zero()),
            One => Ok(BigInt::one()),
            Two => Ok(BigInt::from(2)),
            X => Ok(x.clone()),
            Y => Ok(y.clone()),
            Add(a, b) => {
                let v = self.eval(a, x, y)? + self.eval(b, x, y)?;
                self.check(v)
            }
            Sub(a, b) => {
                let v = self.eval(a, x, y)? - self.eval(b, x, y)?;
                self.check(v)
            }
            Mul(a, b) => {
                let v = self.eval(a, x, y)? * self.eval(b, x, y)?;
                self.check(v)
            }
            Div(a, b) => {
                let a = self.eval(a, x, y)?;
                let b = self.eval(b, x, y)?;
                sml_div(&a, &b).ok_or(Abort::DivZero)
            }
            Mod(a, b) => {
                let a = self.eval(a, x, y)?;
                let b = self.eval(b, x, y)?;
                sml_mod(&a, &b).ok_or(Abort::DivZero)
            }
            Cond(c, a, b) => {
                if self.eval(c, x, y)?.is_positive() {
                    self.eval(b, x, y)
                } else {
                    self.eval(a, x, y)
                }
            }
            Loop(f, a, b) => {
                let bound = self.eval(a, x, y)?;
                let init = self.eval(b, x, y)?;
                self.run_loop(f, &bound, init)
            }
            Loop2(f, g, a, b, c) => {
                let bound = self.eval(a, x, y)?;
                let init_u = self.eval(b, x, y)?;
                let init_t = self.eval(c, x, y)?;
                Ok(self.run_loop2(f, g, &bound, init_u, init_t)?.0)
            }
            Compr(f, a) => {
                let n = self.eval(a, x, y)?;
                self.compr_nth(f, &n)
            }
        }
    }

    /// The `loop` helper: `u(n, init)` with `u(k) = F(u(k-1), k)`.
    pub fn run_loop(&mut self, f: &Program, bound: &BigInt, init: BigInt) -> Result<BigInt, Abort> {
        let mut acc = init;
        let mut i = BigInt::one();
        while &i <= bound {
            acc = self.eval(f, &acc, &i)?;
            i += 1;
        }
        Ok(acc)
    }

    /// The `loop2` helpers: returns `(u(n, b, c), t(n, b, c))`.
    pub fn run_loop2(
        &mut self,
        f: &Program,
        g: &Program,
        bound: &BigInt,
        init_u: BigInt,
        init_t: BigInt,
    ) -> Result<(BigInt, BigInt), Abort> {
        let (mut u, mut t) = (init_u, init_t);
        let mut i = BigInt::one();
        while &i <= bound {
            let nu = self.eval(f, &u, &t)?;
            let nt = self.eval(g, &u, &t)?;
            u = nu;
            t = nt;
            i += 1;
        }
        Ok((u, t))
    }

    /// The `compr` search helper: least `n >= start` with `F(n, 0) <= 0`.
    pub fn compr_search(&mut self, f: &Program, start: BigInt) -> Result<BigInt, Abort> {
        let zero = BigInt::zero();
        let mut n = start;
        loop {
            self.compr_iters += 1;
            if self.compr_iters > self.limits.max_compr {
                return Err(Abort::ComprLimit);
            }
            if !self.eval(f, &n, &zero)?.is_positive() {
                return Ok(n);
            }
            n += 1;
            n = self.check(n)?;
        }
    }

    /// The `compr` index helper `u(n)`.
    pub fn compr_nth(&mut self, f: &Program, n: &BigInt) -> Result<BigInt, Abort> {
        let mut cur = self.compr_search(f, BigInt::zero())?;
        let mut i = BigInt::one();
        while &i <= n {
            cur = self.compr_search(f, cur + 1)?;
            i += 1;
        }
        Ok(cur)
    }
}

/// `f_P(x, y)` with arbitrary-precision integers.
pub fn evaluate(p: &Program, x: &BigInt, y: &BigInt, limits: &EvalLimits) -> Result<BigInt, Abort> {
    Evaluator::new(limits).eval(p, x, y)
}

/// Convenience wrapper for machine-sized arguments.
pub fn evaluate_i64(p: &Program, x: i64, y: i64, limits: &EvalLimits) -> Result<BigInt, Abort> {
    evaluate(p, &BigInt::from(x), &BigInt::from(y), limits)
}

/// The second component of a `loop2` program, i.e. its `s` function.
pub fn evaluate_second(p: &Program, x: &BigInt, y: &BigInt, limits: &EvalLimits) -> Result<BigInt, Abort> {
    let Program::Loop2(f, g, a, b, c) = p else {
        panic!("evaluate_second needs a loop2 program");
    };
    let mut ev = Evaluator::new(limits);
    let bound = ev.eval(a, x, y)?;
    let init_u = ev.eval(b, x, y)?;
    let init_t = ev.eval(c, x, y)?;
    Ok(ev.run_loop2(f, g, &bound, init_u, init_t)?.1)
}

// ---------------------------------------------------------------------------
// Loop registry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoopKind {
    Loop,
    Loop2,
    Compr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopEntry {
    pub index: usize,
    pub program: Program,
}

impl LoopEntry {
    pub fn kind(&self) -> LoopKind {
        match self.program {
            Program::Loop(..) => LoopKind::Loop,
            Program::Loop2(..) => LoopKind::Loop2,
            Program::Compr(..) => LoopKind::Compr,
            _ => unreachable!("registry entries are loop programs"),
        }
    }

    /// `v_k` for loop, `w_k` for loop2, `c_k` for compr.
    pub fn loop_function_name(&self) -> String {
        let letter = match self.kind() {
            LoopKind::Loop => 'v',
            LoopKind::Loop2 => 'w',
            LoopKind::Compr => 'c',
        };
        format!("{letter}{}", self.index)
    }

    /// The update argument(s) that determine the helper functions.
    pub fn updates(&self) -> Vec<&Program> {
        match &self.program {
            Program::Loop(f, _, _) | Program::Compr(f, _) => vec![f],
            Program::Loop2(f, g, ..) => vec![f, g],
            _ => unreachable!(),
        }
    }
}

/// Serial numbering of the loop subprograms of a problem.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoopRegistry {
    entries: Vec<LoopEntry>,
    lookup: HashMap<Program, usize>,
}

impl LoopRegistry {
    pub fn entries(&self) -> &[LoopEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&LoopEntry> {
        self.entries.get(index)
    }

    pub fn index_of(&self, p: &Program) -> Option<usize> {
        self.lookup.get(p).copied()
    }

    pub fn entry_of(&self, p: &Program) -> Option<&LoopEntry> {
        self.index_of(p).map(|i| &self.entries[i])
    }

    fn visit(&mut self, p: &Program) {
        if p.is_loop() {
            if self.lookup.contains_key(p) {
                return;
            }
            let index = self.entries.len();
            self.lookup.insert(p.clone(), index);
            self.entries.push(LoopEntry {
                index,
                program: p.clone(),
            });
        }
        for c in p.children() {
            self.visit(c);
        }
    }
}

/// Numbers loop subprograms outside-in, left to right, small program first.
/// Syntactically equal loops share one index.
pub fn index_loops(small: &Program, fast: &Program) -> LoopRegistry {
    let mut reg = LoopRegistry::default();
    reg.visit(small);
    reg.visit(fast);
    reg
}
