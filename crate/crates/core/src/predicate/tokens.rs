//! Token sequences exchanged with the sequence-to-sequence predictor.
//!
//! Upper-case letters are operators, lower-case letters `a`..`t` name loop
//! entries by index, and a digit after a letter selects a helper or
//! argument function of that entry. A letter without digit is the loop
//! function itself.

use thiserror::Error;

use super::{Candidate, Formula, Func, Literal, Rel, Role, Term, Var};
use crate::problem::Problem;
use crate::program::{LoopKind, Program};

pub const MAX_LOOPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("problem has more than {MAX_LOOPS} loops")]
    TooManyLoops,
    #[error("function {0} has no token")]
    Unencodable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("empty token sequence")]
    Empty,
    #[error("unknown token '{0}'")]
    UnknownToken(String),
    #[error("no function for '{0}' in this problem")]
    UnknownFunction(String),
    #[error("token sequence ends inside a formula")]
    Truncated,
    #[error("unexpected token '{0}' at the start of a formula")]
    Unexpected(String),
}

fn slots(kind: LoopKind) -> &'static [Role] {
    match kind {
        LoopKind::Loop => &[Role::F, Role::G, Role::H, Role::U],
        LoopKind::Loop2 => &[Role::F, Role::G, Role::H, Role::I, Role::J, Role::U, Role::T, Role::S],
        LoopKind::Compr => &[Role::F, Role::G, Role::T, Role::U],
    }
}

fn loop_letter(k: usize) -> Result<char, EncodeError> {
    if k < MAX_LOOPS {
        Ok((b'a' + k as u8) as char)
    } else {
        Err(EncodeError::TooManyLoops)
    }
}

fn encode_program(p: &Program, problem: &Problem, out: &mut Vec<String>) -> Result<(), EncodeError> {
    let op = match p {
        Program::Zero => "A",
        Program::One => "B",
        Program::Two => "C",
        Program::X => "K",
        Program::Y => "L",
        Program::Add(..) => "D",
        Program::Sub(..) => "E",
        Program::Mul(..) => "F",
        Program::Div(..) => "G",
        Program::Mod(..) => "H",
        Program::Cond(..) => "I",
        Program::Loop(..) => "J",
        Program::Loop2(..) => "M",
        Program::Compr(..) => "N",
    };
    out.push(op.to_string());
    if p.is_loop() {
        let k = problem.registry().index_of(p).expect("registered loop");
        out.push(loop_letter(k)?.to_string());
    }
    for c in p.children() {
        encode_program(c, problem, out)?;
    }
    Ok(())
}

pub fn encode_problem(problem: &Problem) -> Result<Vec<String>, EncodeError> {
    let mut out = Vec::new();
    encode_program(&problem.small, problem, &mut out)?;
    out.push("=".to_string());
    encode_program(&problem.fast, problem, &mut out)?;
    Ok(out)
}

fn encode_term(t: &Term, problem: &Problem, out: &mut Vec<String>) -> Result<(), EncodeError> {
    let op = match t {
        Term::Const(0) => "A".to_string(),
        Term::Const(1) => "B".to_string(),
        Term::Const(_) => "C".to_string(),
        Term::Var(Var::X) => "K".to_string(),
        Term::Var(Var::Y) => "L".to_string(),
        Term::Var(Var::Z) => "T".to_string(),
        Term::Add(..) => "D".to_string(),
        Term::Sub(..) => "E".to_string(),
        Term::Mul(..) => "F".to_string(),
        Term::Div(..) => "G".to_string(),
        Term::Mod(..) => "H".to_string(),
        Term::Ite(..) => "I".to_string(),
        Term::App(Func::Small, _) => "U".to_string(),
        Term::App(Func::Fast, _) => "V".to_string(),
        Term::App(f @ Func::Loop(role, k), _) => {
            let entry = problem
                .registry()
                .get(*k)
                .ok_or_else(|| EncodeError::Unencodable(f.to_string()))?;
            let letter = loop_letter(*k)?;
            if role.is_loop_function() && *role != Role::S {
                out.push(letter.to_string());
            } else {
                let slot = slots(entry.kind())
                    .iter()
                    .position(|r| r == role)
                    .ok_or_else(|| EncodeError::Unencodable(f.to_string()))?;
                out.push(letter.to_string());
                out.push(slot.to_string());
            }
            for c in t.children() {
                encode_term(c, problem, out)?;
            }
            return Ok(());
        }
    };
    out.push(op);
    for c in t.children() {
        encode_term(c, problem, out)?;
    }
    Ok(())
}

pub fn encode_formula(f: &Formula, problem: &Problem) -> Result<Vec<String>, EncodeError> {
    let mut out = Vec::new();
    encode_formula_into(f, problem, &mut out)?;
    Ok(out)
}

fn encode_formula_into(f: &Formula, problem: &Problem, out: &mut Vec<String>) -> Result<(), EncodeError> {
    match f {
        Formula::Lit(l) => {
            if l.negated {
                out.push("Q".into());
            }
            out.push(if l.rel == Rel::Eq { "O" } else { "P" }.into());
            encode_term(&l.lhs, problem, out)?;
            encode_term(&l.rhs, problem, out)
        }
        Formula::And(a, b) | Formula::Implies(a, b) => {
            out.push(if matches!(f, Formula::And(..)) { "R" } else { "S" }.into());
            encode_formula_into(a, problem, out)?;
            encode_formula_into(b, problem, out)
        }
    }
}

/// `problem-tokens > solution-tokens`, space separated.
pub fn encode_example(problem: &Problem, solution: &Candidate) -> Result<String, EncodeError> {
    let mut toks = encode_problem(problem)?;
    toks.push(">".into());
    for f in &solution.0 {
        encode_formula_into(f, problem, &mut toks)?;
    }
    Ok(toks.join(" "))
}

struct Decoder<'a> {
    toks: &'a [&'a str],
    pos: usize,
    problem: &'a Problem,
}

impl<'a> Decoder<'a> {
    fn next(&mut self) -> Result<&'a str, DecodeError> {
        let t = self.toks.get(self.pos).ok_or(DecodeError::Truncated)?;
        self.pos += 1;
        Ok(t)
    }

    fn args(&mut self, n: usize) -> Result<Vec<Term>, DecodeError> {
        (0..n).map(|_| self.term()).collect()
    }

    fn term(&mut self) -> Result<Term, DecodeError> {
        let tok = self.next()?;
        let bin = |d: &mut Self, ctor: fn(Term, Term) -> Term| -> Result<Term, DecodeError> {
            let a = d.term()?;
            Ok(ctor(a, d.term()?))
        };
        match tok {
            "A" => Ok(Term::zero()),
            "B" => Ok(Term::one()),
            "C" => Ok(Term::two()),
            "K" => Ok(Term::x()),
            "L" => Ok(Term::y()),
            "T" => Ok(Term::z()),
            "D" => bin(self, Term::add),
            "E" => bin(self, Term::sub),
            "F" => bin(self, Term::mul),
            "G" => bin(self, Term::div),
            "H" => bin(self, Term::modulo),
            "I" => {
                let c = self.term()?;
                let a = self.term()?;
                Ok(Term::ite(c, a, self.term()?))
            }
            "U" => Ok(Term::App(Func::Small, self.args(1)?)),
            "V" => Ok(Term::App(Func::Fast, self.args(1)?)),
            t if t.len() == 1 && matches!(t.as_bytes()[0], b'a'..=b't') => {
                let k = (t.as_bytes()[0] - b'a') as usize;
                let entry = self
                    .problem
                    .registry()
                    .get(k)
                    .ok_or_else(|| DecodeError::UnknownFunction(t.to_string()))?;
                let slot = self
                    .toks
                    .get(self.pos)
                    .filter(|s| s.len() == 1 && s.as_bytes()[0].is_ascii_digit());
                let role = match slot {
                    Some(s) => {
                        self.pos += 1;
                        let i = (s.as_bytes()[0] - b'0') as usize;
                        *slots(entry.kind())
                            .get(i)
                            .ok_or_else(|| DecodeError::UnknownFunction(format!("{t}{s}")))?
                    }
                    None => match entry.kind() {
                        LoopKind::Loop => Role::V,
                        LoopKind::Loop2 => Role::W,
                        LoopKind::Compr => Role::C,
                    },
                };
                let func = Func::Loop(role, k);
                let n = self.problem.arity(func).expect("role valid for kind");
                Ok(Term::App(func, self.args(n)?))
            }
            t if is_known_token(t) => Err(DecodeError::Unexpected(t.to_string())),
            t => Err(DecodeError::UnknownToken(t.to_string())),
        }
    }

    fn literal(&mut self, rel: Rel, negated: bool) -> Result<Formula, DecodeError> {
        let lhs = self.term()?;
        let rhs = self.term()?;
        Ok(Formula::Lit(Literal { rel, negated, lhs, rhs }))
    }

    fn formula(&mut self) -> Result<Formula, DecodeError> {
        match self.next()? {
            "O" => self.literal(Rel::Eq, false),
            "P" => self.literal(Rel::Le, false),
            "Q" => match self.next()? {
                "O" => self.literal(Rel::Eq, true),
                "P" => self.literal(Rel::Le, true),
                t if is_known_token(t) => Err(DecodeError::Unexpected(t.to_string())),
                t => Err(DecodeError::UnknownToken(t.to_string())),
            },
            "R" => {
                let a = self.formula()?;
                Ok(Formula::and(a, self.formula()?))
            }
            "S" => {
                let a = self.formula()?;
                Ok(Formula::implies(a, self.formula()?))
            }
            t if is_known_token(t) => Err(DecodeError::Unexpected(t.to_string())),
            t => Err(DecodeError::UnknownToken(t.to_string())),
        }
    }
}

fn is_known_token(t: &str) -> bool {
    t.len() == 1 && {
        let c = t.as_bytes()[0];
        matches!(c, b'A'..=b'V' | b'a'..=b't' | b'0'..=b'9' | b'=' | b'>')
    }
}

/// Decodes a predictor output into a candidate. Formulas follow each other
/// without separators. A sequence cut off after at least one complete
/// formula keeps the complete prefix; unknown tokens are always an error.
pub fn decode_tokens(tokens: &[&str], problem: &Problem) -> Result<Candidate, DecodeError> {
    if tokens.is_empty() {
        return Err(DecodeError::Empty);
    }
    if let Some(bad) = tokens.iter().find(|t| !is_known_token(t)) {
        return Err(DecodeError::UnknownToken(bad.to_string()));
    }
    let mut d = Decoder {
        toks: tokens,
        pos: 0,
        problem,
    };
    let mut preds = Vec::new();
    while d.pos < tokens.len() {
        match d.formula() {
            Ok(f) => preds.push(f),
            Err(DecodeError::Truncated | DecodeError::Unexpected(_)) if !preds.is_empty() => break,
            Err(e) => return Err(e),
        }
    }
    Ok(Candidate(preds))
}

/// Shifts every loop letter by `offset` on both sides of a training line.
/// Returns `None` if a letter leaves `a`..`t`.
pub fn shift_indices(line: &str, offset: i32) -> Option<String> {
    let mut out = Vec::new();
    for tok in line.split_whitespace() {
        let b = tok.as_bytes();
        if b.len() == 1 && matches!(b[0], b'a'..=b't') {
            let k = (b[0] - b'a') as i32 + offset;
            if !(0..MAX_LOOPS as i32).contains(&k) {
                return None;
            }
            out.push(((b'a' + k as u8) as char).to_string());
        } else {
            out.push(tok.to_string());
        }
    }
    Some(out.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::parse_candidate;
    use crate::program::parse_program;

    fn problem(small: &str, fast: &str) -> Problem {
        Problem::new("P", parse_program(small).unwrap(), parse_program(fast).unwrap())
    }

    #[test]
    fn gauss_sum_example_line() {
        let p = problem("loop(X + Y, X, 0)", "(X * X + X) div 2");
        let sol = parse_candidate("(= (+ (* x x) x) (* 2 (v0 x)))").unwrap();
        assert_eq!(
            encode_example(&p, &sol).unwrap(),
            "J a D K L K A = G D F K K K C > O D F K K K F C a K"
        );
    }

    #[test]
    fn helper_slots_round_trip() {
        let p = problem(
            "1 + (((2 * (X + X)) + loop((2 * (X + X)) + X, X, 1)) + X)",
            "(1 + loop2(X * Y, Y, X div 2, loop(1 + (2 + 2), X mod 2, 1), loop(X * X, 1, 1 + (2 + 2)))) + ((2 * (X + X)) + X)",
        );
        let c = parse_candidate(
            "(/\\ (/\\ (<= 0 x) (= (w1 (+ 1 x)) (u0 (+ 1 x) h0))) (==> (<= 0 x) (/\\ (= (w1 x) (u0 x 1)) (/\\ (= j1 (s1 (+ 1 x))) (= (s1 x) (s1 (+ 1 x))))))) | (<= (+ x 0) (f0 (u2 1 1))) | (~ (= (t1 x y z) (small (fast x))))",
        )
        .unwrap();
        let toks: Vec<String> = c.0.iter().flat_map(|f| encode_formula(f, &p).unwrap()).collect();
        let refs: Vec<&str> = toks.iter().map(String::as_str).collect();
        assert!(refs.contains(&"7"), "s slot used");
        assert_eq!(decode_tokens(&refs, &p).unwrap(), c);
    }

    #[test]
    fn truncated_tail_keeps_complete_prefix() {
        let p = problem("loop(X + Y, X, 0)", "(X * X + X) div 2");
        let line = "O a K K R O K";
        let toks: Vec<&str> = line.split(' ').collect();
        let c = decode_tokens(&toks, &p).unwrap();
        assert_eq!(c.to_string(), "(= (v0 x) x)");
        assert_eq!(decode_tokens(&["O", "a"], &p), Err(DecodeError::Truncated));
        assert_eq!(
            decode_tokens(&["O", "K", "Z"], &p),
            Err(DecodeError::UnknownToken("Z".into()))
        );
        assert_eq!(
            decode_tokens(&["O", "b", "K"], &p),
            Err(DecodeError::UnknownFunction("b".into()))
        );
        assert_eq!(decode_tokens(&[], &p), Err(DecodeError::Empty));
        assert!(matches!(decode_tokens(&["K"], &p), Err(DecodeError::Unexpected(_))));
    }

    #[test]
    fn shifting_letters() {
        assert_eq!(
            shift_indices("J a K = b > O a K", 1).as_deref(),
            Some("J b K = c > O b K")
        );
        assert_eq!(shift_indices("O a 3 K", -1), None);
        assert_eq!(shift_indices("O t K", 1), None);
    }
}
