//! Induction predicates: quantifier-free formulas over `x`, `y` and the
//! function symbols of a problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

mod expand;
mod text;
pub mod tokens;

pub use expand::expand_definitions;
pub use text::{parse_candidate, parse_formula, parse_term, Sexp, TextError};
pub use tokens::{
    decode_tokens, encode_example, encode_formula, encode_problem, shift_indices, DecodeError, EncodeError, MAX_LOOPS,
};

/// Role of a function symbol within its loop's naming bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// `loop` function
    V,
    /// `loop2` function (first component)
    W,
    /// `loop2` second component
    S,
    /// `compr` function
    C,
    F,
    G,
    H,
    I,
    J,
    U,
    T,
}

impl Role {
    pub fn letter(self) -> char {
        match self {
            Role::V => 'v',
            Role::W => 'w',
            Role::S => 's',
            Role::C => 'c',
            Role::F => 'f',
            Role::G => 'g',
            Role::H => 'h',
            Role::I => 'i',
            Role::J => 'j',
            Role::U => 'u',
            Role::T => 't',
        }
    }

    pub fn from_letter(c: char) -> Option<Role> {
        Some(match c {
            'v' => Role::V,
            'w' => Role::W,
            's' => Role::S,
            'c' => Role::C,
            'f' => Role::F,
            'g' => Role::G,
            'h' => Role::H,
            'i' => Role::I,
            'j' => Role::J,
            'u' => Role::U,
            't' => Role::T,
            _ => return None,
        })
    }

    /// Loop functions (`v`, `w`, `s`, `c`) as opposed to argument and
    /// helper functions.
    pub fn is_loop_function(self) -> bool {
        matches!(self, Role::V | Role::W | Role::S | Role::C)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Small,
    Fast,
    Loop(Role, usize),
}

impl Func {
    pub fn loop_index(self) -> Option<usize> {
        match self {
            Func::Loop(_, k) => Some(k),
            _ => None,
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Func::Small => write!(f, "small"),
            Func::Fast => write!(f, "fast"),
            Func::Loop(role, k) => write!(f, "{}{k}", role.letter()),
        }
    }
}

impl FromStr for Func {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "small" => return Ok(Func::Small),
            "fast" => return Ok(Func::Fast),
            _ => {}
        }
        let mut chars = s.chars();
        let role = chars.next().and_then(Role::from_letter).ok_or(())?;
        let digits = chars.as_str();
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(());
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return Err(());
        }
        Ok(Func::Loop(role, digits.parse().map_err(|_| ())?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    /// Extra universally quantified parameter; occurs in some learned
    /// predicates and is quantified like `y` in induction instances.
    Z,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// 0, 1 or 2.
    Const(u8),
    Var(Var),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Mod(Box<Term>, Box<Term>),
    /// `ite(c <= 0, a, b)`
    Ite(Box<Term>, Box<Term>, Box<Term>),
    App(Func, Vec<Term>),
}

impl Term {
    pub fn zero() -> Term {
        Term::Const(0)
    }
    pub fn one() -> Term {
        Term::Const(1)
    }
    pub fn two() -> Term {
        Term::Const(2)
    }
    pub fn x() -> Term {
        Term::Var(Var::X)
    }
    pub fn y() -> Term {
        Term::Var(Var::Y)
    }
    pub fn z() -> Term {
        Term::Var(Var::Z)
    }
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Term, b: Term) -> Term {
        Term::Mul(Box::new(a), Box::new(b))
    }
    pub fn div(a: Term, b: Term) -> Term {
        Term::Div(Box::new(a), Box::new(b))
    }
    pub fn modulo(a: Term, b: Term) -> Term {
        Term::Mod(Box::new(a), Box::new(b))
    }
    pub fn ite(c: Term, a: Term, b: Term) -> Term {
        Term::Ite(Box::new(c), Box::new(a), Box::new(b))
    }
    pub fn app(f: Func, args: Vec<Term>) -> Term {
        Term::App(f, args)
    }

    /// Numerals above 2 are spelled with 0, 1, 2, `+` and `*`.
    pub fn numeral(n: u64) -> Term {
        match n {
            0..=2 => Term::Const(n as u8),
            n if n % 2 == 0 => Term::mul(Term::two(), Term::numeral(n / 2)),
            n => Term::add(Term::one(), Term::numeral(n - 1)),
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Const(_) | Term::Var(_) => vec![],
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) | Term::Mod(a, b) => {
                vec![a, b]
            }
            Term::Ite(c, a, b) => vec![c, a, b],
            Term::App(_, args) => args.iter().collect(),
        }
    }

    pub(crate) fn children_mut(&mut self) -> Vec<&mut Term> {
        match self {
            Term::Const(_) | Term::Var(_) => vec![],
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) | Term::Mod(a, b) => {
                vec![a, b]
            }
            Term::Ite(c, a, b) => vec![c, a, b],
            Term::App(_, args) => args.iter_mut().collect(),
        }
    }

    /// Node count.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Term::size).sum::<usize>()
    }

    pub fn contains_var(&self, v: Var) -> bool {
        match self {
            Term::Var(w) => *w == v,
            _ => self.children().into_iter().any(|c| c.contains_var(v)),
        }
    }

    pub fn visit_apps(&self, out: &mut Vec<(Func, usize)>) {
        if let Term::App(f, args) = self {
            out.push((*f, args.len()));
        }
        for c in self.children() {
            c.visit_apps(out);
        }
    }

    /// Simultaneous substitution of variables.
    pub fn subst(&self, map: &dyn Fn(Var) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => map(*v).unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
            _ => {
                let mut out = self.clone();
                for (dst, src) in out.children_mut().into_iter().zip(self.children()) {
                    *dst = src.subst(map);
                }
                out
            }
        }
    }

    /// SMT-LIB rendering; `divf`/`modf` are the floor-division functions
    /// defined in every problem's preamble.
    pub fn write_smt(&self, out: &mut String) {
        self.write_with(out, true)
    }

    fn write_with(&self, out: &mut String, smt: bool) {
        let _ = smt;
        let head = match self {
            Term::Const(c) => {
                out.push((b'0' + c) as char);
                return;
            }
            Term::Var(v) => {
                out.push_str(v.name());
                return;
            }
            Term::App(f, args) if args.is_empty() => {
                out.push_str(&f.to_string());
                return;
            }
            Term::Ite(c, a, b) => {
                out.push_str("(ite (<= ");
                c.write_with(out, smt);
                out.push_str(" 0) ");
                a.write_with(out, smt);
                out.push(' ');
                b.write_with(out, smt);
                out.push(')');
                return;
            }
            Term::Add(..) => "+".to_string(),
            Term::Sub(..) => "-".to_string(),
            Term::Mul(..) => "*".to_string(),
            Term::Div(..) => "divf".to_string(),
            Term::Mod(..) => "modf".to_string(),
            Term::App(f, _) => f.to_string(),
        };
        out.push('(');
        out.push_str(&head);
        for c in self.children() {
            out.push(' ');
            c.write_with(out, smt);
        }
        out.push(')');
    }

    pub fn to_smt(&self) -> String {
        let mut s = String::new();
        self.write_smt(&mut s);
        s
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_smt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Le,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub rel: Rel,
    pub negated: bool,
    pub lhs: Term,
    pub rhs: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Lit(Literal),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn eq(lhs: Term, rhs: Term) -> Formula {
        Formula::Lit(Literal {
            rel: Rel::Eq,
            negated: false,
            lhs,
            rhs,
        })
    }
    pub fn le(lhs: Term, rhs: Term) -> Formula {
        Formula::Lit(Literal {
            rel: Rel::Le,
            negated: false,
            lhs,
            rhs,
        })
    }
    pub fn ne(lhs: Term, rhs: Term) -> Formula {
        Formula::Lit(Literal {
            rel: Rel::Eq,
            negated: true,
            lhs,
            rhs,
        })
    }
    pub fn not_le(lhs: Term, rhs: Term) -> Formula {
        Formula::Lit(Literal {
            rel: Rel::Le,
            negated: true,
            lhs,
            rhs,
        })
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    /// Node count: relations, negations and connectives each count one.
    pub fn size(&self) -> usize {
        match self {
            Formula::Lit(l) => 1 + usize::from(l.negated) + l.lhs.size() + l.rhs.size(),
            Formula::And(a, b) | Formula::Implies(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Formula::Lit(l) => vec![&l.lhs, &l.rhs],
            Formula::And(a, b) | Formula::Implies(a, b) => {
                let mut v = a.terms();
                v.extend(b.terms());
                v
            }
        }
    }

    pub(crate) fn terms_mut(&mut self) -> Vec<&mut Term> {
        match self {
            Formula::Lit(l) => vec![&mut l.lhs, &mut l.rhs],
            Formula::And(a, b) | Formula::Implies(a, b) => {
                let mut v = a.terms_mut();
                v.extend(b.terms_mut());
                v
            }
        }
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.terms().into_iter().any(|t| t.contains_var(v))
    }

    /// Every function application `(f, arity)` in pre-order.
    pub fn apps(&self) -> Vec<(Func, usize)> {
        let mut out = Vec::new();
        for t in self.terms() {
            t.visit_apps(&mut out);
        }
        out
    }

    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Formula {
        match self {
            Formula::Lit(l) => Formula::Lit(Literal {
                rel: l.rel,
                negated: l.negated,
                lhs: f(&l.lhs),
                rhs: f(&l.rhs),
            }),
            Formula::And(a, b) => Formula::and(a.map_terms(f), b.map_terms(f)),
            Formula::Implies(a, b) => Formula::implies(a.map_terms(f), b.map_terms(f)),
        }
    }

    pub fn subst(&self, map: &dyn Fn(Var) -> Option<Term>) -> Formula {
        self.map_terms(&|t| t.subst(map))
    }

    /// Whether `other` occurs as a sub-formula (or equals `self`).
    pub fn contains_subformula(&self, other: &Formula) -> bool {
        if self == other {
            return true;
        }
        match self {
            Formula::Lit(_) => false,
            Formula::And(a, b) | Formula::Implies(a, b) => a.contains_subformula(other) || b.contains_subformula(other),
        }
    }

    pub fn to_smt(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, true);
        s
    }

    fn write(&self, out: &mut String, smt: bool) {
        match self {
            Formula::Lit(l) => {
                if l.negated {
                    out.push_str(if smt { "(not " } else { "(~ " });
                }
                out.push_str(match l.rel {
                    Rel::Eq => "(= ",
                    Rel::Le => "(<= ",
                });
                l.lhs.write_smt(out);
                out.push(' ');
                l.rhs.write_smt(out);
                out.push(')');
                if l.negated {
                    out.push(')');
                }
            }
            Formula::And(a, b) | Formula::Implies(a, b) => {
                let op = match (self, smt) {
                    (Formula::And(..), true) => "(and ",
                    (Formula::And(..), false) => "(/\\ ",
                    (_, true) => "(=> ",
                    (_, false) => "(==> ",
                };
                out.push_str(op);
                a.write(out, smt);
                out.push(' ');
                b.write(out, smt);
                out.push(')');
            }
        }
    }
}

/// Textual form with `~`, `/\` and `==>`.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(&mut s, false);
        f.write_str(&s)
    }
}

impl FromStr for Formula {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, TextError> {
        parse_formula(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_formula(&s).map_err(serde::de::Error::custom)
    }
}

/// An ordered list of predicates proposed for one problem.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Candidate(pub Vec<Formula>);

impl Candidate {
    pub fn new(preds: Vec<Formula>) -> Self {
        Candidate(preds)
    }

    pub fn predicates(&self) -> &[Formula] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of member sizes.
    pub fn size(&self) -> usize {
        self.0.iter().map(Formula::size).sum()
    }

    pub fn without(&self, i: usize) -> Candidate {
        let mut v = self.0.clone();
        v.remove(i);
        Candidate(v)
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for Candidate {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, TextError> {
        parse_candidate(s)
    }
}

/// Size of a candidate, with ties broken on its printed form.
pub fn size_key(c: &Candidate) -> (usize, String) {
    (c.size(), c.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    /// Independent size oracle: count atoms and list heads of the printed
    /// s-expression, with `ite` contributing one node and its `(<= c 0)`
    /// wrapper contributing none.
    fn sexp_nodes(s: &Sexp) -> usize {
        match s {
            Sexp::Atom(_) => 1,
            Sexp::List(items) => {
                if let Some(Sexp::Atom(h)) = items.first() {
                    if h == "ite" {
                        let Sexp::List(cond) = &items[1] else { unreachable!() };
                        return 1 + sexp_nodes(&cond[1]) + sexp_nodes(&items[2]) + sexp_nodes(&items[3]);
                    }
                }
                items.iter().map(sexp_nodes).sum()
            }
        }
    }

    #[test]
    fn size_counts_nodes() {
        assert_eq!(Term::x().size(), 1);
        let gauss = f("(= (+ (* x x) x) (* 2 (v0 x)))");
        let expected = sexp_nodes(&Sexp::parse("(= (+ (* x x) x) (* 2 (v0 x)))").unwrap());
        assert_eq!(gauss.size(), expected);
        assert_eq!(gauss.size(), 10);
        for s in [
            "(/\\ (= (s1 x) (s1 1)) (= (v0 (+ 1 x)) (+ (+ (w1 x) (v0 x)) (w1 x))))",
            "(~ (<= y (u1 0 h1)))",
            "(<= x (ite (<= 1 0) 0 (f0 (u2 1 1))))",
        ] {
            assert_eq!(f(s).size(), sexp_nodes(&Sexp::parse(s).unwrap()), "{s}");
        }
    }

    #[test]
    fn generalizing_predicate_is_larger_than_one_step_baseline() {
        let p1 = f("(/\\ (= (s1 x) (s1 1)) (= (v0 (+ 1 x)) (+ (+ (w1 x) (v0 x)) (w1 x))))");
        let baseline = f("(==> (<= 0 x) (= (small x) (fast x)))");
        assert!(p1.size() > baseline.size());
    }

    #[test]
    fn function_names_round_trip() {
        for name in ["v0", "w1", "s1", "u12", "h3", "c4", "small", "fast"] {
            let func: Func = name.parse().unwrap();
            assert_eq!(func.to_string(), name);
        }
        assert!("v".parse::<Func>().is_err());
        assert!("x1".parse::<Func>().is_err());
        assert!("v01".parse::<Func>().is_err());
    }

    #[test]
    fn smt_and_text_renderings() {
        let p = f("(==> (<= 0 x) (/\\ (~ (= x y)) (<= (divf x 2) (modf y 2))))");
        assert_eq!(
            p.to_smt(),
            "(=> (<= 0 x) (and (not (= x y)) (<= (divf x 2) (modf y 2))))"
        );
        assert_eq!(
            p.to_string(),
            "(==> (<= 0 x) (/\\ (~ (= x y)) (<= (divf x 2) (modf y 2))))"
        );
    }

    #[test]
    fn substitution_is_simultaneous() {
        let p = f("(= (+ x y) (v0 x))");
        let swapped = p.subst(&|v| match v {
            Var::X => Some(Term::y()),
            Var::Y => Some(Term::x()),
            Var::Z => None,
        });
        assert_eq!(swapped, f("(= (+ y x) (v0 y))"));
    }

    #[test]
    fn candidate_text_round_trip() {
        let c: Candidate = "(= (v0 x) (w1 x)) | (= (s1 x) (v0 1))".parse().unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.to_string().parse::<Candidate>().unwrap(), c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"["(= (v0 x) (w1 x))","(= (s1 x) (v0 1))"]"#);
        assert_eq!(serde_json::from_str::<Candidate>(&json).unwrap(), c);
    }
}
