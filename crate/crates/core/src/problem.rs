//! A problem: two programs claimed equal for all `x >= 0`, together with the
//! function symbols their loops give rise to.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::predicate::{Candidate, Formula, Func, Role, Term, Var};
use crate::program::{
    index_loops, parse_problem_line, sml_div, sml_mod, Abort, EvalLimits, Evaluator, FreeVars, LoopEntry, LoopKind,
    LoopRegistry, ParseError, Program,
};

#[derive(Debug, Clone)]
pub struct Problem {
    pub id: String,
    pub small: Program,
    pub fast: Program,
    registry: LoopRegistry,
}

/// Equation `func(params) = body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub func: Func,
    pub params: Vec<Var>,
    pub body: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown function {0}")]
    Unknown(String),
    #[error("{func} expects {expected} arguments, got {got}")]
    Arity { func: String, expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("line {line}: missing problem id")]
    MissingId { line: usize },
    #[error("line {line}: duplicate problem id {id}")]
    Duplicate { line: usize, id: String },
}

fn params_of(fv: FreeVars) -> Vec<Var> {
    let mut v = Vec::new();
    if fv.x {
        v.push(Var::X);
    }
    if fv.y {
        v.push(Var::Y);
    }
    v
}

fn apply(func: Func, params: &[Var], x: &Term, y: &Term) -> Term {
    Term::App(
        func,
        params
            .iter()
            .map(|v| match v {
                Var::X => x.clone(),
                _ => y.clone(),
            })
            .collect(),
    )
}

fn pred(t: Term) -> Term {
    Term::sub(t, Term::one())
}

impl Problem {
    pub fn new(id: impl Into<String>, small: Program, fast: Program) -> Self {
        let registry = index_loops(&small, &fast);
        Problem {
            id: id.into(),
            small,
            fast,
            registry,
        }
    }

    pub fn registry(&self) -> &LoopRegistry {
        &self.registry
    }

    /// The argument program behind an argument function symbol.
    fn component(&self, role: Role, k: usize) -> Option<&Program> {
        let entry = self.registry.get(k)?;
        match (&entry.program, role) {
            (Program::Loop(f, a, b), _) => match role {
                Role::F => Some(f),
                Role::G => Some(a),
                Role::H => Some(b),
                _ => None,
            },
            (Program::Loop2(f, g, a, b, c), _) => match role {
                Role::F => Some(f),
                Role::G => Some(g),
                Role::H => Some(a),
                Role::I => Some(b),
                Role::J => Some(c),
                _ => None,
            },
            (Program::Compr(f, a), _) => match role {
                Role::F => Some(f),
                Role::G => Some(a),
                _ => None,
            },
            _ => None,
        }
    }

    /// Roles declared for a loop entry, in declaration order.
    pub fn roles(kind: LoopKind) -> &'static [Role] {
        match kind {
            LoopKind::Loop => &[Role::F, Role::G, Role::H, Role::U, Role::V],
            LoopKind::Loop2 => &[
                Role::F,
                Role::G,
                Role::H,
                Role::I,
                Role::J,
                Role::U,
                Role::T,
                Role::W,
                Role::S,
            ],
            LoopKind::Compr => &[Role::F, Role::G, Role::T, Role::U, Role::C],
        }
    }

    /// Parameters of a function symbol, or `None` if the problem lacks it.
    pub fn signature(&self, func: Func) -> Option<Vec<Var>> {
        match func {
            Func::Small | Func::Fast => Some(vec![Var::X]),
            Func::Loop(role, k) => {
                let entry = self.registry.get(k)?;
                let kind = entry.kind();
                if !Self::roles(kind).contains(&role) {
                    return None;
                }
                Some(match (kind, role) {
                    (_, Role::V | Role::W | Role::S | Role::C) => params_of(entry.program.free_vars()),
                    (LoopKind::Loop, Role::U) => vec![Var::X, Var::Y],
                    (LoopKind::Loop2, Role::U | Role::T) => vec![Var::X, Var::Y, Var::Z],
                    (LoopKind::Compr, Role::U | Role::T) => vec![Var::X],
                    _ => params_of(self.component(role, k)?.free_vars()),
                })
            }
        }
    }

    pub fn arity(&self, func: Func) -> Option<usize> {
        self.signature(func).map(|s| s.len())
    }

    /// All function symbols: per loop entry in index order, then `small`, `fast`.
    pub fn functions(&self) -> Vec<Func> {
        let mut out = Vec::new();
        for e in self.registry.entries() {
            for &r in Self::roles(e.kind()) {
                out.push(Func::Loop(r, e.index));
            }
        }
        out.push(Func::Small);
        out.push(Func::Fast);
        out
    }

    fn loop_function(entry: &LoopEntry) -> Func {
        let role = match entry.kind() {
            LoopKind::Loop => Role::V,
            LoopKind::Loop2 => Role::W,
            LoopKind::Compr => Role::C,
        };
        Func::Loop(role, entry.index)
    }

    /// Translates a subprogram of this problem with `X := x`, `Y := y`.
    /// Panics on loops that are not registered.
    pub fn translate(&self, p: &Program, x: &Term, y: &Term) -> Term {
        let tr = |q: &Program| self.translate(q, x, y);
        match p {
            Program::Zero => Term::zero(),
            Program::One => Term::one(),
            Program::Two => Term::two(),
            Program::X => x.clone(),
            Program::Y => y.clone(),
            Program::Add(a, b) => Term::add(tr(a), tr(b)),
            Program::Sub(a, b) => Term::sub(tr(a), tr(b)),
            Program::Mul(a, b) => Term::mul(tr(a), tr(b)),
            Program::Div(a, b) => Term::div(tr(a), tr(b)),
            Program::Mod(a, b) => Term::modulo(tr(a), tr(b)),
            Program::Cond(a, b, c) => Term::ite(tr(a), tr(b), tr(c)),
            Program::Loop(..) | Program::Loop2(..) | Program::Compr(..) => {
                let entry = self.registry.entry_of(p).expect("loop subprogram not in registry");
                let func = Self::loop_function(entry);
                apply(func, &params_of(p.free_vars()), x, y)
            }
        }
    }

    fn call(&self, role: Role, k: usize, x: Term, y: Term) -> Term {
        let func = Func::Loop(role, k);
        let params = self.signature(func).expect("role exists");
        apply(func, &params, &x, &y)
    }

    /// Defining equation of a function symbol.
    pub fn definition(&self, func: Func) -> Option<Definition> {
        let params = self.signature(func)?;
        let (x, y, z) = (Term::x(), Term::y(), Term::z());
        let body = match func {
            Func::Small => self.translate(&self.small, &x, &Term::zero()),
            Func::Fast => self.translate(&self.fast, &x, &Term::zero()),
            Func::Loop(role, k) => {
                let entry = self.registry.get(k)?;
                let u = |a: Term, b: Term, c: Term| Term::App(Func::Loop(Role::U, k), vec![a, b, c]);
                let t = |a: Term, b: Term, c: Term| Term::App(Func::Loop(Role::T, k), vec![a, b, c]);
                let arg = |r: Role| self.call(r, k, x.clone(), y.clone());
                match (entry.kind(), role) {
                    (_, Role::F | Role::G | Role::H | Role::I | Role::J) => {
                        self.translate(self.component(role, k)?, &x, &y)
                    }
                    (LoopKind::Loop, Role::U) => {
                        let prev = Term::App(Func::Loop(Role::U, k), vec![pred(x.clone()), y.clone()]);
                        Term::ite(x.clone(), y.clone(), self.call(Role::F, k, prev, x.clone()))
                    }
                    (LoopKind::Loop, Role::V) => Term::App(Func::Loop(Role::U, k), vec![arg(Role::G), arg(Role::H)]),
                    (LoopKind::Loop2, Role::U | Role::T) => {
                        let pu = u(pred(x.clone()), y.clone(), z.clone());
                        let pt = t(pred(x.clone()), y.clone(), z.clone());
                        let (init, upd) = if role == Role::U {
                            (y.clone(), Role::F)
                        } else {
                            (z.clone(), Role::G)
                        };
                        Term::ite(x.clone(), init, self.call(upd, k, pu, pt))
                    }
                    (LoopKind::Loop2, Role::W) => u(arg(Role::H), arg(Role::I), arg(Role::J)),
                    (LoopKind::Loop2, Role::S) => t(arg(Role::H), arg(Role::I), arg(Role::J)),
                    (LoopKind::Compr, Role::T) => {
                        let test = self.call(Role::F, k, x.clone(), Term::zero());
                        let next = Term::App(Func::Loop(Role::T, k), vec![Term::add(x.clone(), Term::one())]);
                        Term::ite(test, x.clone(), next)
                    }
                    (LoopKind::Compr, Role::U) => {
                        let tk = |a: Term| Term::App(Func::Loop(Role::T, k), vec![a]);
                        let prev = Term::App(Func::Loop(Role::U, k), vec![pred(x.clone())]);
                        Term::ite(x.clone(), tk(Term::zero()), tk(Term::add(prev, Term::one())))
                    }
                    (LoopKind::Compr, Role::C) => Term::App(Func::Loop(Role::U, k), vec![arg(Role::G)]),
                    _ => return None,
                }
            }
        };
        Some(Definition { func, params, body })
    }

    /// Maps a name as written (possibly an alias) to the problem's symbol.
    /// `v{k}` with three arguments on a `loop2` entry denotes its second
    /// helper `t{k}`; `v{k}`/`w{k}` are interchangeable for the loop function.
    pub fn resolve(&self, func: Func, arity: usize) -> Result<Func, ResolveError> {
        let candidates: Vec<Func> = match func {
            Func::Loop(role, k) => {
                let kind = self.registry.get(k).map(|e| e.kind());
                match (kind, role) {
                    (Some(LoopKind::Loop2), Role::V) => {
                        vec![Func::Loop(Role::T, k), Func::Loop(Role::W, k)]
                    }
                    (Some(LoopKind::Loop), Role::W) => vec![Func::Loop(Role::V, k)],
                    _ => vec![func],
                }
            }
            _ => vec![func],
        };
        let mut first_arity = None;
        for c in &candidates {
            if let Some(n) = self.arity(*c) {
                if n == arity {
                    return Ok(*c);
                }
                first_arity.get_or_insert(n);
            }
        }
        match first_arity {
            None => Err(ResolveError::Unknown(func.to_string())),
            Some(expected) => Err(ResolveError::Arity {
                func: func.to_string(),
                expected,
                got: arity,
            }),
        }
    }

    fn resolve_term(&self, t: &Term) -> Result<Term, ResolveError> {
        Ok(match t {
            Term::App(f, args) => {
                let g = self.resolve(*f, args.len())?;
                Term::App(g, args.iter().map(|a| self.resolve_term(a)).collect::<Result<_, _>>()?)
            }
            Term::Const(_) | Term::Var(_) => t.clone(),
            Term::Add(a, b) => Term::add(self.resolve_term(a)?, self.resolve_term(b)?),
            Term::Sub(a, b) => Term::sub(self.resolve_term(a)?, self.resolve_term(b)?),
            Term::Mul(a, b) => Term::mul(self.resolve_term(a)?, self.resolve_term(b)?),
            Term::Div(a, b) => Term::div(self.resolve_term(a)?, self.resolve_term(b)?),
            Term::Mod(a, b) => Term::modulo(self.resolve_term(a)?, self.resolve_term(b)?),
            Term::Ite(c, a, b) => Term::ite(self.resolve_term(c)?, self.resolve_term(a)?, self.resolve_term(b)?),
        })
    }

    /// Checks every application against the problem's signatures,
    /// rewriting aliases.
    pub fn resolve_formula(&self, f: &Formula) -> Result<Formula, ResolveError> {
        let mut out = f.clone();
        for t in out.terms_mut() {
            *t = self.resolve_term(t)?;
        }
        Ok(out)
    }

    pub fn resolve_candidate(&self, c: &Candidate) -> Result<Candidate, ResolveError> {
        c.0.iter()
            .map(|f| self.resolve_formula(f))
            .collect::<Result<_, _>>()
            .map(Candidate)
    }

    /// One `[id:] small = fast` line.
    pub fn parse_line(text: &str, line: usize) -> Result<Problem, ProblemFileError> {
        let pl = parse_problem_line(text, line).map_err(|source| ProblemFileError::Parse { line, source })?;
        let id = pl.id.ok_or(ProblemFileError::MissingId { line })?;
        Ok(Problem::new(id, pl.small, pl.fast))
    }

    /// `id: small = fast` per line; blank lines and `#` comments skipped.
    pub fn parse_file(text: &str) -> Result<Vec<Problem>, ProblemFileError> {
        let mut seen = BTreeMap::new();
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let p = Problem::parse_line(s, line)?;
            if seen.insert(p.id.clone(), line).is_some() {
                return Err(ProblemFileError::Duplicate { line, id: p.id });
            }
            out.push(p);
        }
        Ok(out)
    }

    /// `id: small = fast`
    pub fn to_line(&self) -> String {
        format!("{}: {} = {}", self.id, self.small, self.fast)
    }
}

/// Evaluates terms over a problem's symbols with their intended meaning.
pub struct Semantics<'p> {
    problem: &'p Problem,
    limits: EvalLimits,
}

type Val = Result<BigInt, Abort>;

impl<'p> Semantics<'p> {
    pub fn new(problem: &'p Problem, limits: EvalLimits) -> Self {
        Semantics { problem, limits }
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn eval_term(&self, t: &Term, x: &BigInt, y: &BigInt, z: &BigInt) -> Val {
        let mut ev = Evaluator::new(&self.limits);
        self.term(&mut ev, t, [x, y, z])
    }

    fn term(&self, ev: &mut Evaluator, t: &Term, env: [&BigInt; 3]) -> Val {
        let bin = |a: &Term, b: &Term, ev: &mut Evaluator| -> Result<(BigInt, BigInt), Abort> {
            Ok((self.term(ev, a, env)?, self.term(ev, b, env)?))
        };
        let v = match t {
            Term::Const(c) => BigInt::from(*c),
            Term::Var(Var::X) => env[0].clone(),
            Term::Var(Var::Y) => env[1].clone(),
            Term::Var(Var::Z) => env[2].clone(),
            Term::Add(a, b) => {
                let (a, b) = bin(a, b, ev)?;
                a + b
            }
            Term::Sub(a, b) => {
                let (a, b) = bin(a, b, ev)?;
                a - b
            }
            Term::Mul(a, b) => {
                let (a, b) = bin(a, b, ev)?;
                a * b
            }
            Term::Div(a, b) => {
                let (a, b) = bin(a, b, ev)?;
                sml_div(&a, &b).ok_or(Abort::DivZero)?
            }
            Term::Mod(a, b) => {
                let (a, b) = bin(a, b, ev)?;
                sml_mod(&a, &b).ok_or(Abort::DivZero)?
            }
            Term::Ite(c, a, b) => {
                if self.term(ev, c, env)? <= BigInt::zero() {
                    return self.term(ev, a, env);
                } else {
                    return self.term(ev, b, env);
                }
            }
            Term::App(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.term(ev, a, env))
                    .collect::<Result<Vec<_>, _>>()?;
                return self.apply(ev, *f, &vals);
            }
        };
        ev.check(v)
    }

    /// Value of a function symbol at concrete arguments. Arguments must
    /// match the symbol's signature.
    pub fn apply_func(&self, f: Func, args: &[BigInt]) -> Val {
        let mut ev = Evaluator::new(&self.limits);
        self.apply(&mut ev, f, args)
    }

    fn apply(&self, ev: &mut Evaluator, f: Func, args: &[BigInt]) -> Val {
        let zero = BigInt::zero();
        let p = self.problem;
        let params = p.signature(f).expect("function not in problem");
        assert_eq!(params.len(), args.len(), "arity mismatch for {f}");
        let mut env = [&zero, &zero, &zero];
        for (v, a) in params.iter().zip(args) {
            env[match v {
                Var::X => 0,
                Var::Y => 1,
                Var::Z => 2,
            }] = a;
        }
        let (x, y) = (env[0], env[1]);
        match f {
            Func::Small => ev.eval(&p.small, x, &zero),
            Func::Fast => ev.eval(&p.fast, x, &zero),
            Func::Loop(role, k) => {
                let entry = p.registry.get(k).expect("checked by signature");
                match (&entry.program, role) {
                    (_, Role::V | Role::W | Role::C) => ev.eval(&entry.program, x, y),
                    (Program::Loop2(fu, gu, a, b, c), Role::S) => {
                        let n = ev.eval(a, x, y)?;
                        let iu = ev.eval(b, x, y)?;
                        let it = ev.eval(c, x, y)?;
                        Ok(ev.run_loop2(fu, gu, &n, iu, it)?.1)
                    }
                    (Program::Loop(fu, ..), Role::U) => ev.run_loop(fu, &args[0], args[1].clone()),
                    (Program::Loop2(fu, gu, ..), Role::U | Role::T) => {
                        let (u, t) = ev.run_loop2(fu, gu, &args[0], args[1].clone(), args[2].clone())?;
                        Ok(if role == Role::U { u } else { t })
                    }
                    (Program::Compr(fu, _), Role::T) => ev.compr_search(fu, args[0].clone()),
                    (Program::Compr(fu, _), Role::U) => ev.compr_nth(fu, &args[0]),
                    _ => ev.eval(p.component(role, k).expect("checked by signature"), x, y),
                }
            }
        }
    }

    /// Truth of a formula at one point; aborted evaluation counts as false.
    pub fn holds(&self, f: &Formula, x: &BigInt, y: &BigInt) -> bool {
        self.holds_z(f, x, y, &BigInt::zero())
    }

    pub fn holds_z(&self, f: &Formula, x: &BigInt, y: &BigInt, z: &BigInt) -> bool {
        self.truth(f, x, y, z).unwrap_or(false)
    }

    fn truth(&self, f: &Formula, x: &BigInt, y: &BigInt, z: &BigInt) -> Result<bool, Abort> {
        Ok(match f {
            Formula::Lit(l) => {
                let a = self.eval_term(&l.lhs, x, y, z)?;
                let b = self.eval_term(&l.rhs, x, y, z)?;
                let r = match l.rel {
                    crate::predicate::Rel::Eq => a == b,
                    crate::predicate::Rel::Le => a <= b,
                };
                r != l.negated
            }
            Formula::And(a, b) => self.truth(a, x, y, z)? && self.truth(b, x, y, z)?,
            Formula::Implies(a, b) => !self.truth(a, x, y, z)? || self.truth(b, x, y, z)?,
        })
    }
}
