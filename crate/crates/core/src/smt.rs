//! SMT-LIB scripts for problems and induction instances.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::predicate::{Candidate, Formula, Func, Role, Term, Var};
use crate::problem::{Problem, ResolveError};
use crate::program::LoopKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtProblem {
    pub id: String,
    pub preamble: Vec<String>,
    pub declarations: Vec<String>,
    pub definitions: Vec<String>,
    pub trivial: Vec<String>,
    pub instances: Vec<String>,
    pub goal: String,
}

pub fn emit_preamble() -> Vec<String> {
    vec![
        "(define-fun divf ((a Int) (b Int)) Int (ite (< b 0) (div (- a) (- b)) (div a b)))".into(),
        "(define-fun modf ((a Int) (b Int)) Int (ite (< b 0) (- (mod (- a) (- b))) (mod a b)))".into(),
    ]
}

fn binder(vars: &[Var]) -> String {
    vars.iter()
        .map(|v| format!("({} Int)", v.name()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn forall(vars: &[Var], body: &str) -> String {
    if vars.is_empty() {
        body.to_string()
    } else {
        format!("(forall ({}) {body})", binder(vars))
    }
}

fn call(f: Func, vars: &[Var]) -> String {
    Term::App(f, vars.iter().map(|v| Term::Var(*v)).collect()).to_smt()
}

fn declaration(problem: &Problem, f: Func) -> String {
    let n = problem.arity(f).expect("declared function");
    format!("(declare-fun {f} ({}) Int)", vec!["Int"; n].join(" "))
}

/// Definitional equations in declaration order, without `assert`.
pub fn emit_definitions(problem: &Problem) -> Vec<String> {
    problem
        .functions()
        .into_iter()
        .map(|f| {
            let d = problem.definition(f).expect("every symbol is defined");
            let eq = format!("(= {} {})", call(f, &d.params), d.body.to_smt());
            forall(&d.params, &eq)
        })
        .collect()
}

fn helpers(kind: LoopKind) -> &'static [Role] {
    match kind {
        LoopKind::Loop => &[Role::U],
        LoopKind::Loop2 | LoopKind::Compr => &[Role::U, Role::T],
    }
}

fn update_roles(kind: LoopKind) -> &'static [Role] {
    match kind {
        LoopKind::Loop | LoopKind::Compr => &[Role::F],
        LoopKind::Loop2 => &[Role::F, Role::G],
    }
}

fn conj(parts: Vec<String>) -> String {
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

/// Helper equalities for loops whose updates coincide, and congruences
/// `(updates equal) => (helpers equal)` for the other same-kind pairs.
pub fn emit_trivial_axioms(problem: &Problem) -> Vec<String> {
    let entries = problem.registry().entries();
    let mut out = Vec::new();
    for (a, ea) in entries.iter().enumerate() {
        for eb in &entries[a + 1..] {
            let kind = ea.kind();
            if kind != eb.kind() {
                continue;
            }
            let (i, j) = (ea.index, eb.index);
            let helper_eqs = || -> String {
                conj(
                    helpers(kind)
                        .iter()
                        .map(|&r| {
                            let hv = problem.signature(Func::Loop(r, i)).unwrap();
                            forall(
                                &hv,
                                &format!("(= {} {})", call(Func::Loop(r, i), &hv), call(Func::Loop(r, j), &hv)),
                            )
                        })
                        .collect::<Vec<_>>(),
                )
            };
            if ea.updates() == eb.updates() {
                out.push(helper_eqs());
                continue;
            }
            let xy = [Var::X, Var::Y];
            let same_updates = conj(
                update_roles(kind)
                    .iter()
                    .map(|&r| {
                        let lhs = Term::App(
                            Func::Loop(r, i),
                            problem
                                .signature(Func::Loop(r, i))
                                .unwrap()
                                .into_iter()
                                .map(Term::Var)
                                .collect(),
                        );
                        let rhs = Term::App(
                            Func::Loop(r, j),
                            problem
                                .signature(Func::Loop(r, j))
                                .unwrap()
                                .into_iter()
                                .map(Term::Var)
                                .collect(),
                        );
                        forall(&xy, &format!("(= {} {})", lhs.to_smt(), rhs.to_smt()))
                    })
                    .collect(),
            );
            out.push(format!("(=> {same_updates} {})", helper_eqs()));
        }
    }
    out
}

/// Variables quantified in induction instances besides `x`.
fn side_vars(q: &Formula) -> Vec<Var> {
    let mut v = vec![Var::Y];
    if q.contains_var(Var::Z) {
        v.push(Var::Z);
    }
    v
}

/// The induction schema instantiated with `q` (step not guarded by `0 <= x`).
/// `q` must already be resolved against the problem.
pub fn induction_axiom(q: &Formula) -> String {
    let side = side_vars(q);
    let mut all = vec![Var::X];
    all.extend(&side);
    let base = q.subst(&|v| (v == Var::X).then(Term::zero));
    let next = q.subst(&|v| (v == Var::X).then(|| Term::add(Term::x(), Term::one())));
    let qs = q.to_smt();
    format!(
        "(=> (and {} {}) {})",
        forall(&side, &base.to_smt()),
        forall(&all, &format!("(=> {qs} {})", next.to_smt())),
        forall(&all, &format!("(=> (<= 0 x) {qs})")),
    )
}

/// Resolves `q` against the problem's symbols and instantiates the schema.
pub fn emit_induction_instance(problem: &Problem, q: &Formula) -> Result<String, ResolveError> {
    Ok(induction_axiom(&problem.resolve_formula(q)?))
}

pub fn emit_goal() -> String {
    "(exists ((c Int)) (and (>= c 0) (not (= (small c) (fast c)))))".into()
}

pub fn emit_problem(problem: &Problem, with_trivial: bool) -> SmtProblem {
    SmtProblem {
        id: problem.id.clone(),
        preamble: emit_preamble(),
        declarations: problem
            .functions()
            .into_iter()
            .map(|f| declaration(problem, f))
            .collect(),
        definitions: emit_definitions(problem),
        trivial: if with_trivial {
            emit_trivial_axioms(problem)
        } else {
            vec![]
        },
        instances: vec![],
        goal: emit_goal(),
    }
}

/// Short content hash of a candidate's printed form.
pub fn candidate_hash(c: &Candidate) -> String {
    let digest = Sha256::digest(c.to_string().as_bytes());
    hex::encode(&digest[..8])
}

impl SmtProblem {
    pub fn with_candidate(&self, problem: &Problem, c: &Candidate) -> Result<SmtProblem, ResolveError> {
        let mut out = self.clone();
        for q in &c.0 {
            out.instances.push(emit_induction_instance(problem, q)?);
        }
        Ok(out)
    }

    /// Every assertion body in script order.
    pub fn assertions(&self) -> Vec<&str> {
        self.definitions
            .iter()
            .chain(&self.trivial)
            .chain(&self.instances)
            .chain(std::iter::once(&self.goal))
            .map(String::as_str)
            .collect()
    }

    /// Full script. `tag` goes into the source header.
    pub fn render(&self, tag: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "(set-info :source |problem {} candidate {tag}|)", self.id);
        s.push_str("(set-logic UFNIA)\n");
        for p in &self.preamble {
            s.push_str(p);
            s.push('\n');
        }
        for d in &self.declarations {
            s.push_str(d);
            s.push('\n');
        }
        for a in self.assertions() {
            let _ = writeln!(s, "(assert {a})");
        }
        s.push_str("(check-sat)\n");
        s
    }
}

/// Inserts extra assertions before the first `(check-sat)` of an existing
/// script, or appends them if there is none.
pub fn insert_assertions(script: &str, assertions: &[String]) -> String {
    let block: String = assertions.iter().map(|a| format!("(assert {a})\n")).collect();
    match script.find("(check-sat)") {
        Some(pos) => format!("{}{block}{}", &script[..pos], &script[pos..]),
        None => format!("{script}\n{block}"),
    }
}
