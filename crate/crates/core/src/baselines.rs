//! Hand-written induction instances over `small`/`fast` and the harness
//! that compares them across provers on a benchmark.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::predicate::{Formula, Func, Term};
use crate::problem::Problem;
use crate::prover::{run_script, SolverConfig, Verdict};
use crate::smt::{emit_problem, induction_axiom, insert_assertions};

pub const MAX_PREVIOUS: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Heuristic {
    /// Induction over `n` previous terms; `n = 0` adds nothing.
    Previous(u8),
    Strong,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("number of previous terms must be in 1..=9, got {0}")]
    OutOfRange(u8),
    #[error("unknown heuristic `{0}` (expected n=0..9 or strong)")]
    Unknown(String),
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Heuristic::Previous(n) => write!(f, "n={n}"),
            Heuristic::Strong => f.write_str("strong"),
        }
    }
}

impl FromStr for Heuristic {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "strong" {
            return Ok(Heuristic::Strong);
        }
        let digits = s.strip_prefix("n=").unwrap_or(s);
        match digits.parse::<u8>() {
            Ok(n) if n <= MAX_PREVIOUS => Ok(Heuristic::Previous(n)),
            _ => Err(BaselineError::Unknown(s.to_string())),
        }
    }
}

fn shifted(k: u8) -> Term {
    if k == 0 {
        Term::x()
    } else {
        Term::add(Term::x(), Term::numeral(k.into()))
    }
}

/// `0 <= x ==> small(x) = fast(x) /\ ... /\ small(x+n-1) = fast(x+n-1)`.
pub fn manual_predicate(n: u8) -> Result<Formula, BaselineError> {
    if !(1..=MAX_PREVIOUS).contains(&n) {
        return Err(BaselineError::OutOfRange(n));
    }
    let eq = |k: u8| {
        Formula::eq(
            Term::app(Func::Small, vec![shifted(k)]),
            Term::app(Func::Fast, vec![shifted(k)]),
        )
    };
    let body = (1..n).fold(eq(0), |acc, k| Formula::and(acc, eq(k)));
    Ok(Formula::implies(Formula::le(Term::zero(), Term::x()), body))
}

/// Strong induction: `0 <= x ==> forall z. 0 <= z <= x ==> small(z) = fast(z)`.
pub fn strong_instance() -> String {
    let q =
        |x: &str| format!("(=> (<= 0 {x}) (forall ((z Int)) (=> (and (<= 0 z) (<= z {x})) (= (small z) (fast z)))))");
    format!(
        "(=> (and {} (forall ((x Int)) (=> {} {}))) (forall ((x Int)) (=> (<= 0 x) {})))",
        q("0"),
        q("x"),
        q("(+ x 1)"),
        q("x")
    )
}

/// The assertion added by a heuristic, if any.
pub fn heuristic_instance(h: Heuristic) -> Option<String> {
    match h {
        Heuristic::Previous(0) => None,
        Heuristic::Previous(n) => Some(induction_axiom(&manual_predicate(n).expect("range checked"))),
        Heuristic::Strong => Some(strong_instance()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Own,
    External,
}

/// A benchmark problem as a complete script without induction instances.
#[derive(Debug, Clone)]
pub struct BenchProblem {
    pub id: String,
    pub script: String,
    pub source: Source,
}

impl BenchProblem {
    pub fn own(p: &Problem) -> Self {
        BenchProblem {
            id: p.id.clone(),
            script: emit_problem(p, false).render("baseline"),
            source: Source::Own,
        }
    }

    pub fn with_heuristic(&self, h: Heuristic) -> String {
        match heuristic_instance(h) {
            None => self.script.clone(),
            Some(i) => insert_assertions(&self.script, &[i]),
        }
    }
}

/// Reads every `*.smt2` file of `dir` (id = file stem) and merges in our own
/// problems; on an id collision our emission wins. Sorted by id.
pub fn load_benchmark(dir: Option<&Path>, own: &[Problem]) -> std::io::Result<Vec<BenchProblem>> {
    let mut out: BTreeMap<String, BenchProblem> = BTreeMap::new();
    if let Some(dir) = dir {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("smt2") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let script = std::fs::read_to_string(&path)?;
            if !script.contains("(check-sat)") {
                log::warn!("{}: no (check-sat), skipped", path.display());
                continue;
            }
            out.insert(
                id.to_string(),
                BenchProblem {
                    id: id.to_string(),
                    script,
                    source: Source::External,
                },
            );
        }
    }
    for p in own {
        out.insert(p.id.clone(), BenchProblem::own(p));
    }
    Ok(out.into_values().collect())
}

/// A prover column of the comparison.
#[derive(Debug, Clone)]
pub struct ProverColumn {
    pub name: String,
    pub config: SolverConfig,
}

impl ProverColumn {
    pub fn new(name: impl Into<String>, config: SolverConfig) -> Self {
        ProverColumn {
            name: name.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Comparison {
    pub problems: usize,
    pub heuristics: Vec<Heuristic>,
    pub provers: Vec<String>,
    pub skipped: Vec<String>,
    /// Solved counts keyed by (prover, heuristic).
    pub solved: BTreeMap<(String, Heuristic), usize>,
    /// Verdict per (prover, heuristic, problem id).
    pub verdicts: BTreeMap<(String, Heuristic, String), Verdict>,
}

/// Runs every heuristic on every problem with every available prover.
pub fn run_comparison(problems: &[BenchProblem], heuristics: &[Heuristic], provers: &[ProverColumn]) -> Comparison {
    let mut out = Comparison {
        problems: problems.len(),
        heuristics: heuristics.to_vec(),
        ..Default::default()
    };
    for col in provers {
        if !col.config.available() {
            log::warn!(
                "prover {} ({}) not found, column skipped",
                col.name,
                col.config.program.display()
            );
            out.skipped.push(col.name.clone());
            continue;
        }
        out.provers.push(col.name.clone());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(col.config.workers.max(1))
            .build()
            .expect("thread pool");
        for &h in heuristics {
            use rayon::prelude::*;
            let verdicts: Vec<Verdict> = pool.install(|| {
                problems
                    .par_iter()
                    .map(|p| run_script(&p.with_heuristic(h), &col.config).verdict)
                    .collect()
            });
            let solved = verdicts.iter().filter(|v| **v == Verdict::Proved).count();
            out.solved.insert((col.name.clone(), h), solved);
            for (p, v) in problems.iter().zip(verdicts) {
                out.verdicts.insert((col.name.clone(), h, p.id.clone()), v);
            }
        }
    }
    out
}

impl Comparison {
    pub fn count(&self, prover: &str, h: Heuristic) -> Option<usize> {
        self.solved.get(&(prover.to_string(), h)).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("prover");
        for h in &self.heuristics {
            s.push_str(&format!(",{h}"));
        }
        s.push('\n');
        for p in &self.provers {
            s.push_str(p);
            for &h in &self.heuristics {
                s.push_str(&format!(",{}", self.count(p, h).unwrap_or(0)));
            }
            s.push('\n');
        }
        s
    }

    pub fn render(&self) -> String {
        let mut rows = vec![std::iter::once(format!("solved / {}", self.problems))
            .chain(self.heuristics.iter().map(|h| h.to_string()))
            .collect::<Vec<_>>()];
        for p in &self.provers {
            rows.push(
                std::iter::once(p.clone())
                    .chain(
                        self.heuristics
                            .iter()
                            .map(|&h| self.count(p, h).unwrap_or(0).to_string()),
                    )
                    .collect(),
            );
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for r in &rows {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c == 0 {
                        format!("{v:<w$}", w = widths[c])
                    } else {
                        format!("{v:>w$}", w = widths[c])
                    }
                })
                .collect();
            s.push_str(cells.join("  ").trim_end());
            s.push('\n');
        }
        for name in &self.skipped {
            s.push_str(&format!("({name}: not available)\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::Sexp;
    use crate::program::parse_program;

    #[test]
    fn manual_predicates() {
        assert_eq!(
            manual_predicate(1).unwrap().to_string(),
            "(==> (<= 0 x) (= (small x) (fast x)))"
        );
        assert_eq!(
            manual_predicate(2).unwrap().to_string(),
            "(==> (<= 0 x) (/\\ (= (small x) (fast x)) (= (small (+ x 1)) (fast (+ x 1)))))"
        );
        let nine = manual_predicate(9).unwrap().to_smt();
        assert_eq!(nine.matches("(= (small").count(), 9);
        assert!(nine.contains(&format!("(small (+ x {}))", Term::numeral(8).to_smt())));
        assert_eq!(manual_predicate(0), Err(BaselineError::OutOfRange(0)));
        assert_eq!(manual_predicate(10), Err(BaselineError::OutOfRange(10)));
        for n in 1..MAX_PREVIOUS {
            let a = manual_predicate(n).unwrap();
            let b = manual_predicate(n + 1).unwrap();
            let (Formula::Implies(_, a), Formula::Implies(_, b)) = (a, b) else {
                panic!()
            };
            assert!(b.contains_subformula(&a));
        }
        assert!(heuristic_instance(Heuristic::Previous(0)).is_none());
    }

    #[test]
    fn heuristic_names() {
        for s in ["n=0", "n=4", "strong", "9"] {
            let h: Heuristic = s.parse().unwrap();
            assert_eq!(h.to_string().trim_start_matches("n="), s.trim_start_matches("n="));
        }
        assert!("n=10".parse::<Heuristic>().is_err());
        assert!("weak".parse::<Heuristic>().is_err());
    }

    #[test]
    fn strong_instance_is_closed_sexp() {
        let s = strong_instance();
        assert!(matches!(Sexp::parse(&s).unwrap(), Sexp::List(..)));
        assert!(s.contains("(forall ((z Int))"));
    }

    #[test]
    fn benchmark_merge_prefers_own() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("A1.smt2"), "(assert false)\n(check-sat)\n").unwrap();
        std::fs::write(dir.path().join("A9.smt2"), "(assert true)\n(check-sat)\n").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        std::fs::write(dir.path().join("A5.smt2"), "(assert true)\n").unwrap();
        let own = Problem::new("A1", parse_program("X").unwrap(), parse_program("X").unwrap());
        let b = load_benchmark(Some(dir.path()), &[own]).unwrap();
        let ids: Vec<&str> = b.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["A1", "A9"]);
        assert_eq!(b[0].source, Source::Own);
        assert!(b[0].script.contains("(declare-fun small"));
        let with = b[1].with_heuristic(Heuristic::Previous(1));
        assert!(with.find("(assert (=>").unwrap() < with.find("(check-sat)").unwrap());
        assert_eq!(b[1].with_heuristic(Heuristic::Previous(0)), b[1].script);
    }

    #[test]
    fn empty_benchmark_gives_zeros() {
        let c = run_comparison(
            &[],
            &[Heuristic::Previous(0), Heuristic::Previous(1)],
            &[ProverColumn::new("z3", SolverConfig::z3())],
        );
        if c.provers.is_empty() {
            return;
        }
        assert_eq!(c.count("z3", Heuristic::Previous(1)), Some(0));
        assert_eq!(c.to_csv(), "prover,n=0,n=1\nz3,0,0\n");
    }

    #[test]
    fn missing_prover_is_skipped() {
        let mut cfg = SolverConfig::z3();
        cfg.program = "/nonexistent/prover".into();
        let c = run_comparison(&[], &[Heuristic::Strong], &[ProverColumn::new("ghost", cfg)]);
        assert_eq!(c.skipped, ["ghost"]);
        assert!(c.render().contains("(ghost: not available)"));
    }
}
