use std::time::Duration;

use induct_core::predicate::Candidate;
use induct_core::problem::Problem;
use induct_core::program::{evaluate_i64, EvalLimits};
use induct_core::prover::{check_candidate, SolverConfig, Verdict};
use induct_core::smt::emit_problem;

fn problems() -> Vec<Problem> {
    Problem::parse_file(include_str!("../../../fixtures/known_problems.txt")).unwrap()
}

fn solutions() -> Vec<(String, Candidate)> {
    include_str!("../../../fixtures/known_solutions.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (id, c) = l.split_once('\t').unwrap();
            (id.to_string(), c.parse().unwrap())
        })
        .collect()
}

fn z3(ms: u64) -> Option<SolverConfig> {
    let mut cfg = SolverConfig::from_env();
    cfg.timeout = Duration::from_millis(ms);
    if cfg.available() {
        Some(cfg)
    } else {
        eprintln!("solver {} not available, skipping", cfg.program.display());
        None
    }
}

#[test]
fn fixture_pairs_agree_in_the_interpreter() {
    let limits = EvalLimits::default();
    for p in problems()
        .iter()
        .chain(&Problem::parse_file(include_str!("../../../fixtures/benchmark.txt")).unwrap())
    {
        for x in 0..=20 {
            assert_eq!(
                evaluate_i64(&p.small, x, 0, &limits).unwrap(),
                evaluate_i64(&p.fast, x, 0, &limits).unwrap(),
                "{} at {x}",
                p.id
            );
        }
    }
}

#[test]
fn published_solutions_prove() {
    let Some(cfg) = z3(2000) else { return };
    let ps = problems();
    for (id, c) in solutions() {
        let p = ps.iter().find(|p| p.id == id).unwrap();
        let r = check_candidate(p, &emit_problem(p, true), &c, &cfg);
        assert_eq!(r.verdict, Verdict::Proved, "{id}: {}", r.diagnostics);
    }
}

#[test]
fn empty_candidates_do_not_prove() {
    let Some(cfg) = z3(500) else { return };
    for p in problems()
        .iter()
        .filter(|p| ["A2411", "A59826", "A1026"].contains(&p.id.as_str()))
    {
        let r = check_candidate(p, &emit_problem(p, true), &Candidate(vec![]), &cfg);
        assert_ne!(r.verdict, Verdict::Proved, "{}", p.id);
    }
}
