use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_bigint::BigInt;

use induct_core::baselines::{load_benchmark, run_comparison, Heuristic, ProverColumn};
use induct_core::driver::{ingest, init_run, iterate, replay, Mode, RunConfig, RunDir};
use induct_core::gen::{enumerate_terms, fingerprint, initial_candidates, GenConfig};
use induct_core::predicate::{
    decode_tokens, encode_example, expand_definitions, shift_indices, Candidate, Formula, Func, Role, Term,
};
use induct_core::problem::{Problem, Semantics};
use induct_core::program::{evaluate_i64, EvalLimits, Program};
use induct_core::prover::{
    check_candidate, minimize, run_script, MinimizeMode, Solution, SolverConfig, SpeedMetric, Verdict,
};
use induct_core::smt::emit_problem;

/// Criteria expected to fail, with the reason.
const KNOWN_UNATTAINABLE: &[(&str, &str)] = &[
    (
        "interpreter-oracle",
        "the A2278 pair checked here starts its loop at 1, so small(0) = 1 while fast(0) = 0",
    ),
    (
        "smt-fidelity",
        "z3 finds no model for the recursive loop definition, so the ground instance is never sat",
    ),
];

const KNOWN_PROBLEMS: &str = include_str!("../../../fixtures/known_problems.txt");
const BENCHMARK: &str = include_str!("../../../fixtures/benchmark.txt");
const INIT_SUBSET: &str = include_str!("../../../fixtures/init_subset.txt");

const BASELINE_TIMEOUT: Duration = Duration::from_secs(2);
const INIT_TIMEOUT: Duration = Duration::from_millis(100);
const REPLAY_BUDGET: Duration = Duration::from_secs(2);
const INIT_SEED: u64 = 0;
const SAMPLES: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: false,
        detail: detail.into(),
    }
}

fn fixture(id: &str) -> Problem {
    Problem::parse_file(KNOWN_PROBLEMS)
        .unwrap()
        .into_iter()
        .find(|p| p.id == id)
        .unwrap_or_else(|| panic!("fixture {id}"))
}

fn solver(timeout: Duration) -> Option<SolverConfig> {
    let mut cfg = SolverConfig::from_env();
    cfg.timeout = timeout;
    cfg.speed = SpeedMetric::Off;
    cfg.available().then_some(cfg)
}

fn pow(b: i128, e: i64) -> i128 {
    b.pow(e as u32)
}

fn interpreter_oracle() -> Outcome {
    let start = Instant::now();
    let cases: [(&str, &str, fn(i64) -> i128); 6] = [
        ("A217", "loop(X + Y, X, 0) = (X * X + X) div 2", |x| (x as i128) * (x as i128 + 1) / 2),
        (
            "A108411",
            "loop(X + X + X, X div 2, 1) = loop2(X * Y, Y, X div 2, 1, 1 + 2)",
            |x| pow(3, x / 2),
        ),
        (
            "A1026",
            "loop(loop(X * X, 2, 2) * X + X, X, 1) = loop2(X * Y, Y, X, 1, 1 + 2 * (2 * (2 + 2)))",
            |x| pow(17, x),
        ),
        (
            "A2278",
            "loop(2 * (1 + 2 * 2) * X + 2 * 2, X, 1) = 2 * (loop2(X * Y, Y, X, 2, 2 * (1 + 2 * 2)) div (1 + 2 * 2 * 2))",
            |x| 4 * (pow(10, x) - 1) / 9,
        ),
        (
            "A105281",
            "loop(2 * (1 + 2) * X + 2 * (1 + 2), X, 0) = 2 * (loop2(X * Y, Y, X, 1 + 2, 2 * (1 + 2)) div (1 + 2 * 2))",
            |x| 6 * (pow(6, x) - 1) / 5,
        ),
        (
            "A198766",
            "loop((1 + 2 * 2) * (2 + X), X, 1) + 2 = loop2(X * Y, Y, X, 1 + 2 * (1 + 2), 1 + 2 * 2) div 2",
            |x| (7 * pow(5, x) - 1) / 2,
        ),
    ];
    let limits = EvalLimits::default();
    let mut bad = Vec::new();
    for (id, line, oracle) in cases {
        let p = Problem::parse_line(&format!("{id}: {line}"), 1).unwrap();
        for x in 0..=20 {
            let s = evaluate_i64(&p.small, x, 0, &limits);
            let f = evaluate_i64(&p.fast, x, 0, &limits);
            let want = Ok(BigInt::from(oracle(x)));
            if s != want || f != want {
                bad.push(format!(
                    "{id} at x={x}: small {s:?}, fast {f:?}, expected {}",
                    oracle(x)
                ));
                break;
            }
        }
    }
    let p = Problem::parse_line("A217: loop(X + Y, X, 0) = (X * X + X) div 2", 1).unwrap();
    let first: Vec<BigInt> = (0..6).map(|x| evaluate_i64(&p.small, x, 0, &limits).unwrap()).collect();
    if first != [0, 1, 3, 6, 10, 15].map(BigInt::from) {
        bad.push(format!("A217 prefix {first:?}"));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(5) {
        bad.push(format!("took {elapsed:?}"));
    }
    if bad.is_empty() {
        pass(format!("6 pairs agree with closed forms on 0..=20 in {elapsed:.2?}"))
    } else {
        fail(bad.join("; "))
    }
}

const A217_LISTING: &str = "
(forall ((x Int) (y Int)) (= (f x y) (+ x y)))
(forall ((x Int)) (= (g x) x))
(= h 0)
(forall ((x Int) (y Int))
  (= (u x y) (ite (<= x 0) y (f (u (- x 1) y) x))))
(forall ((x Int)) (= (v x) (u (g x) h)))
(forall ((x Int)) (= (small x) (v x)))
(forall ((x Int)) (= (fast x) (div (+ (* x x) x) 2)))
(exists ((c Int))
  (and (>= c 0) (not (= (small c) (fast c)))))
";

fn normalize(s: &str) -> String {
    s.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(|t| match t {
            "f" | "g" | "h" | "u" | "v" => format!("{t}0"),
            "div" => "divf".into(),
            t => t.into(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits a listing into top-level s-expressions.
fn top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        if depth == 0 && c != '(' {
            continue;
        }
        cur.push(c);
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    out.push(std::mem::take(&mut cur));
                }
            }
            _ => {}
        }
    }
    out
}

fn smt_fidelity() -> Outcome {
    let start = Instant::now();
    let p = fixture("A217");
    let smt = emit_problem(&p, false);
    let mut got: Vec<String> = smt.assertions().iter().map(|a| normalize(a)).collect();
    let mut want: Vec<String> = top_level(A217_LISTING).iter().map(|a| normalize(a)).collect();
    got.sort();
    want.sort();
    if got != want {
        return fail(format!("assertions differ:\n  got  {got:?}\n  want {want:?}"));
    }
    let Some(cfg) = solver(Duration::from_secs(5)) else {
        return fail("no solver available");
    };
    let full = emit_problem(&p, true);
    let mut ground = full.clone();
    ground.goal = "(= (small 3) (fast 3))".into();
    let sat = run_script(&ground.render("ground"), &cfg);
    let sol: Candidate = "(/\\ (<= 0 x) (= (+ (* x x) x) (* 2 (v0 x))))".parse().unwrap();
    let unsat = check_candidate(&p, &full, &sol, &cfg);
    let elapsed = start.elapsed();
    if sat.verdict != Verdict::Sat || unsat.verdict != Verdict::Proved || elapsed >= Duration::from_secs(10) {
        return fail(format!(
            "ground instance {:?}, with solution {:?}, {elapsed:.2?}",
            sat.verdict, unsat.verdict
        ));
    }
    pass(format!(
        "8 assertions match; sat on ground instance, unsat with solution; {elapsed:.2?}"
    ))
}

fn published_solution_replay() -> Outcome {
    let Some(cfg) = solver(REPLAY_BUDGET) else {
        return fail("no solver available");
    };
    let solutions: Vec<(String, Candidate)> = include_str!("../../../fixtures/known_solutions.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (id, c) = l.split_once('\t').unwrap();
            (id.to_string(), c.parse().unwrap())
        })
        .collect();
    let mut notes = Vec::new();
    for id in ["A2411", "A59826", "A1026", "A205646"] {
        let p = fixture(id);
        let base = emit_problem(&p, true);
        let c = &solutions.iter().find(|(i, _)| i == id).unwrap().1;
        let r = check_candidate(&p, &base, c, &cfg);
        if !r.proved() {
            return fail(format!("{id}: {:?} in {:?}", r.verdict, r.elapsed));
        }
        let m = minimize(
            &p,
            &base,
            &Solution::new(id, c.clone(), None),
            MinimizeMode::Shortest,
            &cfg,
        );
        let min = m.solution.candidate;
        if !m.reproved || !check_candidate(&p, &base, &min, &cfg).proved() {
            return fail(format!("{id}: minimized candidate does not prove"));
        }
        for i in 0..min.len() {
            let rest = min.without(i);
            if check_candidate(&p, &base, &rest, &cfg).proved() {
                return fail(format!("{id}: predicate {i} of {min} is removable"));
            }
        }
        notes.push(format!(
            "{id} {}->{} in {} ms",
            c.len(),
            min.len(),
            r.elapsed.as_millis()
        ));
    }
    pass(notes.join(", "))
}

fn p1_generalization() -> Outcome {
    let Some(cfg) = solver(REPLAY_BUDGET) else {
        return fail("no solver available");
    };
    let p1: Candidate = "(/\\ (= (s1 x) (s1 1)) (= (v0 (+ 1 x)) (+ (+ (w1 x) (v0 x)) (w1 x))))"
        .parse()
        .unwrap();
    let mut notes = Vec::new();
    for id in ["A198766", "A2278", "A105281"] {
        let p = fixture(id);
        let r = check_candidate(&p, &emit_problem(&p, true), &p1, &cfg);
        if !r.proved() {
            return fail(format!("{id}: {:?}", r.verdict));
        }
        notes.push(format!("{id} {} ms", r.elapsed.as_millis()));
    }
    pass(notes.join(", "))
}

fn fingerprint_suite() -> Outcome {
    let start = Instant::now();
    let p = fixture("A108411");
    let fp = |t: &Term| fingerprint(t, &p, 0);
    let x = Term::x();
    let v = |t: Term| Term::app(Func::Loop(Role::V, 0), vec![t]);
    let w = |t: Term| Term::app(Func::Loop(Role::W, 1), vec![t]);
    let checks = [
        ("x = x+0", fp(&x) == fp(&Term::add(x.clone(), Term::zero()))),
        (
            "x = x+1-1",
            fp(&x) == fp(&Term::sub(Term::add(x.clone(), Term::one()), Term::one())),
        ),
        (
            "v(x)+0 = v(x)*1",
            fp(&Term::add(v(x.clone()), Term::zero())) == fp(&Term::mul(v(x.clone()), Term::one())),
        ),
        ("v(x) != w(x)", fp(&v(x.clone())) != fp(&w(x.clone()))),
    ];
    if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
        return fail(format!("{name} violated"));
    }
    let mut sizes = Vec::new();
    let slow = ["A198766", "A2278", "A105281"];
    for q in Problem::parse_file(KNOWN_PROBLEMS)
        .unwrap()
        .into_iter()
        .filter(|q| !slow.contains(&q.id.as_str()))
    {
        let pool = enumerate_terms(&q, 1024, 0);
        let distinct: HashSet<_> = pool.terms.iter().map(|t| &t.fingerprint).collect();
        if distinct.len() != pool.terms.len() {
            return fail(format!(
                "{}: {} terms, {} fingerprints",
                q.id,
                pool.terms.len(),
                distinct.len()
            ));
        }
        sizes.push(pool.terms.len());
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        return fail(format!("took {elapsed:.2?}"));
    }
    pass(format!(
        "equivalences hold; {} pools of up to {} terms without duplicates in {elapsed:.2?}",
        sizes.len(),
        sizes.iter().max().unwrap()
    ))
}

fn init_pipeline() -> Outcome {
    let Some(solver_cfg) = solver(INIT_TIMEOUT) else {
        return fail("no solver available");
    };
    let gen = GenConfig {
        seed: INIT_SEED,
        ..GenConfig::reduced()
    };
    if gen.term_cap != 256 || gen.literals_per_class * 4 != 200 || gen.predicates != 800 || gen.candidates != 200 {
        return fail("reduced scale differs from 256/200/800/200");
    }
    let problems = Problem::parse_file(INIT_SUBSET).unwrap();
    if problems.len() != 20 {
        return fail(format!("subset has {} problems", problems.len()));
    }
    let limits = EvalLimits::new(300, 20_000, 5_000);
    let mut predicates = 0;
    for p in &problems {
        let a = initial_candidates(p, &gen);
        let b = initial_candidates(p, &gen);
        if a.predicates != b.predicates || a.candidates != b.candidates {
            return fail(format!("{}: generation is not deterministic", p.id));
        }
        let sem = Semantics::new(p, limits.clone());
        let false_somewhere =
            |f: &Formula| (0..=9i64).any(|x| (-5..=9i64).any(|y| !sem.holds(f, &BigInt::from(x), &BigInt::from(y))));
        if let Some(f) = a.predicates.iter().find(|f| false_somewhere(f)) {
            return fail(format!("{}: {f} is false on the grid", p.id));
        }
        predicates += a.predicates.len();
    }
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("subset.txt");
    std::fs::write(&file, INIT_SUBSET).unwrap();
    let dir = RunDir::new(tmp.path().join("run"));
    ingest(&dir, &[file]).unwrap();
    let cfg = RunConfig {
        mode: Mode::Whole,
        short_circuit: true,
        seed: INIT_SEED,
        solver: solver_cfg,
        gen,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let r = match init_run(&dir, &cfg, &[]) {
        Ok(r) => r,
        Err(e) => return fail(format!("init failed: {e}")),
    };
    let solved: Vec<String> = dir.load_db().unwrap().solved().into_iter().collect();
    let detail = format!(
        "{predicates} predicates true on all 150 points; {} of 20 solved in {:.0?} ({})",
        r.cumulative_solved,
        start.elapsed(),
        solved.join(" ")
    );
    if r.cumulative_solved >= 1 {
        pass(detail)
    } else {
        fail(detail)
    }
}

/// Prepends `d` loops so that every loop index of `p` moves up by `d`.
fn with_dummy_loops(p: &Problem, d: usize) -> Problem {
    let mut small = p.small.clone();
    for k in 0..d {
        small = Program::add(
            Program::loop1(Program::X, Program::numeral(k as u64 + 1), Program::Zero),
            small,
        );
    }
    Problem::new(p.id.clone(), small, p.fast.clone())
}

fn solution_part(line: &str) -> Vec<&str> {
    let (_, sol) = line.split_once(" > ").unwrap_or(("", line));
    sol.split(' ').collect()
}

fn tokenizer() -> Outcome {
    let p = fixture("A217");
    let sol: Candidate = "(= (+ (* x x) x) (* 2 (v0 x)))".parse().unwrap();
    let line = encode_example(&p, &sol).unwrap();
    if line != "J a D K L K A = G D F K K K C > O D F K K K F C a K" {
        return fail(format!("A217 line is {line}"));
    }
    let gen = GenConfig {
        seed: 7,
        ..GenConfig::reduced()
    };
    let mut samples: Vec<(Problem, Candidate)> = Vec::new();
    for p in Problem::parse_file(KNOWN_PROBLEMS).unwrap() {
        for c in initial_candidates(&p, &gen).candidates {
            samples.push((p.clone(), c));
        }
        if samples.len() >= SAMPLES {
            break;
        }
    }
    samples.truncate(SAMPLES);
    if samples.len() < SAMPLES {
        return fail(format!("only {} generated samples", samples.len()));
    }
    let mut shifted = 0;
    let mut expanded = 0;
    for (i, (p, c)) in samples.iter().enumerate() {
        let line = match encode_example(p, c) {
            Ok(l) => l,
            Err(e) => return fail(format!("{}: cannot encode {c}: {e:?}", p.id)),
        };
        if decode_tokens(&solution_part(&line), p).as_ref() != Ok(c) {
            return fail(format!("{}: round trip of {c} failed", p.id));
        }
        let d = 1 + i % 3;
        if let Some(s) = shift_indices(&line, d as i32) {
            let q = with_dummy_loops(p, d);
            if q.registry().len() != p.registry().len() + d {
                return fail(format!("{}: dummy registry has {} loops", p.id, q.registry().len()));
            }
            let toks = solution_part(&s);
            match decode_tokens(&toks, &q) {
                Ok(back) if solution_part(&encode_example(&q, &back).unwrap()) == toks => shifted += 1,
                other => return fail(format!("{}: shifted line {s} decodes to {other:?}", p.id)),
            }
        }
        let mut rng = rand_rng(i as u64);
        let e = expand_definitions(c, p, 1 + i % 2, &mut rng);
        match encode_example(p, &e) {
            Ok(l) if decode_tokens(&solution_part(&l), p).as_ref() == Ok(&e) => expanded += 1,
            Ok(_) => return fail(format!("{}: expansion {e} does not round trip", p.id)),
            Err(err) => return fail(format!("{}: expansion {e} does not encode: {err:?}", p.id)),
        }
    }
    pass(format!(
        "A217 line exact; {SAMPLES} round trips; {shifted} shifted and {expanded} expanded lines grammar-valid"
    ))
}

fn rand_rng(seed: u64) -> impl rand::Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn baselines_direction() -> Outcome {
    let Some(cfg) = solver(BASELINE_TIMEOUT) else {
        return fail("no solver available");
    };
    let own = Problem::parse_file(BENCHMARK).unwrap();
    let bench = load_benchmark(None, &own).unwrap();
    let hs = [Heuristic::Previous(0), Heuristic::Previous(1), Heuristic::Previous(4)];
    let start = Instant::now();
    let table = run_comparison(&bench, &hs, &[ProverColumn::new("z3", cfg)]);
    let n: Vec<usize> = hs.iter().map(|h| table.count("z3", *h).unwrap_or(0)).collect();
    let detail = format!(
        "{} problems at {:?}: n=0 {}, n=1 {}, n=4 {} in {:.0?}",
        bench.len(),
        BASELINE_TIMEOUT,
        n[0],
        n[1],
        n[2],
        start.elapsed()
    );
    if bench.len() == 100 && n[0] < n[1] && n[1] <= n[2] {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn loop_smoke() -> Outcome {
    let Some(mut solver_cfg) = solver(Duration::from_secs(1)) else {
        return fail("no solver available");
    };
    solver_cfg.workers = 1;
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("problems.txt");
    let text: String = ["A217", "A2411", "A198766", "A2278", "A105281"]
        .iter()
        .map(|id| fixture(id).to_line() + "\n")
        .collect();
    std::fs::write(&file, text).unwrap();
    let dir = RunDir::new(tmp.path().join("run"));
    ingest(&dir, &[file]).unwrap();
    let cfg = RunConfig {
        mode: Mode::Whole,
        short_circuit: true,
        index_shift: 0.0,
        predictors: vec![format!(
            "{} mock-predictor --train {{train}} --problems {{problems}} --out {{out}} --shift 1",
            env!("CARGO_BIN_EXE_induct")
        )],
        solver: solver_cfg,
        gen: GenConfig {
            term_cap: 64,
            literals_per_class: 5,
            predicates: 20,
            candidates: 5,
            ..GenConfig::default()
        },
        ..RunConfig::default()
    };
    let inject: Vec<(String, Candidate)> = [
        ("A2411", "(/\\ (<= 0 x) (= (+ (* x x) x) (* 2 (v0 x))))"),
        (
            "A198766",
            "(/\\ (= (s1 x) (s1 1)) (= (v0 (+ 1 x)) (+ (+ (w1 x) (v0 x)) (w1 x))))",
        ),
    ]
    .iter()
    .map(|(id, c)| (id.to_string(), c.parse().unwrap()))
    .collect();
    let mut solved = vec![match init_run(&dir, &cfg, &inject) {
        Ok(r) => r.cumulative_solved,
        Err(e) => return fail(format!("init: {e}")),
    }];
    for _ in 0..5 {
        match iterate(&dir, &cfg) {
            Ok(r) => solved.push(r.cumulative_solved),
            Err(e) => return fail(format!("iteration: {e}")),
        }
    }
    if solved.windows(2).any(|w| w[1] < w[0]) {
        return fail(format!("cumulative solved decreased: {solved:?}"));
    }
    let on_disk = std::fs::read_to_string(dir.db()).unwrap();
    match replay(&dir, &cfg) {
        Ok(db) if db.to_jsonl() == on_disk => pass(format!("cumulative solved {solved:?}; replay byte-identical")),
        Ok(_) => fail("replayed database differs"),
        Err(e) => fail(format!("replay: {e}")),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("interpreter-oracle", interpreter_oracle),
        ("smt-fidelity", smt_fidelity),
        ("published-solution-replay", published_solution_replay),
        ("p1-generalization", p1_generalization),
        ("fingerprint-suite", fingerprint_suite),
        ("init-pipeline", init_pipeline),
        ("tokenizer", tokenizer),
        ("baselines-direction", baselines_direction),
        ("loop-smoke", loop_smoke),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let o = run();
        let known = KNOWN_UNATTAINABLE.iter().find(|(n, _)| *n == name);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("     known: {why}"),
            (false, None) => unexpected.push(name),
            (true, Some(_)) => println!("     listed as unattainable but passed"),
            (true, None) => {}
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
