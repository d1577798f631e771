//! The self-learning loop: export training data, call the predictor,
//! assemble candidates, prove, minimize and select, one iteration at a time.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gen::{initial_candidates, true_on_grid, GenConfig};
use crate::predicate::{
    decode_tokens, encode_example, encode_problem, expand_definitions, parse_formula, shift_indices, Candidate,
    Formula, MAX_LOOPS,
};
use crate::problem::{Problem, ProblemFileError};
use crate::prover::{
    minimize_proofs, run_batch, BatchSummary, DbError, MinimizeMode, SolutionDb, SolverConfig, SpeedMetric,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Split,
    Whole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainOn {
    Shortest,
    #[serde(rename = "shortest+fastest")]
    ShortestAndFastest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub train_on: TrainOn,
    /// Probability of shifting the loop letters of a training line.
    pub index_shift: f64,
    /// Adds two definition-expanded variants of every training pair.
    pub expansion: bool,
    pub split_sizes: Vec<usize>,
    pub split_candidates: usize,
    pub whole_candidates: usize,
    /// Drops predicted predicates that are false somewhere on the grid.
    pub semantic_filter: bool,
    /// Shell commands with `{train}`, `{problems}` and `{out}` placeholders.
    pub predictors: Vec<String>,
    pub seed: u64,
    /// Training lines with more solution tokens are dropped.
    pub max_solution_tokens: usize,
    pub with_trivial: bool,
    /// Stop evaluating a problem's candidates after its first proof.
    pub short_circuit: bool,
    pub solver: SolverConfig,
    pub gen: GenConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Split,
            train_on: TrainOn::Shortest,
            index_shift: 0.1,
            expansion: false,
            split_sizes: vec![1, 2, 3, 4, 5, 6, 8, 12],
            split_candidates: 100,
            whole_candidates: 240,
            semantic_filter: false,
            predictors: vec![],
            seed: 0,
            max_solution_tokens: 60,
            with_trivial: true,
            short_circuit: false,
            solver: SolverConfig::z3(),
            gen: GenConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Problems(#[from] ProblemFileError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("predictor `{command}` failed: {status}")]
    Predictor { command: String, status: String },
    #[error("{0}")]
    Replay(String),
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, DriverError> {
    r.map_err(|source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String, DriverError> {
    io(path, std::fs::read_to_string(path))
}

fn write(path: &Path, text: &str) -> Result<(), DriverError> {
    io(path, std::fs::write(path, text))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: &str| Err(DriverError::Config(m.into()));
        if self.split_sizes.is_empty() || self.split_sizes.contains(&0) {
            return bad("split_sizes must be nonempty and positive");
        }
        if self.split_candidates == 0 || self.whole_candidates == 0 {
            return bad("candidates per problem must be positive");
        }
        if !(0.0..=1.0).contains(&self.index_shift) {
            return bad("index_shift must be a probability");
        }
        self.solver.validate().map_err(|e| DriverError::Config(e.to_string()))
    }

    /// `INDUCT_SOLVER` replaces the solver program and `INDUCT_PREDICTOR`
    /// the predictor command list.
    pub fn apply_env(&mut self) {
        if let Ok(s) = std::env::var("INDUCT_SOLVER") {
            if !s.is_empty() {
                self.solver.program = s.into();
            }
        }
        if let Ok(p) = std::env::var("INDUCT_PREDICTOR") {
            if !p.is_empty() {
                self.predictors = vec![p];
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, DriverError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| DriverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Layout of a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn problems(&self) -> PathBuf {
        self.root.join("problems.txt")
    }

    pub fn db(&self) -> PathBuf {
        self.root.join("db.jsonl")
    }

    pub fn iter_dir(&self, n: u32) -> PathBuf {
        self.root.join(format!("iter-{n:03}"))
    }

    pub fn load_config(&self) -> Result<RunConfig, DriverError> {
        let mut cfg = RunConfig::from_toml(&read(&self.config())?)?;
        cfg.apply_env();
        Ok(cfg)
    }

    pub fn load_problems(&self) -> Result<Vec<Problem>, DriverError> {
        Ok(Problem::parse_file(&read(&self.problems())?)?)
    }

    pub fn load_db(&self) -> Result<SolutionDb, DriverError> {
        let p = self.db();
        if p.exists() {
            Ok(SolutionDb::load(&p)?)
        } else {
            Ok(SolutionDb::new())
        }
    }

    /// Iterations that have a directory, in order.
    pub fn iterations(&self) -> Vec<u32> {
        let mut v: Vec<u32> = std::fs::read_dir(&self.root)
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| e.file_name().to_str()?.strip_prefix("iter-")?.parse().ok())
            .collect();
        v.sort_unstable();
        v
    }
}

/// Merges problem files into the run's problem list. Earlier ids win.
pub fn ingest(dir: &RunDir, sources: &[PathBuf]) -> Result<usize, DriverError> {
    io(&dir.root, std::fs::create_dir_all(&dir.root))?;
    let mut problems: Vec<Problem> = if dir.problems().exists() {
        dir.load_problems()?
    } else {
        vec![]
    };
    let mut ids: HashSet<String> = problems.iter().map(|p| p.id.clone()).collect();
    for src in sources {
        for p in Problem::parse_file(&read(src)?)? {
            if ids.insert(p.id.clone()) {
                problems.push(p);
            } else {
                log::info!("{}: duplicate id {} ignored", src.display(), p.id);
            }
        }
    }
    let text: String = problems.iter().map(|p| p.to_line() + "\n").collect();
    write(&dir.problems(), &text)?;
    Ok(problems.len())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct IterationReport {
    pub iteration: u32,
    pub problems: usize,
    pub candidates: usize,
    pub predictions: usize,
    pub valid_predictions: usize,
    pub validity_rate: f64,
    pub proofs: usize,
    pub new_solutions: usize,
    pub new_problems: usize,
    pub cumulative_solved: usize,
    pub verdicts: BTreeMap<String, usize>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

fn rng_for(seed: u64, iteration: u32, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(iteration) << 32));
    r.set_stream(stream);
    r
}

struct Stopwatch(Instant, BTreeMap<String, f64>);

impl Stopwatch {
    fn new() -> Self {
        Stopwatch(Instant::now(), BTreeMap::new())
    }

    fn lap(&mut self, stage: &str) {
        self.1.insert(stage.into(), self.0.elapsed().as_secs_f64());
        self.0 = Instant::now();
    }
}

/// Proves, minimizes and selects. Returns the report fields it fills.
fn evaluate_and_select(
    db: &mut SolutionDb,
    iteration: u32,
    problems: &[Problem],
    cands: &[Vec<Candidate>],
    cfg: &RunConfig,
    sw: &mut Stopwatch,
) -> IterationReport {
    let outcome = run_batch(problems, cands, &cfg.solver, cfg.with_trivial, cfg.short_circuit);
    sw.lap("prove");
    let mut sols = minimize_proofs(
        problems,
        cands,
        &outcome,
        &cfg.solver,
        cfg.with_trivial,
        MinimizeMode::Shortest,
    );
    if cfg.train_on == TrainOn::ShortestAndFastest && cfg.solver.speed != SpeedMetric::Off {
        sols.extend(minimize_proofs(
            problems,
            cands,
            &outcome,
            &cfg.solver,
            cfg.with_trivial,
            MinimizeMode::Fastest,
        ));
    }
    sw.lap("minimize");
    let stats = db.select(iteration, sols);
    sw.lap("select");
    let BatchSummary { pairs, verdicts, .. } = outcome.summary.clone();
    IterationReport {
        iteration,
        problems: problems.len(),
        candidates: pairs,
        proofs: outcome.proofs().len(),
        new_solutions: stats.recorded,
        new_problems: stats.new_problems,
        cumulative_solved: db.len(),
        verdicts: verdicts
            .into_iter()
            .map(|(k, v)| (format!("{k:?}").to_lowercase(), v))
            .collect(),
        ..Default::default()
    }
}

fn write_report(dir: &Path, report: &IterationReport) -> Result<(), DriverError> {
    write(
        &dir.join("report.json"),
        &(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
    )
}

/// Brute-force initial run. `extra` candidates are tried first for their
/// problems (e.g. known solutions to seed the database).
pub fn init_run(dir: &RunDir, cfg: &RunConfig, extra: &[(String, Candidate)]) -> Result<IterationReport, DriverError> {
    cfg.validate()?;
    io(&dir.root, std::fs::create_dir_all(&dir.root))?;
    write(&dir.config(), &cfg.to_toml())?;
    let problems = dir.load_problems()?;
    let mut sw = Stopwatch::new();
    let cands: Vec<Vec<Candidate>> = problems
        .iter()
        .map(|p| {
            let mut v: Vec<Candidate> = extra
                .iter()
                .filter(|(id, _)| *id == p.id)
                .map(|(_, c)| c.clone())
                .collect();
            v.extend(initial_candidates(p, &cfg.gen).candidates);
            v
        })
        .collect();
    sw.lap("generate");
    let mut db = SolutionDb::new();
    let mut report = evaluate_and_select(&mut db, 0, &problems, &cands, cfg, &mut sw);
    report.timings = sw.1;
    let it = dir.iter_dir(0);
    io(&it, std::fs::create_dir_all(&it))?;
    db.save(&it.join("db.jsonl"))?;
    db.save(&dir.db())?;
    write_report(&it, &report)?;
    Ok(report)
}

fn count_solution_tokens(line: &str) -> usize {
    line.split_once(" > ").map_or(0, |(_, s)| s.split_whitespace().count())
}

/// Training lines from the database, in problem order.
pub fn export_training(db: &SolutionDb, problems: &[Problem], cfg: &RunConfig, iteration: u32) -> Vec<String> {
    let mut rng = rng_for(cfg.seed, iteration, 10);
    let by_id: BTreeMap<&str, &Problem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut out = Vec::new();
    for (id, entry) in db.entries() {
        let Some(problem) = by_id.get(id.as_str()) else {
            continue;
        };
        let mut sols = vec![&entry.shortest];
        if cfg.train_on == TrainOn::ShortestAndFastest {
            if let Some(f) = entry
                .fastest
                .as_ref()
                .filter(|f| f.candidate != entry.shortest.candidate)
            {
                sols.push(f);
            }
        }
        let mut pairs: Vec<Candidate> = Vec::new();
        for s in sols {
            match cfg.mode {
                Mode::Split => pairs.extend(s.candidate.0.iter().map(|f| Candidate(vec![f.clone()]))),
                Mode::Whole => pairs.push(s.candidate.clone()),
            }
        }
        for base in pairs {
            let mut variants = vec![base.clone()];
            if cfg.expansion {
                variants.push(expand_definitions(&base, problem, 1, &mut rng));
                variants.push(expand_definitions(&base, problem, 2, &mut rng));
            }
            for v in variants {
                let Ok(mut line) = encode_example(problem, &v) else {
                    continue;
                };
                if count_solution_tokens(&line) > cfg.max_solution_tokens {
                    continue;
                }
                if rng.gen_bool(cfg.index_shift) {
                    let top = line
                        .split_whitespace()
                        .filter_map(|t| match t.as_bytes() {
                            [c @ b'a'..=b't'] => Some((c - b'a') as i32),
                            _ => None,
                        })
                        .max()
                        .unwrap_or(0);
                    let room = MAX_LOOPS as i32 - 1 - top;
                    if room > 0 {
                        line = shift_indices(&line, rng.gen_range(1..=room)).expect("offset within range");
                    }
                }
                out.push(line);
            }
        }
    }
    out
}

/// `id TAB problem-tokens` for every encodable problem.
pub fn problem_token_lines(problems: &[Problem]) -> String {
    let mut s = String::new();
    for p in problems {
        match encode_problem(p) {
            Ok(t) => {
                let _ = writeln!(s, "{}\t{}", p.id, t.join(" "));
            }
            Err(e) => log::warn!("{}: not encodable ({e:?}), left out of inference", p.id),
        }
    }
    s
}

/// Parsed prediction file: per problem, token streams in rank order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Predictions {
    pub by_problem: BTreeMap<String, Vec<(u32, String)>>,
    pub malformed: usize,
}

impl Predictions {
    pub fn parse(text: &str) -> Self {
        let mut out = Predictions::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut parts = line.splitn(3, '\t');
            let (Some(id), Some(rank), Some(toks)) = (parts.next(), parts.next(), parts.next()) else {
                out.malformed += 1;
                continue;
            };
            let Ok(rank) = rank.trim().parse::<u32>() else {
                out.malformed += 1;
                continue;
            };
            out.by_problem
                .entry(id.trim().to_string())
                .or_default()
                .push((rank, toks.trim().to_string()));
        }
        for v in out.by_problem.values_mut() {
            v.sort_by_key(|(r, _)| *r);
        }
        out
    }

    pub fn lines(&self) -> usize {
        self.by_problem.values().map(Vec::len).sum::<usize>() + self.malformed
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assembled {
    pub candidates: BTreeMap<String, Vec<Candidate>>,
    pub predictions: usize,
    pub valid: usize,
    pub filtered: usize,
}

/// Turns one predictor output into candidates per problem.
pub fn assemble_candidates(
    preds: &Predictions,
    problems: &[Problem],
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Assembled {
    let mut out = Assembled {
        predictions: preds.lines(),
        ..Default::default()
    };
    let n = *cfg.split_sizes.choose(rng).expect("nonempty sizes");
    for p in problems {
        let Some(lines) = preds.by_problem.get(&p.id) else {
            continue;
        };
        let mut decoded = Vec::new();
        for (_, toks) in lines {
            let t: Vec<&str> = toks.split_whitespace().collect();
            if let Ok(c) = decode_tokens(&t, p) {
                out.valid += 1;
                decoded.push(c);
            }
        }
        let cands = match cfg.mode {
            Mode::Whole => {
                let mut v: Vec<Candidate> = decoded
                    .into_iter()
                    .filter_map(|c| {
                        if !cfg.semantic_filter {
                            return Some(c);
                        }
                        let kept: Vec<Formula> = c.0.into_iter().filter(|f| true_on_grid(p, f)).collect();
                        (!kept.is_empty()).then_some(Candidate(kept))
                    })
                    .collect();
                v.truncate(cfg.whole_candidates);
                v
            }
            Mode::Split => {
                let mut seen = HashSet::new();
                let pool: Vec<Formula> = decoded
                    .into_iter()
                    .flat_map(|c| c.0)
                    .filter(|f| seen.insert(f.clone()))
                    .collect();
                let before = pool.len();
                let pool: Vec<Formula> = if cfg.semantic_filter {
                    pool.into_iter().filter(|f| true_on_grid(p, f)).collect()
                } else {
                    pool
                };
                out.filtered += before - pool.len();
                if pool.is_empty() {
                    vec![]
                } else {
                    let k = n.min(pool.len());
                    (0..cfg.split_candidates)
                        .map(|_| {
                            Candidate(
                                sample(rng, pool.len(), k)
                                    .into_iter()
                                    .map(|i| pool[i].clone())
                                    .collect(),
                            )
                        })
                        .collect()
                }
            }
        };
        if cands.is_empty() {
            log::info!("{}: no valid predictions, skipped", p.id);
        } else {
            out.candidates.insert(p.id.clone(), cands);
        }
    }
    out
}

/// Runs one predictor command; placeholders are replaced by file paths.
pub fn run_predictor(command: &str, train: &Path, problems: &Path, out: &Path) -> Result<(), DriverError> {
    let cmd = command
        .replace("{train}", &train.display().to_string())
        .replace("{problems}", &problems.display().to_string())
        .replace("{out}", &out.display().to_string());
    let status = io(Path::new("sh"), Command::new("sh").arg("-c").arg(&cmd).status())?;
    if !status.success() {
        return Err(DriverError::Predictor {
            command: cmd,
            status: status.to_string(),
        });
    }
    if !out.exists() {
        return Err(DriverError::Predictor {
            command: cmd,
            status: "no output file".into(),
        });
    }
    Ok(())
}

fn prediction_file(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("predictions-{k}.txt"))
}

/// Evaluation half of an iteration, shared by `iterate` and `replay`.
fn consume_predictions(
    db: &mut SolutionDb,
    iteration: u32,
    problems: &[Problem],
    outputs: &[Predictions],
    cfg: &RunConfig,
    sw: &mut Stopwatch,
) -> IterationReport {
    let mut merged: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
    let (mut total, mut valid) = (0, 0);
    for (k, preds) in outputs.iter().enumerate() {
        let mut rng = rng_for(cfg.seed, iteration, 100 + k as u64);
        let a = assemble_candidates(preds, problems, cfg, &mut rng);
        total += a.predictions;
        valid += a.valid;
        for (id, cs) in a.candidates {
            merged.entry(id).or_default().extend(cs);
        }
    }
    sw.lap("assemble");
    let (ps, cs): (Vec<Problem>, Vec<Vec<Candidate>>) = problems
        .iter()
        .filter_map(|p| merged.remove(&p.id).map(|c| (p.clone(), c)))
        .unzip();
    let mut report = evaluate_and_select(db, iteration, &ps, &cs, cfg, sw);
    report.predictions = total;
    report.valid_predictions = valid;
    report.validity_rate = if total == 0 { 0.0 } else { valid as f64 / total as f64 };
    report
}

/// One full iteration. On predictor failure the database is left untouched.
pub fn iterate(dir: &RunDir, cfg: &RunConfig) -> Result<IterationReport, DriverError> {
    cfg.validate()?;
    if cfg.predictors.is_empty() {
        return Err(DriverError::Config("no predictor command configured".into()));
    }
    let problems = dir.load_problems()?;
    let mut db = dir.load_db()?;
    let iteration = dir.iterations().last().map_or(1, |n| n + 1);
    let it = dir.iter_dir(iteration);
    io(&it, std::fs::create_dir_all(&it))?;
    let mut sw = Stopwatch::new();
    let train = it.join("train.txt");
    let lines = export_training(&db, &problems, cfg, iteration);
    write(&train, &lines.iter().map(|l| format!("{l}\n")).collect::<String>())?;
    let ptoks = it.join("problems.txt");
    write(&ptoks, &problem_token_lines(&problems))?;
    sw.lap("export");
    let mut outputs = Vec::new();
    for (k, cmd) in cfg.predictors.iter().enumerate() {
        let out = prediction_file(&it, k);
        if let Err(e) = run_predictor(cmd, &train, &ptoks, &out) {
            io(&it, std::fs::remove_dir_all(&it))?;
            return Err(e);
        }
        outputs.push(Predictions::parse(&read(&out)?));
    }
    sw.lap("predict");
    let mut report = consume_predictions(&mut db, iteration, &problems, &outputs, cfg, &mut sw);
    db.save(&it.join("db.jsonl"))?;
    db.save(&dir.db())?;
    report.timings = sw.1;
    write_report(&it, &report)?;
    Ok(report)
}

/// Rebuilds the database from the initial snapshot and the logged
/// predictor outputs, and checks it against the stored one.
pub fn replay(dir: &RunDir, cfg: &RunConfig) -> Result<SolutionDb, DriverError> {
    let problems = dir.load_problems()?;
    let mut db = SolutionDb::load(&dir.iter_dir(0).join("db.jsonl"))?;
    for n in dir.iterations().into_iter().filter(|&n| n > 0) {
        let it = dir.iter_dir(n);
        let mut outputs = Vec::new();
        for k in 0.. {
            let f = prediction_file(&it, k);
            if !f.exists() {
                break;
            }
            outputs.push(Predictions::parse(&read(&f)?));
        }
        consume_predictions(&mut db, n, &problems, &outputs, cfg, &mut Stopwatch::new());
    }
    let stored = read(&dir.db())?;
    if db.to_jsonl() != stored {
        return Err(DriverError::Replay("replayed database differs from db.jsonl".into()));
    }
    Ok(db)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub iteration: u32,
    pub new_solutions: usize,
    pub cumulative_solved: usize,
    /// Solutions recorded so far that contain the tracked pattern.
    pub pattern_solutions: Option<usize>,
}

/// A literal pattern is matched as a subformula, anything else as text.
fn matches_pattern(c: &Candidate, pattern: &str, parsed: Option<&Formula>) -> bool {
    match parsed {
        Some(f) => c.0.iter().any(|g| g.contains_subformula(f)),
        None => c.to_string().contains(pattern),
    }
}

/// Per-iteration progress recomputed from the database history, up to
/// `through` or the last iteration that recorded a solution.
pub fn report(db: &SolutionDb, pattern: Option<&str>, through: Option<u32>) -> Vec<ReportRow> {
    let parsed = pattern.and_then(|p| parse_formula(p).ok());
    let last = db.history().iter().map(|h| h.iteration).chain(through).max();
    let Some(last) = last else { return vec![] };
    let mut solved = HashSet::new();
    let mut with_pattern = 0;
    (0..=last)
        .map(|n| {
            let recs: Vec<_> = db.history().iter().filter(|h| h.iteration == n).collect();
            for r in &recs {
                solved.insert(r.solution.problem.clone());
                if pattern.is_some_and(|p| matches_pattern(&r.solution.candidate, p, parsed.as_ref())) {
                    with_pattern += 1;
                }
            }
            ReportRow {
                iteration: n,
                new_solutions: recs.len(),
                cumulative_solved: solved.len(),
                pattern_solutions: pattern.map(|_| with_pattern),
            }
        })
        .collect()
}

pub fn render_report(rows: &[ReportRow]) -> String {
    let mut s = String::from("iteration  new  solved");
    if rows.iter().any(|r| r.pattern_solutions.is_some()) {
        s.push_str("  pattern");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(
            s,
            "{:>9}  {:>3}  {:>6}",
            r.iteration, r.new_solutions, r.cumulative_solved
        );
        if let Some(p) = r.pattern_solutions {
            let _ = write!(s, "  {p:>7}");
        }
        s.push('\n');
    }
    s
}

/// Reference predictor used for testing the loop. For each problem it
/// ranks the training solutions of identical problems first, then every
/// other training solution, then copies with loop letters shifted by
/// `shifts`, up to `beam` lines.
pub fn mock_predict(train: &str, problems: &str, beam: usize, shifts: &[i32]) -> String {
    let mut exact: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut all: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for line in train.lines() {
        let Some((p, s)) = line.split_once(" > ") else { continue };
        exact.entry(p.trim()).or_default().push(s.trim());
        if seen.insert(s.trim()) {
            all.push(s.trim());
        }
    }
    let mut out = String::new();
    for line in problems.lines() {
        let Some((id, toks)) = line.split_once('\t') else {
            continue;
        };
        let mut ranked: Vec<String> = Vec::new();
        let mut used = HashSet::new();
        let mut push = |s: String, ranked: &mut Vec<String>| {
            if ranked.len() < beam && used.insert(s.clone()) {
                ranked.push(s);
            }
        };
        for s in exact.get(toks.trim()).into_iter().flatten() {
            push(s.to_string(), &mut ranked);
        }
        for s in &all {
            push(s.to_string(), &mut ranked);
        }
        for &d in shifts {
            for s in &all {
                if let Some(t) = shift_indices(s, d) {
                    push(t, &mut ranked);
                }
            }
        }
        for (r, s) in ranked.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{}\t{s}", r + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::parse_candidate;
    use crate::prover::Solution;

    fn a217() -> Problem {
        Problem::parse_line("A217: loop(X + Y, X, 0) = (X * X + X) div 2", 1).unwrap()
    }

    fn db_with(p: &Problem, c: &str) -> SolutionDb {
        let mut db = SolutionDb::new();
        db.select(0, [Solution::new(&p.id, parse_candidate(c).unwrap(), None)]);
        db
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back.to_toml(), cfg.to_toml());
        let partial = RunConfig::from_toml("mode = \"whole\"\ntrain_on = \"shortest+fastest\"\n").unwrap();
        assert_eq!(partial.mode, Mode::Whole);
        assert_eq!(partial.train_on, TrainOn::ShortestAndFastest);
        assert_eq!(partial.split_sizes, vec![1, 2, 3, 4, 5, 6, 8, 12]);
        assert!(RunConfig::from_toml("split_sizes = []").is_err());
        assert!(RunConfig::from_toml("split_candidates = 0").is_err());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn export_matches_example_line() {
        let p = a217();
        let db = db_with(&p, "(= (+ (* x x) x) (* 2 (v0 x)))");
        let cfg = RunConfig {
            index_shift: 0.0,
            ..RunConfig::default()
        };
        let lines = export_training(&db, &[p.clone()], &cfg, 1);
        assert_eq!(lines, vec!["J a D K L K A = G D F K K K C > O D F K K K F C a K"]);
        assert_eq!(export_training(&db, &[p], &cfg, 1), lines);
    }

    #[test]
    fn export_split_whole_and_expansion() {
        let p = a217();
        let db = db_with(&p, "(<= 0 (v0 x)) | (= (v0 x) (v0 x))");
        let base = RunConfig {
            index_shift: 0.0,
            ..RunConfig::default()
        };
        assert_eq!(export_training(&db, &[p.clone()], &base, 1).len(), 2);
        let whole = RunConfig {
            mode: Mode::Whole,
            ..base.clone()
        };
        assert_eq!(export_training(&db, &[p.clone()], &whole, 1).len(), 1);
        let exp = RunConfig {
            expansion: true,
            ..base.clone()
        };
        let lines = export_training(&db, &[p.clone()], &exp, 1);
        assert_eq!(lines.len(), 6);
        for l in &lines {
            let (_, sol) = l.split_once(" > ").unwrap();
            let toks: Vec<&str> = sol.split_whitespace().collect();
            assert!(decode_tokens(&toks, &p).is_ok(), "{l}");
        }
        assert!(lines.iter().any(|l| l.contains("a 3")));
        let short = RunConfig {
            max_solution_tokens: 4,
            ..base.clone()
        };
        assert_eq!(export_training(&db, &[p.clone()], &short, 1).len(), 1);
        let shift = RunConfig {
            index_shift: 1.0,
            ..base
        };
        for l in export_training(&db, &[p], &shift, 1) {
            assert!(!l.contains(" a "), "{l}");
        }
    }

    #[test]
    fn predictions_parse_and_rank() {
        let text = "A1\t2\tO K K\nA1\t1\tP A K\nbad line\nA2\tx\tO K K\n\nA2\t1\tZ Z\n";
        let p = Predictions::parse(text);
        assert_eq!(p.malformed, 2);
        assert_eq!(p.by_problem["A1"], vec![(1, "P A K".into()), (2, "O K K".into())]);
        assert_eq!(p.lines(), 5);
    }

    #[test]
    fn assemble_modes() {
        let p = Problem::parse_line("P: loop(X + Y, X, 0) = (X * X + X) div 2", 1).unwrap();
        let lines: Vec<String> = (1..=240).map(|r| format!("P\t{r}\tO K K")).collect();
        let mut text = lines.join("\n");
        text.push_str("\nP\t241\tO A B\nP\t242\tP A K\nP\t243\t? ?\n");
        let preds = Predictions::parse(&text);
        let whole = RunConfig {
            mode: Mode::Whole,
            ..RunConfig::default()
        };
        let a = assemble_candidates(&preds, &[p.clone()], &whole, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a.candidates["P"].len(), 240);
        assert_eq!(a.valid, 242);
        assert_eq!(a.predictions, 243);
        let split1 = RunConfig {
            split_sizes: vec![1],
            ..RunConfig::default()
        };
        let a = assemble_candidates(&preds, &[p.clone()], &split1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a.candidates["P"].len(), 100);
        assert!(a.candidates["P"].iter().all(|c| c.len() == 1));
        let filtered = RunConfig {
            semantic_filter: true,
            split_sizes: vec![3],
            ..RunConfig::default()
        };
        let a = assemble_candidates(&preds, &[p.clone()], &filtered, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a.filtered, 1);
        let zero_one = parse_formula("(= 0 1)").unwrap();
        for c in &a.candidates["P"] {
            assert_eq!(c.len(), 2);
            assert!(!c.0.contains(&zero_one));
        }
        let none = Predictions::parse("P\t1\t? ?\n");
        assert!(
            assemble_candidates(&none, &[p], &whole, &mut ChaCha8Rng::seed_from_u64(0))
                .candidates
                .is_empty()
        );
    }

    #[test]
    fn mock_predictor_ranks_exact_matches_first() {
        let train = "J a K > O a b\nM a K > O K K\n";
        let problems = "P1\tM a K\nP2\tX Y\n";
        let out = mock_predict(train, problems, 3, &[1]);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(
            lines,
            [
                "P1\t1\tO K K",
                "P1\t2\tO a b",
                "P1\t3\tO b c",
                "P2\t1\tO a b",
                "P2\t2\tO K K",
                "P2\t3\tO b c"
            ]
        );
    }

    #[test]
    fn report_tracks_pattern() {
        let mut db = SolutionDb::new();
        db.select(0, [Solution::new("A", parse_candidate("(= (v0 x) x)").unwrap(), None)]);
        db.select(
            2,
            [
                Solution::new("B", parse_candidate("(/\\ (= (v0 x) x) (<= 0 x))").unwrap(), None),
                Solution::new("A", parse_candidate("(<= 0 x)").unwrap(), None),
            ],
        );
        let rows = report(&db, Some("(= (v0 x) x)"), None);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].new_solutions, 0);
        assert_eq!(rows.iter().map(|r| r.cumulative_solved).collect::<Vec<_>>(), [1, 1, 2]);
        assert_eq!(
            rows.iter().map(|r| r.pattern_solutions.unwrap()).collect::<Vec<_>>(),
            [1, 1, 2]
        );
        assert!(render_report(&rows).contains("pattern"));
        assert!(report(&SolutionDb::new(), None, None).is_empty());
        assert_eq!(report(&db, None, Some(4)).len(), 5);
    }

    #[test]
    fn failing_predictor_leaves_db_untouched() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::new(tmp.path());
        std::fs::write(dir.problems(), a217().to_line() + "\n").unwrap();
        let db = db_with(&a217(), "(= (v0 x) (v0 x))");
        db.save(&dir.db()).unwrap();
        std::fs::create_dir_all(dir.iter_dir(0)).unwrap();
        let before = std::fs::read_to_string(dir.db()).unwrap();
        let cfg = RunConfig {
            predictors: vec!["exit 3".into()],
            ..RunConfig::default()
        };
        assert!(matches!(iterate(&dir, &cfg), Err(DriverError::Predictor { .. })));
        assert_eq!(std::fs::read_to_string(dir.db()).unwrap(), before);
        assert_eq!(dir.iterations(), vec![0]);
    }

    #[test]
    fn ingest_merges_by_id() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::new(tmp.path().join("run"));
        let a = tmp.path().join("a.txt");
        let b = tmp.path().join("b.txt");
        std::fs::write(&a, "A1: X = X\nA2: X + 1 = 1 + X\n").unwrap();
        std::fs::write(&b, "A2: X = X\nA3: 2 = 2\n").unwrap();
        assert_eq!(ingest(&dir, &[a, b]).unwrap(), 3);
        let ps = dir.load_problems().unwrap();
        assert_eq!(ps[1].to_line(), "A2: X + 1 = 1 + X");
    }
}
