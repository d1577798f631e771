//! Running an external SMT solver on candidates, minimizing proofs, and
//! keeping the best solution per problem.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::predicate::Candidate;
use crate::problem::Problem;
use crate::smt::{candidate_hash, emit_problem, SmtProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedMetric {
    Off,
    /// Median wall-clock time of three runs, in microseconds.
    WallClock,
    /// Retired instructions reported by `perf stat`.
    Instructions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub program: PathBuf,
    /// Arguments with `{file}`, `{timeout_ms}` and `{timeout_s}` placeholders.
    pub args: Vec<String>,
    #[serde(with = "millis")]
    pub timeout: Duration,
    /// Extra time before the process is killed when the solver ignores
    /// its own time limit.
    #[serde(with = "millis")]
    pub kill_grace: Duration,
    pub workers: usize,
    pub speed: SpeedMetric,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("solver timeout must be positive")]
    ZeroTimeout,
    #[error("solver arguments lack the {{file}} placeholder")]
    NoFilePlaceholder,
    #[error("worker count must be positive")]
    NoWorkers,
}

impl SolverConfig {
    fn with(program: &str, args: &[&str]) -> Self {
        SolverConfig {
            program: program.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            timeout: Duration::from_millis(200),
            kill_grace: Duration::from_millis(500),
            workers: 1,
            speed: SpeedMetric::Off,
        }
    }

    pub fn z3() -> Self {
        Self::with("z3", &["-smt2", "-t:{timeout_ms}", "{file}"])
    }

    pub fn cvc5() -> Self {
        Self::with("cvc5", &["--lang=smt2", "--tlimit={timeout_ms}", "{file}"])
    }

    pub fn vampire() -> Self {
        Self::with(
            "vampire",
            &[
                "--input_syntax",
                "smtlib2",
                "--output_mode",
                "smtcomp",
                "-t",
                "{timeout_s}",
                "{file}",
            ],
        )
    }

    /// z3 unless `INDUCT_SOLVER` names another binary.
    pub fn from_env() -> Self {
        let mut cfg = Self::z3();
        if let Ok(p) = std::env::var("INDUCT_SOLVER") {
            if !p.is_empty() {
                cfg.program = p.into();
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout.is_zero() {
            return Err(ConfigError::ZeroTimeout);
        }
        if !self.args.iter().any(|a| a.contains("{file}")) {
            return Err(ConfigError::NoFilePlaceholder);
        }
        if self.workers == 0 {
            return Err(ConfigError::NoWorkers);
        }
        Ok(())
    }

    fn expand_args(&self, file: &Path) -> Vec<String> {
        let ms = self.timeout.as_millis().to_string();
        let s = self.timeout.as_secs_f64().ceil().max(1.0).to_string();
        self.args
            .iter()
            .map(|a| {
                a.replace("{file}", &file.to_string_lossy())
                    .replace("{timeout_ms}", &ms)
                    .replace("{timeout_s}", &s)
            })
            .collect()
    }

    /// Whether the solver binary can be started at all.
    pub fn available(&self) -> bool {
        Command::new(&self.program)
            .arg("--version")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Proved,
    Sat,
    Unknown,
    Timeout,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalResult {
    pub verdict: Verdict,
    pub elapsed: Duration,
    pub instructions: Option<u64>,
    /// Captured solver output when something went wrong.
    pub diagnostics: String,
}

impl EvalResult {
    pub fn proved(&self) -> bool {
        self.verdict == Verdict::Proved
    }

    fn error(msg: impl Into<String>) -> Self {
        EvalResult {
            verdict: Verdict::Error,
            elapsed: Duration::ZERO,
            instructions: None,
            diagnostics: msg.into(),
        }
    }
}

fn parse_verdict(stdout: &str) -> Option<Verdict> {
    let mut verdict = None;
    for line in stdout.lines() {
        let l = line.trim();
        if l.starts_with("(error") {
            return Some(Verdict::Error);
        }
        if verdict.is_none() {
            verdict = match l {
                "unsat" => Some(Verdict::Proved),
                "sat" => Some(Verdict::Sat),
                "unknown" => Some(Verdict::Unknown),
                "timeout" => Some(Verdict::Timeout),
                _ => None,
            };
        }
    }
    verdict
}

fn perf_available() -> bool {
    static PERF: OnceLock<bool> = OnceLock::new();
    *PERF.get_or_init(|| {
        let ok = Command::new("perf")
            .args(["stat", "-x,", "-e", "instructions", "--", "true"])
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .output()
            .map(|o| o.status.success() && parse_perf(&String::from_utf8_lossy(&o.stderr)).is_some())
            .unwrap_or(false);
        if !ok {
            log::warn!("perf instruction counting unavailable; using wall-clock speed");
        }
        ok
    })
}

fn parse_perf(stderr: &str) -> Option<u64> {
    stderr.lines().find_map(|l| {
        let mut fields = l.split(',');
        let value = fields.next()?.trim();
        fields
            .any(|f| f.starts_with("instructions"))
            .then(|| value.parse().ok())
            .flatten()
    })
}

fn drain<R: Read + Send + 'static>(r: R) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut s = String::new();
        let _ = BufReader::new(r).read_to_string(&mut s);
        s
    })
}

/// Runs the solver on a complete script.
pub fn run_script(script: &str, cfg: &SolverConfig) -> EvalResult {
    run_script_counting(script, cfg, false)
}

fn run_script_counting(script: &str, cfg: &SolverConfig, count: bool) -> EvalResult {
    let mut file = match tempfile::Builder::new().prefix("induct-").suffix(".smt2").tempfile() {
        Ok(f) => f,
        Err(e) => return EvalResult::error(format!("temp file: {e}")),
    };
    if let Err(e) = file.write_all(script.as_bytes()).and_then(|_| file.flush()) {
        return EvalResult::error(format!("temp file: {e}"));
    }
    let args = cfg.expand_args(file.path());
    let mut cmd = if count {
        let mut c = Command::new("perf");
        c.args(["stat", "-x,", "-e", "instructions", "--"])
            .arg(&cfg.program)
            .args(&args);
        c
    } else {
        let mut c = Command::new(&cfg.program);
        c.args(&args);
        c
    };
    cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return EvalResult::error(format!("cannot start {}: {e}", cfg.program.display())),
    };
    let out = drain(child.stdout.take().expect("piped"));
    let err = drain(child.stderr.take().expect("piped"));
    let status = match child.wait_timeout(cfg.timeout + cfg.kill_grace) {
        Ok(Some(s)) => Some(s),
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            None
        }
        Err(e) => {
            let _ = child.kill();
            let _ = child.wait();
            return EvalResult::error(format!("wait: {e}"));
        }
    };
    let elapsed = start.elapsed();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let instructions = if count { parse_perf(&stderr) } else { None };
    let verdict = match status {
        None => Verdict::Timeout,
        Some(s) => match parse_verdict(&stdout) {
            Some(Verdict::Error) => Verdict::Error,
            Some(Verdict::Unknown) if elapsed >= cfg.timeout => Verdict::Timeout,
            Some(v) if s.success() || v == Verdict::Proved => v,
            _ => Verdict::Error,
        },
    };
    let diagnostics = if verdict == Verdict::Error {
        format!("exit {:?}\n{stdout}{stderr}", status.and_then(|s| s.code()))
    } else {
        String::new()
    };
    EvalResult {
        verdict,
        elapsed,
        instructions,
        diagnostics,
    }
}

/// Script for `problem` with one induction instance per predicate.
pub fn candidate_script(problem: &Problem, base: &SmtProblem, cand: &Candidate) -> Option<String> {
    let smt = base.with_candidate(problem, cand).ok()?;
    Some(smt.render(&candidate_hash(cand)))
}

pub fn check_candidate(problem: &Problem, base: &SmtProblem, cand: &Candidate, cfg: &SolverConfig) -> EvalResult {
    match base.with_candidate(problem, cand) {
        Ok(smt) => run_script(&smt.render(&candidate_hash(cand)), cfg),
        Err(e) => EvalResult::error(format!("candidate rejected: {e}")),
    }
}

/// Speed of a proving candidate under the configured metric; `None` if
/// the metric is off or a measuring run fails to prove.
pub fn measure_speed(problem: &Problem, base: &SmtProblem, cand: &Candidate, cfg: &SolverConfig) -> Option<u64> {
    let script = candidate_script(problem, base, cand)?;
    match cfg.speed {
        SpeedMetric::Off => None,
        SpeedMetric::Instructions if perf_available() => {
            let r = run_script_counting(&script, cfg, true);
            if r.proved() {
                r.instructions
            } else {
                None
            }
        }
        _ => {
            let mut times = Vec::with_capacity(3);
            for _ in 0..3 {
                let r = run_script(&script, cfg);
                if !r.proved() {
                    return None;
                }
                times.push(r.elapsed.as_micros() as u64);
            }
            times.sort_unstable();
            Some(times[1])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub problem: String,
    pub candidate: Candidate,
    pub size: usize,
    pub speed: Option<u64>,
}

impl Solution {
    pub fn new(problem: &str, candidate: Candidate, speed: Option<u64>) -> Self {
        Solution {
            problem: problem.to_string(),
            size: candidate.size(),
            candidate,
            speed,
        }
    }

    fn short_key(&self) -> (usize, String) {
        (self.size, self.candidate.to_string())
    }

    fn fast_key(&self) -> Option<(u64, usize, String)> {
        self.speed.map(|s| (s, self.size, self.candidate.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimizeMode {
    Shortest,
    Fastest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minimized {
    pub solution: Solution,
    /// False when the input no longer proved at minimization time; the
    /// solution is then returned unchanged.
    pub reproved: bool,
}

/// Greedy left-to-right removal of single predicates until no removal
/// applies. At least one predicate is kept.
pub fn minimize(
    problem: &Problem,
    base: &SmtProblem,
    sol: &Solution,
    mode: MinimizeMode,
    cfg: &SolverConfig,
) -> Minimized {
    let speed_of = |c: &Candidate| -> Option<u64> {
        match mode {
            MinimizeMode::Shortest => check_candidate(problem, base, c, cfg).proved().then_some(0),
            MinimizeMode::Fastest => measure_speed(problem, base, c, cfg),
        }
    };
    let Some(mut best) = speed_of(&sol.candidate) else {
        return Minimized {
            solution: sol.clone(),
            reproved: false,
        };
    };
    let mut cur = sol.candidate.clone();
    loop {
        let mut changed = false;
        let mut i = 0;
        while cur.len() > 1 && i < cur.len() {
            let trial = cur.without(i);
            match speed_of(&trial) {
                Some(s) if mode == MinimizeMode::Shortest || s < best => {
                    best = s;
                    cur = trial;
                    changed = true;
                }
                _ => i += 1,
            }
        }
        if !changed {
            break;
        }
    }
    let speed = match (mode, cfg.speed) {
        (MinimizeMode::Fastest, _) => Some(best),
        (_, SpeedMetric::Off) => None,
        _ => measure_speed(problem, base, &cur, cfg),
    };
    Minimized {
        solution: Solution::new(&problem.id, cur, speed),
        reproved: true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbEntry {
    pub shortest: Solution,
    pub fastest: Option<Solution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: u32,
    pub solution: Solution,
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

pub const DB_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DbHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct DbLine {
    iteration: u32,
    problem: String,
    candidate: Candidate,
    size: usize,
    speed: Option<u64>,
    sha256: String,
}

fn content_hash(problem: &str, cand: &Candidate) -> String {
    hex::encode(Sha256::digest(format!("{problem}\t{cand}").as_bytes()))
}

/// Best solutions per problem plus the log of every distinct solution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolutionDb {
    entries: BTreeMap<String, DbEntry>,
    history: Vec<HistoryRecord>,
    seen: HashSet<(String, String)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelectStats {
    pub new_problems: usize,
    pub shorter: usize,
    pub faster: usize,
    pub recorded: usize,
}

impl SolutionDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &BTreeMap<String, DbEntry> {
        &self.entries
    }

    pub fn get(&self, problem: &str) -> Option<&DbEntry> {
        self.entries.get(problem)
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history
    }

    pub fn solved(&self) -> BTreeSet<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct solutions ever recorded for a problem.
    pub fn history_for(&self, problem: &str) -> Vec<&Solution> {
        self.history
            .iter()
            .filter(|h| h.solution.problem == problem)
            .map(|h| &h.solution)
            .collect()
    }

    fn insert(&mut self, iteration: u32, sol: Solution, stats: &mut SelectStats) {
        let key = (sol.problem.clone(), sol.candidate.to_string());
        if !self.seen.insert(key) {
            return;
        }
        stats.recorded += 1;
        self.history.push(HistoryRecord {
            iteration,
            solution: sol.clone(),
        });
        match self.entries.get_mut(&sol.problem) {
            None => {
                stats.new_problems += 1;
                let fastest = sol.speed.is_some().then(|| sol.clone());
                self.entries
                    .insert(sol.problem.clone(), DbEntry { shortest: sol, fastest });
            }
            Some(e) => {
                if sol.short_key() < e.shortest.short_key() {
                    stats.shorter += 1;
                    e.shortest = sol.clone();
                }
                if let Some(k) = sol.fast_key() {
                    let better = match e.fastest.as_ref().and_then(Solution::fast_key) {
                        None => true,
                        Some(old) => k < old,
                    };
                    if better {
                        stats.faster += 1;
                        e.fastest = Some(sol);
                    }
                }
            }
        }
    }

    /// Adds verified solutions; keeps the shortest (and fastest) per problem.
    /// Ties go to the lexicographically smaller printed candidate.
    pub fn select(&mut self, iteration: u32, new: impl IntoIterator<Item = Solution>) -> SelectStats {
        let mut stats = SelectStats::default();
        for s in new {
            self.insert(iteration, s, &mut stats);
        }
        stats
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&DbHeader {
            format: "induct-solutions".into(),
            version: DB_VERSION,
        })
        .expect("header serializes");
        s.push('\n');
        for h in &self.history {
            let sol = &h.solution;
            let line = DbLine {
                iteration: h.iteration,
                problem: sol.problem.clone(),
                candidate: sol.candidate.clone(),
                size: sol.size,
                speed: sol.speed,
                sha256: content_hash(&sol.problem, &sol.candidate),
            };
            s.push_str(&serde_json::to_string(&line).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, DbError> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: String| DbError::Format { line: line + 1, msg };
        let (i, first) = lines.next().ok_or_else(|| bad(0, "empty database".into()))?;
        let header: DbHeader = serde_json::from_str(first).map_err(|e| bad(i, e.to_string()))?;
        if header.format != "induct-solutions" || header.version != DB_VERSION {
            return Err(bad(
                i,
                format!("unsupported format {} v{}", header.format, header.version),
            ));
        }
        let mut db = SolutionDb::new();
        let mut stats = SelectStats::default();
        for (i, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let r: DbLine = serde_json::from_str(l).map_err(|e| bad(i, e.to_string()))?;
            if content_hash(&r.problem, &r.candidate) != r.sha256 {
                return Err(bad(i, "content hash mismatch".into()));
            }
            if r.size != r.candidate.size() {
                return Err(bad(i, "size does not match candidate".into()));
            }
            let sol = Solution {
                problem: r.problem,
                candidate: r.candidate,
                size: r.size,
                speed: r.speed,
            };
            db.insert(r.iteration, sol, &mut stats);
        }
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self, DbError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    /// Written through a temporary file and renamed into place.
    pub fn save(&self, path: &Path) -> Result<(), DbError> {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(self.to_jsonl().as_bytes())?;
        tmp.persist(path).map_err(|e| DbError::Io(e.error))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairResult {
    pub problem: usize,
    pub candidate: usize,
    pub result: EvalResult,
}

/// Upper bounds (ms) of the elapsed-time histogram buckets; the last
/// bucket is open.
pub const HISTOGRAM_BOUNDS_MS: [u64; 5] = [10, 50, 100, 200, 500];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub pairs: usize,
    pub solved: usize,
    pub verdicts: BTreeMap<Verdict, usize>,
    /// Proof times bucketed by `HISTOGRAM_BOUNDS_MS`.
    pub proof_time_histogram: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub results: Vec<PairResult>,
    pub summary: BatchSummary,
}

impl BatchOutcome {
    /// First proving candidate per problem, by candidate order.
    pub fn proofs(&self) -> Vec<&PairResult> {
        self.results.iter().filter(|r| r.result.proved()).collect()
    }
}

fn pool(cfg: &SolverConfig) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .expect("thread pool")
}

/// Checks every (problem, candidate) pair. With `short_circuit`, a problem's
/// remaining candidates are skipped after its first proof.
pub fn run_batch(
    problems: &[Problem],
    candidates: &[Vec<Candidate>],
    cfg: &SolverConfig,
    with_trivial: bool,
    short_circuit: bool,
) -> BatchOutcome {
    assert_eq!(problems.len(), candidates.len());
    let bases: Vec<SmtProblem> = problems.iter().map(|p| emit_problem(p, with_trivial)).collect();
    let results: Vec<PairResult> = pool(cfg).install(|| {
        if short_circuit {
            (0..problems.len())
                .into_par_iter()
                .map(|pi| {
                    let mut out = Vec::new();
                    for (ci, c) in candidates[pi].iter().enumerate() {
                        let result = check_candidate(&problems[pi], &bases[pi], c, cfg);
                        let done = result.proved();
                        out.push(PairResult {
                            problem: pi,
                            candidate: ci,
                            result,
                        });
                        if done {
                            break;
                        }
                    }
                    out
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        } else {
            let pairs: Vec<(usize, usize)> = candidates
                .iter()
                .enumerate()
                .flat_map(|(pi, cs)| (0..cs.len()).map(move |ci| (pi, ci)))
                .collect();
            pairs
                .into_par_iter()
                .map(|(pi, ci)| PairResult {
                    problem: pi,
                    candidate: ci,
                    result: check_candidate(&problems[pi], &bases[pi], &candidates[pi][ci], cfg),
                })
                .collect()
        }
    });
    let mut summary = BatchSummary {
        pairs: results.len(),
        proof_time_histogram: vec![0; HISTOGRAM_BOUNDS_MS.len() + 1],
        ..Default::default()
    };
    let mut solved = BTreeSet::new();
    for r in &results {
        *summary.verdicts.entry(r.result.verdict).or_default() += 1;
        if r.result.proved() {
            solved.insert(r.problem);
            let ms = r.result.elapsed.as_millis() as u64;
            let b = HISTOGRAM_BOUNDS_MS
                .iter()
                .position(|&u| ms < u)
                .unwrap_or(HISTOGRAM_BOUNDS_MS.len());
            summary.proof_time_histogram[b] += 1;
        }
    }
    summary.solved = solved.len();
    BatchOutcome { results, summary }
}

/// Minimizes every distinct proving candidate of a batch and returns the
/// resulting solutions in (problem, candidate) order. Solutions that fail
/// to reprove are dropped.
pub fn minimize_proofs(
    problems: &[Problem],
    candidates: &[Vec<Candidate>],
    outcome: &BatchOutcome,
    cfg: &SolverConfig,
    with_trivial: bool,
    mode: MinimizeMode,
) -> Vec<Solution> {
    let mut seen = HashSet::new();
    let todo: Vec<(usize, &Candidate)> = outcome
        .proofs()
        .into_iter()
        .filter(|r| seen.insert((r.problem, candidates[r.problem][r.candidate].to_string())))
        .map(|r| (r.problem, &candidates[r.problem][r.candidate]))
        .collect();
    pool(cfg).install(|| {
        todo.into_par_iter()
            .filter_map(|(pi, c)| {
                let p = &problems[pi];
                let base = emit_problem(p, with_trivial);
                let m = minimize(p, &base, &Solution::new(&p.id, c.clone(), None), mode, cfg);
                m.reproved.then_some(m.solution)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("unsat\n"), Some(Verdict::Proved));
        assert_eq!(parse_verdict("sat\n"), Some(Verdict::Sat));
        assert_eq!(parse_verdict("unknown\n"), Some(Verdict::Unknown));
        assert_eq!(parse_verdict("timeout\n"), Some(Verdict::Timeout));
        assert_eq!(parse_verdict("(error \"x\")\nunsat\n"), Some(Verdict::Error));
        assert_eq!(parse_verdict("unsat\n(error \"late\")\n"), Some(Verdict::Error));
        assert_eq!(parse_verdict(""), None);
    }

    #[test]
    fn perf_output_parsing() {
        assert_eq!(parse_perf("123456,,instructions:u,100.00,,\n"), Some(123456));
        assert_eq!(parse_perf("<not supported>,,instructions,,\n"), None);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::z3();
        assert!(c.validate().is_ok());
        c.timeout = Duration::ZERO;
        assert!(matches!(c.validate(), Err(ConfigError::ZeroTimeout)));
        let mut c = SolverConfig::cvc5();
        c.args.retain(|a| !a.contains("{file}"));
        assert!(matches!(c.validate(), Err(ConfigError::NoFilePlaceholder)));
        let c = SolverConfig::z3();
        assert_eq!(
            c.expand_args(Path::new("/tmp/a.smt2")),
            vec!["-smt2", "-t:200", "/tmp/a.smt2"]
        );
        assert_eq!(SolverConfig::vampire().expand_args(Path::new("f"))[5], "1");
    }

    fn sol(p: &str, c: &str, speed: Option<u64>) -> Solution {
        Solution::new(p, c.parse().unwrap(), speed)
    }

    #[test]
    fn selection_keeps_shortest_and_fastest() {
        let mut db = SolutionDb::new();
        let long = sol("A", "(= (+ x 0) x) | (= x x)", Some(50));
        let short = sol("A", "(= x x)", Some(90));
        let tie = sol("A", "(= y y)", Some(10));
        let s = db.select(0, [long.clone()]);
        assert_eq!(s.new_problems, 1);
        db.select(1, [short.clone(), tie.clone(), short.clone()]);
        let e = db.get("A").unwrap();
        assert_eq!(e.shortest, short);
        assert_eq!(e.fastest.as_ref(), Some(&tie));
        assert_eq!(db.history().len(), 3);
        let reordered = {
            let mut d = SolutionDb::new();
            d.select(0, [tie, short.clone(), long]);
            d
        };
        assert_eq!(reordered.get("A").unwrap().shortest, short);
    }

    #[test]
    fn jsonl_round_trip_and_tamper_detection() {
        let mut db = SolutionDb::new();
        db.select(0, [sol("A", "(= x x)", None), sol("B", "(<= 0 x) | (= y y)", Some(3))]);
        let text = db.to_jsonl();
        let back = SolutionDb::from_jsonl(&text).unwrap();
        assert_eq!(back, db);
        assert_eq!(back.to_jsonl(), text);
        let tampered = text.replace("(= x x)", "(= x y)");
        assert!(matches!(
            SolutionDb::from_jsonl(&tampered),
            Err(DbError::Format { line: 2, .. })
        ));
        assert!(SolutionDb::from_jsonl("{\"format\":\"other\",\"version\":1}").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db.jsonl");
        db.save(&path).unwrap();
        assert_eq!(SolutionDb::load(&path).unwrap(), db);
    }

    #[test]
    fn empty_batch() {
        let out = run_batch(&[], &[], &SolverConfig::z3(), true, false);
        assert_eq!(out.summary.pairs, 0);
        assert_eq!(out.summary.solved, 0);
        assert!(out.results.is_empty());
    }

    #[test]
    fn missing_solver_is_an_error_verdict() {
        let mut cfg = SolverConfig::z3();
        cfg.program = "/nonexistent/solver".into();
        let r = run_script("(check-sat)", &cfg);
        assert_eq!(r.verdict, Verdict::Error);
        assert!(!cfg.available());
    }
}
