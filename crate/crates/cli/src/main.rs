use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use induct_core::baselines::{load_benchmark, run_comparison, Heuristic, ProverColumn};
use induct_core::driver::{
    export_training, ingest, init_run, iterate, mock_predict, render_report, replay, report, RunConfig, RunDir,
};
use induct_core::gen::GenConfig;
use induct_core::predicate::Candidate;
use induct_core::problem::Problem;
use induct_core::prover::{check_candidate, SolverConfig};
use induct_core::smt::emit_problem;

#[derive(Parser)]
#[command(
    name = "induct",
    version,
    about = "Invent induction predicates for program-equivalence problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArg {
    /// Run directory.
    #[arg(long, default_value = "run")]
    run: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Add problem files (`ID: small = fast` per line) to a run.
    Ingest {
        #[command(flatten)]
        run: RunArg,
        files: Vec<PathBuf>,
    },
    /// Brute-force initial run; seeds the solution database.
    Init {
        #[command(flatten)]
        run: RunArg,
        /// TOML run configuration (default: built-in settings).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-call solver timeout, e.g. `200ms`.
        #[arg(long, value_parser = humantime::parse_duration)]
        timeout: Option<Duration>,
        /// Use the reduced generation scale.
        #[arg(long)]
        reduced: bool,
        /// Extra candidates to try first (`ID<TAB>candidate` per line).
        #[arg(long)]
        inject: Option<PathBuf>,
    },
    /// Write the training file the next iteration would use.
    ExportTrain {
        #[command(flatten)]
        run: RunArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run self-learning iterations.
    Iterate {
        #[command(flatten)]
        run: RunArg,
        #[arg(long, default_value_t = 1)]
        iterations: u32,
    },
    /// Recompute the database from logged predictor outputs and compare.
    Replay {
        #[command(flatten)]
        run: RunArg,
    },
    /// Progress per iteration.
    Report {
        #[command(flatten)]
        run: RunArg,
        /// Count solutions containing this predicate or text.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Compare hand-written induction heuristics across provers.
    Baseline {
        /// Problem files in the DSL.
        #[arg(long = "problems")]
        problems: Vec<PathBuf>,
        /// Directory of benchmark `.smt2` files.
        #[arg(long)]
        bench_dir: Option<PathBuf>,
        /// `n=0`..`n=9` or `strong`; repeatable or comma separated.
        #[arg(long = "heuristic", value_delimiter = ',', default_values_t = ["n=0".to_string(), "n=1".into(), "n=4".into(), "strong".into()])]
        heuristics: Vec<String>,
        #[arg(long, value_parser = humantime::parse_duration, default_value = "10s")]
        timeout: Duration,
        /// z3, cvc5, vampire or a path to a z3-compatible binary.
        #[arg(long, value_delimiter = ',', default_value = "z3")]
        provers: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Reference predictor that replays training solutions.
    MockPredictor {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 240)]
        beam: usize,
        /// Loop-letter offsets for extra mutated outputs.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        shift: Vec<i32>,
    },
    /// Print the SMT script of a problem, optionally with a candidate.
    Emit {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        candidate: Option<String>,
        #[arg(long)]
        no_trivial: bool,
    },
    /// Ask the solver whether a candidate proves a problem.
    Check {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        candidate: String,
        #[arg(long, value_parser = humantime::parse_duration, default_value = "2s")]
        timeout: Duration,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn find_problem(file: &Path, id: &str) -> Result<Problem> {
    Problem::parse_file(&read(file)?)?
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| anyhow!("no problem {id} in {}", file.display()))
}

fn parse_candidate(problem: &Problem, text: &str) -> Result<Candidate> {
    let c: Candidate = text.parse().map_err(|e| anyhow!("candidate: {e}"))?;
    problem.resolve_candidate(&c).map_err(|e| anyhow!("candidate: {e}"))
}

fn prover(name: &str, timeout: Duration, workers: usize) -> ProverColumn {
    let mut cfg = match name {
        "z3" => SolverConfig::from_env(),
        "cvc5" => SolverConfig::cvc5(),
        "vampire" => SolverConfig::vampire(),
        path => SolverConfig {
            program: path.into(),
            ..SolverConfig::z3()
        },
    };
    cfg.timeout = timeout;
    cfg.workers = workers;
    ProverColumn::new(name, cfg)
}

fn run_config(dir: &RunDir) -> Result<RunConfig> {
    if dir.config().exists() {
        Ok(dir.load_config()?)
    } else {
        let mut cfg = RunConfig::default();
        cfg.apply_env();
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Cmd::Ingest { run, files } => {
            let n = ingest(&RunDir::new(run.run), &files)?;
            println!("{n} problems");
        }
        Cmd::Init {
            run,
            config,
            seed,
            timeout,
            reduced,
            inject,
        } => {
            let dir = RunDir::new(run.run);
            let mut cfg = match config {
                Some(p) => RunConfig::from_toml(&read(&p)?)?,
                None => RunConfig::default(),
            };
            cfg.apply_env();
            if reduced {
                cfg.gen = GenConfig {
                    seed: cfg.gen.seed,
                    ..GenConfig::reduced()
                };
            }
            if let Some(s) = seed {
                cfg.seed = s;
                cfg.gen.seed = s;
            }
            if let Some(t) = timeout {
                cfg.solver.timeout = t;
            }
            let mut extra = Vec::new();
            if let Some(f) = inject {
                for line in read(&f)?
                    .lines()
                    .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                {
                    let (id, c) = line
                        .split_once('\t')
                        .ok_or_else(|| anyhow!("expected ID<TAB>candidate: {line}"))?;
                    let c: Candidate = c.parse().map_err(|e| anyhow!("{id}: {e}"))?;
                    extra.push((id.trim().to_string(), c));
                }
            }
            let r = init_run(&dir, &cfg, &extra)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Cmd::ExportTrain { run, out } => {
            let dir = RunDir::new(run.run);
            let cfg = run_config(&dir)?;
            let next = dir.iterations().last().map_or(1, |n| n + 1);
            let lines = export_training(&dir.load_db()?, &dir.load_problems()?, &cfg, next);
            std::fs::write(&out, lines.iter().map(|l| format!("{l}\n")).collect::<String>())?;
            println!("{} lines", lines.len());
        }
        Cmd::Iterate { run, iterations } => {
            let dir = RunDir::new(run.run);
            let cfg = run_config(&dir)?;
            for _ in 0..iterations {
                let r = iterate(&dir, &cfg)?;
                println!(
                    "iteration {}: {} new solutions, {} solved, validity {:.2}",
                    r.iteration, r.new_solutions, r.cumulative_solved, r.validity_rate
                );
            }
        }
        Cmd::Replay { run } => {
            let dir = RunDir::new(run.run);
            let db = replay(&dir, &run_config(&dir)?)?;
            println!("replay matches: {} problems solved", db.len());
        }
        Cmd::Report { run, pattern, json } => {
            let dir = RunDir::new(run.run);
            let rows = report(&dir.load_db()?, pattern.as_deref(), dir.iterations().last().copied());
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", render_report(&rows));
            }
        }
        Cmd::Baseline {
            problems,
            bench_dir,
            heuristics,
            timeout,
            provers,
            workers,
            csv,
        } => {
            let mut own = Vec::new();
            for f in &problems {
                own.extend(Problem::parse_file(&read(f)?)?);
            }
            let bench = load_benchmark(bench_dir.as_deref(), &own)?;
            if bench.is_empty() {
                bail!("no problems given (use --problems or --bench-dir)");
            }
            let hs = heuristics
                .iter()
                .map(|h| h.parse::<Heuristic>())
                .collect::<Result<Vec<_>, _>>()?;
            let cols: Vec<ProverColumn> = provers.iter().map(|p| prover(p, timeout, workers)).collect();
            let table = run_comparison(&bench, &hs, &cols);
            print!("{}", table.render());
            if let Some(path) = csv {
                std::fs::write(&path, table.to_csv())?;
            }
        }
        Cmd::MockPredictor {
            train,
            problems,
            out,
            beam,
            shift,
        } => {
            let text = mock_predict(&read(&train)?, &read(&problems)?, beam, &shift);
            std::fs::write(&out, text)?;
        }
        Cmd::Emit {
            problems,
            id,
            candidate,
            no_trivial,
        } => {
            let p = find_problem(&problems, &id)?;
            let mut smt = emit_problem(&p, !no_trivial);
            let tag = match candidate {
                Some(c) => {
                    let c = parse_candidate(&p, &c)?;
                    smt = smt.with_candidate(&p, &c)?;
                    induct_core::smt::candidate_hash(&c)
                }
                None => "none".into(),
            };
            print!("{}", smt.render(&tag));
        }
        Cmd::Check {
            problems,
            id,
            candidate,
            timeout,
        } => {
            let p = find_problem(&problems, &id)?;
            let c = parse_candidate(&p, &candidate)?;
            let mut cfg = SolverConfig::from_env();
            cfg.timeout = timeout;
            let r = check_candidate(&p, &emit_problem(&p, true), &c, &cfg);
            println!("{:?} in {} ms", r.verdict, r.elapsed.as_millis());
            if !r.diagnostics.is_empty() {
                eprintln!("{}", r.diagnostics);
            }
        }
    }
    Ok(())
}
