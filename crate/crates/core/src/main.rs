use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use groundinst::engine::protocol::ENDPOINT_ENV;
use groundinst::engine::server::{RandomPolicyServer, ServerHandle};
use groundinst::engine::{Endpoint, ExternalPolicy, PassConfig};
use groundinst::pipeline::coverage::{coverage_eval, references, DEFAULT_GRID};
use groundinst::pipeline::{
    attempt_seed, run_attempt, self_improve_loop, split_dataset, sweep, write_report, AttemptConfig, LoopConfig,
    LoopState, PolicySource, RemotePolicy, SweepConfig,
};
use groundinst::solver::{decide_ground, Budget};
use groundinst::store::{replay_instances, SolutionStore};
use groundinst::tptp::{load_dir, Problem};

#[derive(Parser)]
#[command(name = "groundinst", version, about = "Instantiation-based proving with random or learned grounding")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Random,
    External,
}

#[derive(Args, Clone)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value = "random")]
    policy: PolicyKind,
    /// tcp://host:port, host:port or exec:<command>; defaults to $GROUNDINST_POLICY_ENDPOINT.
    #[arg(long)]
    endpoint: Option<String>,
    /// Checkpoint reference recorded for an external policy.
    #[arg(long, default_value = "remote")]
    checkpoint: String,
}

#[derive(Args, Clone)]
struct AttemptArgs {
    /// Solver budget per attempt, e.g. 30s, 500ms, 2m.
    #[arg(long, default_value = "30s", value_parser = parse_duration)]
    budget: f64,
    /// Samples per clause for the deepening and grounding passes.
    #[arg(long, value_parser = parse_samples)]
    samples: Option<(usize, usize)>,
    #[arg(long)]
    no_minimize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Ground and solve one problem.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        attempt: AttemptArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        run: u64,
        /// Append the record to this store.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Seeded runs over every problem of a directory; resumes from the store.
    Sweep {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "solutions.jsonl")]
        store: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        attempt: AttemptArgs,
    },
    /// Family-level train/dev/test split.
    Split {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-improvement loop against an external policy server.
    Loop {
        dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        attempts: usize,
        #[arg(long, default_value_t = 1000)]
        train_samples: usize,
        #[arg(long, default_value_t = 10)]
        eval_every: u64,
        #[arg(long, default_value_t = 1)]
        iterations: u64,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long)]
        restart_fresh_model: bool,
        #[arg(long, default_value = "loop_state.json")]
        state: PathBuf,
        #[arg(long, default_value = "loop_solutions.jsonl")]
        store: PathBuf,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        endpoint: Option<String>,
        #[command(flatten)]
        attempt: AttemptArgs,
    },
    /// Coverage of stored proofs by a policy's proposals.
    Coverage {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID.to_vec())]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Cumulative tables, per-problem statistics and a plot.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Check that every solved record replays to an unsatisfiable ground set.
    Replay {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Serve the random policy over the wire protocol.
    ServeRandom {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// Speak the protocol on stdin/stdout instead.
        #[arg(long)]
        stdio: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_duration(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = if let Some(v) = s.strip_suffix("ms") {
        (v, 0.001)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1.0)
    } else if let Some(v) = s.strip_suffix('m') {
        (v, 60.0)
    } else {
        (s, 1.0)
    };
    num.trim().parse::<f64>().map(|v| v * scale).map_err(|e| format!("bad duration `{s}`: {e}"))
}

fn parse_samples(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two counts, e.g. 25,5")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

type CliResult<T> = std::result::Result<T, String>;

fn load(path: &Path) -> CliResult<Vec<Problem>> {
    if path.is_dir() {
        load_dir(path).map_err(|e| e.to_string())
    } else {
        Problem::from_file(path).map(|p| vec![p]).map_err(|e| e.to_string())
    }
}

fn connect(endpoint: Option<&str>) -> CliResult<ExternalPolicy> {
    let ep = match endpoint {
        Some(s) => Endpoint::parse(s).map_err(|e| e.to_string())?,
        None => Endpoint::from_env().ok_or_else(|| format!("no --endpoint given and {ENDPOINT_ENV} is unset"))?,
    };
    ExternalPolicy::connect(&ep).map_err(|e| e.to_string())
}

fn source(args: &PolicyArgs) -> CliResult<PolicySource> {
    Ok(match args.policy {
        PolicyKind::Random => PolicySource::Random,
        PolicyKind::External => {
            PolicySource::External { client: connect(args.endpoint.as_deref())?, checkpoint: args.checkpoint.clone() }
        }
    })
}

fn attempt_config(args: &AttemptArgs, defaults: PassConfig) -> AttemptConfig {
    let passes = match args.samples {
        Some((a, b)) => defaults.with_samples(a, b),
        None => defaults,
    };
    AttemptConfig { passes, budget_secs: args.budget, minimize: !args.no_minimize }
}

fn emit(json_mode: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    if json_mode {
        println!("{value}");
    } else {
        print!("{}", text());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let js = cli.json;
    match cli.command {
        Command::Solve { file, policy, attempt, seed, run, store } => {
            let problems = load(&file)?;
            let src = source(&policy)?;
            let config = attempt_config(&attempt, src.passes());
            for p in &problems {
                let s = attempt_seed(seed, run, &p.name);
                let mut pol = src.policy(s);
                let record = run_attempt(p, &mut pol, src.tag(), s, run, &config);
                if let Some(path) = &store {
                    SolutionStore::new(path).append(std::slice::from_ref(&record)).map_err(|e| e.to_string())?;
                }
                emit(js, serde_json::to_value(&record).unwrap(), || {
                    let mut s = format!("{}: {} ({:.3}s)\n", record.problem, record.status, record.wall_time_s);
                    if let Some(r) = &record.reason {
                        s.push_str(&format!("  reason: {r}\n"));
                    }
                    for i in &record.instances {
                        s.push_str(&format!("  {} <- {}\n", i.ground_clause, i.parent));
                    }
                    s
                });
            }
        }
        Command::Sweep { dir, runs, seed, store, policy, attempt } => {
            let problems = load(&dir)?;
            let src = source(&policy)?;
            let config = SweepConfig { runs, base_seed: seed, attempt: attempt_config(&attempt, src.passes()) };
            let report = sweep(&problems, &src, &config, &SolutionStore::new(&store)).map_err(|e| e.to_string())?;
            emit(js, serde_json::to_value(&report).unwrap(), || {
                let mut s = String::from("run\tattempted\tsolved\tcumulative\n");
                for r in &report.rows {
                    s.push_str(&format!("{}\t{}\t{}\t{}\n", r.run, r.attempted, r.solved, r.cumulative));
                }
                s.push_str(&format!(
                    "max ground instances per input clause: {} (bound {})\n",
                    report.max_instances_per_clause, report.instance_bound
                ));
                s
            });
        }
        Command::Split { dir, seed, out } => {
            let problems = load(&dir)?;
            let split = split_dataset(&problems, seed).map_err(|e| e.to_string())?;
            let value = serde_json::to_value(&split).unwrap();
            if let Some(out) = out {
                std::fs::write(&out, serde_json::to_string_pretty(&split).unwrap()).map_err(|e| e.to_string())?;
            }
            emit(js, value, || {
                format!(
                    "train {} families, dev {}, test {}\ndev: {:?}\ntest: {:?}\n",
                    split.train.len(),
                    split.dev.len(),
                    split.test.len(),
                    split.dev,
                    split.test
                )
            });
        }
        Command::Loop {
            dir,
            attempts,
            train_samples,
            eval_every,
            iterations,
            steps,
            restart_fresh_model,
            state,
            store,
            split_seed,
            seed,
            endpoint,
            attempt,
        } => {
            let problems = load(&dir)?;
            let split = split_dataset(&problems, split_seed).map_err(|e| e.to_string())?;
            let mut remote = RemotePolicy::new(connect(endpoint.as_deref())?, "remote");
            let mut st = LoopState::load(&state).map_err(|e| e.to_string())?.unwrap_or_else(|| LoopState::new(attempts, train_samples));
            st.attempts_per_iter = attempts;
            st.train_samples_per_iter = train_samples;
            let config = LoopConfig {
                iterations,
                eval_every,
                train_steps: steps,
                base_seed: seed,
                attempt: attempt_config(&attempt, PassConfig::external()),
                restart_fresh_model,
            };
            let st = self_improve_loop(st, &problems, &split, &mut remote, &config, Some(&state), Some(&SolutionStore::new(&store)))
                .map_err(|e| e.to_string())?;
            emit(
                js,
                json!({"iteration": st.iteration, "solved": st.solved_count(), "checkpoint": st.checkpoint, "evals": st.evals, "restarts": st.restarts}),
                || {
                    let mut s = format!("iteration {}: {} problems solved\n", st.iteration, st.solved_count());
                    for e in &st.evals {
                        s.push_str(&format!("  eval @{}: {}/{}\n", e.iteration, e.solved, e.attempted));
                    }
                    s
                },
            );
        }
        Command::Coverage { store, corpus, grid, seed, policy } => {
            let problems = load(&corpus)?;
            let records = SolutionStore::new(&store).read_all().map_err(|e| e.to_string())?;
            let refs = references(&problems, &records);
            let src = source(&policy)?;
            let table = coverage_eval(&refs, |p| src.policy(attempt_seed(seed, 0, &p.name)), &src.passes(), &grid)
                .map_err(|e| e.to_string())?;
            emit(js, serde_json::to_value(&table).unwrap(), || {
                format!("{} problems with reference proofs\n{}", table.problems.len(), table.to_markdown())
            });
        }
        Command::Report { store, out } => {
            let records = SolutionStore::new(&store).read_all().map_err(|e| e.to_string())?;
            let report = write_report(&records, &out).map_err(|e| e.to_string())?;
            emit(js, serde_json::to_value(&report).unwrap(), || {
                let mut s = report.cumulative_markdown();
                for f in &report.files {
                    s.push_str(&format!("wrote {}\n", f.display()));
                }
                s
            });
        }
        Command::Replay { store, corpus } => {
            let problems = load(&corpus)?;
            let records = SolutionStore::new(&store).read_all().map_err(|e| e.to_string())?;
            let mut checked = 0;
            let mut failures = Vec::new();
            for r in records.iter().filter(|r| r.is_solved()) {
                let Some(p) = problems.iter().find(|p| p.name == r.problem) else {
                    failures.push(format!("{}: not in corpus", r.problem));
                    continue;
                };
                checked += 1;
                match replay_instances(r, p) {
                    Ok(instances) => {
                        let ground: Vec<_> = p.ground_clauses().cloned().chain(instances).collect();
                        match decide_ground(&ground, Budget::seconds(30.0)) {
                            Ok(o) if o.verdict.is_unsat() => {}
                            Ok(o) => failures.push(format!("{} run {}: replayed set is {}", r.problem, r.run, o.verdict.label())),
                            Err(e) => failures.push(format!("{} run {}: {e}", r.problem, r.run)),
                        }
                    }
                    Err(e) => failures.push(format!("{} run {}: {e}", r.problem, r.run)),
                }
            }
            emit(js, json!({"checked": checked, "failures": failures}), || {
                let mut s = format!("{checked} solved records checked, {} failures\n", failures.len());
                for f in &failures {
                    s.push_str(&format!("  {f}\n"));
                }
                s
            });
            if !failures.is_empty() {
                return Err("replay failures".into());
            }
        }
        Command::ServeRandom { listen, stdio, seed } => {
            if stdio {
                let handle = ServerHandle::new(seed);
                let stdin = std::io::stdin().lock();
                handle.serve_stream(stdin, std::io::stdout().lock()).map_err(|e| e.to_string())?;
            } else {
                let server = RandomPolicyServer::bind(&listen, seed).map_err(|e| e.to_string())?;
                eprintln!("serving random policy on {}", server.local_addr().map_err(|e| e.to_string())?);
                server.serve().map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
