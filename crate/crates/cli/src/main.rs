mod experiment;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use qsim_core::config::{Detail, ProtocolConfig, RunReport, SimConfig};
use qsim_core::consensus::ConsensusSetup;
use qsim_core::graph::{is_compact, is_edge_dense, is_expanding, sample_gnp, CheckOptions, Graph, PropertyReport};
use qsim_core::stats::wilson;
use qsim_core::transcript::RecordMode;
use qsim_core::SimError;
use rayon::prelude::*;

use experiment::{Check, CoinStats, Estimate, Experiment, GraphSource};

#[derive(Parser)]
#[command(name = "qsim", version, about = "Crash-tolerant consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario per seed and report each run.
    Run(Common),
    /// Run every (n, seed) pair and emit one row per run.
    Sweep(Common),
    /// Estimate how often all survivors share a coin value.
    CoinStats(Common),
    /// Check expansion, density and compactness of a graph.
    CheckGraphs(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Config(String),
    Invariant(String),
    Other(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => Failure::Config(e.to_string()),
            // A run that never finishes has failed liveness.
            SimError::RoundCap { .. } => Failure::Invariant(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

const CSV_HEADER: &str = "n,t,adversary,seed,phases,rounds,bits_amortized,qubits_amortized,agreed,valid";

fn csv_row(r: &RunReport) -> String {
    let (phases, agreed, valid) = match &r.detail {
        Detail::Consensus {
            phases, agreed, valid, ..
        } => (phases.to_string(), agreed.to_string(), valid.to_string()),
        _ => (String::new(), String::new(), String::new()),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.n, r.t, r.adversary, r.seed, phases, r.rounds, r.bits_amortized, r.qubits_amortized, agreed, valid
    )
}

fn csv(reports: &[RunReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&csv_row(r));
        s.push('\n');
    }
    s
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    if jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Other(e.to_string()))
}

/// Runs the configurations in parallel, returning reports in input order.
fn run_all(configs: Vec<SimConfig>, jobs: usize) -> Result<Vec<RunReport>, Failure> {
    let mut setups: BTreeMap<usize, Arc<ConsensusSetup>> = BTreeMap::new();
    for c in &configs {
        if matches!(c.protocol, ProtocolConfig::Consensus { .. }) && !setups.contains_key(&c.n) {
            setups.insert(c.n, ConsensusSetup::new(c.n, c.consensus_params()?)?);
        }
    }
    let results: Vec<Result<RunReport, SimError>> = pool(jobs)?.install(|| {
        configs
            .par_iter()
            .map(|c| c.run_with_setup(setups.get(&c.n).cloned()))
            .collect()
    });
    results.into_iter().map(|r| r.map_err(Failure::from)).collect()
}

fn seeds(exp: &experiment::Seeds) -> Vec<u64> {
    let (kept, dropped) = exp.resolve();
    if !dropped.is_empty() {
        eprintln!("warning: ignoring duplicate seeds {dropped:?}");
    }
    kept
}

fn run_reports(reports: &[RunReport], format: Format) -> (String, bool) {
    let ok = reports.iter().all(|r| r.invariants_hold);
    let text = match format {
        Format::Json => json(&serde_json::json!({ "invariants_hold": ok, "runs": reports })),
        Format::Csv => csv(reports),
    };
    (text, ok)
}

fn coin_stats(reports: &[RunReport], n: usize) -> Result<CoinStats, Failure> {
    let trials = reports.len() as u64;
    if trials == 0 {
        return Err(Failure::Config("coin-stats needs at least one seed".into()));
    }
    let (mut zero, mut one, mut same) = (0u64, 0u64, 0u64);
    let mut d_alpha = (0, 0);
    for r in reports {
        if let Detail::Coin {
            d,
            alpha,
            all_same,
            common_bit,
            ..
        } = r.detail
        {
            d_alpha = (d, alpha);
            same += u64::from(all_same);
            zero += u64::from(common_bit == Some(0));
            one += u64::from(common_bit == Some(1));
        }
    }
    let estimate = |k: u64| {
        let (lo, hi) = wilson(k, trials, 1.96);
        Estimate {
            estimate: k as f64 / trials as f64,
            lo,
            hi,
        }
    };
    let t = trials as f64;
    Ok(CoinStats {
        n,
        d: d_alpha.0,
        alpha: d_alpha.1,
        trials,
        crashes: reports.iter().map(|r| r.crashes as f64).sum::<f64>() / t,
        p_all_zero: estimate(zero),
        p_all_one: estimate(one),
        p_all_same: estimate(same),
        mean_qubits_per_process: reports.iter().map(|r| r.qubits_amortized).sum::<f64>() / t,
        rounds: reports[0].rounds,
    })
}

fn load_graph(source: &GraphSource) -> Result<Graph, Failure> {
    Ok(match source {
        GraphSource::Path { path } => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{path}: {e}")))?;
            Graph::from_json(&text)?
        }
        GraphSource::Random { gnp } => {
            if !(0.0..=1.0).contains(&gnp.y) {
                return Err(Failure::Config(format!("edge probability {} outside [0, 1]", gnp.y)));
            }
            sample_gnp(gnp.n, gnp.y, gnp.seed)
        }
        GraphSource::Inline(v) => Graph::from_json(&v.to_string())?,
    })
}

fn execute(cmd: &str, args: &Common) -> Result<(String, bool), Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let mut exp: Experiment = serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
    if exp.command() != cmd {
        return Err(Failure::Config(format!(
            "config is for `{}`, not `{cmd}`",
            exp.command()
        )));
    }
    if let Ok(v) = std::env::var("QSIM_SEED") {
        let seed = v
            .parse::<u64>()
            .map_err(|_| Failure::Config(format!("QSIM_SEED={v} is not an unsigned integer")))?;
        if let Some(s) = exp.seeds_mut() {
            *s = experiment::Seeds::List(vec![seed]);
        }
    }
    if args.format == Format::Csv && matches!(exp, Experiment::CoinStats { .. } | Experiment::CheckGraphs { .. }) {
        return Err(Failure::Config(format!("`{cmd}` only writes JSON")));
    }

    match exp {
        Experiment::Run {
            n,
            t,
            seeds: s,
            protocol,
            adversary,
            round_cap,
            record,
        } => {
            let configs = seeds(&s)
                .into_iter()
                .map(|seed| SimConfig {
                    n,
                    t,
                    seed,
                    protocol: protocol.clone(),
                    adversary: adversary.clone(),
                    round_cap,
                    record,
                })
                .collect();
            Ok(run_reports(&run_all(configs, args.jobs)?, args.format))
        }
        Experiment::Sweep {
            n: ns,
            t,
            seeds: s,
            protocol,
            adversary,
            round_cap,
        } => {
            let seeds = seeds(&s);
            let mut ns = ns;
            ns.sort_unstable();
            ns.dedup();
            let configs = ns
                .iter()
                .flat_map(|&n| seeds.iter().map(move |&seed| (n, seed)))
                .map(|(n, seed)| SimConfig {
                    n,
                    t: t.for_n(n),
                    seed,
                    protocol: protocol.clone(),
                    adversary: adversary.clone(),
                    round_cap,
                    record: RecordMode::Digest,
                })
                .collect::<Vec<_>>();
            let mut reports = run_all(configs, args.jobs)?;
            reports.sort_by_key(|r| (r.n, r.seed));
            Ok(run_reports(&reports, args.format))
        }
        Experiment::CoinStats {
            n,
            t,
            d,
            alpha,
            relaxed,
            seeds: s,
            adversary,
        } => {
            let configs = seeds(&s)
                .into_iter()
                .map(|seed| SimConfig {
                    n,
                    t,
                    seed,
                    protocol: ProtocolConfig::Coin { d, alpha, relaxed },
                    adversary: adversary.clone(),
                    round_cap: None,
                    record: RecordMode::Off,
                })
                .collect();
            let stats = coin_stats(&run_all(configs, args.jobs)?, n)?;
            Ok((json(&stats), true))
        }
        Experiment::CheckGraphs {
            graph,
            checks,
            budget,
            trials,
            seed,
        } => {
            let g = load_graph(&graph)?;
            let defaults = CheckOptions::default();
            let opts = CheckOptions {
                budget: budget.unwrap_or(defaults.budget),
                trials: trials.unwrap_or(defaults.trials),
                seed,
            };
            let reports: Vec<PropertyReport> = pool(args.jobs)?.install(|| {
                checks
                    .par_iter()
                    .map(|c| match *c {
                        Check::Expanding { l } => is_expanding(&g, l, &opts),
                        Check::EdgeDense { l, a, b } => is_edge_dense(&g, l, a, b, &opts),
                        Check::Compact { l, eps, delta } => is_compact(&g, l, eps, delta, &opts),
                    })
                    .collect()
            });
            Ok((json(&reports), true))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Command::Run(a) => ("run", a),
        Command::Sweep(a) => ("sweep", a),
        Command::CoinStats(a) => ("coin-stats", a),
        Command::CheckGraphs(a) => ("check-graphs", a),
    };
    let (text, ok) = match execute(cmd, args) {
        Ok(r) => r,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
        Err(Failure::Invariant(m)) => {
            eprintln!("invariant violated: {m}");
            return ExitCode::from(3);
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
    };
    let written = match &args.out {
        Some(path) => fs::write(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(1);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        eprintln!("invariant violated in at least one run");
        ExitCode::from(3)
    }
}
