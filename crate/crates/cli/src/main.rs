//! `coordplan`: solve, simulate and verify coordination scenarios.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 bad input.
//! Everything is computed before anything is printed or written, so a
//! failing run leaves no partial output behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use coordplan::bandit_learning::{run_centralized, InfoState};
use coordplan::gittins::{compute_tables, ChainWorld, INDEX_TOLERANCE};
use coordplan::mdp_core::{solve, MdpWorld, DEFAULT_TOLERANCE};
use coordplan::mechanisms::{system_values, truthful_payoffs};
use coordplan::sim_harness::{
    estimate, run_check, CheckName, EpisodeTranscript, MechanismKind, Metric, MetricReport, Prepared, Scenario,
    Strategy, World,
};

#[derive(Parser)]
#[command(name = "coordplan", version, about = "Coordination mechanisms for agents with private Markov state")]
struct Cli {
    /// Worker threads for replica and trajectory parallelism.
    #[arg(long, env = "COORDPLAN_WORKERS", global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal value and policy, or index tables for chain worlds.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run episodes and write the transcript and a summary.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run a named verification check.
    Verify {
        scenario: PathBuf,
        /// truthful, budget, ir, gittins-optimal, weak-budget, learning-equiv or scaling.
        check: String,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Print index tables: Gittins tables for chains, prior indices for arms.
    Index {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run the learning mechanism on a bandit world.
    Bandit {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    mechanism: Option<String>,
    /// Sample trajectories per simulated policy.
    #[arg(long)]
    m: Option<usize>,
    /// Truncation accuracy for bandit indices.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output file (solve, index, verify) or directory (simulate, bandit).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure of a verification check, as opposed to bad input.
struct CheckFailed(String);

enum Output {
    Text(String),
    Files { stdout: String, files: Vec<(String, String)> },
}

fn load(path: &Path, opts: &Overrides) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut scenario = Scenario::from_json(&text).with_context(|| format!("invalid scenario {}", path.display()))?;
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    if let Some(r) = opts.replicas {
        scenario.replicas = r;
    }
    if let Some(h) = opts.horizon {
        if h == 0 {
            bail!("--horizon must be at least 1");
        }
        scenario.horizon = Some(h);
    }
    if let Some(name) = &opts.mechanism {
        scenario.mechanism = name.parse::<MechanismKind>()?;
    }
    if let Some(m) = opts.m {
        if m == 0 {
            bail!("--m must be at least 1");
        }
        scenario.m = Some(m);
    }
    if let Some(eps) = opts.epsilon {
        match &mut scenario.world {
            World::Bandit(b) => b.epsilon = eps,
            _ => bail!("--epsilon only applies to bandit worlds"),
        }
    }
    if let World::Bandit(b) = &scenario.world {
        b.validate()?;
    }
    Ok(scenario)
}

fn solve_mdp(world: &MdpWorld) -> Result<String> {
    let model = &world.model;
    let (_, policy) = solve(model, DEFAULT_TOLERANCE)?;
    // exact evaluation of the greedy policy rather than the iterate
    let v = system_values(model, &policy);
    let mut out = String::new();
    for s in model.states() {
        let labels = model.state_labels(&s).join(",");
        let action = model.action_labels(policy.get(model, &s)).join(",");
        let mark = if s == world.initial { "  (initial)" } else { "" };
        out.push_str(&format!("V*({{{labels}}}) = {:.9}  π* = ({action}){mark}\n", v[model.state_index(&s)]));
    }
    Ok(out)
}

fn index_tables(world: &ChainWorld) -> Result<String> {
    let tables = compute_tables(world, INDEX_TOLERANCE)?;
    let mut out = String::from("agent,state,index,reward\n");
    for (table, chain) in tables.iter().zip(&world.chains) {
        for (entry, reward) in table.entries(chain).iter().zip(&chain.reward) {
            out.push_str(&format!("{},{},{:.12},{}\n", entry.agent, entry.state, entry.index, reward));
        }
    }
    Ok(out)
}

fn cmd_solve(scenario: &Scenario) -> Result<String> {
    match &scenario.world {
        World::Mdp(w) => solve_mdp(w),
        World::Chains(w) => {
            let mut out = solve_mdp(&w.joint()?)?;
            out.push('\n');
            out.push_str(&index_tables(w)?);
            Ok(out)
        }
        World::Bandit(_) => cmd_index(scenario),
    }
}

fn cmd_index(scenario: &Scenario) -> Result<String> {
    match &scenario.world {
        World::Chains(w) => index_tables(w),
        World::Bandit(b) => {
            let oracle = b.oracle()?;
            let trunc = oracle.truncation();
            let mut out = format!("truncation depth H = {} (epsilon {}, r_max {})\n", trunc.depth, trunc.epsilon, trunc.r_max);
            out.push_str("agent,prior,successes/failures,mean,index\n");
            for (i, arm) in b.arms.iter().enumerate() {
                let s: InfoState = coordplan::bandit_learning::parse_prior(&arm.prior_string, b.base)?;
                out.push_str(&format!("{i},\"{}\",{s},{:.12},{:.12}\n", arm.prior_string, s.mean(), oracle.index(&s)));
            }
            Ok(out)
        }
        World::Mdp(_) => bail!("index tables need a chain or bandit world"),
    }
}

fn report_json(r: &MetricReport) -> Value {
    json!({ "mean": r.mean, "stderr": r.stderr, "ci_low": r.ci_low, "ci_high": r.ci_high, "replicas": r.replicas })
}

fn estimates(p: &Prepared, scenario: &Scenario, horizon: usize) -> Result<Value> {
    let n = p.num_agents();
    let mut metrics = vec![
        ("welfare".to_string(), Metric::Welfare),
        ("net_transfer".to_string(), Metric::NetTransfer),
        ("net_transfer_routed".to_string(), Metric::NetTransferRouted),
    ];
    for i in 0..n {
        metrics.push((format!("payoff_{i}"), Metric::AgentPayoff(i)));
        metrics.push((format!("ir_violated_{i}"), Metric::IrViolated(i)));
        metrics.push((format!("activation_share_{i}"), Metric::ActivationShare(i)));
    }
    let mut out = serde_json::Map::new();
    for (name, metric) in metrics {
        let r = estimate(p, &scenario.strategies, horizon, scenario.replicas, scenario.seed, metric)?;
        out.insert(name, report_json(&r));
    }
    Ok(Value::Object(out))
}

/// Exact expected per-period payoffs under truthful reporting, where the
/// planner's joint policy can be evaluated directly.
fn exact_payoffs(p: &Prepared, scenario: &Scenario) -> Option<Vec<f64>> {
    if scenario.strategies.iter().any(|s| *s != Strategy::Truthful) {
        return None;
    }
    let (world, planner, rule) = p.planner()?;
    let gamma = world.model.discount();
    let row = &truthful_payoffs(&world.model, &planner.policy, rule)[world.model.state_index(&world.initial)];
    Some(row.iter().map(|v| (1.0 - gamma) * v).collect())
}

fn episode_json(tr: &EpisodeTranscript) -> Value {
    let m = tr.metrics();
    json!({
        "payoffs": m.payoffs,
        "intrinsic": m.intrinsic,
        "transfers": m.transfers,
        "welfare": m.welfare,
        "net_transfer": m.net_transfer,
        "net_transfer_routed": m.net_transfer_routed,
        "ir_violations": m.ir_violations,
        "activations": m.activations,
        "comparisons": tr.comparisons().iter().sum::<u64>(),
    })
}

fn cmd_simulate(scenario: &Scenario, bandit: bool) -> Result<Output> {
    if bandit && !matches!(scenario.world, World::Bandit(_)) {
        bail!("the bandit command needs a bandit world");
    }
    let p = Prepared::new(scenario)?;
    let horizon = p.horizon();
    let tr = p.run(&scenario.strategies, horizon, scenario.seed)?;
    let mut summary = serde_json::Map::new();
    summary.insert("scenario".into(), json!(scenario.name));
    summary.insert("scenario_hash".into(), json!(p.hash()));
    summary.insert("mechanism".into(), json!(scenario.mechanism.name()));
    summary.insert("seed".into(), json!(scenario.seed));
    summary.insert("horizon".into(), json!(horizon));
    summary.insert("replicas".into(), json!(scenario.replicas));
    summary.insert("episode".into(), episode_json(&tr));
    let mut headline = format!(
        "{} ({}) seed {} horizon {}\n",
        scenario.name,
        scenario.mechanism.name(),
        scenario.seed,
        horizon
    );
    let m = tr.metrics();
    for (i, pay) in m.payoffs.iter().enumerate() {
        headline.push_str(&format!("agent {i}: discounted payoff {pay:.6} (episode)\n"));
    }
    if let Some(exact) = exact_payoffs(&p, scenario) {
        for (i, x) in exact.iter().enumerate() {
            headline.push_str(&format!("agent {i}: expected per-period payoff {x:.9} (exact)\n"));
        }
        summary.insert("expected_per_period_payoff".into(), json!(exact));
    }
    if let (World::Bandit(b), Some(learning)) = (&scenario.world, tr.learning()) {
        let central = run_centralized(b, horizon, scenario.seed, &b.oracle()?)?;
        let ours: Vec<usize> = learning.activations().into_iter().flatten().collect();
        let matches = ours == central;
        headline.push_str(&format!("decisions match the centralized planner: {matches}\n"));
        summary.insert("centralized_match".into(), json!(matches));
        let frontier: usize = learning.records.iter().map(|r| r.frontier_requests).sum();
        summary.insert("frontier_requests".into(), json!(frontier));
        for i in 0..b.arms.len() {
            headline.push_str(&format!(
                "arm {i}: activation share {:.4}\n",
                m.activations[i] as f64 / horizon as f64
            ));
        }
    }
    if scenario.replicas >= 2 {
        let est = estimates(&p, scenario, horizon)?;
        if let Some(w) = est.get("welfare") {
            headline.push_str(&format!(
                "welfare {:.6}, 95% CI [{:.6}, {:.6}] over {} replicas\n",
                w["mean"].as_f64().unwrap_or(f64::NAN),
                w["ci_low"].as_f64().unwrap_or(f64::NAN),
                w["ci_high"].as_f64().unwrap_or(f64::NAN),
                scenario.replicas
            ));
        }
        summary.insert("estimates".into(), est);
    }
    let summary = serde_json::to_string_pretty(&Value::Object(summary))? + "\n";
    Ok(Output::Files {
        stdout: headline,
        files: vec![("transcript.csv".into(), tr.to_csv()), ("summary.json".into(), summary)],
    })
}

fn cmd_verify(scenario: &Scenario, check: &str) -> Result<std::result::Result<String, CheckFailed>> {
    let check: CheckName = check.parse()?;
    let report = run_check(check, scenario)?;
    let text = report.to_string();
    Ok(if report.passed { Ok(text) } else { Err(CheckFailed(text)) })
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit(output: Output, out: Option<&Path>) -> Result<()> {
    match output {
        Output::Text(text) => match out {
            Some(path) => write_atomic(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        },
        Output::Files { stdout, files } => {
            match out {
                Some(dir) => {
                    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
                    for (name, contents) in &files {
                        write_atomic(&dir.join(name), contents)?;
                    }
                }
                None => {
                    if let Some((_, summary)) = files.iter().find(|(n, _)| n == "summary.json") {
                        print!("{stdout}{summary}");
                        return Ok(());
                    }
                }
            }
            print!("{stdout}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("worker count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let (output, out) = match &cli.command {
        Command::Solve { scenario, opts } => (Output::Text(cmd_solve(&load(scenario, opts)?)?), opts.out.as_deref()),
        Command::Index { scenario, opts } => (Output::Text(cmd_index(&load(scenario, opts)?)?), opts.out.as_deref()),
        Command::Simulate { scenario, opts } => (cmd_simulate(&load(scenario, opts)?, false)?, opts.out.as_deref()),
        Command::Bandit { scenario, opts } => {
            let mut s = load(scenario, opts)?;
            if opts.mechanism.is_none() {
                s.mechanism = MechanismKind::Learning;
            }
            (cmd_simulate(&s, true)?, opts.out.as_deref())
        }
        Command::Verify { scenario, check, opts } => match cmd_verify(&load(scenario, opts)?, check)? {
            Ok(text) => (Output::Text(text), opts.out.as_deref()),
            Err(CheckFailed(text)) => {
                emit(Output::Text(text), opts.out.as_deref())?;
                return Ok(ExitCode::from(1));
            }
        },
    };
    emit(output, out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
