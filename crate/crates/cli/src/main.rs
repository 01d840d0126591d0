//! `capkit`: discovery runs, verification, the benchmark sweep and file
//! checks from the command line.
//!
//! Exit status is 0 when everything finished (models fully resolved, checks
//! passed), 2 when a run finished only partially, 1 on errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use capkit_core::agents::AgentHandle;
use capkit_core::domains::Bundled;
use capkit_core::experiment::{
    bench_stats, discover, read_evidence, run_bench, size_suite, write_artifacts, RunConfig,
    BENCH_INSTANCES, DEFAULT_SEED, DEFAULT_TRACES, EVIDENCE_FILE, MODEL_FILE,
};
use capkit_core::io::parse_model;
use capkit_core::oracle::{
    check_consistency, check_local_connectivity_on, check_maximal_consistency,
    check_realizability_on, StateGraph, VerificationReport, DEFAULT_STATE_BUDGET,
};
use capkit_core::{parse_domain, parse_instance};

#[derive(Parser)]
#[command(
    name = "capkit",
    version,
    about = "Discover the capabilities of black-box grid-world agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest traces, induce capabilities and complete them with queries.
    Discover(RunArgs),
    /// Check a saved model against its evidence and the simulator.
    Verify(VerifyArgs),
    /// Run a benchmark sweep into one statistics file.
    Bench(BenchArgs),
    /// Parse domain, instance, run-config or model files and report errors.
    ParseCheck(ParseCheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Search,
    Policy,
}

impl AgentArg {
    fn name(self) -> &'static str {
        match self {
            AgentArg::Search => "search",
            AgentArg::Policy => "policy",
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled domain name or path to a `.domain` file.
    #[arg(long)]
    domain: Option<String>,
    /// Instance file; without one a field is generated.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    grid: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    agent: Option<AgentArg>,
    /// Number of tasks handed to the agent.
    #[arg(long)]
    traces: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match (&self.config, &self.domain) {
            (Some(path), _) => {
                RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?
            }
            (None, Some(d)) => {
                RunConfig::new(d, self.grid.unwrap_or(5), self.seed.unwrap_or(DEFAULT_SEED))
            }
            (None, None) => bail!("either --config or --domain is required"),
        };
        if let Some(d) = &self.domain {
            c.domain = d.clone();
        }
        if let Some(p) = &self.instance {
            c.instance = Some(p.clone());
        }
        if let Some(g) = self.grid {
            c.grid = g;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(a) = self.agent {
            c.agent = a.name().into();
        }
        if let Some(t) = self.traces {
            c.traces = t;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Model to check; defaults to the run's output directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Evidence written by `discover`; defaults to the run's output directory.
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Reachable states enumerated before coverage is reported as partial.
    #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
    state_budget: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Sizes,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "sizes")]
    suite: Suite,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Tasks per 25 cells.
    #[arg(long, default_value_t = DEFAULT_TRACES)]
    traces: usize,
    /// Generated instances pooled into each row.
    #[arg(long, default_value_t = BENCH_INSTANCES)]
    instances: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct ParseCheckArgs {
    /// Files to check: `.domain`, `.inst`, `.run` or `.cap`.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Domain for instance and model files (bundled name or path).
    #[arg(long)]
    domain: Option<String>,
    /// Instance whose objects and cells a model file refers to.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    grid: u8,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Full,
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAPKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Discover(a) => run_discover(&a),
        Command::Verify(a) => run_verify(&a),
        Command::Bench(a) => run_bench_cmd(&a),
        Command::ParseCheck(a) => run_parse_check(&a),
    };
    match result {
        Ok(Status::Full) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run_discover(a: &RunArgs) -> Result<Status> {
    let c = a.config()?;
    let world = c.load_world()?;
    let mut agent = AgentHandle::of_kind(c.agent_kind()?).context("agent")?;
    let run = discover(&world, &mut agent, c.traces, c.seed, c.query_bound)?;
    let templates = c.templates()?;
    write_artifacts(&run, &world, templates.as_ref(), &c.out)?;
    let s = &run.stats;
    println!(
        "{}: {} capabilities, {} open sites, {} queries ({} reachability queries), output in {}",
        s.domain,
        s.capabilities,
        s.unresolved,
        s.query_plans,
        s.total_queries,
        c.out.display()
    );
    Ok(if run.is_resolved() {
        Status::Full
    } else {
        Status::Partial
    })
}

fn summary_tsv(reports: &[VerificationReport]) -> String {
    let mut out = String::from("check\tpassed\tfailures\texamined\tpartial\tsampled\telapsed_us\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.check,
            r.passed,
            r.failures,
            r.examined,
            r.partial,
            r.sampled,
            r.elapsed.as_micros()
        );
    }
    out
}

fn run_verify(a: &VerifyArgs) -> Result<Status> {
    let c = a.run.config()?;
    let world = c.load_world()?;
    let u = &world.universe;
    let model_path = a.model.clone().unwrap_or_else(|| c.out.join(MODEL_FILE));
    let text = fs::read_to_string(&model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let (_, model) =
        parse_model(u, &text).with_context(|| format!("parsing {}", model_path.display()))?;
    let evidence_path = a
        .evidence
        .clone()
        .unwrap_or_else(|| c.out.join(EVIDENCE_FILE));
    let evidence = if evidence_path.exists() {
        Some(read_evidence(&evidence_path)?)
    } else {
        info!(
            "no evidence at {}; skipping consistency checks",
            evidence_path.display()
        );
        None
    };
    let mut reports = Vec::new();
    if let Some(e) = &evidence {
        reports.push(check_consistency(u, &model, &e.transitions));
        reports.push(check_maximal_consistency(
            u,
            &model,
            &e.transitions,
            &e.queries,
        ));
    }
    let graph = StateGraph::build(&world, a.state_budget);
    reports.push(check_realizability_on(&world, &model, &graph));
    reports.push(check_local_connectivity_on(&world, &graph));
    for r in &reports {
        println!("{r}");
    }
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    let tsv = c.out.join("verify.tsv");
    fs::write(&tsv, summary_tsv(&reports)).with_context(|| format!("writing {}", tsv.display()))?;
    let clean = reports.iter().all(|r| r.passed && !r.partial);
    Ok(if clean && evidence.is_some() {
        Status::Full
    } else {
        Status::Partial
    })
}

fn run_bench_cmd(a: &BenchArgs) -> Result<Status> {
    let suite = match a.suite {
        Suite::Sizes => size_suite(),
    };
    let rows = run_bench(&suite, a.seed, a.traces, a.instances, a.jobs)?;
    let models = a.out.join("models");
    fs::create_dir_all(&models).with_context(|| format!("creating {}", models.display()))?;
    for r in &rows {
        for (i, (m, q)) in r.models.iter().zip(&r.query_logs).enumerate() {
            let stem = format!("{}-{}", r.config.label(), a.seed + i as u64);
            fs::write(models.join(format!("{stem}.cap")), m)?;
            fs::write(models.join(format!("{stem}.queries.tsv")), q)?;
        }
        println!(
            "{}\t{} queries\t{:?} per query",
            r.config.label(),
            r.stats.total_queries,
            r.stats.mean_query_time()
        );
    }
    let stats = a.out.join("stats.tsv");
    fs::write(&stats, bench_stats(&rows))
        .with_context(|| format!("writing {}", stats.display()))?;
    println!("statistics in {}", stats.display());
    Ok(if rows.iter().all(|r| r.resolved) {
        Status::Full
    } else {
        Status::Partial
    })
}

fn load_domain(spec: &str) -> Result<capkit_core::DomainSpec> {
    match spec.parse::<Bundled>() {
        Ok(b) => Ok(b.domain()),
        Err(_) => {
            let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
            Ok(parse_domain(&text).with_context(|| spec.to_string())?)
        }
    }
}

fn check_file(path: &Path, a: &ParseCheckArgs) -> Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let text = || fs::read_to_string(path).with_context(|| format!("reading {}", path.display()));
    match ext {
        "domain" => {
            parse_domain(&text()?)?;
        }
        "inst" => {
            let d = a
                .domain
                .as_deref()
                .context("--domain is required for instance files")?;
            parse_instance(&text()?, &load_domain(d)?)?;
        }
        "run" | "toml" => {
            RunConfig::load(path)?;
        }
        "cap" => {
            let d = a
                .domain
                .as_deref()
                .context("--domain is required for model files")?;
            let mut c = RunConfig::new(d, a.grid, a.seed);
            c.instance = a.instance.clone();
            let world = c.load_world()?;
            parse_model(&world.universe, &text()?)?;
        }
        other => bail!("unknown file kind '.{other}'"),
    }
    Ok(())
}

fn run_parse_check(a: &ParseCheckArgs) -> Result<Status> {
    let mut failed = 0;
    for f in &a.files {
        match check_file(f, a) {
            Ok(()) => println!("ok\t{}", f.display()),
            Err(e) => {
                failed += 1;
                println!("error\t{}\t{e:#}", f.display());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} files failed to parse", a.files.len());
    }
    Ok(Status::Full)
}
