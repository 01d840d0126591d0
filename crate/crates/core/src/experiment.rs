//! End-to-end discovery runs: configuration, the discovery pipeline, run
//! artifacts and the benchmark sweep.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::AbstractState;
use crate::agents::{AgentHandle, AgentKind};
use crate::domains::{bundled_world, Bundled, LoadError};
use crate::dsl::{parse_domain, parse_instance, Behavior, DomainSpec, ParseError};
use crate::generator::{generate_instance, GenError, GeneratorSpec, DEFAULT_OBSTACLE_FRACTION};
use crate::harvest::{generate_tasks, harvest_and_abstract, Harvest, HarvestError};
use crate::induction::induce;
use crate::io::{
    export_model, export_query_log, export_stats, render_model_transcript, IoError, RunStats,
    Templates,
};
use crate::oracle::QueryEvidence;
use crate::query::{resolve_with, QueryError, QueryPhase, QUERY_PLAN_BOUND};
use crate::world::{World, WorldError};

/// Tasks handed to the agent when a configuration does not say.
pub const DEFAULT_TRACES: usize = 9;
pub const DEFAULT_SEED: u64 = 37;
/// Grid sizes of the benchmark sweep.
pub const BENCH_SIZES: [u8; 3] = [5, 7, 9];
/// Generated instances pooled into each benchmark row.
pub const BENCH_INSTANCES: usize = 10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Model(#[from] IoError),
    #[error("evidence file: {0}")]
    Evidence(#[from] serde_json::Error),
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(|source| ExperimentError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// One discovery run as read from a `.run` (TOML) file.
///
/// `domain` is either a bundled domain name or a path to a `.domain` file.
/// Without `instance`, a field of `grid` cells per side is generated from
/// `seed` (or a bundled fixture of that size is used, if one exists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: String,
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default = "default_grid")]
    pub grid: u8,
    #[serde(default)]
    pub obstacle_fraction: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_agent")]
    pub agent: String,
    #[serde(default = "default_traces")]
    pub traces: usize,
    #[serde(default = "default_bound")]
    pub query_bound: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Transcript templates; bundled domains bring their own.
    #[serde(default)]
    pub templates: Option<PathBuf>,
}

fn default_grid() -> u8 {
    5
}
fn default_agent() -> String {
    "search".into()
}
fn default_traces() -> usize {
    DEFAULT_TRACES
}
fn default_bound() -> usize {
    QUERY_PLAN_BOUND
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(domain: &str, grid: u8, seed: u64) -> RunConfig {
        RunConfig {
            domain: domain.into(),
            instance: None,
            grid,
            obstacle_fraction: None,
            seed,
            agent: default_agent(),
            traces: DEFAULT_TRACES,
            query_bound: QUERY_PLAN_BOUND,
            out: default_out(),
            templates: None,
        }
    }

    pub fn parse(text: &str) -> Result<RunConfig, ExperimentError> {
        let c: RunConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; relative paths inside it are taken from the
    /// file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, ExperimentError> {
        let mut c = Self::parse(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = c.instance.as_mut() {
            rebase(p);
        }
        if let Some(p) = c.templates.as_mut() {
            rebase(p);
        }
        if c.domain.ends_with(".domain") && Path::new(&c.domain).is_relative() {
            c.domain = base.join(&c.domain).to_string_lossy().into_owned();
        }
        rebase(&mut c.out);
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if let Some(f) = self.obstacle_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(ExperimentError::Config(format!(
                    "obstacle_fraction {f} outside [0, 1)"
                )));
            }
        }
        if self.traces == 0 {
            return Err(ExperimentError::Config("traces must be positive".into()));
        }
        if self.grid < 2 {
            return Err(ExperimentError::Config(format!(
                "grid {} too small",
                self.grid
            )));
        }
        self.agent_kind()?;
        Ok(())
    }

    pub fn agent_kind(&self) -> Result<AgentKind, ExperimentError> {
        match self.agent.parse::<AgentKind>() {
            Ok(k @ (AgentKind::Search | AgentKind::Policy)) => Ok(k),
            Ok(_) => Err(ExperimentError::Config(
                "agent: gold answers only replay tests".into(),
            )),
            Err(e) => Err(ExperimentError::Config(format!("agent: {e}"))),
        }
    }

    fn bundled(&self) -> Option<Bundled> {
        self.domain.parse().ok()
    }

    fn domain_spec(&self) -> Result<DomainSpec, ExperimentError> {
        match self.bundled() {
            Some(b) => Ok(b.domain()),
            None => Ok(parse_domain(&read(Path::new(&self.domain))?)?),
        }
    }

    pub fn load_world(&self) -> Result<World, ExperimentError> {
        let domain = self.domain_spec()?;
        if let Some(path) = &self.instance {
            let inst = parse_instance(&read(path)?, &domain)?;
            return Ok(World::new(domain, inst)?);
        }
        match (self.bundled(), self.obstacle_fraction) {
            (Some(b), None) => Ok(bundled_world(
                &format!("{}{}", b.name(), self.grid),
                self.seed,
            )?),
            (bundled, fraction) => {
                let roster: Vec<(String, String)> = match bundled {
                    Some(b) => b
                        .roster(self.grid)
                        .into_iter()
                        .map(|(a, t)| (a.into(), t.into()))
                        .collect(),
                    None => default_roster(&domain),
                };
                let roster: Vec<(&str, &str)> = roster
                    .iter()
                    .map(|(a, t)| (a.as_str(), t.as_str()))
                    .collect();
                let spec = GeneratorSpec {
                    size: self.grid,
                    obstacle_fraction: fraction.unwrap_or(DEFAULT_OBSTACLE_FRACTION),
                    seed: self.seed,
                };
                let inst = generate_instance(&domain, &roster, &spec)?;
                Ok(World::new(domain, inst)?)
            }
        }
    }

    pub fn templates(&self) -> Result<Option<Templates>, ExperimentError> {
        match (&self.templates, self.bundled()) {
            (Some(p), _) => Ok(Some(Templates::parse(&read(p)?)?)),
            (None, Some(b)) => Ok(Some(b.templates())),
            (None, None) => Ok(None),
        }
    }
}

/// The avatar type first, then one object of every other type, named after
/// the type.
pub fn default_roster(domain: &DomainSpec) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for t in &domain.object_types {
        let entry = (format!("{}1", t.name), t.name.clone());
        if t.behavior == Behavior::Avatar {
            out.insert(0, entry);
        } else {
            out.push(entry);
        }
    }
    out
}

/// Everything a verifier needs besides the model: the observed abstract
/// transitions and every piece of plan evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub transitions: Vec<(AbstractState, AbstractState)>,
    pub queries: Vec<QueryEvidence>,
}

#[derive(Debug, Clone)]
pub struct DiscoveryRun {
    pub harvest: Harvest,
    pub transitions: Vec<(AbstractState, AbstractState)>,
    pub phase: QueryPhase,
    pub evidence: Evidence,
    pub stats: RunStats,
}

impl DiscoveryRun {
    pub fn is_resolved(&self) -> bool {
        self.phase.model.is_resolved()
    }
}

/// Harvest, induction and query phase.
pub fn discover(
    world: &World,
    agent: &mut AgentHandle,
    traces: usize,
    seed: u64,
    bound: usize,
) -> Result<DiscoveryRun, ExperimentError> {
    let started = Instant::now();
    let tasks = generate_tasks(world, traces, seed)?;
    let harvest = harvest_and_abstract(agent, world, &tasks);
    discover_from(world, harvest, agent, seed, bound, started)
}

/// Induction and query phase on an existing harvest.
pub fn discover_from(
    world: &World,
    harvest: Harvest,
    agent: &mut AgentHandle,
    seed: u64,
    bound: usize,
    started: Instant,
) -> Result<DiscoveryRun, ExperimentError> {
    let ind = induce(&world.universe, harvest.transitions());
    let phase = resolve_with(world, &harvest, agent, ind.caps, bound)?;
    let mut queries: Vec<QueryEvidence> = phase
        .records
        .iter()
        .map(|r| QueryEvidence {
            plan: r.plan.clone(),
            waypoints: r.waypoints.clone(),
            theta: r.theta,
        })
        .collect();
    // Each observed step, attributed to the capability and binding it was
    // merged under.
    for (ci, c) in phase.model.caps.iter().enumerate() {
        for (b, t) in &c.groundings {
            let (from, to) = &ind.transitions[*t];
            queries.push(QueryEvidence {
                plan: vec![(ci, b.clone())],
                waypoints: vec![from.clone(), to.clone()],
                theta: 1,
            });
        }
    }
    let stats = RunStats {
        domain: world.domain.name.clone(),
        grid_size: world.rows.saturating_sub(2),
        agent: agent.kind().name().to_string(),
        seed,
        instances: 1,
        traces: harvest.traces.len(),
        transitions: ind.transitions.len(),
        capabilities: phase.model.len(),
        unresolved: phase.model.unresolved_count(),
        query_plans: phase.records.len(),
        total_queries: phase.records.iter().map(|r| r.asks.len()).sum(),
        query_times: phase
            .records
            .iter()
            .flat_map(|r| r.asks.iter().copied())
            .collect(),
    };
    info!(
        "{} {}: {} capabilities, {} queries ({} reachability) in {:?}",
        stats.domain,
        stats.agent,
        stats.capabilities,
        stats.query_plans,
        stats.total_queries,
        started.elapsed()
    );
    Ok(DiscoveryRun {
        transitions: ind.transitions.clone(),
        evidence: Evidence {
            transitions: ind.transitions,
            queries,
        },
        harvest,
        phase,
        stats,
    })
}

pub const MODEL_FILE: &str = "model.cap";
pub const TRANSCRIPT_FILE: &str = "transcript.txt";
pub const QUERY_LOG_FILE: &str = "queries.tsv";
pub const STATS_FILE: &str = "stats.tsv";
pub const EVIDENCE_FILE: &str = "evidence.json";

/// Writes the model, its transcript (when templates are given), the query
/// log, the statistics row and the evidence into `dir`.
pub fn write_artifacts(
    run: &DiscoveryRun,
    world: &World,
    templates: Option<&Templates>,
    dir: &Path,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let u = &world.universe;
    write(
        &dir.join(MODEL_FILE),
        &export_model(u, &world.domain.name, &run.phase.model),
    )?;
    if let Some(t) = templates {
        write(
            &dir.join(TRANSCRIPT_FILE),
            &render_model_transcript(u, &run.phase.model, t)?,
        )?;
    }
    write(
        &dir.join(QUERY_LOG_FILE),
        &export_query_log(&run.phase.records),
    )?;
    write(
        &dir.join(STATS_FILE),
        &export_stats(std::slice::from_ref(&run.stats)),
    )?;
    write(
        &dir.join(EVIDENCE_FILE),
        &serde_json::to_string(&run.evidence)?,
    )?;
    Ok(())
}

pub fn read_evidence(path: &Path) -> Result<Evidence, ExperimentError> {
    Ok(serde_json::from_str(&read(path)?)?)
}

/// One cell of the benchmark sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub domain: Bundled,
    pub size: u8,
    pub agent: AgentKind,
}

impl BenchConfig {
    pub fn label(&self) -> String {
        format!("{}{}-{}", self.domain.name(), self.size, self.agent.name())
    }
}

/// Four domains, three sizes, two agents.
pub fn size_suite() -> Vec<BenchConfig> {
    let mut out = Vec::new();
    for domain in Bundled::ALL {
        for size in BENCH_SIZES {
            for agent in [AgentKind::Search, AgentKind::Policy] {
                out.push(BenchConfig {
                    domain,
                    size,
                    agent,
                });
            }
        }
    }
    out
}

/// Output of one benchmark cell: the pooled statistics plus the documents
/// that must be reproducible, one per instance.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub config: BenchConfig,
    pub stats: RunStats,
    pub models: Vec<String>,
    pub query_logs: Vec<String>,
    pub resolved: bool,
}

/// Runs instances `seed`, `seed + 1`, ... of one cell; each instance also
/// draws its tasks from its own seed.
pub fn run_bench_config(
    c: BenchConfig,
    seed: u64,
    traces: usize,
    instances: usize,
) -> Result<BenchRow, ExperimentError> {
    let mut row: Option<BenchRow> = None;
    for n in 0..instances.max(1) as u64 {
        let s = seed + n;
        let world = bundled_world(&format!("{}{}", c.domain.name(), c.size), s)?;
        let mut agent = AgentHandle::of_kind(c.agent)
            .ok_or_else(|| ExperimentError::Config("bench agents are search and policy".into()))?;
        let run = discover(
            &world,
            &mut agent,
            scaled_traces(traces, c.size),
            s,
            QUERY_PLAN_BOUND,
        )?;
        let model = export_model(&world.universe, &world.domain.name, &run.phase.model);
        let log = export_query_log(&run.phase.records);
        match row.as_mut() {
            None => {
                row = Some(BenchRow {
                    config: c,
                    stats: run.stats.clone(),
                    models: vec![model],
                    query_logs: vec![log],
                    resolved: run.is_resolved(),
                })
            }
            Some(r) => {
                r.stats.pool(&run.stats);
                r.models.push(model);
                r.query_logs.push(log);
                r.resolved &= run.is_resolved();
            }
        }
    }
    Ok(row.expect("at least one instance"))
}

/// Task count for a bench cell: `traces` per 25 cells, rounded up, so
/// larger fields are explored about as densely as small ones.
pub fn scaled_traces(traces: usize, size: u8) -> usize {
    let cells = size as usize * size as usize;
    (traces * cells).div_ceil(25).max(1)
}

/// Runs every configuration, spread over up to `jobs` worker threads; the
/// rows come back in suite order.
pub fn run_bench(
    suite: &[BenchConfig],
    seed: u64,
    traces: usize,
    instances: usize,
    jobs: usize,
) -> Result<Vec<BenchRow>, ExperimentError> {
    let jobs = jobs.clamp(1, suite.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<BenchRow, ExperimentError>>> =
        (0..suite.len()).map(|_| None).collect();
    let done = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= suite.len() {
                    break;
                }
                let r = run_bench_config(suite[i], seed, traces, instances);
                done.lock().expect("bench worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

/// Stats TSV for a finished sweep.
pub fn bench_stats(rows: &[BenchRow]) -> String {
    let stats: Vec<RunStats> = rows.iter().map(|r| r.stats.clone()).collect();
    export_stats(&stats)
}
