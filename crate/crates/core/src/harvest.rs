//! Random tasks, execution traces and their abstract compression.

use std::collections::{HashMap, HashSet, VecDeque};

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use thiserror::Error;

use crate::abstraction::{abstract_state, concretize_near, holds, AbstractState, Atom};
use crate::agents::AgentHandle;
use crate::dsl::Direction;
use crate::world::{ConcreteState, World};

/// Attempts per task before giving up on the instance.
pub const RESAMPLE_BUDGET: usize = 50;
/// States explored when checking that a sampled goal is reachable.
const GOAL_SEARCH_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarvestError {
    #[error("task count must be at least 1")]
    ZeroTasks,
    #[error("domain '{0}' declares no goal predicates")]
    NoGoals(String),
    #[error("no solvable task found for instance of '{domain}' after {attempts} attempts (task {index})")]
    Exhausted {
        domain: String,
        index: usize,
        attempts: usize,
    },
}

pub type ExecutionTrace = Vec<ConcreteState>;
pub type AbstractTrace = Vec<AbstractState>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub start: ConcreteState,
    pub goal: ConcreteState,
    /// The goal literal the task was sampled for.
    pub literal: Atom,
    pub positive: bool,
}

/// Drops consecutive repetitions.
pub fn dedup_consecutive(states: Vec<AbstractState>) -> AbstractTrace {
    let mut out: Vec<AbstractState> = Vec::with_capacity(states.len());
    for s in states {
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

fn task_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Samples `count` solvable tasks. Task `i` depends only on `seed` and `i`, so
/// a shorter list is always a prefix of a longer one.
pub fn generate_tasks(world: &World, count: usize, seed: u64) -> Result<Vec<Task>, HarvestError> {
    if count == 0 {
        return Err(HarvestError::ZeroTasks);
    }
    let goals = &world.domain.goals;
    if goals.is_empty() {
        return Err(HarvestError::NoGoals(world.domain.name.clone()));
    }
    let u = &world.universe;
    let starts: Vec<_> = world.open_cells().collect();
    let mut tasks = Vec::with_capacity(count);
    for index in 0..count {
        let mut rng = task_rng(seed, index);
        let goal = &goals[index % goals.len()];
        let Some(pred) = u.predicate_index(&goal.predicate) else {
            return Err(HarvestError::NoGoals(world.domain.name.clone()));
        };
        let mut found = None;
        for _ in 0..RESAMPLE_BUDGET {
            let mut start = world.initial.clone();
            start.agent = *starts.choose(&mut rng).unwrap_or(&world.initial.agent);
            start.facing = Direction::ALL[rng.gen_range(0..4)];
            let candidates: Vec<Atom> = u
                .atoms
                .iter()
                .filter(|a| a.pred == pred && holds(world, a, &start) != goal.positive)
                .copied()
                .collect();
            let Some(&literal) = candidates.choose(&mut rng) else {
                continue;
            };
            if let Some(target) = nearest_satisfying(world, &start, &literal, goal.positive) {
                let abs = abstract_state(world, &target);
                let goal_state = concretize_near(world, &abs, &target).unwrap_or(target);
                found = Some(Task {
                    start,
                    goal: goal_state,
                    literal,
                    positive: goal.positive,
                });
                break;
            }
        }
        match found {
            Some(t) => tasks.push(t),
            None => {
                return Err(HarvestError::Exhausted {
                    domain: world.domain.name.clone(),
                    index,
                    attempts: RESAMPLE_BUDGET,
                })
            }
        }
    }
    Ok(tasks)
}

pub(crate) fn nearest_satisfying(
    world: &World,
    start: &ConcreteState,
    literal: &Atom,
    positive: bool,
) -> Option<ConcreteState> {
    let mut seen = FxHashSet::default();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start.clone());
    while let Some(s) = queue.pop_front() {
        if holds(world, literal, &s) == positive {
            return Some(s);
        }
        if seen.len() > GOAL_SEARCH_CAP {
            return None;
        }
        for a in world.actions() {
            let n = world.step(&s, a);
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Default)]
pub struct Harvest {
    pub traces: Vec<ExecutionTrace>,
    pub abstract_traces: Vec<AbstractTrace>,
    /// First concrete state seen for each abstract state, in discovery order.
    pub representatives: Vec<(AbstractState, ConcreteState)>,
    pub skipped: usize,
}

impl Harvest {
    pub fn representative(&self, s: &AbstractState) -> Option<&ConcreteState> {
        self.representatives
            .iter()
            .find(|(a, _)| a == s)
            .map(|(_, c)| c)
    }

    /// Distinct abstract transitions, in order of first observation.
    pub fn transitions(&self) -> Vec<(AbstractState, AbstractState)> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in &self.abstract_traces {
            for w in t.windows(2) {
                let key = (w[0].clone(), w[1].clone());
                if seen.insert(key.clone()) {
                    out.push(key);
                }
            }
        }
        out
    }
}

/// Runs the agent on every task and abstracts the resulting traces. Tasks
/// the agent fails are skipped with a warning.
pub fn harvest_and_abstract(agent: &mut AgentHandle, world: &World, tasks: &[Task]) -> Harvest {
    let mut h = Harvest::default();
    let mut index: HashMap<AbstractState, usize> = HashMap::new();
    for (i, task) in tasks.iter().enumerate() {
        let Some(trace) = agent.solve_task(world, &task.start, &task.goal) else {
            warn!("agent failed task {i}; skipping");
            h.skipped += 1;
            continue;
        };
        let abs: Vec<AbstractState> = trace.iter().map(|s| abstract_state(world, s)).collect();
        for (a, c) in abs.iter().zip(&trace) {
            if !index.contains_key(a) {
                index.insert(a.clone(), h.representatives.len());
                h.representatives.push((a.clone(), c.clone()));
            }
        }
        h.abstract_traces.push(dedup_consecutive(abs));
        h.traces.push(trace);
    }
    h
}
