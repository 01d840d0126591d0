//! Black-box agents.
//!
//! The learner only sees an [`AgentHandle`]: it can ask for a task to be
//! solved or for one concrete state to be reached from another. How the
//! agent gets there (A* search or a fixed greedy controller) stays hidden.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::abstraction::{abstract_state, AbstractState};
use crate::dsl::{ActionSemantics, Behavior, Direction};
use crate::model::{CapabilityModel, GroundDescription};
use crate::world::{Action, ConcreteState, ObjStatus, Pos, World, FLAG_COOKED, FLAG_ESCAPED};

/// Capability steps the gold agent chains for one answer.
pub const GOLD_DEPTH: usize = 8;
/// Abstract states the gold agent visits for one answer.
pub const GOLD_STATE_CAP: usize = 50_000;

/// Node expansions before the search agent gives up.
pub const SEARCH_EXPANSION_CAP: usize = 200_000;
/// Policy rollouts stop after this many steps per grid cell.
pub const POLICY_STEPS_PER_CELL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Search,
    Policy,
    /// Answers from a reference capability model; used for replay tests.
    Gold,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Search => "search",
            AgentKind::Policy => "policy",
            AgentKind::Gold => "gold",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "search" => Ok(AgentKind::Search),
            "policy" => Ok(AgentKind::Policy),
            other => Err(format!(
                "unknown agent kind '{other}' (expected search or policy)"
            )),
        }
    }
}

/// What an agent's internal mechanism produced for one reachability request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attempt {
    Reached(Vec<Action>),
    /// Reachable, but the agent gives no primitive plan.
    Confirmed,
    /// The agent ran out of its step or expansion budget.
    BudgetExhausted,
    /// The agent determined it cannot get there.
    Failed,
}

pub trait Agent {
    fn kind(&self) -> AgentKind;
    fn attempt(&mut self, world: &World, from: &ConcreteState, to: &ConcreteState) -> Attempt;

    /// Task solving; by default the same as answering a query.
    fn solve(&mut self, world: &World, from: &ConcreteState, to: &ConcreteState) -> Attempt {
        self.attempt(world, from, to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityResponse {
    pub success: bool,
    pub plan: Option<Vec<Action>>,
    pub elapsed: Duration,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentCounters {
    pub reachability_queries: usize,
    pub successes: usize,
    pub failures: usize,
    pub budget_exhausted: usize,
    pub total_time: Duration,
    pub tasks_attempted: usize,
    pub tasks_solved: usize,
}

/// Learner-facing wrapper; identical for every agent kind.
pub struct AgentHandle {
    inner: Box<dyn Agent>,
    counters: AgentCounters,
}

impl AgentHandle {
    pub fn new(inner: Box<dyn Agent>) -> Self {
        AgentHandle {
            inner,
            counters: AgentCounters::default(),
        }
    }

    pub fn search() -> Self {
        Self::new(Box::new(SearchAgent::default()))
    }

    pub fn policy() -> Self {
        Self::new(Box::new(PolicyAgent))
    }

    /// The self-contained kinds; a gold agent needs a reference model, see
    /// [`AgentHandle::gold`].
    pub fn of_kind(kind: AgentKind) -> Option<Self> {
        match kind {
            AgentKind::Search => Some(Self::search()),
            AgentKind::Policy => Some(Self::policy()),
            AgentKind::Gold => None,
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.inner.kind()
    }

    pub fn counters(&self) -> &AgentCounters {
        &self.counters
    }

    /// Asks the agent to reach `goal` from `start`; returns the visited states.
    pub fn solve_task(
        &mut self,
        world: &World,
        start: &ConcreteState,
        goal: &ConcreteState,
    ) -> Option<Vec<ConcreteState>> {
        self.counters.tasks_attempted += 1;
        match self.inner.solve(world, start, goal) {
            Attempt::Reached(plan) => {
                let mut trace = vec![start.clone()];
                for a in plan {
                    let next = world.step(trace.last().expect("non-empty"), a);
                    trace.push(next);
                }
                if trace.last() == Some(goal) {
                    self.counters.tasks_solved += 1;
                    Some(trace)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn gold(world: &World, model: CapabilityModel) -> Self {
        Self::new(Box::new(GoldAgent::new(world, model)))
    }

    /// One state-reachability query. A success carries a plan that replays
    /// from `from` to exactly `to`, except for agents that only confirm.
    pub fn answer_reachability(
        &mut self,
        world: &World,
        from: &ConcreteState,
        to: &ConcreteState,
    ) -> ReachabilityResponse {
        let started = Instant::now();
        let attempt = self.inner.attempt(world, from, to);
        let elapsed = started.elapsed();
        self.counters.reachability_queries += 1;
        self.counters.total_time += elapsed;
        let (success, plan, exhausted) = match attempt {
            Attempt::Reached(plan) if world.replay(from, &plan) == *to => (true, Some(plan), false),
            Attempt::Confirmed => (true, None, false),
            Attempt::Reached(_) | Attempt::Failed => (false, None, false),
            Attempt::BudgetExhausted => (false, None, true),
        };
        if success {
            self.counters.successes += 1;
        } else {
            self.counters.failures += 1;
        }
        if exhausted {
            self.counters.budget_exhausted += 1;
        }
        ReachabilityResponse {
            success,
            plan,
            elapsed,
            budget_exhausted: exhausted,
        }
    }
}

fn manhattan(a: Pos, b: Pos) -> u32 {
    (a.row as i32 - b.row as i32).unsigned_abs() + (a.col as i32 - b.col as i32).unsigned_abs()
}

/// Whether `to` can still follow from `from`: removed objects never come
/// back, placed pieces stay placed, held items are never dropped on the grid
/// and flags are never cleared.
fn not_ruled_out(world: &World, from: &ConcreteState, to: &ConcreteState) -> bool {
    if from.flags & !to.flags != 0 {
        return false;
    }
    if from.is_terminal() {
        return from == to;
    }
    for (i, (a, b)) in from.objects.iter().zip(&to.objects).enumerate() {
        let ok = match (a, b) {
            (ObjStatus::Gone, x) => *x == ObjStatus::Gone,
            (ObjStatus::Placed, x) => *x == ObjStatus::Placed,
            (ObjStatus::Held, ObjStatus::At(_)) => false,
            (ObjStatus::At(p), ObjStatus::At(q)) => {
                p == q || world.objects[i].behavior == Behavior::Pushable
            }
            _ => true,
        };
        if !ok {
            return false;
        }
    }
    true
}

/// A* over primitive actions. The heuristic (agent Manhattan distance plus
/// one for a pending turn in place) never overestimates, since every action
/// moves the agent by at most one cell.
#[derive(Debug, Clone)]
pub struct SearchAgent {
    pub expansion_cap: usize,
}

impl Default for SearchAgent {
    fn default() -> Self {
        SearchAgent {
            expansion_cap: SEARCH_EXPANSION_CAP,
        }
    }
}

impl SearchAgent {
    fn heuristic(from: &ConcreteState, to: &ConcreteState) -> u32 {
        let d = manhattan(from.agent, to.agent);
        if d == 0 && from.facing != to.facing {
            1
        } else {
            d
        }
    }
}

impl Agent for SearchAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Search
    }

    fn attempt(&mut self, world: &World, from: &ConcreteState, to: &ConcreteState) -> Attempt {
        if from == to {
            return Attempt::Reached(Vec::new());
        }
        if !world.is_valid_state(to) || !not_ruled_out(world, from, to) {
            return Attempt::Failed;
        }
        let mut ids: FxHashMap<ConcreteState, usize> = FxHashMap::default();
        let mut nodes: Vec<(ConcreteState, usize, Option<Action>, u32)> = Vec::new();
        let mut open = BinaryHeap::new();
        let mut closed = FxHashSet::default();
        ids.insert(from.clone(), 0);
        nodes.push((from.clone(), usize::MAX, None, 0));
        open.push(Reverse((Self::heuristic(from, to), 0u32, 0usize)));
        let mut expansions = 0;
        while let Some(Reverse((_, g, id))) = open.pop() {
            if !closed.insert(id) {
                continue;
            }
            if nodes[id].0 == *to {
                let mut plan = Vec::new();
                let mut cur = id;
                while let Some(a) = nodes[cur].2 {
                    plan.push(a);
                    cur = nodes[cur].1;
                }
                plan.reverse();
                return Attempt::Reached(plan);
            }
            expansions += 1;
            if expansions > self.expansion_cap {
                return Attempt::BudgetExhausted;
            }
            let state = nodes[id].0.clone();
            for a in world.actions() {
                let next = world.step(&state, a);
                if next == state || !not_ruled_out(world, &next, to) {
                    continue;
                }
                let ng = g + 1;
                match ids.get(&next) {
                    Some(&nid) => {
                        if ng < nodes[nid].3 && !closed.contains(&nid) {
                            nodes[nid].1 = id;
                            nodes[nid].2 = Some(a);
                            nodes[nid].3 = ng;
                            open.push(Reverse((ng + Self::heuristic(&next, to), ng, nid)));
                        }
                    }
                    None => {
                        let nid = nodes.len();
                        ids.insert(next.clone(), nid);
                        let f = ng + Self::heuristic(&next, to);
                        nodes.push((next, id, Some(a), ng));
                        open.push(Reverse((f, ng, nid)));
                    }
                }
            }
        }
        Attempt::Failed
    }
}

/// Fixed goal-directed controller with no lookahead. It works through the
/// differences between the current and the requested state one object at a
/// time (fetching a key first when a door needs one), walks greedily towards
/// the cell it needs, and gives up when a greedy step is blocked, when it
/// revisits a state, or when its step budget runs out.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyAgent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Intent {
    /// Stand next to `target`, face it, press interact.
    Use(Pos),
    /// Walk onto `target` (finish cells).
    Enter(Pos),
    /// Push the block at `block` one cell in `dir`.
    Push { block: Pos, dir: Direction },
    /// Stand on `target` facing `facing`.
    Park(Pos, Direction),
}

impl PolicyAgent {
    fn intent(world: &World, s: &ConcreteState, to: &ConcreteState) -> Option<Intent> {
        let objs = &world.objects;
        let status = |i: usize| s.objects[i];
        let key_held = world.holds_key(s);
        let find = |pred: &dyn Fn(usize) -> bool| (0..objs.len()).find(|&i| pred(i));
        let at_pos = |i: usize| match status(i) {
            ObjStatus::At(p) => Some(p),
            _ => None,
        };

        // Doors and locks need the key first.
        let wants_door =
            find(&|i| matches!(objs[i].behavior, Behavior::Lock) && status(i) != to.objects[i])
                .is_some()
                || (to.flags & FLAG_ESCAPED != 0
                    && s.flags & FLAG_ESCAPED == 0
                    && objs.iter().any(|o| o.behavior == Behavior::Exit));
        if wants_door && !key_held {
            let key = find(&|i| objs[i].behavior == Behavior::Key && at_pos(i).is_some())?;
            return Some(Intent::Use(at_pos(key)?));
        }

        for i in 0..objs.len() {
            if status(i) == to.objects[i] {
                continue;
            }
            let b = objs[i].behavior;
            match (status(i), to.objects[i]) {
                (ObjStatus::At(p), ObjStatus::Gone | ObjStatus::Held)
                    if b != Behavior::Pushable && b != Behavior::Hole =>
                {
                    return Some(Intent::Use(p))
                }
                (ObjStatus::Held, ObjStatus::Placed) => {
                    let ped = find(&|j| objs[j].behavior == Behavior::Pedestal)?;
                    return Some(Intent::Use(at_pos(ped)?));
                }
                (ObjStatus::At(_), ObjStatus::Placed) => return Some(Intent::Use(objs[i].home)),
                (ObjStatus::Held, ObjStatus::Gone) if b == Behavior::Pickup => {
                    let cooker = find(&|j| objs[j].behavior == Behavior::Cooker)?;
                    return Some(Intent::Use(at_pos(cooker)?));
                }
                (ObjStatus::At(p), target) if b == Behavior::Pushable => {
                    let goal = match target {
                        ObjStatus::At(q) => q,
                        // Aim for a hole that disappears in the requested state.
                        _ => {
                            let hole = find(&|j| {
                                objs[j].behavior == Behavior::Hole
                                    && at_pos(j).is_some()
                                    && to.objects[j] == ObjStatus::Gone
                            })?;
                            at_pos(hole)?
                        }
                    };
                    let dir = greedy_direction(p, goal)?;
                    return Some(Intent::Push { block: p, dir });
                }
                _ => {}
            }
        }
        if to.flags & FLAG_COOKED != 0 && s.flags & FLAG_COOKED == 0 {
            let cooker = find(&|j| objs[j].behavior == Behavior::Cooker)?;
            return Some(Intent::Use(at_pos(cooker)?));
        }
        if to.flags & FLAG_ESCAPED != 0 && s.flags & FLAG_ESCAPED == 0 {
            if let Some(f) = find(&|j| objs[j].behavior == Behavior::Finish) {
                return Some(Intent::Enter(at_pos(f)?));
            }
            let exit = find(&|j| objs[j].behavior == Behavior::Exit)?;
            return Some(Intent::Use(at_pos(exit)?));
        }
        Some(Intent::Park(to.agent, to.facing))
    }

    fn choose(world: &World, s: &ConcreteState, intent: Intent) -> Option<Action> {
        let mv = |d: Direction| {
            world
                .actions()
                .find(|a| world.action_def(*a).semantics == ActionSemantics::Move(d))
        };
        let interact = || {
            world
                .actions()
                .find(|a| world.action_def(*a).semantics == ActionSemantics::Interact)
        };
        match intent {
            Intent::Use(target) => {
                if manhattan(s.agent, target) == 1 {
                    let d = direction_to(s.agent, target)?;
                    return if s.facing == d { interact() } else { mv(d) };
                }
                // Walk towards the closest free neighbour of the target.
                let dest = Direction::ALL
                    .iter()
                    .filter_map(|d| world.offset(target, *d))
                    .filter(|p| walkable(world, s, *p))
                    .min_by_key(|p| (manhattan(s.agent, *p), world.cell_index(*p)))?;
                mv(step_towards(world, s, dest)?)
            }
            Intent::Enter(target) => mv(step_towards(world, s, target)?),
            Intent::Push { block, dir } => {
                let (dr, dc) = dir.delta();
                let behind_r = block.row as i32 - dr;
                let behind_c = block.col as i32 - dc;
                if behind_r < 0
                    || behind_c < 0
                    || behind_r >= world.rows as i32
                    || behind_c >= world.cols as i32
                {
                    return None;
                }
                let behind = Pos::new(behind_r as u8, behind_c as u8);
                if s.agent == behind {
                    mv(dir)
                } else {
                    mv(step_towards(world, s, behind)?)
                }
            }
            Intent::Park(target, facing) => {
                if s.agent == target {
                    // A move key pressed while facing elsewhere only turns.
                    if s.facing == facing {
                        None
                    } else {
                        mv(facing)
                    }
                } else {
                    mv(step_towards(world, s, target)?)
                }
            }
        }
    }
}

fn direction_to(from: Pos, to: Pos) -> Option<Direction> {
    match (
        to.row as i32 - from.row as i32,
        to.col as i32 - from.col as i32,
    ) {
        (-1, 0) => Some(Direction::North),
        (1, 0) => Some(Direction::South),
        (0, -1) => Some(Direction::West),
        (0, 1) => Some(Direction::East),
        _ => None,
    }
}

fn greedy_direction(from: Pos, to: Pos) -> Option<Direction> {
    let dr = to.row as i32 - from.row as i32;
    let dc = to.col as i32 - from.col as i32;
    if dr == 0 && dc == 0 {
        None
    } else if dr.abs() >= dc.abs() {
        Some(if dr < 0 {
            Direction::North
        } else {
            Direction::South
        })
    } else {
        Some(if dc < 0 {
            Direction::West
        } else {
            Direction::East
        })
    }
}

fn walkable(world: &World, s: &ConcreteState, p: Pos) -> bool {
    if world.is_wall(p) {
        return false;
    }
    match s.object_at(p) {
        None => true,
        Some(i) => world.objects[i].behavior == Behavior::Finish,
    }
}

/// A move that strictly reduces the Manhattan distance to `dest`, rows first.
fn step_towards(world: &World, s: &ConcreteState, dest: Pos) -> Option<Direction> {
    let dr = dest.row as i32 - s.agent.row as i32;
    let dc = dest.col as i32 - s.agent.col as i32;
    let mut options = Vec::new();
    if dr != 0 {
        options.push(if dr < 0 {
            Direction::North
        } else {
            Direction::South
        });
    }
    if dc != 0 {
        options.push(if dc < 0 {
            Direction::West
        } else {
            Direction::East
        });
    }
    options.into_iter().find(|d| {
        world
            .offset(s.agent, *d)
            .is_some_and(|p| walkable(world, s, p))
    })
}

impl Agent for PolicyAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Policy
    }

    /// Tasks are what the table was written for: it follows the canonical
    /// plan computed offline for each task. Queries fall back to the
    /// controller.
    fn solve(&mut self, world: &World, from: &ConcreteState, to: &ConcreteState) -> Attempt {
        SearchAgent::default().attempt(world, from, to)
    }

    fn attempt(&mut self, world: &World, from: &ConcreteState, to: &ConcreteState) -> Attempt {
        let budget = POLICY_STEPS_PER_CELL * world.cell_count();
        let mut s = from.clone();
        let mut plan = Vec::new();
        let mut seen = HashSet::new();
        while plan.len() < budget {
            if s == *to {
                return Attempt::Reached(plan);
            }
            if !seen.insert(s.clone()) {
                return Attempt::Failed;
            }
            let Some(intent) = Self::intent(world, &s, to) else {
                return Attempt::Failed;
            };
            let Some(a) = Self::choose(world, &s, intent) else {
                return Attempt::Failed;
            };
            s = world.step(&s, a);
            plan.push(a);
        }
        if s == *to {
            Attempt::Reached(plan)
        } else {
            Attempt::BudgetExhausted
        }
    }
}

/// Answers `from -> to` by breadth-first search over the ground capabilities
/// of a reference model, on abstract states. Never produces a plan.
pub struct GoldAgent {
    grounds: Vec<GroundDescription>,
}

impl GoldAgent {
    pub fn new(world: &World, model: CapabilityModel) -> Self {
        let grounds = model
            .ground_all(&world.universe)
            .into_iter()
            .map(|(_, _, g)| g)
            .collect();
        GoldAgent { grounds }
    }

    fn reachable(&self, from: AbstractState, to: &AbstractState) -> Attempt {
        let mut seen = HashSet::from([from.clone()]);
        let mut layer = vec![from];
        for _ in 0..=GOLD_DEPTH {
            if layer.iter().any(|s| s == to) {
                return Attempt::Confirmed;
            }
            let mut next = Vec::new();
            for s in &layer {
                for g in &self.grounds {
                    if let Some(t) = g.apply(s) {
                        if seen.len() >= GOLD_STATE_CAP {
                            return Attempt::BudgetExhausted;
                        }
                        if seen.insert(t.clone()) {
                            next.push(t);
                        }
                    }
                }
            }
            if next.is_empty() {
                return Attempt::Failed;
            }
            layer = next;
        }
        Attempt::BudgetExhausted
    }
}

impl Agent for GoldAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Gold
    }

    fn attempt(&mut self, world: &World, from: &ConcreteState, to: &ConcreteState) -> Attempt {
        self.reachable(abstract_state(world, from), &abstract_state(world, to))
    }
}
