//! Brute-force verification of learned models: consistency with traces,
//! maximal consistency against traces and query answers, realizability of
//! every grounded capability, and local connectivity of the abstraction.
//!
//! Everything here works from the model's literal modes and the world
//! simulator alone, with its own grounding and application code.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::abstraction::{abstract_state, AbstractState, Atom, Universe};
use crate::agents::AgentHandle;
use crate::dsl::{ANY_OBJECT_TYPE, CELL_TYPE};
use crate::harvest::{generate_tasks, HarvestError};
use crate::model::{Capability, CapabilityModel, LAtom, Loc, Mode};
use crate::world::{ConcreteState, World};

/// Reachable states enumerated before a check reports partial coverage.
pub const DEFAULT_STATE_BUDGET: usize = 500_000;
/// Realizability checks every member of every precondition below this many
/// reachable states and samples above it.
pub const EXHAUSTIVE_STATE_LIMIT: usize = 10_000;
pub const REALIZABILITY_SAMPLES: usize = 5_000;
pub const REALIZABILITY_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Counterexample {
    /// An observed transition no grounding reproduces.
    Transition {
        index: usize,
        from: String,
        to: String,
    },
    /// A literal that can be added without contradicting any evidence.
    Literal {
        cap: usize,
        literal: String,
        loc: Loc,
        mode: Mode,
    },
    /// A concrete state meeting a grounded precondition from which the
    /// effect's abstract image cannot be reached.
    Grounding {
        cap: usize,
        binding: Vec<String>,
        state: ConcreteState,
        target: String,
    },
    /// Two concrete states with the same abstraction that are not mutually
    /// reachable.
    Pair {
        a: ConcreteState,
        b: ConcreteState,
        abstract_state: String,
    },
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterexample::Transition { index, from, to } => {
                write!(f, "transition {index}: {from} -> {to}")
            }
            Counterexample::Literal {
                cap,
                literal,
                loc,
                mode,
            } => {
                write!(
                    f,
                    "capability c{cap}: {literal} may be added as {} {}",
                    mode.symbol(),
                    loc.name()
                )
            }
            Counterexample::Grounding {
                cap,
                binding,
                state,
                target,
            } => {
                write!(
                    f,
                    "capability c{cap}({}) from {state} cannot reach {target}",
                    binding.join(", ")
                )
            }
            Counterexample::Pair {
                a,
                b,
                abstract_state,
            } => write!(
                f,
                "{a} and {b} share {abstract_state} but are not mutually reachable"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub check: &'static str,
    pub passed: bool,
    pub counterexample: Option<Counterexample>,
    pub failures: usize,
    pub examined: usize,
    /// The enumeration hit its budget, so the verdict covers only part of
    /// the space.
    pub partial: bool,
    /// Only a random sample of the cases was checked.
    pub sampled: bool,
    pub elapsed: Duration,
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({} examined, {} failures{}{}, {:.2?})",
            self.check,
            if self.passed { "pass" } else { "FAIL" },
            self.examined,
            self.failures,
            if self.partial {
                ", partial coverage"
            } else {
                ""
            },
            if self.sampled { ", sampled" } else { "" },
            self.elapsed
        )?;
        if let Some(c) = &self.counterexample {
            write!(f, "\n  counterexample: {c}")?;
        }
        Ok(())
    }
}

struct Tally {
    check: &'static str,
    started: Instant,
    examined: usize,
    failures: usize,
    first: Option<Counterexample>,
    partial: bool,
    sampled: bool,
}

impl Tally {
    fn new(check: &'static str) -> Self {
        Tally {
            check,
            started: Instant::now(),
            examined: 0,
            failures: 0,
            first: None,
            partial: false,
            sampled: false,
        }
    }

    fn fail(&mut self, c: Counterexample) {
        self.failures += 1;
        if self.first.is_none() {
            self.first = Some(c);
        }
    }

    fn finish(self) -> VerificationReport {
        VerificationReport {
            check: self.check,
            passed: self.failures == 0,
            counterexample: self.first,
            failures: self.failures,
            examined: self.examined,
            partial: self.partial,
            sampled: self.sampled,
            elapsed: self.started.elapsed(),
        }
    }
}

/// Literal lists of one capability with explicit modes.
#[derive(Debug, Clone)]
struct Lifted {
    pre_pos: Vec<LAtom>,
    pre_neg: Vec<LAtom>,
    add: Vec<LAtom>,
    del: Vec<LAtom>,
}

impl Lifted {
    fn of(cap: &Capability) -> Lifted {
        Self::with(cap, None)
    }

    fn with(cap: &Capability, over: Option<(Loc, LAtom, Mode)>) -> Lifted {
        let mut l = Lifted {
            pre_pos: vec![],
            pre_neg: vec![],
            add: vec![],
            del: vec![],
        };
        let mut put = |loc: Loc, atom: LAtom, mode: Mode| match (loc, mode) {
            (Loc::Pre, Mode::Pos) => l.pre_pos.push(atom),
            (Loc::Pre, Mode::Neg) => l.pre_neg.push(atom),
            (Loc::Eff, Mode::Pos) => l.add.push(atom),
            (Loc::Eff, Mode::Neg) => l.del.push(atom),
            (_, Mode::Absent) => {}
        };
        for (site, mode) in cap.sites.iter().zip(&cap.current) {
            if over.is_some_and(|(loc, atom, _)| loc == site.loc && atom == site.atom) {
                continue;
            }
            put(site.loc, site.atom, *mode);
        }
        if let Some((loc, atom, mode)) = over {
            put(loc, atom, mode);
        }
        l
    }
}

#[derive(Debug, Clone)]
struct Ground {
    cap: usize,
    binding: Vec<u16>,
    pre_pos: Vec<Atom>,
    pre_neg: Vec<Atom>,
    add: Vec<Atom>,
    del: Vec<Atom>,
}

fn ground_atom(a: &LAtom, b: &[u16]) -> Atom {
    let mut args = [0u16; 2];
    for i in 0..a.arity as usize {
        args[i] = b[a.args[i] as usize];
    }
    Atom { pred: a.pred, args }
}

impl Ground {
    fn new(cap: usize, l: &Lifted, b: &[u16]) -> Ground {
        let g = |v: &[LAtom]| v.iter().map(|a| ground_atom(a, b)).collect();
        Ground {
            cap,
            binding: b.to_vec(),
            pre_pos: g(&l.pre_pos),
            pre_neg: g(&l.pre_neg),
            add: g(&l.add),
            del: g(&l.del),
        }
    }

    fn applicable(&self, s: &AbstractState) -> bool {
        self.pre_pos.iter().all(|a| s.contains(a)) && self.pre_neg.iter().all(|a| !s.contains(a))
    }

    /// Unmentioned atoms keep their truth value.
    fn apply(&self, s: &AbstractState) -> Option<AbstractState> {
        if !self.applicable(s) {
            return None;
        }
        let mut atoms: Vec<Atom> = s
            .atoms()
            .iter()
            .filter(|a| !self.del.contains(a))
            .copied()
            .collect();
        atoms.extend(self.add.iter().copied());
        Some(AbstractState::from_atoms(atoms))
    }
}

fn symbol_fits(u: &Universe, ty: &str, s: u16) -> bool {
    let sym = &u.symbols[s as usize];
    let is_cell = sym.ty == CELL_TYPE;
    match ty {
        CELL_TYPE => is_cell,
        ANY_OBJECT_TYPE => !is_cell,
        t => !is_cell && sym.ty == t,
    }
}

/// Every injective, type-respecting assignment of symbols to parameters.
fn bindings(u: &Universe, cap: &Capability) -> Vec<Vec<u16>> {
    let mut out = vec![vec![]];
    for p in &cap.params {
        let mut next = Vec::new();
        for b in &out {
            for s in 0..u.symbols.len() as u16 {
                if symbol_fits(u, &p.ty, s) && !b.contains(&s) {
                    let mut nb: Vec<u16> = b.clone();
                    nb.push(s);
                    next.push(nb);
                }
            }
        }
        out = next;
    }
    out
}

fn ground_model(
    u: &Universe,
    model: &CapabilityModel,
    over: Option<(usize, Loc, LAtom, Mode)>,
) -> Vec<Ground> {
    let mut out = Vec::new();
    for (ci, cap) in model.caps.iter().enumerate() {
        let l = match over {
            Some((k, loc, atom, mode)) if k == ci => Lifted::with(cap, Some((loc, atom, mode))),
            _ => Lifted::of(cap),
        };
        for b in bindings(u, cap) {
            out.push(Ground::new(ci, &l, &b));
        }
    }
    out
}

fn explained(grounds: &[Ground], from: &AbstractState, to: &AbstractState) -> bool {
    grounds.iter().any(|g| g.apply(from).as_ref() == Some(to))
}

/// Every abstract transition must be produced by some grounding of some
/// capability.
pub fn check_consistency(
    u: &Universe,
    model: &CapabilityModel,
    transitions: &[(AbstractState, AbstractState)],
) -> VerificationReport {
    let mut t = Tally::new("consistency");
    let grounds = ground_model(u, model, None);
    for (i, (from, to)) in transitions.iter().enumerate() {
        t.examined += 1;
        if !explained(&grounds, from, to) {
            t.fail(Counterexample::Transition {
                index: i,
                from: u.state_to_string(from),
                to: u.state_to_string(to),
            });
        }
    }
    t.finish()
}

/// A posed query as recorded in the query log: the plan, its abstract
/// waypoints and how many pairs the agent traversed.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QueryEvidence {
    pub plan: Vec<(usize, Vec<u16>)>,
    pub waypoints: Vec<AbstractState>,
    pub theta: usize,
}

fn predicted_prefix(
    grounds_by_cap: &HashMap<(usize, Vec<u16>), Ground>,
    q: &QueryEvidence,
) -> usize {
    for (j, step) in q.plan.iter().enumerate() {
        let ok = grounds_by_cap
            .get(step)
            .and_then(|g| g.apply(&q.waypoints[j]))
            .is_some_and(|r| r == q.waypoints[j + 1]);
        if !ok {
            return j;
        }
    }
    q.plan.len()
}

fn index_grounds(grounds: Vec<Ground>) -> HashMap<(usize, Vec<u16>), Ground> {
    grounds
        .into_iter()
        .map(|g| ((g.cap, g.binding.clone()), g))
        .collect()
}

/// Well-typed atoms over a capability's parameters.
fn literal_instances(u: &Universe, cap: &Capability) -> Vec<LAtom> {
    let fits = |ty: &str, k: usize| {
        let p = &cap.params[k].ty;
        match ty {
            CELL_TYPE => p == CELL_TYPE,
            ANY_OBJECT_TYPE => p != CELL_TYPE,
            t => p == t,
        }
    };
    let n = cap.params.len();
    let mut out = Vec::new();
    for (pi, pred) in u.predicates.iter().enumerate() {
        let pred_id = pi as u16;
        match pred.param_types.as_slice() {
            [] => out.push(LAtom {
                pred: pred_id,
                arity: 0,
                args: [0, 0],
            }),
            [a] => {
                for i in (0..n).filter(|&i| fits(a, i)) {
                    out.push(LAtom {
                        pred: pred_id,
                        arity: 1,
                        args: [i as u8, 0],
                    });
                }
            }
            [a, b] => {
                for i in (0..n).filter(|&i| fits(a, i)) {
                    for j in (0..n).filter(|&j| j != i && fits(b, j)) {
                        out.push(LAtom {
                            pred: pred_id,
                            arity: 2,
                            args: [i as u8, j as u8],
                        });
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn mode_of(cap: &Capability, loc: Loc, atom: LAtom) -> Mode {
    cap.sites
        .iter()
        .zip(&cap.current)
        .find(|(s, _)| s.loc == loc && s.atom == atom)
        .map(|(_, m)| *m)
        .unwrap_or(Mode::Absent)
}

/// Every literal that is absent from a capability, and could be added
/// without giving the same literal the same polarity as precondition and
/// effect, must contradict a transition or a query answer the model itself
/// agrees with.
pub fn check_maximal_consistency(
    u: &Universe,
    model: &CapabilityModel,
    transitions: &[(AbstractState, AbstractState)],
    queries: &[QueryEvidence],
) -> VerificationReport {
    let mut t = Tally::new("maximal-consistency");
    let base = index_grounds(ground_model(u, model, None));
    let base_list: Vec<Ground> = base.values().cloned().collect();
    let agreeing: Vec<&QueryEvidence> = queries
        .iter()
        .filter(|q| predicted_prefix(&base, q) == q.theta)
        .collect();
    let explained_now: Vec<bool> = transitions
        .iter()
        .map(|(a, b)| explained(&base_list, a, b))
        .collect();
    for (ci, cap) in model.caps.iter().enumerate() {
        for atom in literal_instances(u, cap) {
            for loc in [Loc::Pre, Loc::Eff] {
                if mode_of(cap, loc, atom) != Mode::Absent {
                    continue;
                }
                let other = match loc {
                    Loc::Pre => Loc::Eff,
                    Loc::Eff => Loc::Pre,
                };
                for mode in [Mode::Pos, Mode::Neg] {
                    if mode_of(cap, other, atom) == mode {
                        continue;
                    }
                    t.examined += 1;
                    let grounds = ground_model(u, model, Some((ci, loc, atom, mode)));
                    let by_trace = transitions
                        .iter()
                        .zip(&explained_now)
                        .any(|((a, b), was)| *was && !explained(&grounds, a, b));
                    let refuted = by_trace || {
                        let idx = index_grounds(grounds);
                        agreeing
                            .iter()
                            .any(|q| predicted_prefix(&idx, q) != q.theta)
                    };
                    if !refuted {
                        t.fail(Counterexample::Literal {
                            cap: cap.id,
                            literal: atom.render(u, &cap.params),
                            loc,
                            mode,
                        });
                    }
                }
            }
        }
    }
    t.finish()
}

/// Reachable concrete states with their successor lists.
pub struct StateGraph {
    pub states: Vec<ConcreteState>,
    pub succ: Vec<Vec<usize>>,
    pub abstracts: Vec<AbstractState>,
    pub truncated: bool,
}

impl StateGraph {
    pub fn build(world: &World, budget: usize) -> StateGraph {
        let mut index: FxHashMap<ConcreteState, usize> = FxHashMap::default();
        let mut states = vec![world.initial.clone()];
        index.insert(world.initial.clone(), 0);
        let mut succ: Vec<Vec<usize>> = vec![vec![]];
        let mut queue = VecDeque::from([0usize]);
        let mut truncated = false;
        while let Some(i) = queue.pop_front() {
            let s = states[i].clone();
            let mut out = Vec::new();
            for a in world.actions() {
                let n = world.step(&s, a);
                let j = match index.get(&n) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= budget {
                            truncated = true;
                            continue;
                        }
                        let j = states.len();
                        index.insert(n.clone(), j);
                        states.push(n);
                        succ.push(vec![]);
                        queue.push_back(j);
                        j
                    }
                };
                if !out.contains(&j) {
                    out.push(j);
                }
            }
            succ[i] = out;
        }
        let abstracts = states.iter().map(|s| abstract_state(world, s)).collect();
        StateGraph {
            states,
            succ,
            abstracts,
            truncated,
        }
    }

    /// States from which some state with abstraction `target` is reachable.
    fn can_reach(&self, target: &AbstractState) -> Vec<bool> {
        let mut pred: Vec<Vec<usize>> = vec![vec![]; self.states.len()];
        for (i, out) in self.succ.iter().enumerate() {
            for &j in out {
                pred[j].push(i);
            }
        }
        let mut mark = vec![false; self.states.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for (i, a) in self.abstracts.iter().enumerate() {
            if a == target {
                mark[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(j) = queue.pop_front() {
            for &i in &pred[j] {
                if !mark[i] {
                    mark[i] = true;
                    queue.push_back(i);
                }
            }
        }
        mark
    }
}

/// For every grounding of every capability and every reachable concrete
/// state whose abstraction satisfies the grounded precondition, some action
/// sequence must lead to a state whose abstraction is the capability's
/// result.
pub fn check_realizability(
    world: &World,
    model: &CapabilityModel,
    state_budget: usize,
) -> VerificationReport {
    let graph = StateGraph::build(world, state_budget);
    check_realizability_on(world, model, &graph)
}

pub fn check_realizability_on(
    world: &World,
    model: &CapabilityModel,
    graph: &StateGraph,
) -> VerificationReport {
    if graph.states.len() < EXHAUSTIVE_STATE_LIMIT {
        check_realizability_cases(world, model, graph, None)
    } else {
        check_realizability_cases(
            world,
            model,
            graph,
            Some((REALIZABILITY_SAMPLES, REALIZABILITY_SEED)),
        )
    }
}

/// With `sample = Some((n, seed))`, checks `n` random (grounding, abstract
/// state) cases with one random concrete member each instead of all of them.
pub fn check_realizability_cases(
    world: &World,
    model: &CapabilityModel,
    graph: &StateGraph,
    sample: Option<(usize, u64)>,
) -> VerificationReport {
    let mut t = Tally::new("realizability");
    t.partial = graph.truncated;
    let u = &world.universe;
    let grounds = ground_model(u, model, None);
    let mut members: HashMap<&AbstractState, Vec<usize>> = HashMap::new();
    for (i, a) in graph.abstracts.iter().enumerate() {
        members.entry(a).or_default().push(i);
    }
    let mut abstracts: Vec<&AbstractState> = members.keys().copied().collect();
    abstracts.sort();
    // (grounding, abstract state, target), nontrivial ones only.
    let mut cases: Vec<(usize, usize, AbstractState)> = Vec::new();
    for (gi, g) in grounds.iter().enumerate() {
        for (ai, a) in abstracts.iter().enumerate() {
            let Some(target) = g.apply(a) else { continue };
            if target == **a {
                t.examined += members[a].len();
                continue;
            }
            cases.push((gi, ai, target));
        }
    }
    let mut picks: Vec<(usize, Option<usize>)> = (0..cases.len()).map(|c| (c, None)).collect();
    if let Some((n, seed)) = sample {
        if n < cases.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen = rand::seq::index::sample(&mut rng, cases.len(), n).into_vec();
            chosen.sort_unstable();
            picks = chosen
                .into_iter()
                .map(|c| {
                    let m = members[abstracts[cases[c].1]].len();
                    (c, Some(rng.gen_range(0..m)))
                })
                .collect();
            t.sampled = true;
            t.examined = 0;
        }
    }
    let mut reach_cache: HashMap<AbstractState, Vec<bool>> = HashMap::new();
    for (c, member) in picks {
        let (gi, ai, target) = &cases[c];
        let g = &grounds[*gi];
        let ids = &members[abstracts[*ai]];
        let ids: Vec<usize> = match member {
            Some(m) => vec![ids[m]],
            None => ids.clone(),
        };
        t.examined += ids.len();
        let reach = reach_cache
            .entry(target.clone())
            .or_insert_with(|| graph.can_reach(target));
        for i in ids {
            if !reach[i] {
                t.fail(Counterexample::Grounding {
                    cap: model.caps[g.cap].id,
                    binding: g
                        .binding
                        .iter()
                        .map(|s| u.symbols[*s as usize].name.clone())
                        .collect(),
                    state: graph.states[i].clone(),
                    target: u.state_to_string(target),
                });
            }
        }
    }
    t.finish()
}

/// Concrete states sharing an abstract state must be mutually reachable.
/// Terminal states are left out: every action leaves them unchanged, so
/// they are absorbing by construction.
pub fn check_local_connectivity(world: &World, state_budget: usize) -> VerificationReport {
    let graph = StateGraph::build(world, state_budget);
    check_local_connectivity_on(world, &graph)
}

pub fn check_local_connectivity_on(world: &World, graph: &StateGraph) -> VerificationReport {
    let mut t = Tally::new("local-connectivity");
    t.partial = graph.truncated;
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..graph.states.len()).map(|_| g.add_node(())).collect();
    for (i, out) in graph.succ.iter().enumerate() {
        for &j in out {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut comp = vec![0usize; graph.states.len()];
    for (c, scc) in tarjan_scc(&g).into_iter().enumerate() {
        for n in scc {
            comp[n.index()] = c;
        }
    }
    let mut first: HashMap<&AbstractState, usize> = HashMap::new();
    let mut reported: HashSet<&AbstractState> = HashSet::new();
    for (i, a) in graph.abstracts.iter().enumerate() {
        if graph.states[i].is_terminal() {
            continue;
        }
        t.examined += 1;
        match first.get(a) {
            None => {
                first.insert(a, i);
            }
            Some(&r) if comp[r] != comp[i] => {
                if reported.insert(a) {
                    t.fail(Counterexample::Pair {
                        a: graph.states[r].clone(),
                        b: graph.states[i].clone(),
                        abstract_state: world.universe.state_to_string(a),
                    });
                }
            }
            Some(_) => {}
        }
    }
    t.finish()
}

/// Fraction of `gold` capabilities exercised by at least one transition.
pub fn gold_coverage(
    u: &Universe,
    gold: &CapabilityModel,
    transitions: &[(AbstractState, AbstractState)],
) -> f64 {
    if gold.caps.is_empty() {
        return 1.0;
    }
    let grounds = ground_model(u, gold, None);
    let hit: HashSet<usize> = transitions
        .iter()
        .flat_map(|(a, b)| {
            grounds
                .iter()
                .filter(move |g| g.apply(a).as_ref() == Some(b))
                .map(|g| g.cap)
        })
        .collect();
    hit.len() as f64 / gold.caps.len() as f64
}

/// Gold coverage of the distinct abstract transitions seen in the first
/// `b` tasks, for each budget `b`. Tasks come from one seeded list, so each
/// budget's transition set contains the smaller budgets' sets.
pub fn coverage_curve(
    world: &World,
    agent: &mut AgentHandle,
    gold: &CapabilityModel,
    budgets: &[usize],
    seed: u64,
) -> Result<Vec<(usize, f64)>, HarvestError> {
    let max = budgets.iter().copied().max().unwrap_or(0);
    let tasks = if max == 0 {
        Vec::new()
    } else {
        generate_tasks(world, max, seed)?
    };
    let u = &world.universe;
    let mut seen: HashSet<(AbstractState, AbstractState)> = HashSet::new();
    let mut transitions: Vec<(AbstractState, AbstractState)> = Vec::new();
    // Transition count after each task.
    let mut after: Vec<usize> = vec![0];
    for task in &tasks {
        if let Some(trace) = agent.solve_task(world, &task.start, &task.goal) {
            let abs: Vec<AbstractState> = trace.iter().map(|s| abstract_state(world, s)).collect();
            for w in abs.windows(2) {
                if w[0] != w[1] && seen.insert((w[0].clone(), w[1].clone())) {
                    transitions.push((w[0].clone(), w[1].clone()));
                }
            }
        }
        after.push(transitions.len());
    }
    Ok(budgets
        .iter()
        .map(|&b| {
            if b == 0 {
                (0, 0.0)
            } else {
                (b, gold_coverage(u, gold, &transitions[..after[b]]))
            }
        })
        .collect())
}

/// Reference modes for the sites of `learned`, one vector per renaming of
/// `gold` into it. A renaming maps the reference parameters injectively onto
/// learned parameters of the same type so that the reference capability adds
/// and deletes exactly `add` and `del`. Sites the reference does not mention,
/// or that mention unmapped parameters, get the absent mode.
pub fn gold_modes(
    gold: &Capability,
    learned: &Capability,
    add: &[LAtom],
    del: &[LAtom],
) -> Vec<Vec<Mode>> {
    let g = Lifted::of(gold);
    let mut want_add = add.to_vec();
    let mut want_del = del.to_vec();
    want_add.sort();
    want_del.sort();
    let rename = |a: &LAtom, sigma: &[u8]| {
        let mut b = *a;
        for i in 0..a.arity as usize {
            b.args[i] = sigma[a.args[i] as usize];
        }
        b
    };
    let mut out = Vec::new();
    let mut sigma: Vec<u8> = Vec::new();
    fn rec(
        gold: &Capability,
        learned: &Capability,
        sigma: &mut Vec<u8>,
        found: &mut dyn FnMut(&[u8]),
    ) {
        if sigma.len() == gold.params.len() {
            found(sigma);
            return;
        }
        let ty = &gold.params[sigma.len()].ty;
        for (j, p) in learned.params.iter().enumerate() {
            if p.ty == *ty && !sigma.contains(&(j as u8)) {
                sigma.push(j as u8);
                rec(gold, learned, sigma, found);
                sigma.pop();
            }
        }
    }
    rec(gold, learned, &mut sigma, &mut |s: &[u8]| {
        let mut a: Vec<LAtom> = g.add.iter().map(|x| rename(x, s)).collect();
        let mut d: Vec<LAtom> = g.del.iter().map(|x| rename(x, s)).collect();
        a.sort();
        d.sort();
        if a != want_add || d != want_del {
            return;
        }
        let mut modes = vec![Mode::Absent; learned.sites.len()];
        for (site, mode) in gold.sites.iter().zip(&gold.current) {
            if *mode == Mode::Absent {
                continue;
            }
            let atom = rename(&site.atom, s);
            match learned
                .sites
                .iter()
                .position(|x| x.loc == site.loc && x.atom == atom)
            {
                Some(i) => modes[i] = *mode,
                None => return,
            }
        }
        out.push(modes);
    });
    out
}
