//! Active querying: resolves the open literal modes of an induced model by
//! asking the agent whether chains of concrete states are reachable.

use std::collections::HashSet;
use std::time::Duration;

use log::{debug, info};
use thiserror::Error;

use crate::abstraction::{abstract_state, concretize_near, AbstractState, Atom};
use crate::agents::AgentHandle;
use crate::harvest::Harvest;
use crate::model::{Capability, CapabilityModel, Description, GroundDescription, Loc, Mode};
use crate::world::{ConcreteState, ObjStatus, World, FLAG_COOKED, FLAG_ESCAPED};

/// Longest abstract plan considered for a distinguishing query.
pub const QUERY_PLAN_BOUND: usize = 4;
/// Extra attempts after an uninformative answer.
pub const MAX_REGENERATIONS: usize = 3;
/// Other refinements of the same abstract waypoint tried after a failed
/// reachability query before the failure is accepted.
pub const REFINEMENT_RETRIES: usize = 4;
/// Abstract states expanded per start state when looking for a longer plan.
const PREFIX_STATE_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("capability {cap}: literal {site} admits no mode consistent with the agent's answers")]
    Inexpressible { cap: usize, site: String },
}

/// How a site ended up with its mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolution {
    /// Fixed by the observed transitions alone.
    Observed,
    Queried,
    /// No satisfiable query separates the remaining modes.
    Indistinguishable,
    Unresolved,
}

impl Resolution {
    pub fn name(self) -> &'static str {
        match self {
            Resolution::Observed => "observed",
            Resolution::Queried => "queried",
            Resolution::Indistinguishable => "indistinguishable",
            Resolution::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// The first variant agreed with the agent; the second was removed.
    KeptFirst,
    KeptSecond,
    RemovedBoth,
    Uninformative,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::KeptFirst => "kept-first",
            Outcome::KeptSecond => "kept-second",
            Outcome::RemovedBoth => "removed-both",
            Outcome::Uninformative => "uninformative",
        }
    }
}

/// One step of an abstract plan: capability index and parameter binding.
pub type PlanStep = (usize, Vec<u16>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub cap: usize,
    pub site: usize,
    pub site_text: String,
    pub modes: (Mode, Mode),
    pub plan: Vec<PlanStep>,
    pub waypoints: Vec<AbstractState>,
    pub concrete: Vec<ConcreteState>,
    pub predictions: (usize, usize),
    /// Number of consecutive waypoint pairs the agent managed.
    pub theta: usize,
    pub outcome: Outcome,
    /// Wall-clock time of each reachability query asked.
    pub asks: Vec<Duration>,
}

impl QueryRecord {
    pub fn elapsed(&self) -> Duration {
        self.asks.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct QueryPhase {
    pub model: CapabilityModel,
    pub records: Vec<QueryRecord>,
    /// Per capability, per site.
    pub resolutions: Vec<Vec<Resolution>>,
    pub deferred: usize,
}

/// Number of leading waypoint pairs the plan explains under `descs`.
pub fn predict(descs: &[Description], plan: &[PlanStep], waypoints: &[AbstractState]) -> usize {
    for (j, (ci, b)) in plan.iter().enumerate() {
        let g = descs[*ci].ground(b);
        if g.apply(&waypoints[j]).as_ref() != Some(&waypoints[j + 1]) {
            return j;
        }
    }
    plan.len()
}

#[derive(Clone)]
struct Candidate {
    plan: Vec<PlanStep>,
    waypoints: Vec<AbstractState>,
    concrete: Vec<ConcreteState>,
}

struct Ground<'b> {
    binding: &'b Vec<u16>,
    x: GroundDescription,
    y: GroundDescription,
    context: Vec<(Atom, bool)>,
}

/// Observed values of the open precondition sites that share no parameter
/// with `site`. Literals about the same objects are left free, since
/// changing the tested literal usually changes them too.
fn context(cap: &Capability, site: usize, b: &[u16]) -> Vec<(Atom, bool)> {
    let tested = cap.sites[site].atom;
    cap.sites
        .iter()
        .zip(&cap.modes)
        .enumerate()
        .filter(|(j, (s, m))| {
            *j != site && s.loc == Loc::Pre && !m.is_resolved() && m.contains(Mode::Absent)
        })
        .filter(|(_, (s, _))| !s.atom.params().iter().any(|p| tested.params().contains(p)))
        .filter_map(
            |(_, (s, m))| match (m.contains(Mode::Pos), m.contains(Mode::Neg)) {
                (true, false) => Some((s.atom.ground(b), true)),
                (false, true) => Some((s.atom.ground(b), false)),
                _ => None,
            },
        )
        .collect()
}

struct Searcher<'a> {
    world: &'a World,
    starts: Vec<ConcreteState>,
    abstract_starts: Vec<AbstractState>,
    /// Bindings each capability was observed with; queries use only these.
    bindings: Vec<Vec<Vec<u16>>>,
    bound: usize,
}

impl<'a> Searcher<'a> {
    fn new(world: &'a World, harvest: &Harvest, caps: &[Capability], bound: usize) -> Self {
        let mut seen = HashSet::new();
        let mut starts = Vec::new();
        for (a, c) in &harvest.representatives {
            if seen.insert(a.clone()) {
                starts.push(c.clone());
            }
        }
        let base = starts.clone();
        for s in &base {
            for p in perturbations(world, s) {
                if seen.insert(abstract_state(world, &p)) {
                    starts.push(p);
                }
            }
        }
        let bindings = caps
            .iter()
            .map(|c| c.groundings.iter().map(|(b, _)| b.clone()).collect())
            .collect();
        let abstract_starts = starts.iter().map(|s| abstract_state(world, s)).collect();
        Searcher {
            world,
            starts,
            abstract_starts,
            bindings,
            bound,
        }
    }

    /// Finds a satisfiable plan on which the two variants of capability `k`
    /// disagree, skipping plans already in `used`.
    #[allow(clippy::too_many_arguments)]
    fn find(
        &self,
        current: &[Description],
        cap: &Capability,
        site: usize,
        k: usize,
        dx: &Description,
        dy: &Description,
        used: &HashSet<(AbstractState, Vec<PlanStep>)>,
    ) -> Option<Candidate> {
        let ground: Vec<Ground> = self.bindings[k]
            .iter()
            .map(|b| Ground {
                binding: b,
                x: dx.ground(b),
                y: dy.ground(b),
                context: context(cap, site, b),
            })
            .collect();
        let others: Vec<(usize, Vec<u16>, GroundDescription)> = current
            .iter()
            .enumerate()
            .filter(|(ci, _)| *ci != k)
            .flat_map(|(ci, d)| {
                self.bindings[ci]
                    .iter()
                    .map(move |b| (ci, b.clone(), d.ground(b)))
            })
            .collect();
        // Four preference classes, best first: states that match the
        // observed context on the other open preconditions (so a failure is
        // not blamed on the wrong literal), then the rest; within each, plans
        // whose last step changes the state before those whose final step
        // can only confirm applicability. One scan keeps the first candidate
        // of each class.
        let mut best: [Option<Candidate>; 4] = [None, None, None, None];
        for depth in 0..self.bound {
            for (s0, a0) in self.starts.iter().zip(&self.abstract_starts) {
                for (prefix, states) in prefixes(&others, a0, depth) {
                    let last = states.last().expect("non-empty");
                    for g in &ground {
                        let strict = g.context.iter().all(|(a, want)| last.contains(a) == *want);
                        if !strict && best[2].is_some() && best[3].is_some() {
                            continue;
                        }
                        let rx = g.x.apply(last);
                        let ry = g.y.apply(last);
                        if rx == ry {
                            continue;
                        }
                        let mut plan = prefix.clone();
                        plan.push((k, g.binding.clone()));
                        if used.contains(&(a0.clone(), plan.clone())) {
                            continue;
                        }
                        for r in [rx.as_ref(), ry.as_ref()].into_iter().flatten() {
                            let noop = r == last;
                            let classes: Vec<usize> =
                                [(true, false), (true, true), (false, false), (false, true)]
                                    .iter()
                                    .enumerate()
                                    .filter(|(c, (need_strict, allow_noop))| {
                                        best[*c].is_none()
                                            && (strict || !need_strict)
                                            && (*allow_noop || !noop)
                                    })
                                    .map(|(c, _)| c)
                                    .collect();
                            if classes.is_empty() {
                                continue;
                            }
                            let mut waypoints = states.clone();
                            waypoints.push(r.clone());
                            if let Some(concrete) = self.concretize_chain(s0, &waypoints) {
                                let cand = Candidate {
                                    plan: plan.clone(),
                                    waypoints,
                                    concrete,
                                };
                                for c in classes {
                                    best[c] = Some(cand.clone());
                                }
                                if best[0].is_some() {
                                    return best[0].take();
                                }
                            }
                        }
                    }
                }
            }
        }
        best.into_iter().flatten().next()
    }

    fn concretize_chain(
        &self,
        s0: &ConcreteState,
        waypoints: &[AbstractState],
    ) -> Option<Vec<ConcreteState>> {
        let mut out = vec![s0.clone()];
        for w in &waypoints[1..] {
            let prev = out.last().expect("non-empty");
            let next = concretize_near(self.world, w, prev)?;
            out.push(next);
        }
        Some(out)
    }
}

/// All plans of exactly `depth` steps over `steps` starting at `a0`, with the
/// visited states, breadth first and capped.
fn prefixes(
    steps: &[(usize, Vec<u16>, GroundDescription)],
    a0: &AbstractState,
    depth: usize,
) -> Vec<(Vec<PlanStep>, Vec<AbstractState>)> {
    let mut layer = vec![(Vec::new(), vec![a0.clone()])];
    let mut seen: HashSet<AbstractState> = HashSet::from([a0.clone()]);
    for _ in 0..depth {
        let mut next = Vec::new();
        for (plan, states) in &layer {
            let s = states.last().expect("non-empty");
            for (ci, b, g) in steps {
                if let Some(t) = g.apply(s) {
                    if seen.len() >= PREFIX_STATE_CAP || !seen.insert(t.clone()) {
                        continue;
                    }
                    let mut p: Vec<PlanStep> = plan.clone();
                    p.push((*ci, b.clone()));
                    let mut st = states.clone();
                    st.push(t);
                    next.push((p, st));
                }
            }
        }
        layer = next;
        if layer.is_empty() {
            break;
        }
    }
    if layer.first().map(|(p, _)| p.len()) == Some(depth) {
        layer
    } else {
        Vec::new()
    }
}

/// Valid states one change away from `s`: an object status switched, a flag
/// toggled, or the agent moved next to or onto an object's home cell.
pub fn perturbations(world: &World, s: &ConcreteState) -> Vec<ConcreteState> {
    let mut out = Vec::new();
    let mut push = |c: ConcreteState| {
        if c != *s && world.is_valid_state(&c) && !out.contains(&c) {
            out.push(c);
        }
    };
    for (i, o) in world.objects.iter().enumerate() {
        for st in [
            ObjStatus::At(o.home),
            ObjStatus::Held,
            ObjStatus::Gone,
            ObjStatus::Placed,
        ] {
            let mut c = s.clone();
            c.objects[i] = st;
            push(c);
        }
    }
    for flag in [FLAG_ESCAPED, FLAG_COOKED] {
        let mut c = s.clone();
        c.flags ^= flag;
        push(c);
    }
    for o in &world.objects {
        let mut cells = vec![o.home];
        cells.extend(
            crate::dsl::Direction::ALL
                .iter()
                .filter_map(|d| world.offset(o.home, *d)),
        );
        for p in cells {
            let mut c = s.clone();
            c.agent = p;
            push(c);
        }
    }
    out
}

/// Resolves every open site of `caps` in order, preconditions first.
pub fn resolve(
    world: &World,
    harvest: &Harvest,
    agent: &mut AgentHandle,
    caps: Vec<Capability>,
) -> Result<QueryPhase, QueryError> {
    resolve_with(world, harvest, agent, caps, QUERY_PLAN_BOUND)
}

/// [`resolve`] with query plans of at most `bound` steps.
pub fn resolve_with(
    world: &World,
    harvest: &Harvest,
    agent: &mut AgentHandle,
    caps: Vec<Capability>,
    bound: usize,
) -> Result<QueryPhase, QueryError> {
    let searcher = Searcher::new(world, harvest, &caps, bound);
    let mut model = CapabilityModel { caps };
    let mut resolutions: Vec<Vec<Resolution>> = model
        .caps
        .iter()
        .map(|c| {
            c.modes
                .iter()
                .map(|m| {
                    if m.is_resolved() {
                        Resolution::Observed
                    } else {
                        Resolution::Unresolved
                    }
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut used: HashSet<(AbstractState, Vec<PlanStep>)> = HashSet::new();
    let mut deferred: Vec<(usize, usize)> = Vec::new();
    let order: Vec<(usize, usize)> = model
        .caps
        .iter()
        .enumerate()
        .flat_map(|(k, c)| (0..c.sites.len()).map(move |i| (k, i)))
        .collect();
    for (k, i) in order {
        if !resolve_site(
            world,
            &searcher,
            agent,
            &mut model,
            &mut resolutions,
            &mut records,
            &mut used,
            k,
            i,
        )? {
            deferred.push((k, i));
        }
    }
    let n_deferred = deferred.len();
    for (k, i) in deferred {
        resolve_site(
            world,
            &searcher,
            agent,
            &mut model,
            &mut resolutions,
            &mut records,
            &mut used,
            k,
            i,
        )?;
    }
    info!(
        "query phase: {} queries, {} open sites left",
        records.len(),
        model.unresolved_count()
    );
    Ok(QueryPhase {
        model,
        records,
        resolutions,
        deferred: n_deferred,
    })
}

/// Agent positions and facings that refine `w` like `near` does, nearest
/// first.
fn alternative_refinements(
    world: &World,
    w: &AbstractState,
    near: &ConcreteState,
) -> Vec<ConcreteState> {
    let mut out: Vec<(u32, ConcreteState)> = Vec::new();
    for p in world.open_cells() {
        for d in crate::dsl::Direction::ALL {
            let mut c = near.clone();
            c.agent = p;
            c.facing = d;
            if c == *near || !world.is_valid_state(&c) || abstract_state(world, &c) != *w {
                continue;
            }
            let dist = (p.row as i32 - near.agent.row as i32).unsigned_abs()
                + (p.col as i32 - near.agent.col as i32).unsigned_abs();
            out.push((dist, c));
        }
    }
    out.sort_by_key(|(d, _)| *d);
    out.into_iter()
        .map(|(_, c)| c)
        .take(REFINEMENT_RETRIES)
        .collect()
}

/// Walks the waypoint pairs through the agent. A failed pair is re-asked
/// with other refinements of its target, and the rest of the chain is
/// refined again from whichever one was reached. Returns the number of
/// pairs traversed, the states actually used and the time of every query.
fn ask_chain(
    world: &World,
    searcher: &Searcher,
    agent: &mut AgentHandle,
    concrete: &[ConcreteState],
    waypoints: &[AbstractState],
) -> (usize, Vec<ConcreteState>, Vec<Duration>) {
    let mut chain = concrete.to_vec();
    let mut asks = Vec::new();
    let mut theta = 0;
    while theta + 1 < chain.len() {
        let (from, to) = (chain[theta].clone(), chain[theta + 1].clone());
        let r = agent.answer_reachability(world, &from, &to);
        asks.push(r.elapsed);
        if r.success {
            theta += 1;
            continue;
        }
        let mut reached = None;
        for alt in alternative_refinements(world, &waypoints[theta + 1], &to) {
            let r = agent.answer_reachability(world, &from, &alt);
            asks.push(r.elapsed);
            if r.success {
                reached = Some(alt);
                break;
            }
        }
        let Some(alt) = reached else {
            break;
        };
        match searcher.concretize_chain(&alt, &waypoints[theta + 1..]) {
            Some(rest) => {
                chain.truncate(theta + 1);
                chain.extend(rest);
                theta += 1;
            }
            None => {
                chain.truncate(theta + 1);
                chain.push(alt);
                theta += 1;
                break;
            }
        }
    }
    (theta, chain, asks)
}

/// Returns false if the site was left open after repeated uninformative
/// answers.
#[allow(clippy::too_many_arguments)]
fn resolve_site(
    world: &World,
    searcher: &Searcher,
    agent: &mut AgentHandle,
    model: &mut CapabilityModel,
    resolutions: &mut [Vec<Resolution>],
    records: &mut Vec<QueryRecord>,
    used: &mut HashSet<(AbstractState, Vec<PlanStep>)>,
    k: usize,
    i: usize,
) -> Result<bool, QueryError> {
    const PAIRS: [(Mode, Mode); 3] = [
        (Mode::Pos, Mode::Neg),
        (Mode::Pos, Mode::Absent),
        (Mode::Neg, Mode::Absent),
    ];
    for (x, y) in PAIRS {
        let set = model.caps[k].modes[i];
        if !set.contains(x) || !set.contains(y) {
            continue;
        }
        let mut settled = false;
        for _ in 0..=MAX_REGENERATIONS {
            let cap = &model.caps[k];
            let current: Vec<Description> =
                model.caps.iter().map(Capability::description).collect();
            let dx = cap.variant(i, x);
            let dy = cap.variant(i, y);
            let Some(cand) = searcher.find(&current, cap, i, k, &dx, &dy, used) else {
                // Nothing observable separates the two; keep the specific one.
                model.caps[k].prune(i, y);
                if resolutions[k][i] != Resolution::Queried {
                    resolutions[k][i] = Resolution::Indistinguishable;
                }
                settled = true;
                break;
            };
            used.insert((cand.waypoints[0].clone(), cand.plan.clone()));
            let (theta, concrete, asks) =
                ask_chain(world, searcher, agent, &cand.concrete, &cand.waypoints);
            let mut vx = current.clone();
            vx[k] = dx;
            let mut vy = current;
            vy[k] = dy;
            let px = predict(&vx, &cand.plan, &cand.waypoints);
            let py = predict(&vy, &cand.plan, &cand.waypoints);
            let outcome = if px == theta && py != theta {
                Outcome::KeptFirst
            } else if py == theta && px != theta {
                Outcome::KeptSecond
            } else if theta < px.min(py) {
                Outcome::Uninformative
            } else {
                Outcome::RemovedBoth
            };
            let site_text = model.caps[k].render_site(&world.universe, i);
            debug!(
                "cap{k} {site_text} {}{}: predictions ({px},{py}) theta {theta} -> {}",
                x.symbol(),
                y.symbol(),
                outcome.name()
            );
            records.push(QueryRecord {
                cap: k,
                site: i,
                site_text: site_text.clone(),
                modes: (x, y),
                plan: cand.plan,
                waypoints: cand.waypoints,
                concrete,
                predictions: (px, py),
                theta,
                outcome,
                asks,
            });
            let cap = &mut model.caps[k];
            let alive = match outcome {
                Outcome::KeptFirst => cap.prune(i, y),
                Outcome::KeptSecond => cap.prune(i, x),
                Outcome::RemovedBoth => cap.prune(i, x) & cap.prune(i, y),
                Outcome::Uninformative => continue,
            };
            if !alive {
                return Err(QueryError::Inexpressible {
                    cap: k,
                    site: site_text,
                });
            }
            resolutions[k][i] = Resolution::Queried;
            settled = true;
            break;
        }
        if !settled {
            return Ok(false);
        }
    }
    model.caps[k].enforce_redundancy();
    let cap = &model.caps[k];
    for (j, m) in cap.modes.iter().enumerate() {
        if m.is_resolved() && resolutions[k][j] == Resolution::Unresolved {
            resolutions[k][j] = Resolution::Observed;
        }
    }
    Ok(true)
}
