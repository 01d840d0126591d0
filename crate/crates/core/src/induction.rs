//! Capability candidates from abstract transitions: grounding, lifting and
//! merging into a seeded capability model.

use std::collections::BTreeSet;

use crate::abstraction::{AbstractState, Atom, Universe};
use crate::dsl::Evaluator;
use crate::model::{sites_for, Capability, LAtom, Loc, Mode, ModeSet, Param};

/// One observed abstract transition with its partial precondition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedCandidate {
    pub transition: usize,
    pub pre: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

/// Builds one candidate per transition. The partial precondition keeps the
/// non-nullary literals of the source state whose arguments all belong to the
/// objects touched by the effects (or, for effects on nullary predicates only,
/// the objects the agent is next to), the agent, and the cells linked to
/// those by `at` literals.
pub fn extract_candidates(
    u: &Universe,
    transitions: &[(AbstractState, AbstractState)],
) -> Vec<GroundedCandidate> {
    let at_preds: Vec<u16> = u
        .predicates
        .iter()
        .enumerate()
        .filter(|(_, p)| p.evaluator == Evaluator::At)
        .map(|(i, _)| i as u16)
        .collect();
    let next_preds: Vec<u16> = u
        .predicates
        .iter()
        .enumerate()
        .filter(|(_, p)| p.evaluator == Evaluator::NextTo)
        .map(|(i, _)| i as u16)
        .collect();
    transitions
        .iter()
        .enumerate()
        .map(|(ti, (from, to))| {
            let add = to.minus(from);
            let del = from.minus(to);
            let mut rel: BTreeSet<u16> = BTreeSet::new();
            for a in add.iter().chain(&del) {
                rel.extend(u.args(a).iter().copied());
            }
            if rel.is_empty() {
                // A change that names no object is credited to whatever the
                // agent is next to.
                for a in from.atoms() {
                    if next_preds.contains(&a.pred) {
                        rel.insert(a.args[0]);
                    }
                }
            }
            rel.extend(u.avatar_symbol());
            let seed = rel.clone();
            for a in from.atoms().iter().chain(to.atoms()) {
                if at_preds.contains(&a.pred) {
                    let (o, c) = (a.args[0], a.args[1]);
                    if seed.contains(&o) {
                        rel.insert(c);
                    }
                    if seed.contains(&c) {
                        rel.insert(o);
                    }
                }
            }
            let pre = from
                .atoms()
                .iter()
                .filter(|a| u.arity(a) > 0 && u.args(a).iter().all(|s| rel.contains(s)))
                .copied()
                .collect();
            GroundedCandidate {
                transition: ti,
                pre,
                add,
                del,
            }
        })
        .collect()
}

/// A candidate with objects replaced by parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedCandidate {
    pub transition: usize,
    pub params: Vec<Param>,
    pub binding: Vec<u16>,
    pub pre: Vec<LAtom>,
    pub add: Vec<LAtom>,
    pub del: Vec<LAtom>,
}

/// Parameters are numbered by first appearance in the sorted precondition,
/// then in the sorted effects; names are `?{type}{n}` counted per type.
pub fn lift(u: &Universe, g: &GroundedCandidate) -> LiftedCandidate {
    let mut effects: Vec<Atom> = g.add.iter().chain(&g.del).copied().collect();
    effects.sort();
    let mut binding: Vec<u16> = Vec::new();
    for a in g.pre.iter().chain(&effects) {
        for s in u.args(a) {
            if !binding.contains(s) {
                binding.push(*s);
            }
        }
    }
    let mut counts: Vec<(String, usize)> = Vec::new();
    let params = binding
        .iter()
        .map(|&s| {
            let ty = u.symbols[s as usize].ty.clone();
            let n = match counts.iter_mut().find(|(t, _)| *t == ty) {
                Some((_, n)) => {
                    *n += 1;
                    *n
                }
                None => {
                    counts.push((ty.clone(), 1));
                    1
                }
            };
            Param {
                name: format!("?{ty}{n}"),
                ty,
            }
        })
        .collect();
    let la = |a: &Atom| {
        let ar = u.arity(a);
        let mut args = [0u8; 2];
        for (i, s) in u.args(a).iter().enumerate() {
            args[i] = binding.iter().position(|b| b == s).expect("bound") as u8;
        }
        LAtom {
            pred: a.pred,
            arity: ar as u8,
            args,
        }
    };
    let lift_all = |v: &[Atom]| {
        let mut out: Vec<LAtom> = v.iter().map(la).collect();
        out.sort();
        out
    };
    LiftedCandidate {
        transition: g.transition,
        pre: lift_all(&g.pre),
        add: lift_all(&g.add),
        del: lift_all(&g.del),
        params,
        binding,
    }
}

fn rename(v: &[LAtom], sigma: &[u8]) -> Vec<LAtom> {
    let mut out: Vec<LAtom> = v
        .iter()
        .map(|a| {
            let mut b = *a;
            for i in 0..a.arity as usize {
                b.args[i] = sigma[a.args[i] as usize];
            }
            b
        })
        .collect();
    out.sort();
    out
}

/// A type-preserving bijection `sigma` from the parameters of `b` to those of
/// `a` under which both have identical precondition and effect sets.
pub fn unify(a: &LiftedCandidate, b: &LiftedCandidate) -> Option<Vec<u8>> {
    if a.params.len() != b.params.len()
        || a.pre.len() != b.pre.len()
        || a.add.len() != b.add.len()
        || a.del.len() != b.del.len()
    {
        return None;
    }
    fn rec(
        a: &LiftedCandidate,
        b: &LiftedCandidate,
        sigma: &mut Vec<u8>,
        used: &mut Vec<bool>,
    ) -> bool {
        let k = sigma.len();
        if k == b.params.len() {
            return rename(&b.pre, sigma) == a.pre
                && rename(&b.add, sigma) == a.add
                && rename(&b.del, sigma) == a.del;
        }
        for t in 0..a.params.len() {
            if !used[t] && a.params[t].ty == b.params[k].ty {
                used[t] = true;
                sigma.push(t as u8);
                if rec(a, b, sigma, used) {
                    return true;
                }
                sigma.pop();
                used[t] = false;
            }
        }
        false
    }
    let mut sigma = Vec::with_capacity(b.params.len());
    let mut used = vec![false; a.params.len()];
    rec(a, b, &mut sigma, &mut used).then_some(sigma)
}

/// Mode constraints a single observation places on a ground literal.
pub fn seed_modes(loc: Loc, atom: &Atom, from: &AbstractState, to: &AbstractState) -> ModeSet {
    let before = from.contains(atom);
    let after = to.contains(atom);
    match loc {
        Loc::Pre if before => ModeSet::of(&[Mode::Pos, Mode::Absent]),
        Loc::Pre => ModeSet::of(&[Mode::Neg, Mode::Absent]),
        Loc::Eff => match (before, after) {
            (false, true) => ModeSet::single(Mode::Pos),
            (true, false) => ModeSet::single(Mode::Neg),
            (true, true) => ModeSet::of(&[Mode::Pos, Mode::Absent]),
            (false, false) => ModeSet::of(&[Mode::Neg, Mode::Absent]),
        },
    }
}

/// Result of the induction stage.
#[derive(Debug, Clone)]
pub struct Induction {
    pub transitions: Vec<(AbstractState, AbstractState)>,
    pub candidates: usize,
    pub caps: Vec<Capability>,
    /// Lifted skeleton each capability was created from.
    pub skeletons: Vec<LiftedCandidate>,
}

/// Lifts every transition and merges unifiable candidates. Mode sets are the
/// intersection of the constraints of every merged observation.
pub fn induce(u: &Universe, transitions: Vec<(AbstractState, AbstractState)>) -> Induction {
    let grounded = extract_candidates(u, &transitions);
    let mut skeletons: Vec<LiftedCandidate> = Vec::new();
    let mut groundings: Vec<Vec<(Vec<u16>, usize)>> = Vec::new();
    for g in &grounded {
        let l = lift(u, g);
        let hit = skeletons
            .iter()
            .enumerate()
            .find_map(|(i, s)| unify(s, &l).map(|sigma| (i, sigma)));
        match hit {
            Some((i, sigma)) => {
                let mut b = vec![0u16; l.binding.len()];
                for (k, &t) in sigma.iter().enumerate() {
                    b[t as usize] = l.binding[k];
                }
                if !groundings[i].iter().any(|(x, _)| *x == b) {
                    groundings[i].push((b, l.transition));
                }
            }
            None => {
                groundings.push(vec![(l.binding.clone(), l.transition)]);
                skeletons.push(l);
            }
        }
    }
    let caps = skeletons
        .iter()
        .zip(groundings)
        .enumerate()
        .map(|(id, (sk, gs))| seed_capability(u, id, sk, gs, &transitions))
        .collect();
    Induction {
        transitions,
        candidates: grounded.len(),
        caps,
        skeletons,
    }
}

fn seed_capability(
    u: &Universe,
    id: usize,
    sk: &LiftedCandidate,
    groundings: Vec<(Vec<u16>, usize)>,
    transitions: &[(AbstractState, AbstractState)],
) -> Capability {
    let sites = sites_for(u, &sk.params);
    let modes = sites
        .iter()
        .map(|site| {
            groundings.iter().fold(ModeSet::ALL, |acc, (b, t)| {
                let (from, to) = &transitions[*t];
                acc.intersect(seed_modes(site.loc, &site.atom.ground(b), from, to))
            })
        })
        .collect::<Vec<_>>();
    let current = sites
        .iter()
        .zip(&modes)
        .map(|(site, set)| {
            let preferred = match site.loc {
                Loc::Pre if sk.pre.contains(&site.atom) => Mode::Pos,
                Loc::Eff if sk.add.contains(&site.atom) => Mode::Pos,
                Loc::Eff if sk.del.contains(&site.atom) => Mode::Neg,
                _ => Mode::Absent,
            };
            if set.contains(preferred) {
                preferred
            } else if set.contains(Mode::Absent) {
                Mode::Absent
            } else {
                set.modes().next().unwrap_or(Mode::Absent)
            }
        })
        .collect();
    let mut cap = Capability {
        id,
        params: sk.params.clone(),
        sites,
        modes,
        current,
        groundings,
    };
    cap.enforce_redundancy();
    cap
}
