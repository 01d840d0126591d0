//! Lifted capabilities, literal modes and their ground semantics.

use std::fmt;

use crate::abstraction::{AbstractState, Atom, Universe};
use crate::dsl::{ANY_OBJECT_TYPE, CELL_TYPE};

/// Where a literal sits in a capability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Loc {
    Pre,
    Eff,
}

impl Loc {
    pub fn name(self) -> &'static str {
        match self {
            Loc::Pre => "pre",
            Loc::Eff => "eff",
        }
    }
}

/// Polarity of a literal: positive, negative, or not mentioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Pos,
    Neg,
    Absent,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Pos, Mode::Neg, Mode::Absent];

    pub fn symbol(self) -> char {
        match self {
            Mode::Pos => '+',
            Mode::Neg => '-',
            Mode::Absent => '0',
        }
    }

    pub fn from_symbol(c: char) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.symbol() == c)
    }

    fn bit(self) -> u8 {
        match self {
            Mode::Pos => 1,
            Mode::Neg => 2,
            Mode::Absent => 4,
        }
    }
}

/// Subset of {+, -, 0}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ModeSet(u8);

impl ModeSet {
    pub const EMPTY: ModeSet = ModeSet(0);
    pub const ALL: ModeSet = ModeSet(7);

    pub fn of(modes: &[Mode]) -> ModeSet {
        ModeSet(modes.iter().fold(0, |acc, m| acc | m.bit()))
    }

    pub fn single(m: Mode) -> ModeSet {
        ModeSet(m.bit())
    }

    pub fn contains(self, m: Mode) -> bool {
        self.0 & m.bit() != 0
    }

    pub fn remove(&mut self, m: Mode) {
        self.0 &= !m.bit();
    }

    pub fn intersect(self, other: ModeSet) -> ModeSet {
        ModeSet(self.0 & other.0)
    }

    pub fn union(self, other: ModeSet) -> ModeSet {
        ModeSet(self.0 | other.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_resolved(self) -> bool {
        self.len() == 1
    }

    pub fn modes(self) -> impl Iterator<Item = Mode> {
        Mode::ALL.into_iter().filter(move |m| self.contains(*m))
    }

    pub fn only(self) -> Option<Mode> {
        if self.is_resolved() {
            self.modes().next()
        } else {
            None
        }
    }
}

impl fmt::Display for ModeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.modes().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", m.symbol())?;
        }
        f.write_str("}")
    }
}

/// An atom over capability parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LAtom {
    pub pred: u16,
    pub arity: u8,
    pub args: [u8; 2],
}

impl LAtom {
    pub fn params(&self) -> &[u8] {
        &self.args[..self.arity as usize]
    }

    pub fn ground(&self, binding: &[u16]) -> Atom {
        let mut args = [0u16; 2];
        for (i, p) in self.params().iter().enumerate() {
            args[i] = binding[*p as usize];
        }
        Atom {
            pred: self.pred,
            args,
        }
    }

    pub fn render(&self, u: &Universe, params: &[Param]) -> String {
        let mut s = format!("({}", u.predicates[self.pred as usize].name);
        for p in self.params() {
            s.push(' ');
            s.push_str(&params[*p as usize].name);
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub loc: Loc,
    pub atom: LAtom,
}

/// Positive/negative preconditions and add/delete effects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Description {
    pub pre_pos: Vec<LAtom>,
    pub pre_neg: Vec<LAtom>,
    pub add: Vec<LAtom>,
    pub del: Vec<LAtom>,
}

impl Description {
    pub fn from_modes(modes: impl IntoIterator<Item = (Site, Mode)>) -> Description {
        let mut d = Description::default();
        for (site, mode) in modes {
            match (site.loc, mode) {
                (_, Mode::Absent) => {}
                (Loc::Pre, Mode::Pos) => d.pre_pos.push(site.atom),
                (Loc::Pre, Mode::Neg) => d.pre_neg.push(site.atom),
                (Loc::Eff, Mode::Pos) => d.add.push(site.atom),
                (Loc::Eff, Mode::Neg) => d.del.push(site.atom),
            }
        }
        for v in [&mut d.pre_pos, &mut d.pre_neg, &mut d.add, &mut d.del] {
            v.sort();
        }
        d
    }

    pub fn ground(&self, binding: &[u16]) -> GroundDescription {
        let g = |v: &Vec<LAtom>| {
            let mut out: Vec<Atom> = v.iter().map(|a| a.ground(binding)).collect();
            out.sort();
            out
        };
        GroundDescription {
            pre_pos: g(&self.pre_pos),
            pre_neg: g(&self.pre_neg),
            add: g(&self.add),
            del: g(&self.del),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundDescription {
    pub pre_pos: Vec<Atom>,
    pub pre_neg: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

impl GroundDescription {
    pub fn applicable(&self, s: &AbstractState) -> bool {
        self.pre_pos.iter().all(|a| s.contains(a)) && !self.pre_neg.iter().any(|a| s.contains(a))
    }

    /// `(s \ del) ∪ add`, regardless of applicability.
    pub fn result(&self, s: &AbstractState) -> AbstractState {
        s.apply(&self.add, &self.del)
    }

    pub fn apply(&self, s: &AbstractState) -> Option<AbstractState> {
        self.applicable(s).then(|| self.result(s))
    }
}

/// A lifted capability together with the mode sets still open for each of
/// its literal sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capability {
    pub id: usize,
    pub params: Vec<Param>,
    pub sites: Vec<Site>,
    pub modes: Vec<ModeSet>,
    /// Mode used for simulation while a site is still open.
    pub current: Vec<Mode>,
    /// Bindings under which the capability was observed, with the index of
    /// the observed transition.
    pub groundings: Vec<(Vec<u16>, usize)>,
}

impl Capability {
    pub fn site_index(&self, site: &Site) -> Option<usize> {
        self.sites.iter().position(|s| s == site)
    }

    pub fn is_resolved(&self) -> bool {
        self.modes.iter().all(|m| m.is_resolved())
    }

    pub fn unresolved(&self) -> impl Iterator<Item = (Site, ModeSet)> + '_ {
        self.sites
            .iter()
            .zip(&self.modes)
            .filter(|(_, m)| !m.is_resolved())
            .map(|(s, m)| (*s, *m))
    }

    pub fn description(&self) -> Description {
        Description::from_modes(self.sites.iter().copied().zip(self.current.iter().copied()))
    }

    /// The current description with one site forced to `mode`.
    pub fn variant(&self, site: usize, mode: Mode) -> Description {
        Description::from_modes(
            self.sites
                .iter()
                .copied()
                .zip(self.current.iter().copied())
                .enumerate()
                .map(|(i, (s, m))| (s, if i == site { mode } else { m })),
        )
    }

    /// Removes `mode` from a site and keeps the current choice inside the
    /// remaining set. Returns false if the site has no modes left.
    pub fn prune(&mut self, site: usize, mode: Mode) -> bool {
        self.modes[site].remove(mode);
        self.restrict_current(site);
        !self.modes[site].is_empty()
    }

    pub fn restrict_current(&mut self, site: usize) {
        let set = self.modes[site];
        if !set.contains(self.current[site]) {
            self.current[site] = if set.contains(Mode::Absent) {
                Mode::Absent
            } else {
                set.modes().next().unwrap_or(Mode::Absent)
            };
        }
    }

    /// Applies the rule that a literal cannot carry the same polarity as both
    /// precondition and effect, until nothing changes.
    pub fn enforce_redundancy(&mut self) {
        loop {
            let mut changed = false;
            for i in 0..self.sites.len() {
                if self.sites[i].loc != Loc::Pre {
                    continue;
                }
                let eff = Site {
                    loc: Loc::Eff,
                    atom: self.sites[i].atom,
                };
                let Some(j) = self.site_index(&eff) else {
                    continue;
                };
                for m in [Mode::Pos, Mode::Neg] {
                    let single = ModeSet::single(m);
                    if self.modes[i] == single
                        && self.modes[j].contains(m)
                        && self.modes[j].len() > 1
                    {
                        self.modes[j].remove(m);
                        self.restrict_current(j);
                        changed = true;
                    }
                    if self.modes[j] == single
                        && self.modes[i].contains(m)
                        && self.modes[i].len() > 1
                    {
                        self.modes[i].remove(m);
                        self.restrict_current(i);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Every injective binding of the parameters to universe symbols.
    pub fn bindings(&self, u: &Universe) -> Vec<Vec<u16>> {
        all_bindings(u, &self.params)
    }

    pub fn render_site(&self, u: &Universe, i: usize) -> String {
        format!(
            "{} {}",
            self.sites[i].atom.render(u, &self.params),
            self.sites[i].loc.name()
        )
    }
}

fn param_fits(pred_ty: &str, p: &Param) -> bool {
    match pred_ty {
        CELL_TYPE => p.ty == CELL_TYPE,
        ANY_OBJECT_TYPE => p.ty != CELL_TYPE,
        ty => p.ty == ty,
    }
}

/// All well-typed atoms over `params`, each as a precondition and an effect
/// site, ordered by predicate name, then arguments, with preconditions first.
pub fn sites_for(u: &Universe, params: &[Param]) -> Vec<Site> {
    let mut atoms = Vec::new();
    for (pi, pred) in u.predicates.iter().enumerate() {
        let fits: Vec<Vec<u8>> = pred
            .param_types
            .iter()
            .map(|ty| {
                (0..params.len() as u8)
                    .filter(|&k| param_fits(ty, &params[k as usize]))
                    .collect()
            })
            .collect();
        match fits.len() {
            0 => atoms.push(LAtom {
                pred: pi as u16,
                arity: 0,
                args: [0, 0],
            }),
            1 => atoms.extend(fits[0].iter().map(|&a| LAtom {
                pred: pi as u16,
                arity: 1,
                args: [a, 0],
            })),
            _ => {
                for &a in &fits[0] {
                    for &b in &fits[1] {
                        if a != b {
                            atoms.push(LAtom {
                                pred: pi as u16,
                                arity: 2,
                                args: [a, b],
                            });
                        }
                    }
                }
            }
        }
    }
    let mut sites: Vec<Site> = atoms
        .iter()
        .map(|&atom| Site {
            loc: Loc::Pre,
            atom,
        })
        .collect();
    sites.extend(atoms.iter().map(|&atom| Site {
        loc: Loc::Eff,
        atom,
    }));
    sites
}

/// Injective assignments of universe symbols to typed parameters.
pub fn all_bindings(u: &Universe, params: &[Param]) -> Vec<Vec<u16>> {
    let domains: Vec<Vec<u16>> = params
        .iter()
        .map(|p| {
            (0..u.symbols.len() as u16)
                .filter(|&s| u.type_matches(&p.ty, s))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(params.len());
    fn rec(domains: &[Vec<u16>], cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if cur.len() == domains.len() {
            out.push(cur.clone());
            return;
        }
        for &s in &domains[cur.len()] {
            if !cur.contains(&s) {
                cur.push(s);
                rec(domains, cur, out);
                cur.pop();
            }
        }
    }
    rec(&domains, &mut cur, &mut out);
    out
}

/// An ordered set of capabilities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CapabilityModel {
    pub caps: Vec<Capability>,
}

impl CapabilityModel {
    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn is_resolved(&self) -> bool {
        self.caps.iter().all(Capability::is_resolved)
    }

    pub fn unresolved_count(&self) -> usize {
        self.caps.iter().map(|c| c.unresolved().count()).sum()
    }

    /// Ground descriptions of every capability under every binding, as
    /// `(capability index, binding, description)`.
    pub fn ground_all(&self, u: &Universe) -> Vec<(usize, Vec<u16>, GroundDescription)> {
        let mut out = Vec::new();
        for (ci, c) in self.caps.iter().enumerate() {
            let d = c.description();
            for b in c.bindings(u) {
                let g = d.ground(&b);
                out.push((ci, b, g));
            }
        }
        out
    }

    /// Whether some capability under some binding maps `from` to `to`.
    pub fn explains(&self, u: &Universe, from: &AbstractState, to: &AbstractState) -> bool {
        self.caps.iter().any(|c| {
            let d = c.description();
            c.bindings(u)
                .iter()
                .any(|b| d.ground(b).apply(from).as_ref() == Some(to))
        })
    }
}
