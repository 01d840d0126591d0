//! Predicate evaluation, state abstraction and concretization.
//!
//! The object universe contains every object of the instance plus one
//! `cell{index}` symbol for each cell that initially holds a non-agent object
//! (the landmark cells). Symbols and predicates are indexed in byte-wise name
//! order, so comparing [`Atom`]s numerically is the same as comparing their
//! printed forms lexicographically.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Behavior, DomainSpec, Evaluator, PredicateDef, ANY_OBJECT_TYPE, CELL_TYPE};
use crate::world::{ConcreteState, ObjStatus, ObjectInfo, Pos, World, FLAG_COOKED, FLAG_ESCAPED};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("predicate '{name}' takes {expected} arguments, got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("argument '{arg}' does not match parameter type '{ty}'")]
    TypeMismatch { arg: String, ty: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Avatar,
    Object(usize),
    Cell(Pos),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub ty: String,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredInfo {
    pub name: String,
    pub evaluator: Evaluator,
    pub param_types: Vec<String>,
}

impl PredInfo {
    pub fn arity(&self) -> usize {
        self.param_types.len()
    }
}

/// A ground atom; unused argument slots are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub pred: u16,
    pub args: [u16; 2],
}

/// Closed-world abstract state: the sorted set of true atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractState(Vec<Atom>);

impl AbstractState {
    pub fn from_atoms(mut atoms: Vec<Atom>) -> Self {
        atoms.sort();
        atoms.dedup();
        AbstractState(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.0
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.0.binary_search(a).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Atoms of `self` missing from `other`.
    pub fn minus(&self, other: &AbstractState) -> Vec<Atom> {
        self.0
            .iter()
            .filter(|a| !other.contains(a))
            .copied()
            .collect()
    }

    /// `(self \ del) ∪ add`.
    pub fn apply(&self, add: &[Atom], del: &[Atom]) -> AbstractState {
        let mut atoms: Vec<Atom> = self
            .0
            .iter()
            .filter(|a| !del.contains(a))
            .copied()
            .collect();
        atoms.extend_from_slice(add);
        AbstractState::from_atoms(atoms)
    }
}

#[derive(Debug, Clone)]
pub struct Universe {
    pub symbols: Vec<Symbol>,
    pub predicates: Vec<PredInfo>,
    /// Every well-typed ground atom, sorted.
    pub atoms: Vec<Atom>,
    avatar_symbol: Option<u16>,
    object_symbols: Vec<u16>,
}

fn type_matches(param_ty: &str, sym: &Symbol) -> bool {
    match param_ty {
        CELL_TYPE => matches!(sym.kind, SymbolKind::Cell(_)),
        ANY_OBJECT_TYPE => !matches!(sym.kind, SymbolKind::Cell(_)),
        ty => sym.ty == ty && !matches!(sym.kind, SymbolKind::Cell(_)),
    }
}

pub fn cell_name(p: Pos, cols: u8) -> String {
    format!("cell{}", p.row as usize * cols as usize + p.col as usize)
}

impl Universe {
    pub fn build(
        domain: &DomainSpec,
        avatar: &ObjectInfo,
        objects: &[ObjectInfo],
        cols: u8,
    ) -> Universe {
        let mut symbols = vec![Symbol {
            name: avatar.name.clone(),
            ty: avatar.ty.clone(),
            kind: SymbolKind::Avatar,
        }];
        for (i, o) in objects.iter().enumerate() {
            symbols.push(Symbol {
                name: o.name.clone(),
                ty: o.ty.clone(),
                kind: SymbolKind::Object(i),
            });
        }
        let mut homes: Vec<Pos> = objects.iter().map(|o| o.home).collect();
        homes.sort();
        homes.dedup();
        for p in homes {
            symbols.push(Symbol {
                name: cell_name(p, cols),
                ty: CELL_TYPE.to_string(),
                kind: SymbolKind::Cell(p),
            });
        }
        symbols.sort_by(|a, b| a.name.as_bytes().cmp(b.name.as_bytes()));

        let mut predicates: Vec<PredInfo> = domain
            .predicates
            .iter()
            .map(|p| PredInfo {
                name: p.name.clone(),
                evaluator: p.evaluator,
                param_types: p.params.iter().map(|x| x.ty.clone()).collect(),
            })
            .collect();
        predicates.sort_by(|a, b| a.name.as_bytes().cmp(b.name.as_bytes()));

        let mut atoms = Vec::new();
        for (pi, p) in predicates.iter().enumerate() {
            let candidates: Vec<Vec<u16>> = p
                .param_types
                .iter()
                .map(|ty| {
                    (0..symbols.len() as u16)
                        .filter(|&s| type_matches(ty, &symbols[s as usize]))
                        .collect()
                })
                .collect();
            match candidates.len() {
                0 => atoms.push(Atom {
                    pred: pi as u16,
                    args: [0, 0],
                }),
                1 => atoms.extend(candidates[0].iter().map(|&a| Atom {
                    pred: pi as u16,
                    args: [a, 0],
                })),
                _ => {
                    for &a in &candidates[0] {
                        for &b in &candidates[1] {
                            atoms.push(Atom {
                                pred: pi as u16,
                                args: [a, b],
                            });
                        }
                    }
                }
            }
        }
        atoms.sort();

        let avatar_symbol = symbols
            .iter()
            .position(|s| s.kind == SymbolKind::Avatar)
            .map(|i| i as u16);
        let mut object_symbols = vec![0u16; objects.len()];
        for (si, s) in symbols.iter().enumerate() {
            if let SymbolKind::Object(i) = s.kind {
                object_symbols[i] = si as u16;
            }
        }
        Universe {
            symbols,
            predicates,
            atoms,
            avatar_symbol,
            object_symbols,
        }
    }

    pub fn symbol_index(&self, name: &str) -> Option<u16> {
        self.symbols
            .iter()
            .position(|s| s.name == name)
            .map(|i| i as u16)
    }

    pub fn predicate_index(&self, name: &str) -> Option<u16> {
        self.predicates
            .iter()
            .position(|p| p.name == name)
            .map(|i| i as u16)
    }

    pub fn object_symbol(&self, i: usize) -> u16 {
        self.object_symbols[i]
    }

    pub fn avatar_symbol(&self) -> Option<u16> {
        self.avatar_symbol
    }

    pub fn arity(&self, a: &Atom) -> usize {
        self.predicates[a.pred as usize].arity()
    }

    pub fn args<'a>(&self, a: &'a Atom) -> &'a [u16] {
        &a.args[..self.arity(a)]
    }

    pub fn type_matches(&self, param_ty: &str, sym: u16) -> bool {
        type_matches(param_ty, &self.symbols[sym as usize])
    }

    pub fn atom_to_string(&self, a: &Atom) -> String {
        let mut s = format!("({}", self.predicates[a.pred as usize].name);
        for &x in self.args(a) {
            s.push(' ');
            s.push_str(&self.symbols[x as usize].name);
        }
        s.push(')');
        s
    }

    /// Builds an atom from names, checking arity and types.
    pub fn atom(&self, pred: &str, args: &[&str]) -> Result<Atom, AbstractionError> {
        let pi = self
            .predicate_index(pred)
            .ok_or_else(|| AbstractionError::UnknownObject(pred.to_string()))?;
        let p = &self.predicates[pi as usize];
        if p.arity() != args.len() {
            return Err(AbstractionError::Arity {
                name: pred.to_string(),
                expected: p.arity(),
                found: args.len(),
            });
        }
        let mut out = [0u16; 2];
        for (k, name) in args.iter().enumerate() {
            let si = self
                .symbol_index(name)
                .ok_or_else(|| AbstractionError::UnknownObject(name.to_string()))?;
            if !self.type_matches(&p.param_types[k], si) {
                return Err(AbstractionError::TypeMismatch {
                    arg: name.to_string(),
                    ty: p.param_types[k].clone(),
                });
            }
            out[k] = si;
        }
        Ok(Atom {
            pred: pi,
            args: out,
        })
    }

    pub fn state_to_string(&self, s: &AbstractState) -> String {
        s.atoms()
            .iter()
            .map(|a| self.atom_to_string(a))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn manhattan(a: Pos, b: Pos) -> u32 {
    (a.row as i32 - b.row as i32).unsigned_abs() + (a.col as i32 - b.col as i32).unsigned_abs()
}

fn object_on(world: &World, s: &ConcreteState, p: Pos, pred: impl Fn(Behavior) -> bool) -> bool {
    world
        .objects
        .iter()
        .zip(&s.objects)
        .any(|(o, st)| *st == ObjStatus::At(p) && pred(o.behavior))
}

/// Truth value of a ground atom in a concrete state.
pub fn holds(world: &World, atom: &Atom, s: &ConcreteState) -> bool {
    let u = &world.universe;
    let kind = |k: usize| u.symbols[atom.args[k] as usize].kind;
    let cell = |k: usize| match kind(k) {
        SymbolKind::Cell(p) => p,
        _ => unreachable!("cell argument expected"),
    };
    match u.predicates[atom.pred as usize].evaluator {
        Evaluator::At => {
            let c = cell(1);
            match kind(0) {
                SymbolKind::Avatar => s.agent == c,
                SymbolKind::Object(i) => s.objects[i] == ObjStatus::At(c),
                SymbolKind::Cell(_) => false,
            }
        }
        Evaluator::Wall => world.is_wall(cell(0)),
        Evaluator::Clear => {
            let c = cell(0);
            !world.is_wall(c) && s.agent != c && s.object_at(c).is_none()
        }
        Evaluator::HasKey => world.holds_key(s),
        Evaluator::Escaped => s.flags & FLAG_ESCAPED != 0,
        Evaluator::Cooked => s.flags & FLAG_COOKED != 0,
        Evaluator::Alive => match kind(0) {
            SymbolKind::Object(i) => matches!(s.objects[i], ObjStatus::At(_)),
            _ => false,
        },
        Evaluator::NextTo => match kind(0) {
            SymbolKind::Object(i) => match s.objects[i] {
                ObjStatus::At(p) => manhattan(p, s.agent) == 1,
                _ => false,
            },
            _ => false,
        },
        Evaluator::PlayerHas => match kind(0) {
            SymbolKind::Object(i) => s.objects[i] == ObjStatus::Held,
            _ => false,
        },
        Evaluator::Placed => match kind(0) {
            SymbolKind::Object(i) => s.objects[i] == ObjStatus::Placed,
            _ => false,
        },
        Evaluator::IsDoor => object_on(world, s, cell(0), |b| {
            matches!(b, Behavior::Exit | Behavior::Lock)
        }),
        Evaluator::IsHole => object_on(world, s, cell(0), |b| b == Behavior::Hole),
        Evaluator::IsGoal => object_on(world, s, cell(0), |b| {
            matches!(b, Behavior::Finish | Behavior::Pedestal)
        }),
        Evaluator::IsBlock => object_on(world, s, cell(0), |b| b == Behavior::Pushable),
    }
}

/// Evaluates a declared predicate on named arguments.
pub fn evaluate_predicate(
    world: &World,
    p: &PredicateDef,
    args: &[&str],
    s: &ConcreteState,
) -> Result<bool, AbstractionError> {
    let atom = world.universe.atom(&p.name, args)?;
    Ok(holds(world, &atom, s))
}

/// The abstraction function: every true atom over the world's vocabulary.
pub fn abstract_state(world: &World, s: &ConcreteState) -> AbstractState {
    AbstractState(
        world
            .universe
            .atoms
            .iter()
            .filter(|a| holds(world, a, s))
            .copied()
            .collect(),
    )
}

const MAX_STATUS_COMBOS: usize = 64;

/// A concrete member of the abstract state, or `None` if none is found.
/// Orientation defaults to north.
pub fn concretize(world: &World, target: &AbstractState) -> Option<ConcreteState> {
    let mut hint = world.initial.clone();
    hint.facing = crate::dsl::Direction::North;
    concretize_near(world, target, &hint)
}

/// Like [`concretize`], but keeps as much of `hint` as the target allows:
/// object statuses, the agent's position when valid, and its orientation.
pub fn concretize_near(
    world: &World,
    target: &AbstractState,
    hint: &ConcreteState,
) -> Option<ConcreteState> {
    let u = &world.universe;
    let has_escaped = u
        .predicates
        .iter()
        .any(|p| p.evaluator == Evaluator::Escaped);
    let has_cooked = u
        .predicates
        .iter()
        .any(|p| p.evaluator == Evaluator::Cooked);
    let single_key = world
        .objects
        .iter()
        .filter(|o| o.behavior == Behavior::Key)
        .count()
        == 1;

    // Candidate statuses per object, filtered by literals that mention only
    // that object, in preference order (hint first).
    let mut options: Vec<Vec<Option<ObjStatus>>> = Vec::with_capacity(world.objects.len());
    for (i, o) in world.objects.iter().enumerate() {
        let sym = u.object_symbol(i);
        let mut base: Vec<Option<ObjStatus>> = Vec::new();
        // `None` marks a pushable placed later on a free floor cell.
        match o.behavior {
            Behavior::Pushable => {
                for c in u.symbols.iter() {
                    if let SymbolKind::Cell(p) = c.kind {
                        base.push(Some(ObjStatus::At(p)));
                    }
                }
                base.push(None);
                base.push(Some(ObjStatus::Gone));
            }
            b => {
                base.push(Some(ObjStatus::At(o.home)));
                if matches!(b, Behavior::Key | Behavior::Pickup | Behavior::Piece) {
                    base.push(Some(ObjStatus::Held));
                }
                if matches!(
                    b,
                    Behavior::Defeatable
                        | Behavior::Key
                        | Behavior::Lock
                        | Behavior::Pickup
                        | Behavior::Hole
                ) {
                    base.push(Some(ObjStatus::Gone));
                }
                if b == Behavior::Piece {
                    base.push(Some(ObjStatus::Placed));
                }
            }
        }
        let consistent = |st: Option<ObjStatus>| {
            u.atoms.iter().all(|a| {
                let ev = u.predicates[a.pred as usize].evaluator;
                let expected = target.contains(a);
                match ev {
                    Evaluator::At if a.args[0] == sym => {
                        let SymbolKind::Cell(c) = u.symbols[a.args[1] as usize].kind else {
                            return true;
                        };
                        (st == Some(ObjStatus::At(c))) == expected
                    }
                    Evaluator::Alive if a.args[0] == sym => {
                        st.is_none_or(|x| matches!(x, ObjStatus::At(_))) == expected
                    }
                    Evaluator::PlayerHas if a.args[0] == sym => {
                        (st == Some(ObjStatus::Held)) == expected
                    }
                    Evaluator::Placed if a.args[0] == sym => {
                        (st == Some(ObjStatus::Placed)) == expected
                    }
                    Evaluator::HasKey if single_key && o.behavior == Behavior::Key => {
                        (st == Some(ObjStatus::Held)) == expected
                    }
                    _ => true,
                }
            })
        };
        let hinted = match hint.objects.get(i) {
            Some(ObjStatus::At(p))
                if o.behavior == Behavior::Pushable && !is_landmark(world, *p) =>
            {
                None
            }
            Some(st) => Some(*st),
            None => None,
        };
        let mut opts: Vec<Option<ObjStatus>> = Vec::new();
        if base.contains(&hinted) && consistent(hinted) {
            opts.push(hinted);
        }
        for st in base {
            if !opts.contains(&st) && consistent(st) {
                opts.push(st);
            }
        }
        if opts.is_empty() {
            return None;
        }
        options.push(opts);
    }

    // Agent cells: pinned by an at literal, else ordered by distance to the hint.
    let avatar_sym = u.avatar_symbol();
    let pinned = target.atoms().iter().find_map(|a| {
        let p = &u.predicates[a.pred as usize];
        if p.evaluator == Evaluator::At && Some(a.args[0]) == avatar_sym {
            match u.symbols[a.args[1] as usize].kind {
                SymbolKind::Cell(c) => Some(c),
                _ => None,
            }
        } else {
            None
        }
    });
    let mut agent_cells: Vec<Pos> = match pinned {
        Some(c) => vec![c],
        None => (0..world.cell_count())
            .map(|i| world.cell_pos(i))
            .filter(|p| !world.is_wall(*p))
            .collect(),
    };
    agent_cells.sort_by_key(|p| (manhattan(*p, hint.agent), world.cell_index(*p)));

    let mut idx = vec![0usize; options.len()];
    for _ in 0..MAX_STATUS_COMBOS {
        let statuses: Vec<Option<ObjStatus>> =
            idx.iter().zip(&options).map(|(&k, o)| o[k]).collect();
        for &agent in &agent_cells {
            if let Some(s) = assemble(
                world,
                &statuses,
                agent,
                hint,
                target,
                has_escaped,
                has_cooked,
            ) {
                return Some(s);
            }
        }
        // Next combination, odometer style.
        let mut k = 0;
        loop {
            if k == idx.len() {
                return None;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
    None
}

fn is_landmark(world: &World, p: Pos) -> bool {
    world.objects.iter().any(|o| o.home == p)
}

fn assemble(
    world: &World,
    statuses: &[Option<ObjStatus>],
    agent: Pos,
    hint: &ConcreteState,
    target: &AbstractState,
    has_escaped: bool,
    has_cooked: bool,
) -> Option<ConcreteState> {
    let mut objects: Vec<ObjStatus> = statuses
        .iter()
        .map(|s| s.unwrap_or(ObjStatus::Gone))
        .collect();
    let occupied = |objs: &[ObjStatus], p: Pos| objs.contains(&ObjStatus::At(p));
    for (i, st) in statuses.iter().enumerate() {
        if let Some(ObjStatus::At(p)) = st {
            if *p == agent && world.objects[i].behavior != Behavior::Finish {
                return None;
            }
        }
    }
    for (i, st) in statuses.iter().enumerate() {
        if st.is_some() {
            continue;
        }
        let preferred = match hint.objects.get(i) {
            Some(ObjStatus::At(p))
                if !is_landmark(world, *p) && *p != agent && !occupied(&objects, *p) =>
            {
                Some(*p)
            }
            _ => None,
        };
        let place = preferred.or_else(|| {
            world
                .open_cells()
                .find(|p| *p != agent && !occupied(&objects, *p))
        })?;
        objects[i] = ObjStatus::At(place);
    }
    let mut flags = hint.flags;
    let on_finish = world
        .objects
        .iter()
        .zip(&objects)
        .any(|(o, st)| o.behavior == Behavior::Finish && *st == ObjStatus::At(agent));
    if has_escaped {
        let esc = target
            .atoms()
            .iter()
            .any(|a| world.universe.predicates[a.pred as usize].evaluator == Evaluator::Escaped);
        flags = if esc {
            flags | FLAG_ESCAPED
        } else {
            flags & !FLAG_ESCAPED
        };
    } else {
        let hinted_exit = hint.flags & FLAG_ESCAPED != 0
            && !world.objects.iter().any(|o| o.behavior == Behavior::Finish);
        flags = if on_finish || hinted_exit {
            flags | FLAG_ESCAPED
        } else {
            flags & !FLAG_ESCAPED
        };
    }
    if has_cooked {
        let cooked = target
            .atoms()
            .iter()
            .any(|a| world.universe.predicates[a.pred as usize].evaluator == Evaluator::Cooked);
        flags = if cooked {
            flags | FLAG_COOKED
        } else {
            flags & !FLAG_COOKED
        };
    } else {
        let done = !world
            .objects
            .iter()
            .zip(&objects)
            .any(|(o, st)| o.behavior == Behavior::Pickup && *st != ObjStatus::Gone);
        if !done {
            flags &= !FLAG_COOKED;
        }
    }
    let s = ConcreteState {
        agent,
        facing: hint.facing,
        objects,
        flags,
    };
    if world.is_valid_state(&s) && abstract_state(world, &s) == *target {
        Some(s)
    } else {
        None
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}({},{})", self.pred, self.args[0], self.args[1])
    }
}
