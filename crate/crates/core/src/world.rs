//! Validated worlds and the deterministic transition function.
//!
//! A [`World`] pairs a domain with one instance. Walls are fixed for the
//! lifetime of a world; everything that can change lives in
//! [`ConcreteState`]. Inapplicable actions leave the state unchanged, and a
//! state with the escaped flag set is absorbing.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use rustc_hash::FxHashSet;
use thiserror::Error;

use crate::abstraction::Universe;
use crate::dsl::{
    ActionDef, ActionSemantics, Behavior, Direction, DomainSpec, GridPos, InstanceSpec,
};

pub type Pos = GridPos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("instance targets domain '{found}', expected '{expected}'")]
    DomainMismatch { expected: String, found: String },
    #[error("unknown object type '{0}'")]
    UnknownType(String),
    #[error("object '{0}' is placed on a wall")]
    OnWall(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjStatus {
    At(Pos),
    Held,
    Gone,
    Placed,
}

pub const FLAG_ESCAPED: u8 = 1;
pub const FLAG_COOKED: u8 = 2;

/// Exact simulator state. Orientation is kept here but no evaluator reads it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConcreteState {
    pub agent: Pos,
    pub facing: Direction,
    pub objects: Vec<ObjStatus>,
    pub flags: u8,
}

impl ConcreteState {
    pub fn is_terminal(&self) -> bool {
        self.flags & FLAG_ESCAPED != 0
    }

    pub fn object_at(&self, pos: Pos) -> Option<usize> {
        self.objects.iter().position(|s| *s == ObjStatus::At(pos))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectInfo {
    pub name: String,
    pub ty: String,
    pub behavior: Behavior,
    pub home: Pos,
}

/// Primitive action: an index into the domain's action list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(pub u8);

#[derive(Debug, Clone)]
pub struct World {
    pub domain: DomainSpec,
    pub instance: InstanceSpec,
    pub rows: u8,
    pub cols: u8,
    walls: Vec<bool>,
    pub avatar: ObjectInfo,
    pub objects: Vec<ObjectInfo>,
    pub initial: ConcreteState,
    pub universe: Universe,
}

impl World {
    pub fn new(domain: DomainSpec, instance: InstanceSpec) -> Result<World, WorldError> {
        if instance.domain != domain.name {
            return Err(WorldError::DomainMismatch {
                expected: domain.name.clone(),
                found: instance.domain.clone(),
            });
        }
        let behavior_of = |ty: &str| {
            domain
                .type_def(ty)
                .map(|t| t.behavior)
                .ok_or_else(|| WorldError::UnknownType(ty.to_string()))
        };
        let rows = instance.rows;
        let cols = instance.cols;
        let mut walls = vec![false; rows as usize * cols as usize];
        for w in &instance.walls {
            walls[w.row as usize * cols as usize + w.col as usize] = true;
        }
        let a = &instance.agent;
        if walls[a.pos.row as usize * cols as usize + a.pos.col as usize] {
            return Err(WorldError::OnWall(a.id.clone()));
        }
        let avatar = ObjectInfo {
            name: a.id.clone(),
            ty: a.ty.clone(),
            behavior: behavior_of(&a.ty)?,
            home: a.pos,
        };
        let mut objects = Vec::new();
        for o in &instance.objects {
            if walls[o.pos.row as usize * cols as usize + o.pos.col as usize] {
                return Err(WorldError::OnWall(o.id.clone()));
            }
            objects.push(ObjectInfo {
                name: o.id.clone(),
                ty: o.ty.clone(),
                behavior: behavior_of(&o.ty)?,
                home: o.pos,
            });
        }
        let initial = ConcreteState {
            agent: a.pos,
            facing: a.facing,
            objects: objects.iter().map(|o| ObjStatus::At(o.home)).collect(),
            flags: 0,
        };
        let universe = Universe::build(&domain, &avatar, &objects, cols);
        Ok(World {
            domain,
            instance,
            rows,
            cols,
            walls,
            avatar,
            objects,
            initial,
            universe,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn cell_index(&self, p: Pos) -> usize {
        p.row as usize * self.cols as usize + p.col as usize
    }

    pub fn cell_pos(&self, idx: usize) -> Pos {
        Pos::new(
            (idx / self.cols as usize) as u8,
            (idx % self.cols as usize) as u8,
        )
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.walls[self.cell_index(p)]
    }

    /// Non-wall cells that are not the home of any object.
    pub fn open_cells(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.cell_count())
            .map(|i| self.cell_pos(i))
            .filter(|p| !self.is_wall(*p) && !self.objects.iter().any(|o| o.home == *p))
    }

    pub fn offset(&self, p: Pos, d: Direction) -> Option<Pos> {
        let (dr, dc) = d.delta();
        let r = p.row as i32 + dr;
        let c = p.col as i32 + dc;
        if r < 0 || c < 0 || r >= self.rows as i32 || c >= self.cols as i32 {
            None
        } else {
            Some(Pos::new(r as u8, c as u8))
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        (0..self.domain.actions.len()).map(|i| Action(i as u8))
    }

    pub fn action_def(&self, a: Action) -> &ActionDef {
        &self.domain.actions[a.0 as usize]
    }

    pub fn action_by_key(&self, key: &str) -> Option<Action> {
        self.domain
            .actions
            .iter()
            .position(|a| a.key == key)
            .map(|i| Action(i as u8))
    }

    pub fn holds_key(&self, s: &ConcreteState) -> bool {
        self.objects
            .iter()
            .zip(&s.objects)
            .any(|(o, st)| o.behavior == Behavior::Key && *st == ObjStatus::Held)
    }

    /// The transition function. Total: inapplicable actions self-loop.
    pub fn step(&self, s: &ConcreteState, a: Action) -> ConcreteState {
        let mut next = s.clone();
        if s.is_terminal() {
            return next;
        }
        match self.action_def(a).semantics {
            ActionSemantics::Move(d) => {
                if s.facing != d {
                    next.facing = d;
                    return next;
                }
                let Some(target) = self.offset(s.agent, d) else {
                    return next;
                };
                if self.is_wall(target) {
                    return next;
                }
                match s.object_at(target) {
                    None => next.agent = target,
                    Some(i) => match self.objects[i].behavior {
                        Behavior::Pushable => {
                            let Some(beyond) = self.offset(target, d) else {
                                return next;
                            };
                            if self.is_wall(beyond) {
                                return next;
                            }
                            match s.object_at(beyond) {
                                None => {
                                    next.objects[i] = ObjStatus::At(beyond);
                                    next.agent = target;
                                }
                                Some(j) if self.objects[j].behavior == Behavior::Hole => {
                                    next.objects[i] = ObjStatus::Gone;
                                    next.objects[j] = ObjStatus::Gone;
                                    next.agent = target;
                                }
                                Some(_) => {}
                            }
                        }
                        Behavior::Finish => {
                            next.agent = target;
                            next.flags |= FLAG_ESCAPED;
                        }
                        _ => {}
                    },
                }
            }
            ActionSemantics::Interact => {
                let Some(target) = self.offset(s.agent, s.facing) else {
                    return next;
                };
                let Some(i) = s.object_at(target) else {
                    return next;
                };
                match self.objects[i].behavior {
                    Behavior::Defeatable => next.objects[i] = ObjStatus::Gone,
                    Behavior::Key | Behavior::Pickup => next.objects[i] = ObjStatus::Held,
                    Behavior::Piece => {
                        let holding_piece =
                            self.objects.iter().zip(&s.objects).any(|(o, st)| {
                                o.behavior == Behavior::Piece && *st == ObjStatus::Held
                            });
                        if !holding_piece {
                            next.objects[i] = ObjStatus::Held;
                        }
                    }
                    Behavior::Exit => {
                        if self.holds_key(s) {
                            next.flags |= FLAG_ESCAPED;
                        }
                    }
                    Behavior::Lock => {
                        let key = self.objects.iter().zip(&s.objects).position(|(o, st)| {
                            o.behavior == Behavior::Key && *st == ObjStatus::Held
                        });
                        if let Some(k) = key {
                            next.objects[i] = ObjStatus::Gone;
                            next.objects[k] = ObjStatus::Gone;
                        }
                    }
                    Behavior::Cooker => {
                        let mut cooked_any = false;
                        for (j, o) in self.objects.iter().enumerate() {
                            if o.behavior == Behavior::Pickup && s.objects[j] == ObjStatus::Held {
                                next.objects[j] = ObjStatus::Gone;
                                cooked_any = true;
                            }
                        }
                        let remaining = self.objects.iter().zip(&next.objects).any(|(o, st)| {
                            o.behavior == Behavior::Pickup && *st != ObjStatus::Gone
                        });
                        if cooked_any && !remaining {
                            next.flags |= FLAG_COOKED;
                        }
                    }
                    Behavior::Pedestal => {
                        // Pieces go on in instance order.
                        let next_piece = self.objects.iter().zip(&s.objects).position(|(o, st)| {
                            o.behavior == Behavior::Piece && *st != ObjStatus::Placed
                        });
                        if let Some(p) = next_piece {
                            if s.objects[p] == ObjStatus::Held {
                                next.objects[p] = ObjStatus::Placed;
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        next
    }

    /// Actions whose successor differs from `s` (rotations included).
    pub fn legal_actions(&self, s: &ConcreteState) -> Vec<Action> {
        self.actions().filter(|a| self.step(s, *a) != *s).collect()
    }

    /// Breadth-first enumeration of states reachable from `start`, stopping
    /// after `cap` states have been collected.
    pub fn enumerate_reachable(&self, start: &ConcreteState, cap: usize) -> Reachable {
        let mut seen = FxHashSet::default();
        let mut states = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(start.clone());
        states.push(start.clone());
        queue.push_back(start.clone());
        let mut truncated = false;
        'outer: while let Some(s) = queue.pop_front() {
            for a in self.actions() {
                let n = self.step(&s, a);
                if seen.contains(&n) {
                    continue;
                }
                if states.len() >= cap {
                    truncated = true;
                    break 'outer;
                }
                seen.insert(n.clone());
                states.push(n.clone());
                queue.push_back(n);
            }
        }
        Reachable { states, truncated }
    }

    /// Physical sanity of a state with respect to this world's rules.
    pub fn is_valid_state(&self, s: &ConcreteState) -> bool {
        if s.objects.len() != self.objects.len() {
            return false;
        }
        let in_bounds = |p: Pos| p.row < self.rows && p.col < self.cols;
        if !in_bounds(s.agent) || self.is_wall(s.agent) {
            return false;
        }
        let mut occupied = HashSet::new();
        let mut pieces_held = 0;
        let mut seen_unplaced_piece = false;
        for (o, st) in self.objects.iter().zip(&s.objects) {
            match *st {
                ObjStatus::At(p) => {
                    if !in_bounds(p) || self.is_wall(p) || !occupied.insert(p) {
                        return false;
                    }
                    if o.behavior != Behavior::Pushable && p != o.home {
                        return false;
                    }
                    if p == s.agent && o.behavior != Behavior::Finish {
                        return false;
                    }
                }
                ObjStatus::Held => {
                    if !matches!(
                        o.behavior,
                        Behavior::Key | Behavior::Pickup | Behavior::Piece
                    ) {
                        return false;
                    }
                }
                ObjStatus::Gone => {
                    if !matches!(
                        o.behavior,
                        Behavior::Defeatable
                            | Behavior::Key
                            | Behavior::Lock
                            | Behavior::Pickup
                            | Behavior::Pushable
                            | Behavior::Hole
                    ) {
                        return false;
                    }
                }
                ObjStatus::Placed => {
                    if o.behavior != Behavior::Piece || seen_unplaced_piece {
                        return false;
                    }
                }
            }
            if o.behavior == Behavior::Piece {
                if *st == ObjStatus::Held {
                    pieces_held += 1;
                }
                if *st != ObjStatus::Placed {
                    seen_unplaced_piece = true;
                }
            }
        }
        if pieces_held > 1 {
            return false;
        }
        let on_finish = self
            .objects
            .iter()
            .zip(&s.objects)
            .any(|(o, st)| o.behavior == Behavior::Finish && *st == ObjStatus::At(s.agent));
        if on_finish && !s.is_terminal() {
            return false;
        }
        if s.flags & FLAG_COOKED != 0 {
            let pending = self
                .objects
                .iter()
                .zip(&s.objects)
                .any(|(o, st)| o.behavior == Behavior::Pickup && *st != ObjStatus::Gone);
            if pending {
                return false;
            }
        }
        true
    }

    /// Replays `actions` from `start`.
    pub fn replay(&self, start: &ConcreteState, actions: &[Action]) -> ConcreteState {
        actions.iter().fold(start.clone(), |s, a| self.step(&s, *a))
    }

    pub fn render(&self, s: &ConcreteState) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let p = Pos::new(r, c);
                let ch = if p == s.agent {
                    match s.facing {
                        Direction::North => '^',
                        Direction::East => '>',
                        Direction::South => 'v',
                        Direction::West => '<',
                    }
                } else if self.is_wall(p) {
                    '#'
                } else if let Some(i) = s.object_at(p) {
                    self.objects[i].name.chars().next().unwrap_or('?')
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Reachable {
    pub states: Vec<ConcreteState>,
    pub truncated: bool,
}

impl fmt::Display for ConcreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent=({},{}){}",
            self.agent.row,
            self.agent.col,
            self.facing.letter()
        )?;
        for st in &self.objects {
            match st {
                ObjStatus::At(p) => write!(f, " @({},{})", p.row, p.col)?,
                ObjStatus::Held => write!(f, " held")?,
                ObjStatus::Gone => write!(f, " gone")?,
                ObjStatus::Placed => write!(f, " placed")?,
            }
        }
        if self.flags != 0 {
            write!(f, " flags={}", self.flags)?;
        }
        Ok(())
    }
}
