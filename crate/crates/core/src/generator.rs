//! Seeded random instance generator.
//!
//! A generated instance of size `n` is an `n × n` playing field surrounded by
//! a wall border, so the file declares `(n + 2) × (n + 2)` cells. Interior
//! obstacles take `⌊fraction · n²⌋` cells; objects and the agent are placed
//! uniformly on the remaining floor. Layouts whose floor is disconnected, or
//! where some object cannot be approached, are rejected and redrawn.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dsl::{
    AgentPlacement, Behavior, Direction, DomainSpec, GridPos, InstanceSpec, Placement,
};

pub const DEFAULT_OBSTACLE_FRACTION: f64 = 0.2;
/// Escape fields stay sparser so blocks keep room to be pushed.
pub const ESCAPE_OBSTACLE_FRACTION: f64 = 0.1;
const MAX_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("grid size must be at least 2, got {0}")]
    TooSmall(u8),
    #[error("obstacle fraction {0} outside [0, 1)")]
    BadFraction(f64),
    #[error("{needed} objects and obstacles do not fit in {cells} cells")]
    Overfull { needed: usize, cells: usize },
    #[error("roster entry '{0}' has a type unknown to domain '{1}'")]
    UnknownType(String, String),
    #[error("roster must start with exactly one avatar")]
    BadRoster,
    #[error("no acceptable layout found after {0} attempts")]
    Exhausted(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub size: u8,
    pub obstacle_fraction: f64,
    pub seed: u64,
}

pub fn obstacle_count(size: u8, fraction: f64) -> usize {
    (fraction * (size as f64) * (size as f64)).floor() as usize
}

/// `roster` lists `(id, type)` pairs; the first entry is the agent.
pub fn generate_instance(
    domain: &DomainSpec,
    roster: &[(&str, &str)],
    spec: &GeneratorSpec,
) -> Result<InstanceSpec, GenError> {
    generate_instance_with(domain, roster, spec, |_| true)
}

/// Like [`generate_instance`], but also redraws layouts `accept` rejects.
pub fn generate_instance_with(
    domain: &DomainSpec,
    roster: &[(&str, &str)],
    spec: &GeneratorSpec,
    mut accept: impl FnMut(&InstanceSpec) -> bool,
) -> Result<InstanceSpec, GenError> {
    let n = spec.size;
    if n < 2 {
        return Err(GenError::TooSmall(n));
    }
    if !(0.0..1.0).contains(&spec.obstacle_fraction) {
        return Err(GenError::BadFraction(spec.obstacle_fraction));
    }
    let mut behaviors = Vec::new();
    for (id, ty) in roster {
        let t = domain
            .type_def(ty)
            .ok_or_else(|| GenError::UnknownType(id.to_string(), domain.name.clone()))?;
        behaviors.push(t.behavior);
    }
    if behaviors.first() != Some(&Behavior::Avatar) || behaviors[1..].contains(&Behavior::Avatar) {
        return Err(GenError::BadRoster);
    }
    let obstacles = obstacle_count(n, spec.obstacle_fraction);
    let cells = n as usize * n as usize;
    if obstacles + roster.len() > cells {
        return Err(GenError::Overfull {
            needed: obstacles + roster.len(),
            cells,
        });
    }
    let side = n + 2;
    let mut border = BTreeSet::new();
    for i in 0..side {
        border.insert(GridPos::new(0, i));
        border.insert(GridPos::new(side - 1, i));
        border.insert(GridPos::new(i, 0));
        border.insert(GridPos::new(i, side - 1));
    }
    let interior: Vec<GridPos> = (1..=n)
        .flat_map(|r| (1..=n).map(move |c| GridPos::new(r, c)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut cells = interior.clone();
        cells.shuffle(&mut rng);
        let walls: Vec<GridPos> = cells[..obstacles].to_vec();
        let placed: Vec<GridPos> = cells[obstacles..obstacles + roster.len()].to_vec();
        let facing = Direction::ALL[rng.gen_range(0..4)];
        if !layout_ok(n, &walls, &placed, &behaviors) {
            continue;
        }
        let mut all_walls = border.clone();
        all_walls.extend(walls.iter().copied());
        let (aid, aty) = roster[0];
        let inst = InstanceSpec {
            domain: domain.name.clone(),
            rows: side,
            cols: side,
            walls: all_walls,
            agent: AgentPlacement {
                id: aid.to_string(),
                ty: aty.to_string(),
                pos: placed[0],
                facing,
            },
            objects: roster[1..]
                .iter()
                .zip(&placed[1..])
                .map(|((id, ty), pos)| Placement {
                    id: id.to_string(),
                    ty: ty.to_string(),
                    pos: *pos,
                })
                .collect(),
        };
        if accept(&inst) {
            return Ok(inst);
        }
    }
    Err(GenError::Exhausted(MAX_ATTEMPTS))
}

/// Floor (everything except walls and solid objects) must be connected, and
/// every object must touch it. Pushable blocks additionally need a free
/// straight line through them so they can be moved at all.
fn layout_ok(n: u8, walls: &[GridPos], placed: &[GridPos], behaviors: &[Behavior]) -> bool {
    let idx = |p: GridPos| (p.row as usize - 1) * n as usize + (p.col as usize - 1);
    let cells = n as usize * n as usize;
    let mut solid = vec![false; cells];
    for w in walls {
        solid[idx(*w)] = true;
    }
    for (p, b) in placed.iter().zip(behaviors).skip(1) {
        if *b != Behavior::Finish {
            solid[idx(*p)] = true;
        }
    }
    let neighbours = |p: GridPos| {
        let mut out = Vec::with_capacity(4);
        if p.row > 1 {
            out.push(GridPos::new(p.row - 1, p.col));
        }
        if p.row < n {
            out.push(GridPos::new(p.row + 1, p.col));
        }
        if p.col > 1 {
            out.push(GridPos::new(p.row, p.col - 1));
        }
        if p.col < n {
            out.push(GridPos::new(p.row, p.col + 1));
        }
        out
    };
    let mut seen = vec![false; cells];
    let mut queue = VecDeque::from([placed[0]]);
    seen[idx(placed[0])] = true;
    while let Some(p) = queue.pop_front() {
        for q in neighbours(p) {
            if !solid[idx(q)] && !seen[idx(q)] {
                seen[idx(q)] = true;
                queue.push_back(q);
            }
        }
    }
    let floor = (0..cells).filter(|&i| !solid[i]).count();
    if seen.iter().filter(|&&x| x).count() != floor {
        return false;
    }
    for (p, b) in placed.iter().zip(behaviors).skip(1) {
        if !neighbours(*p).iter().any(|q| seen[idx(*q)]) {
            return false;
        }
        if *b == Behavior::Pushable {
            let free = |r: i32, c: i32| {
                r >= 1
                    && c >= 1
                    && r <= n as i32
                    && c <= n as i32
                    && !solid[idx(GridPos::new(r as u8, c as u8))]
            };
            let (r, c) = (p.row as i32, p.col as i32);
            let vertical = free(r - 1, c) && free(r + 1, c);
            let horizontal = free(r, c - 1) && free(r, c + 1);
            if !vertical && !horizontal {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Bundled;

    #[test]
    fn seven_by_seven_has_nine_interior_obstacles() {
        let b = Bundled::Zelda;
        let dom = b.domain();
        let spec = GeneratorSpec {
            size: 7,
            obstacle_fraction: DEFAULT_OBSTACLE_FRACTION,
            seed: 3,
        };
        let inst = generate_instance(&dom, &b.roster(7), &spec).unwrap();
        let interior = inst
            .walls
            .iter()
            .filter(|w| w.row > 0 && w.col > 0 && w.row < 8 && w.col < 8)
            .count();
        assert_eq!(interior, 9);
        assert_eq!((inst.rows, inst.cols), (9, 9));
        let reparsed = crate::dsl::parse_instance(&inst.to_string(), &dom).unwrap();
        assert_eq!(reparsed, inst);
    }

    #[test]
    fn generation_is_seeded() {
        let b = Bundled::Snowman;
        let dom = b.domain();
        let spec = GeneratorSpec {
            size: 5,
            obstacle_fraction: DEFAULT_OBSTACLE_FRACTION,
            seed: 11,
        };
        let a = generate_instance(&dom, &b.roster(5), &spec).unwrap();
        let c = generate_instance(&dom, &b.roster(5), &spec).unwrap();
        assert_eq!(a, c);
        let other =
            generate_instance(&dom, &b.roster(5), &GeneratorSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rejects_bad_fraction() {
        let b = Bundled::Zelda;
        let spec = GeneratorSpec {
            size: 5,
            obstacle_fraction: 1.0,
            seed: 0,
        };
        assert!(matches!(
            generate_instance(&b.domain(), &b.roster(5), &spec),
            Err(GenError::BadFraction(_))
        ));
    }
}
