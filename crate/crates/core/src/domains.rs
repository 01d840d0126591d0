//! The four bundled game domains, their transcript templates, reference
//! models and small hand-made fixture layouts.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::abstraction::{holds, Universe};
use crate::dsl::{parse_domain, parse_instance, DomainSpec, InstanceSpec, ParseError};
use crate::generator::{
    generate_instance_with, GenError, GeneratorSpec, DEFAULT_OBSTACLE_FRACTION,
    ESCAPE_OBSTACLE_FRACTION,
};
use crate::harvest::nearest_satisfying;
use crate::io::{parse_model, Templates};
use crate::model::CapabilityModel;
use crate::world::{World, WorldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bundled {
    Zelda,
    Pasta,
    Escape,
    Snowman,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("unknown world '{0}' (expected <domain><size>, e.g. zelda5)")]
    UnknownWorld(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    World(#[from] WorldError),
}

const FIXTURES: &[(&str, &str)] = &[
    ("zelda3", include_str!("../domains/zelda3.inst")),
    ("zelda4", include_str!("../domains/zelda4.inst")),
    ("escape4", include_str!("../domains/escape4.inst")),
];

impl Bundled {
    pub const ALL: [Bundled; 4] = [
        Bundled::Zelda,
        Bundled::Pasta,
        Bundled::Escape,
        Bundled::Snowman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Bundled::Zelda => "zelda",
            Bundled::Pasta => "pasta",
            Bundled::Escape => "escape",
            Bundled::Snowman => "snowman",
        }
    }

    pub fn domain_text(self) -> &'static str {
        match self {
            Bundled::Zelda => include_str!("../domains/zelda.domain"),
            Bundled::Pasta => include_str!("../domains/pasta.domain"),
            Bundled::Escape => include_str!("../domains/escape.domain"),
            Bundled::Snowman => include_str!("../domains/snowman.domain"),
        }
    }

    pub fn templates_text(self) -> &'static str {
        match self {
            Bundled::Zelda => include_str!("../domains/zelda.tpl"),
            Bundled::Pasta => include_str!("../domains/pasta.tpl"),
            Bundled::Escape => include_str!("../domains/escape.tpl"),
            Bundled::Snowman => include_str!("../domains/snowman.tpl"),
        }
    }

    /// Hand-written reference model in `.cap` form.
    pub fn gold_text(self) -> &'static str {
        match self {
            Bundled::Zelda => include_str!("../gold/zelda.cap"),
            Bundled::Pasta => include_str!("../gold/pasta.cap"),
            Bundled::Escape => include_str!("../gold/escape.cap"),
            Bundled::Snowman => include_str!("../gold/snowman.cap"),
        }
    }

    /// The reference model read against a universe of this domain.
    pub fn gold(self, u: &Universe) -> CapabilityModel {
        parse_model(u, self.gold_text())
            .expect("bundled gold model parses")
            .1
    }

    pub fn templates(self) -> Templates {
        Templates::parse(self.templates_text()).expect("bundled templates parse")
    }

    pub fn domain(self) -> DomainSpec {
        parse_domain(self.domain_text()).expect("bundled domain parses")
    }

    pub fn obstacle_fraction(self) -> f64 {
        match self {
            Bundled::Escape => ESCAPE_OBSTACLE_FRACTION,
            _ => DEFAULT_OBSTACLE_FRACTION,
        }
    }

    /// Objects placed by the generator for a field of the given size; the
    /// first entry is the agent. Fields of 7 and 9 cells per side get one
    /// and two extra obstacles-with-behaviour respectively.
    pub fn roster(self, size: u8) -> Vec<(&'static str, &'static str)> {
        let mut out = match self {
            Bundled::Zelda => vec![
                ("link", "player"),
                ("ganon", "monster"),
                ("key", "key"),
                ("door", "door"),
            ],
            Bundled::Pasta => vec![
                ("chef", "chef"),
                ("pasta", "pasta"),
                ("water", "water"),
                ("key", "key"),
                ("lock", "lock"),
            ],
            Bundled::Escape => vec![
                ("mouse", "mouse"),
                ("block1", "block"),
                ("hole1", "hole"),
                ("cheese", "cheese"),
            ],
            Bundled::Snowman => vec![
                ("kid", "kid"),
                ("bottom", "piece"),
                ("middle", "piece"),
                ("top", "piece"),
                ("goal", "goal"),
                ("key", "key"),
                ("door", "door"),
            ],
        };
        let extra: &[(&str, &str)] = match self {
            Bundled::Zelda => &[("moblin", "monster"), ("octorok", "monster")],
            Bundled::Pasta => &[("gate", "lock"), ("hatch", "lock")],
            Bundled::Escape => &[
                ("block2", "block"),
                ("hole2", "hole"),
                ("block3", "block"),
                ("hole3", "hole"),
            ],
            Bundled::Snowman => &[("gate", "door"), ("latch", "door")],
        };
        let n = match size {
            0..=5 => 0,
            6..=7 => 1,
            _ => 2,
        };
        if self == Bundled::Escape {
            // Blocks and holes come in pairs.
            out.extend(extra.iter().take(2 * n));
        } else {
            out.extend(extra.iter().take(n));
        }
        out
    }

    pub fn generate(self, size: u8, seed: u64) -> Result<InstanceSpec, GenError> {
        let spec = GeneratorSpec {
            size,
            obstacle_fraction: self.obstacle_fraction(),
            seed,
        };
        let domain = self.domain();
        generate_instance_with(&domain, &self.roster(size), &spec, |inst| {
            goals_reachable(&domain, inst)
        })
    }
}

impl fmt::Display for Bundled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Bundled {
    type Err = LoadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Bundled::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| LoadError::UnknownWorld(s.to_string()))
    }
}

/// Every goal declaration has a literal that is false at the start and can
/// be made true (or the reverse, for negated goals).
fn goals_reachable(domain: &DomainSpec, inst: &InstanceSpec) -> bool {
    let Ok(world) = World::new(domain.clone(), inst.clone()) else {
        return false;
    };
    let u = &world.universe;
    domain.goals.iter().all(|g| {
        let Some(pred) = u.predicate_index(&g.predicate) else {
            return false;
        };
        u.atoms
            .iter()
            .filter(|a| a.pred == pred && holds(&world, a, &world.initial) != g.positive)
            .any(|a| nearest_satisfying(&world, &world.initial, a, g.positive).is_some())
    })
}

/// Hand-made layout shipped with the crate, if any.
pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Resolves names like `zelda5`: a bundled fixture if one exists, otherwise a
/// generated field of that size.
pub fn bundled_world(name: &str, seed: u64) -> Result<World, LoadError> {
    let split = name
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| LoadError::UnknownWorld(name.into()))?;
    let (dname, size) = name.split_at(split);
    let b: Bundled = dname
        .parse()
        .map_err(|_| LoadError::UnknownWorld(name.into()))?;
    let size: u8 = size
        .parse()
        .map_err(|_| LoadError::UnknownWorld(name.into()))?;
    let domain = b.domain();
    let inst = match fixture(name) {
        Some(text) => parse_instance(text, &domain)?,
        None => b.generate(size, seed)?,
    };
    Ok(World::new(domain, inst)?)
}
