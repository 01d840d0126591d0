//! Shared fixtures for the benchmark harness.
//!
//! A fixture is a world plus a harvest made with the search agent, so the
//! benches can time induction and the query phase without re-running tasks.

use capkit_core::agents::AgentHandle;
use capkit_core::domains::bundled_world;
use capkit_core::experiment::{ExperimentError, DEFAULT_SEED};
use capkit_core::harvest::{generate_tasks, harvest_and_abstract, Harvest};
use capkit_core::World;

pub struct Fixture {
    pub name: String,
    pub world: World,
    pub harvest: Harvest,
}

/// World `name` (e.g. `zelda5`) harvested with `traces` search-agent tasks.
pub fn fixture(name: &str, traces: usize) -> Result<Fixture, ExperimentError> {
    let world = bundled_world(name, DEFAULT_SEED)?;
    let tasks = generate_tasks(&world, traces, DEFAULT_SEED)?;
    let harvest = harvest_and_abstract(&mut AgentHandle::search(), &world, &tasks);
    Ok(Fixture {
        name: name.to_string(),
        world,
        harvest,
    })
}

/// The worlds benched by default: every bundled domain at 5×5.
pub const WORLDS: [&str; 4] = ["zelda5", "pasta5", "escape5", "snowman5"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build_for_every_default_world() {
        for w in WORLDS {
            let f = fixture(w, 3).unwrap();
            assert_eq!(f.harvest.traces.len() + f.harvest.skipped, 3);
        }
    }
}
