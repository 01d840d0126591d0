//! Capability discovery for black-box agents in grid-world games.
//!
//! The pipeline harvests execution traces from an agent, abstracts them into
//! a user vocabulary, induces lifted capability candidates and completes them
//! with distinguishing reachability queries.

pub mod abstraction;
pub mod agents;
pub mod domains;
pub mod dsl;
pub mod experiment;
pub mod generator;
pub mod harvest;
pub mod induction;
pub mod io;
pub mod model;
pub mod oracle;
pub mod query;
pub mod world;

pub use abstraction::{abstract_state, concretize, concretize_near, AbstractState, Atom, Universe};
pub use dsl::{parse_domain, parse_instance, DomainSpec, InstanceSpec, ParseError};
pub use world::{Action, ConcreteState, ObjStatus, World};
