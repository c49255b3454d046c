//! Particle swarm search over multi-agent systems expressed as structured text.
//!
//! A [`model::Position`] is a team of role-specialized agents plus an ordered
//! workflow. The [`swarm`] controller evolves a population of positions using
//! language-model operators from [`transform`], scoring each one by executing
//! it ([`runtime`]) on a task from [`tasks`].

pub mod gateway;
pub mod model;
pub mod record;
pub mod runtime;
pub mod seed;
pub mod sim;
pub mod swarm;
pub mod tasks;
pub mod transform;

pub use record::{ParseError, Record};
