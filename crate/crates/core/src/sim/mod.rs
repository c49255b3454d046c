//! Simulation helpers: seeded generators of domain values and offline model
//! stand-ins that answer from the structured inputs of a prompt.

pub mod gen;
pub mod prompt;
pub mod responders;
