//! Domain types shared across the framework and the structural rules a legal
//! agentic system must satisfy.

mod apply;
mod config;
mod flaw;
mod ops;
mod outcome;
mod particle;
mod position;
mod validate;
mod velocity;

pub use apply::{apply_ops, ApplyError};
pub use config::{PlanMode, PositionUpdateMode, SwarmConfig, TermControl, TermControls};
pub use flaw::{Flaw, FlawCategory, FlawReport, FlawTarget, UnknownCategory};
pub use ops::{AdjustmentOp, OpKind};
pub use outcome::{EvalOutcome, InstanceError, InstanceScore, MAX_FITNESS};
pub use particle::{Best, Particle};
pub use position::{AgentSpec, Position, WorkflowStep};
pub use validate::{validate_position, ValidationReport, Violation, Warning};
pub use velocity::{TermOrigin, Velocity, VelocityEntry};
