//! Desk-scale simulator of multi-phase inference over discrete synthetic worlds.
//!
//! Agents with heterogeneous operating profiles build approximate sufficient
//! statistics of shared observation streams, foreground one of them, choose a
//! plan, and exchange representations through an alignment map whose
//! transformation loss is computed exactly.

pub mod agent;
pub mod align;
pub mod candidate;
pub mod canonical;
pub mod config;
pub mod engine;
pub mod output;
pub mod probkit;
pub mod rng;
pub mod scenarios;
pub mod world;

pub use agent::{Agent, AgentParams, Feedback, Plan, PlanKind, ProfileState};
pub use align::{AlignMode, AlignOptions, AlignmentClass, AlignmentReport};
pub use candidate::{Candidate, CandidateSpace, ConditioningBasis, Horizon, PhaseRegistry, Resolution};
pub use config::{parse_config, ConfigError, HypothesisId, RunConfig};
pub use engine::{run, EngineError, RunRecord};
pub use probkit::{Channel, Dist, JointDist, ProbError};
pub use scenarios::{run_hypothesis, HypothesisOutcome, ScenarioError};
pub use world::{build_world, World, WorldSpec};
