//! Augmented-Lagrangian soft actor-critic.

pub mod agent;
pub mod buffer;
pub mod critic;
pub mod eval;
pub mod lagrange;
pub mod train;

pub use agent::{save_agent, Agent, AgentManifest, AlSac, UpdateStats};
pub use buffer::{Batch, ReplayBuffer};
pub use critic::{CriticEnsemble, CriticPair};
pub use eval::{
    evaluate, evaluate_plan, evaluation_plan, run_episode, ConstantController, Controller, DeterministicActor,
    EpisodeResult, EvalMetrics, PolicySnapshot, StepContext, StepRecord,
};
pub use lagrange::{ActorPass, DualSign, LagrangeState};
pub use train::{train, train_agent, Checkpoint, EpisodeRecord, TrainConfig, TrainOutcome};
