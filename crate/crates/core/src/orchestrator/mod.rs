//! Goal decomposition and utility-driven path planning over the knowledge graph.

mod model;
mod plan;
mod template;

use thiserror::Error;

use crate::knowledge::KnowledgeError;

pub use model::{utility, ExecutionPlan, PlanContext, PlanStep, Predicted, UtilityInputs, UtilityWeights};
pub use plan::{
    evaluate_steps, match_agents, plan, plan_bruteforce, replan_on_event, ReplanTrigger, BRUTEFORCE_MAX_NODES,
};
pub use template::{decompose, PlannedSubtask, Subtask, SubtaskDag, TaskTemplate, TemplateSet};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("no template for task `{0}`")]
    UnknownTask(String),
    #[error("invalid template for `{task}`: {reason}")]
    InvalidTemplate { task: String, reason: String },
    #[error("utility weights must be finite and non-negative with a positive energy reference")]
    InvalidWeights,
    #[error("no path satisfies the hard constraints")]
    NoFeasiblePlan,
    #[error("graph has {nodes} nodes, enumeration is limited to {limit}")]
    GraphTooLarge { nodes: usize, limit: usize },
    #[error("invalid step sequence: {0}")]
    InvalidStep(String),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}
