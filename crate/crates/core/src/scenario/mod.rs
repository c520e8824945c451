//! Scenario configuration, simulated runs and reports.

mod config;
mod report;
mod runner;
mod success;

use std::io;

use thiserror::Error;

use crate::intent::IntentError;
use crate::knowledge::KnowledgeError;
use crate::netmodel::NetError;
use crate::orchestrator::OrchestratorError;
use crate::protocol::BusError;

pub use config::{
    load_scenario, validate_document, BaselineSpec, BoundQuery, Finding, FindingKind, Scenario, ScenarioConfig,
    ScmConfig, StepRef, CANONICAL_FDR,
};
pub use report::{
    compare, format_bandwidth, run_arch, sweep, write_comparison_csv, write_csv, Arch, ComparisonReport,
    ComparisonRow, DerivedBound, Measured, RunReport, SweepResult, BANDWIDTH_PLACEHOLDER, COMPARISON_COLUMNS,
    CSV_COLUMNS,
};
pub use runner::{run_baseline, run_goagentnet, SimAgent, SimResult};
pub use success::{success_model, SuccessParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("referential integrity: {0}")]
    ReferentialIntegrity(String),
    #[error("baseline consumed no communication energy")]
    BaselineZeroEnergy,
    #[error("reports are for different intents: `{left}` vs `{right}`")]
    IntentMismatch { left: String, right: String },
    #[error("{0}")]
    Usage(String),
    #[error("execution failed: {0}")]
    Execution(String),
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ScenarioError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, ScenarioError::Orchestrator(OrchestratorError::NoFeasiblePlan))
    }
}
