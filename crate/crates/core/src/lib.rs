//! Goal-oriented agent networking: intent translation, a dynamic agent
//! registry, utility-driven orchestration and a simulated network substrate.

pub mod intent;
pub mod knowledge;
pub mod netmodel;
pub mod orchestrator;
pub mod protocol;
pub mod registry;
pub mod scenario;
pub mod scm;

pub use intent::{parse_intent, Goal, IntentSpec};
pub use knowledge::KnowledgeBase;
pub use netmodel::{Channel, NetworkState};
pub use orchestrator::{plan, plan_bruteforce, ExecutionPlan, PlanContext, UtilityWeights};
pub use registry::{AgentProfile, KnowledgeGraph, NodeId, Registry};
