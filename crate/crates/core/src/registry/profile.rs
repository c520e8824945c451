//! Agent profiles: identity, type, tools and their cost models, function space and resources.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::RegistryError;

/// Identifier of an agent node in the knowledge graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    Perceptual,
    Communication,
    Computation,
    Actuator,
    Orchestration,
}

impl AgentType {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentType::Perceptual => "perceptual",
            AgentType::Communication => "communication",
            AgentType::Computation => "computation",
            AgentType::Actuator => "actuator",
            AgentType::Orchestration => "orchestration",
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a capability does inside an execution plan.
///
/// `Relay` tools forward data without completing a subtask (pre-processing,
/// scheduling). All other roles complete the subtask of the same name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapabilityRole {
    Sense,
    Extract,
    Transmit,
    Reason,
    Actuate,
    Relay,
}

impl CapabilityRole {
    /// Agent types allowed to host a tool with this role.
    pub fn accepts_agent(self, agent: AgentType) -> bool {
        match self {
            CapabilityRole::Sense => agent == AgentType::Perceptual,
            CapabilityRole::Extract | CapabilityRole::Reason => agent == AgentType::Computation,
            CapabilityRole::Transmit => agent == AgentType::Communication,
            CapabilityRole::Actuate => agent == AgentType::Actuator,
            CapabilityRole::Relay => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CapabilityRole::Sense => "sense",
            CapabilityRole::Extract => "extract",
            CapabilityRole::Transmit => "transmit",
            CapabilityRole::Reason => "reason",
            CapabilityRole::Actuate => "actuate",
            CapabilityRole::Relay => "relay",
        }
    }
}

/// Data-type descriptor used for tool input and output schemas.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataType {
    /// Data kind, e.g. `raw_point_cloud` or `scene_graph`. `any` accepts every kind.
    pub kind: String,
    pub modality: String,
    pub unit: String,
}

impl DataType {
    pub const ANY: &'static str = "any";

    pub fn new(kind: &str, modality: &str, unit: &str) -> Self {
        Self {
            kind: kind.to_owned(),
            modality: modality.to_owned(),
            unit: unit.to_owned(),
        }
    }

    /// Whether data of type `other` can be fed into an input with this schema.
    pub fn accepts(&self, other: &DataType) -> bool {
        self.kind == Self::ANY || self.kind == other.kind
    }
}

/// `base + per_bit * input_bits`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineCost {
    #[serde(default)]
    pub base: f64,
    #[serde(default)]
    pub per_bit: f64,
}

impl AffineCost {
    pub fn constant(base: f64) -> Self {
        Self { base, per_bit: 0.0 }
    }

    pub fn eval(&self, input_bits: f64) -> f64 {
        self.base + self.per_bit * input_bits
    }

    fn is_valid(&self) -> bool {
        self.base.is_finite() && self.per_bit.is_finite() && self.base >= 0.0 && self.per_bit >= 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(default)]
    pub latency_s: AffineCost,
    #[serde(default)]
    pub energy_j: AffineCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub name: String,
    pub role: CapabilityRole,
    pub input_schema: DataType,
    pub output_schema: DataType,
    #[serde(default)]
    pub cost_model: CostModel,
}

/// Admissible values for one function-space parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FunctionRange {
    /// Half-open interval `lo < x <= hi`.
    Interval { lo: f64, hi: f64 },
    Choice { options: Vec<String> },
}

impl FunctionRange {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            FunctionRange::Interval { lo, hi } => *lo < x && x <= *hi,
            FunctionRange::Choice { .. } => false,
        }
    }
}

/// Function-space parameter holding the channel bandwidths a link agent is rated for.
pub const RATED_BANDWIDTH: &str = "rated_bandwidth_hz";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: NodeId,
    #[serde(default)]
    pub name: String,
    pub agent_type: AgentType,
    pub tools: Vec<Capability>,
    #[serde(default)]
    pub function_space: BTreeMap<String, FunctionRange>,
    #[serde(default)]
    pub resources: BTreeMap<String, f64>,
}

impl AgentProfile {
    pub fn tool(&self, name: &str) -> Option<&Capability> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn has_tool(&self, name: &str) -> bool {
        self.tool(name).is_some()
    }

    /// Whether this agent may carry traffic over a channel of `bandwidth_hz`.
    /// Agents without a rating accept any bandwidth.
    pub fn supports_bandwidth(&self, bandwidth_hz: f64) -> bool {
        self.function_space
            .get(RATED_BANDWIDTH)
            .is_none_or(|r| r.contains(bandwidth_hz))
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |reason: String| RegistryError::InvalidProfile { id: self.id, reason };
        for (i, tool) in self.tools.iter().enumerate() {
            if tool.name.is_empty() {
                return Err(invalid("tool with empty name".into()));
            }
            if self.tools[..i].iter().any(|t| t.name == tool.name) {
                return Err(invalid(format!("duplicate tool `{}`", tool.name)));
            }
            check_capability(self.agent_type, tool).map_err(invalid)?;
        }
        for (param, range) in &self.function_space {
            match range {
                FunctionRange::Interval { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                    return Err(invalid(format!("parameter `{param}` has an empty interval")));
                }
                FunctionRange::Choice { options } if options.is_empty() => {
                    return Err(invalid(format!("parameter `{param}` has no options")));
                }
                _ => {}
            }
        }
        if let Some((name, _)) = self.resources.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("resource `{name}` must be finite and non-negative")));
        }
        Ok(())
    }
}

pub(crate) fn check_capability(agent: AgentType, tool: &Capability) -> Result<(), String> {
    for schema in [&tool.input_schema, &tool.output_schema] {
        if schema.kind.is_empty() || schema.modality.is_empty() {
            return Err(format!("tool `{}` has an empty schema", tool.name));
        }
    }
    if !tool.cost_model.latency_s.is_valid() || !tool.cost_model.energy_j.is_valid() {
        return Err(format!("tool `{}` has a negative or non-finite cost coefficient", tool.name));
    }
    if !tool.role.accepts_agent(agent) {
        return Err(format!(
            "tool `{}` with role {} cannot run on a {agent} agent",
            tool.name,
            tool.role.as_str()
        ));
    }
    Ok(())
}
