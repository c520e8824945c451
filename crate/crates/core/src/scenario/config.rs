use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ScenarioError, SuccessParams};
use crate::knowledge::{KnowledgeBase, MappingRule, RepresentationSpec};
use crate::netmodel::Channel;
use crate::orchestrator::{TaskTemplate, TemplateSet, UtilityWeights};
use crate::registry::{AgentProfile, CapabilityRole, Edge, NodeId, Registry};
use crate::scm::{build_scm, Assignment, Scm, StructuralEquation};

/// The canonical robotic fault-detection-and-recovery scenario.
pub const CANONICAL_FDR: &str = include_str!("../../data/fdr_canonical.json");

/// One `(agent, tool)` step of the fixed baseline pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRef {
    pub node: NodeId,
    pub capability: String,
}

/// Legacy pipeline: `pre_link`, then whichever link agent is rated for the
/// channel bandwidth, then `post_link`. Nothing is extracted, so the sensed
/// representation travels as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    pub pre_link: Vec<StepRef>,
    pub post_link: Vec<StepRef>,
}

/// Interventional bound query evaluated for every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundQuery {
    pub goal: String,
    pub threshold: f64,
    pub target: String,
    pub range: (f64, f64),
    #[serde(default)]
    pub baseline: Assignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmConfig {
    pub equations: Vec<StructuralEquation>,
    #[serde(default)]
    pub bounds: Vec<BoundQuery>,
}

/// Scenario configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub agents: Vec<AgentProfile>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    pub catalog: BTreeMap<String, Vec<RepresentationSpec>>,
    #[serde(default)]
    pub mapping_rules: Vec<MappingRule>,
    pub channel: Channel,
    #[serde(default)]
    pub success: SuccessParams,
    #[serde(default)]
    pub weights: UtilityWeights,
    pub templates: Vec<TaskTemplate>,
    #[serde(default)]
    pub scm: Option<ScmConfig>,
    pub baseline: BaselineSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    /// The document does not have the expected shape or values.
    Schema,
    /// A name or id refers to something that does not exist.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            FindingKind::Schema => "schema",
            FindingKind::Reference => "reference",
        };
        write!(f, "{kind}: {}", self.message)
    }
}

impl From<Finding> for ScenarioError {
    fn from(f: Finding) -> Self {
        match f.kind {
            FindingKind::Schema => ScenarioError::SchemaViolation(f.message),
            FindingKind::Reference => ScenarioError::ReferentialIntegrity(f.message),
        }
    }
}

/// Fully constructed scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub registry: Registry,
    pub knowledge: KnowledgeBase,
    pub channel: Channel,
    pub success: SuccessParams,
    pub weights: UtilityWeights,
    pub templates: TemplateSet,
    pub scm: Option<Scm>,
    pub bounds: Vec<BoundQuery>,
    pub baseline: BaselineSpec,
}

struct Checker {
    findings: Vec<Finding>,
}

impl Checker {
    fn schema(&mut self, message: impl Into<String>) {
        self.findings.push(Finding {
            kind: FindingKind::Schema,
            message: message.into(),
        });
    }

    fn reference(&mut self, message: impl Into<String>) {
        self.findings.push(Finding {
            kind: FindingKind::Reference,
            message: message.into(),
        });
    }
}

fn build(config: ScenarioConfig) -> (Option<Scenario>, Vec<Finding>) {
    let mut c = Checker { findings: Vec::new() };

    if config.agents.is_empty() {
        c.schema("graph has no agents");
    }
    let mut registry = Registry::new();
    for agent in &config.agents {
        if let Err(e) = registry.register(agent.clone()) {
            c.schema(e.to_string());
        }
    }
    for edge in &config.edges {
        for end in [edge.from, edge.to] {
            if !config.agents.iter().any(|a| a.id == end) {
                c.reference(format!("edge {} -> {} names unknown agent {end}", edge.from, edge.to));
            }
        }
        if registry.graph().contains(edge.from) && registry.graph().contains(edge.to) {
            if let Err(e) = registry.add_edge(edge.clone()) {
                c.schema(e.to_string());
            }
        }
    }

    let knowledge = match KnowledgeBase::new(config.catalog.clone(), config.mapping_rules.clone()) {
        Ok(k) => Some(k),
        Err(e) => {
            c.reference(e.to_string());
            None
        }
    };
    let tools: BTreeSet<&str> = config
        .agents
        .iter()
        .flat_map(|a| a.tools.iter().map(|t| t.name.as_str()))
        .collect();
    for (task, entries) in &config.catalog {
        for r in entries {
            if !tools.contains(r.producer_capability.as_str()) {
                c.reference(format!(
                    "representation `{}` of `{task}` is produced by unknown tool `{}`",
                    r.name, r.producer_capability
                ));
            }
        }
    }
    for rule in &config.mapping_rules {
        for tool in [&rule.consumes, &rule.produced_for] {
            if !tools.contains(tool.as_str()) {
                c.reference(format!("mapping rule for `{}` names unknown tool `{tool}`", rule.task_type));
            }
        }
    }

    if let Err(e) = config.channel.validate() {
        c.schema(format!("channel: {e}"));
    }
    if !config.success.is_valid() {
        c.schema("success parameters need deadline_s > 0 and decay_per_s >= 0");
    }
    if let Err(e) = config.weights.validate() {
        c.schema(format!("weights: {e}"));
    }

    let templates = match TemplateSet::new(config.templates.clone()) {
        Ok(t) => Some(t),
        Err(e) => {
            c.schema(e.to_string());
            None
        }
    };
    for t in &config.templates {
        if !config.catalog.contains_key(&t.task_type) {
            c.reference(format!("template `{}` has no representation catalog", t.task_type));
        }
    }

    let (scm, bounds) = match &config.scm {
        None => (None, Vec::new()),
        Some(sc) => match build_scm(sc.equations.clone()) {
            Ok(scm) => {
                for b in &sc.bounds {
                    for v in [&b.goal, &b.target] {
                        if !scm.contains(v) {
                            c.reference(format!("bound query names unknown variable `{v}`"));
                        }
                    }
                }
                (Some(scm), sc.bounds.clone())
            }
            Err(e) => {
                c.schema(format!("scm: {e}"));
                (None, Vec::new())
            }
        },
    };

    for step in config.baseline.pre_link.iter().chain(&config.baseline.post_link) {
        match config.agents.iter().find(|a| a.id == step.node) {
            None => c.reference(format!("baseline step names unknown agent {}", step.node)),
            Some(a) if !a.has_tool(&step.capability) => c.reference(format!(
                "baseline step: agent {} has no tool `{}`",
                step.node, step.capability
            )),
            Some(_) => {}
        }
    }
    let has_link = config
        .agents
        .iter()
        .any(|a| a.tools.iter().any(|t| t.role == CapabilityRole::Transmit));
    if !has_link {
        c.reference("no agent offers a transmit tool");
    }

    let findings = c.findings;
    let scenario = match (knowledge, templates) {
        (Some(knowledge), Some(templates)) if findings.is_empty() => Some(Scenario {
            name: config.name,
            registry,
            knowledge,
            channel: config.channel,
            success: config.success,
            weights: config.weights,
            templates,
            scm,
            bounds,
            baseline: config.baseline,
        }),
        _ => None,
    };
    (scenario, findings)
}

fn parse(text: &str) -> Result<ScenarioConfig, Finding> {
    serde_json::from_str(text).map_err(|e| Finding {
        kind: FindingKind::Schema,
        message: e.to_string(),
    })
}

/// Every problem found in a configuration document; empty when it loads.
pub fn validate_document(text: &str) -> Vec<Finding> {
    match parse(text) {
        Ok(config) => build(config).1,
        Err(f) => vec![f],
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let config = parse(text)?;
    let (scenario, mut findings) = build(config);
    match scenario {
        Some(s) => Ok(s),
        None => Err(findings.remove(0).into()),
    }
}

impl Scenario {
    pub fn canonical() -> Self {
        load_scenario(CANONICAL_FDR).expect("shipped canonical scenario loads")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn canonical_doc() -> Value {
        serde_json::from_str(CANONICAL_FDR).unwrap()
    }

    #[test]
    fn canonical_loads() {
        assert!(validate_document(CANONICAL_FDR).is_empty());
        let s = Scenario::canonical();
        assert_eq!(s.registry.graph().node_count(), 11);
        assert_eq!(s.registry.graph().edge_count(), 15);
        assert_eq!(s.knowledge.get_representations("robotic_fdr").unwrap().len(), 3);
    }

    #[test]
    fn dangling_rule_is_referential() {
        let mut doc = canonical_doc();
        doc["mapping_rules"][0]["representation"] = "voxel_grid".into();
        let err = load_scenario(&doc.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::ReferentialIntegrity(_)), "{err}");
    }

    #[test]
    fn empty_graph_rejected() {
        let mut doc = canonical_doc();
        doc["agents"] = Value::Array(vec![]);
        doc["edges"] = Value::Array(vec![]);
        assert!(load_scenario(&doc.to_string()).is_err());
        assert!(!validate_document(&doc.to_string()).is_empty());
    }

    #[test]
    fn dangling_edge_reported() {
        let mut doc = canonical_doc();
        doc["edges"]
            .as_array_mut()
            .unwrap()
            .push(serde_json::json!({"from": 11, "to": 42, "kind": "interaction_link"}));
        let findings = validate_document(&doc.to_string());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].kind, FindingKind::Reference);
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let mut doc = canonical_doc();
        doc["colour"] = "blue".into();
        assert!(matches!(
            load_scenario(&doc.to_string()),
            Err(ScenarioError::SchemaViolation(_))
        ));
    }
}
