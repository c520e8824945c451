//! Agent registry backed by an event-sourced knowledge graph.
//!
//! Every accepted mutation emits exactly one [`GraphEvent`] with the next
//! sequence number; rejected mutations emit nothing. Folding the event log
//! over an empty graph reproduces [`Registry::snapshot`].

mod graph;
mod profile;

pub use graph::{
    fold_events, Edge, EdgeKind, EventKind, EventPayload, GraphEvent, KnowledgeGraph, ProfileDelta,
    TRANSFER_COST,
};
pub use profile::{
    AffineCost, AgentProfile, AgentType, Capability, CapabilityRole, CostModel, DataType,
    FunctionRange, NodeId, RATED_BANDWIDTH,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("agent {0} is already registered")]
    DuplicateId(NodeId),
    #[error("invalid profile for agent {id}: {reason}")]
    InvalidProfile { id: NodeId, reason: String },
    #[error("unknown agent {0}")]
    UnknownAgent(NodeId),
    #[error("agent {id} has no field `{field}`")]
    UnknownField { id: NodeId, field: String },
    #[error("edge {from} -> {to} ({kind:?}) already exists")]
    DuplicateEdge { from: NodeId, to: NodeId, kind: EdgeKind },
    #[error("no edge {from} -> {to} ({kind:?})")]
    UnknownEdge { from: NodeId, to: NodeId, kind: EdgeKind },
    #[error("self-loop on agent {0}")]
    SelfLoop(NodeId),
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("event gap: expected seq {expected}, found {found}")]
    GapInEvents { expected: u64, found: u64 },
}

/// Capability query; every supplied field must match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_type: Option<AgentType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capability_name: Option<String>,
    /// Matches tools whose output schema kind equals this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_schema: Option<String>,
}

impl QueryFilter {
    pub fn matches(&self, profile: &AgentProfile) -> bool {
        if self.agent_type.is_some_and(|t| t != profile.agent_type) {
            return false;
        }
        if let Some(name) = &self.capability_name {
            if !profile.has_tool(name) {
                return false;
            }
        }
        if let Some(kind) = &self.output_schema {
            if !profile.tools.iter().any(|t| &t.output_schema.kind == kind) {
                return false;
            }
        }
        true
    }
}

/// Ids of all nodes in `graph` matching `filter`, ascending.
pub fn query(graph: &KnowledgeGraph, filter: &QueryFilter) -> Vec<NodeId> {
    graph.nodes().filter(|p| filter.matches(p)).map(|p| p.id).collect()
}

/// Single-writer registry. Readers take [`Registry::snapshot`] copies.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    graph: KnowledgeGraph,
    log: Vec<GraphEvent>,
    clock: f64,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sim-time stamped onto subsequent events.
    pub fn set_time(&mut self, t: f64) {
        self.clock = t;
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn snapshot(&self) -> KnowledgeGraph {
        self.graph.clone()
    }

    pub fn seq(&self) -> u64 {
        self.graph.version
    }

    /// Every event emitted so far, ascending by seq.
    pub fn events(&self) -> &[GraphEvent] {
        &self.log
    }

    /// Events with `seq > after`.
    pub fn events_after(&self, after: u64) -> &[GraphEvent] {
        let start = self.log.partition_point(|e| e.seq <= after);
        &self.log[start..]
    }

    pub fn query(&self, filter: &QueryFilter) -> Vec<NodeId> {
        query(&self.graph, filter)
    }

    fn emit(&mut self, kind: EventKind, payload: EventPayload) -> Result<GraphEvent, RegistryError> {
        let event = GraphEvent {
            seq: self.graph.version + 1,
            kind,
            payload,
            timestamp: self.clock,
        };
        self.graph.apply(&event)?;
        self.log.push(event.clone());
        Ok(event)
    }

    pub fn register(&mut self, profile: AgentProfile) -> Result<(NodeId, GraphEvent), RegistryError> {
        let id = profile.id;
        if self.graph.contains(id) {
            return Err(RegistryError::DuplicateId(id));
        }
        profile.validate()?;
        let event = self.emit(EventKind::Joined, EventPayload::Profile { profile })?;
        Ok((id, event))
    }

    /// Removes the agent and every incident edge.
    pub fn deregister(&mut self, id: NodeId) -> Result<GraphEvent, RegistryError> {
        if !self.graph.contains(id) {
            return Err(RegistryError::UnknownAgent(id));
        }
        self.emit(EventKind::Left, EventPayload::Removed { id })
    }

    pub fn update_state(&mut self, id: NodeId, delta: ProfileDelta) -> Result<GraphEvent, RegistryError> {
        self.graph.check_delta(id, &delta)?;
        self.emit(EventKind::Updated, EventPayload::Delta { id, delta })
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<GraphEvent, RegistryError> {
        self.graph.check_new_edge(&edge)?;
        self.emit(EventKind::Updated, EventPayload::EdgeAdded { edge })
    }

    pub fn remove_edge(&mut self, from: NodeId, to: NodeId, kind: EdgeKind) -> Result<GraphEvent, RegistryError> {
        for id in [from, to] {
            if !self.graph.contains(id) {
                return Err(RegistryError::UnknownAgent(id));
            }
        }
        if self.graph.edge(from, to, kind).is_none() {
            return Err(RegistryError::UnknownEdge { from, to, kind });
        }
        self.emit(EventKind::Updated, EventPayload::EdgeRemoved { from, to, kind })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn agent(id: u32, agent_type: AgentType, tools: &[(&str, CapabilityRole)]) -> AgentProfile {
        AgentProfile {
            id: NodeId(id),
            name: format!("agent-{id}"),
            agent_type,
            tools: tools
                .iter()
                .map(|(name, role)| Capability {
                    name: (*name).into(),
                    role: *role,
                    input_schema: DataType::new("any", "any", "bits"),
                    output_schema: DataType::new("any", "any", "bits"),
                    cost_model: CostModel::default(),
                })
                .collect(),
            function_space: BTreeMap::new(),
            resources: BTreeMap::from([("compute_ops_per_s".to_owned(), 1e9)]),
        }
    }

    fn relay(id: u32) -> AgentProfile {
        agent(id, AgentType::Computation, &[("forward", CapabilityRole::Relay)])
    }

    #[test]
    fn singleton_registration() {
        let mut reg = Registry::new();
        let (id, ev) = reg.register(relay(1)).unwrap();
        assert_eq!(id, NodeId(1));
        assert_eq!(ev.seq, 1);
        assert_eq!(ev.kind, EventKind::Joined);
        assert_eq!(reg.graph().node_count(), 1);
        assert_eq!(reg.graph().edge_count(), 0);
    }

    #[test]
    fn duplicate_id_emits_nothing() {
        let mut reg = Registry::new();
        reg.register(relay(1)).unwrap();
        assert_eq!(reg.register(relay(1)), Err(RegistryError::DuplicateId(NodeId(1))));
        assert_eq!(reg.events().len(), 1);
        assert_eq!(reg.seq(), 1);
    }

    #[test]
    fn deregister_drops_incident_edges_and_allows_rejoin() {
        let mut reg = Registry::new();
        for i in 1..=3 {
            reg.register(relay(i)).unwrap();
        }
        reg.add_edge(Edge::new(1, 2, EdgeKind::InteractionLink)).unwrap();
        reg.add_edge(Edge::new(2, 3, EdgeKind::InteractionLink)).unwrap();
        let left = reg.deregister(NodeId(2)).unwrap();
        assert_eq!(left.kind, EventKind::Left);
        assert_eq!(reg.graph().edge_count(), 0);
        let (_, joined) = reg.register(relay(2)).unwrap();
        assert!(joined.seq > left.seq);
        assert_eq!(reg.deregister(NodeId(9)), Err(RegistryError::UnknownAgent(NodeId(9))));
    }

    #[test]
    fn update_state_paths() {
        let mut reg = Registry::new();
        reg.register(relay(10)).unwrap();
        let ev = reg
            .update_state(
                NodeId(10),
                ProfileDelta::SetResource {
                    name: "compute_ops_per_s".into(),
                    value: 5e8,
                },
            )
            .unwrap();
        assert_eq!(ev.seq, 2);
        assert_eq!(reg.graph().node(NodeId(10)).unwrap().resources["compute_ops_per_s"], 5e8);

        let err = reg
            .update_state(
                NodeId(10),
                ProfileDelta::SetResource {
                    name: "gpu_count".into(),
                    value: 1.0,
                },
            )
            .unwrap_err();
        assert!(matches!(err, RegistryError::UnknownField { .. }));
        assert_eq!(reg.seq(), 2);

        let cap = agent(0, AgentType::Computation, &[("classify", CapabilityRole::Reason)]).tools[0].clone();
        reg.update_state(NodeId(10), ProfileDelta::AddCapability { capability: cap })
            .unwrap();
        let filter = QueryFilter {
            capability_name: Some("classify".into()),
            ..Default::default()
        };
        assert_eq!(reg.query(&filter), vec![NodeId(10)]);
    }

    #[test]
    fn edge_rules() {
        let mut reg = Registry::new();
        reg.register(relay(1)).unwrap();
        reg.register(relay(2)).unwrap();
        assert_eq!(
            reg.add_edge(Edge::new(1, 1, EdgeKind::InteractionLink)),
            Err(RegistryError::SelfLoop(NodeId(1)))
        );
        reg.add_edge(Edge::new(1, 2, EdgeKind::InteractionLink)).unwrap();
        assert!(matches!(
            reg.add_edge(Edge::new(1, 2, EdgeKind::InteractionLink)),
            Err(RegistryError::DuplicateEdge { .. })
        ));
        // Same endpoints, different kind is a distinct edge.
        reg.add_edge(Edge::new(1, 2, EdgeKind::SharedKnowledge)).unwrap();
        assert!(matches!(
            reg.add_edge(Edge::new(1, 7, EdgeKind::InteractionLink)),
            Err(RegistryError::UnknownAgent(NodeId(7)))
        ));
        reg.remove_edge(NodeId(1), NodeId(2), EdgeKind::SharedKnowledge).unwrap();
        assert_eq!(reg.graph().edge_count(), 1);
        assert_eq!(reg.seq(), 5);
    }

    #[test]
    fn query_filters_and_empty_filter() {
        let mut reg = Registry::new();
        reg.register(agent(3, AgentType::Actuator, &[("act", CapabilityRole::Actuate)]))
            .unwrap();
        reg.register(relay(1)).unwrap();
        assert_eq!(reg.query(&QueryFilter::default()), vec![NodeId(1), NodeId(3)]);
        let f = QueryFilter {
            agent_type: Some(AgentType::Actuator),
            ..Default::default()
        };
        assert_eq!(reg.query(&f), vec![NodeId(3)]);
    }

    #[test]
    fn fold_identity_and_gap() {
        let mut reg = Registry::new();
        reg.register(relay(1)).unwrap();
        reg.register(relay(2)).unwrap();
        let snap = reg.snapshot();
        assert_eq!(fold_events(&snap, []).unwrap(), snap);
        assert_eq!(fold_events(&KnowledgeGraph::new(), reg.events()).unwrap(), snap);
        let reversed: Vec<_> = reg.events().iter().rev().cloned().collect();
        assert_eq!(
            fold_events(&KnowledgeGraph::new(), &reversed),
            Err(RegistryError::GapInEvents { expected: 1, found: 2 })
        );
    }

    #[test]
    fn events_after_splits_log() {
        let mut reg = Registry::new();
        for i in 1..=5 {
            reg.register(relay(i)).unwrap();
        }
        let seqs: Vec<u64> = reg.events_after(2).iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![3, 4, 5]);
        assert!(reg.events_after(5).is_empty());
    }

    #[test]
    fn dot_export_is_stable() {
        let mut reg = Registry::new();
        reg.register(relay(1)).unwrap();
        reg.register(agent(2, AgentType::Actuator, &[("act", CapabilityRole::Actuate)]))
            .unwrap();
        reg.add_edge(Edge::new(1, 2, EdgeKind::InteractionLink)).unwrap();
        let dot = reg.graph().to_dot();
        assert_eq!(
            dot,
            "digraph knowledge_graph {\n  1 [label=\"1:computation\"];\n  2 [label=\"2:actuator\"];\n  1 -> 2 [label=\"interaction_link\"];\n}\n"
        );
    }
}
