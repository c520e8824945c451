use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::profile::{check_capability, AgentProfile, Capability, FunctionRange, NodeId};
use super::RegistryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    InteractionLink,
    CapabilityDependency,
    SharedKnowledge,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::InteractionLink => "interaction_link",
            EdgeKind::CapabilityDependency => "capability_dependency",
            EdgeKind::SharedKnowledge => "shared_knowledge",
        }
    }
}

/// Edge attribute read by the planner as the hand-off cost between two agents.
pub const TRANSFER_COST: &str = "transfer_cost";

/// Directed edge; direction is the permitted data flow (producer to consumer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
    #[serde(default)]
    pub attrs: BTreeMap<String, f64>,
}

impl Edge {
    pub fn new(from: u32, to: u32, kind: EdgeKind) -> Self {
        Self {
            from: NodeId(from),
            to: NodeId(to),
            kind,
            attrs: BTreeMap::new(),
        }
    }

    fn key(&self) -> (NodeId, NodeId, EdgeKind) {
        (self.from, self.to, self.kind)
    }

    pub fn transfer_cost(&self) -> f64 {
        self.attrs.get(TRANSFER_COST).copied().unwrap_or(0.0)
    }
}

/// A change applied to an existing profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ProfileDelta {
    SetResource { name: String, value: f64 },
    SetFunctionRange { param: String, range: FunctionRange },
    AddCapability { capability: Capability },
    RemoveCapability { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Joined,
    Left,
    Updated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    Profile { profile: AgentProfile },
    Removed { id: NodeId },
    Delta { id: NodeId, delta: ProfileDelta },
    EdgeAdded { edge: Edge },
    EdgeRemoved { from: NodeId, to: NodeId, kind: EdgeKind },
}

/// State-change event broadcast by the registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: EventPayload,
    pub timestamp: f64,
}

/// Nodes are agent profiles; edges are typed relations between agents.
///
/// `version` is the sequence number of the last event folded into the graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub version: u64,
    nodes: BTreeMap<NodeId, AgentProfile>,
    /// Sorted by `(from, to, kind)`.
    edges: Vec<Edge>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&AgentProfile> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &AgentProfile> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, from: NodeId, to: NodeId, kind: EdgeKind) -> Option<&Edge> {
        self.edge_index(from, to, kind).ok().map(|i| &self.edges[i])
    }

    /// Outgoing edges of `kind`, ordered by target id.
    pub fn successors(&self, from: NodeId, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        let start = self.edges.partition_point(|e| e.from < from);
        self.edges[start..]
            .iter()
            .take_while(move |e| e.from == from)
            .filter(move |e| e.kind == kind)
    }

    fn edge_index(&self, from: NodeId, to: NodeId, kind: EdgeKind) -> Result<usize, usize> {
        self.edges.binary_search_by(|e| e.key().cmp(&(from, to, kind)))
    }

    pub(crate) fn check_new_edge(&self, edge: &Edge) -> Result<(), RegistryError> {
        for id in [edge.from, edge.to] {
            if !self.contains(id) {
                return Err(RegistryError::UnknownAgent(id));
            }
        }
        if edge.from == edge.to {
            return Err(RegistryError::SelfLoop(edge.from));
        }
        if self.edge_index(edge.from, edge.to, edge.kind).is_ok() {
            return Err(RegistryError::DuplicateEdge {
                from: edge.from,
                to: edge.to,
                kind: edge.kind,
            });
        }
        if edge.attrs.values().any(|v| !v.is_finite()) {
            return Err(RegistryError::InvalidEdge("non-finite attribute".into()));
        }
        Ok(())
    }

    pub(crate) fn check_delta(&self, id: NodeId, delta: &ProfileDelta) -> Result<(), RegistryError> {
        let profile = self.node(id).ok_or(RegistryError::UnknownAgent(id))?;
        let unknown = |field: &str| RegistryError::UnknownField {
            id,
            field: field.to_owned(),
        };
        match delta {
            ProfileDelta::SetResource { name, value } => {
                if !profile.resources.contains_key(name) {
                    return Err(unknown(name));
                }
                if !value.is_finite() || *value < 0.0 {
                    return Err(RegistryError::InvalidProfile {
                        id,
                        reason: format!("resource `{name}` must be finite and non-negative"),
                    });
                }
            }
            ProfileDelta::SetFunctionRange { param, .. } => {
                if !profile.function_space.contains_key(param) {
                    return Err(unknown(param));
                }
            }
            ProfileDelta::AddCapability { capability } => {
                if profile.has_tool(&capability.name) {
                    return Err(RegistryError::InvalidProfile {
                        id,
                        reason: format!("tool `{}` already present", capability.name),
                    });
                }
                check_capability(profile.agent_type, capability)
                    .map_err(|reason| RegistryError::InvalidProfile { id, reason })?;
            }
            ProfileDelta::RemoveCapability { name } => {
                if !profile.has_tool(name) {
                    return Err(unknown(name));
                }
            }
        }
        // Re-validate the whole profile to catch e.g. an emptied interval.
        let mut updated = profile.clone();
        apply_delta(&mut updated, delta);
        updated.validate()
    }

    /// Apply one event. Used both by the live registry and by event folding.
    pub fn apply(&mut self, event: &GraphEvent) -> Result<(), RegistryError> {
        if event.seq != self.version + 1 {
            return Err(RegistryError::GapInEvents {
                expected: self.version + 1,
                found: event.seq,
            });
        }
        match &event.payload {
            EventPayload::Profile { profile } => {
                if self.contains(profile.id) {
                    return Err(RegistryError::DuplicateId(profile.id));
                }
                profile.validate()?;
                self.nodes.insert(profile.id, profile.clone());
            }
            EventPayload::Removed { id } => {
                if self.nodes.remove(id).is_none() {
                    return Err(RegistryError::UnknownAgent(*id));
                }
                self.edges.retain(|e| e.from != *id && e.to != *id);
            }
            EventPayload::Delta { id, delta } => {
                self.check_delta(*id, delta)?;
                apply_delta(self.nodes.get_mut(id).expect("checked"), delta);
            }
            EventPayload::EdgeAdded { edge } => {
                self.check_new_edge(edge)?;
                let at = self.edge_index(edge.from, edge.to, edge.kind).unwrap_err();
                self.edges.insert(at, edge.clone());
            }
            EventPayload::EdgeRemoved { from, to, kind } => {
                let at = self
                    .edge_index(*from, *to, *kind)
                    .map_err(|_| RegistryError::UnknownEdge {
                        from: *from,
                        to: *to,
                        kind: *kind,
                    })?;
                self.edges.remove(at);
            }
        }
        self.version = event.seq;
        Ok(())
    }

    /// Graphviz rendering: nodes labelled `id:type`, edges labelled by kind.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph knowledge_graph {\n");
        for p in self.nodes.values() {
            let _ = writeln!(out, "  {} [label=\"{}:{}\"];", p.id, p.id, p.agent_type);
        }
        for e in &self.edges {
            let style = match e.kind {
                EdgeKind::InteractionLink => "",
                EdgeKind::CapabilityDependency => ", style=dashed",
                EdgeKind::SharedKnowledge => ", style=dotted",
            };
            let _ = writeln!(out, "  {} -> {} [label=\"{}\"{style}];", e.from, e.to, e.kind.as_str());
        }
        out.push_str("}\n");
        out
    }
}

fn apply_delta(profile: &mut AgentProfile, delta: &ProfileDelta) {
    match delta {
        ProfileDelta::SetResource { name, value } => {
            profile.resources.insert(name.clone(), *value);
        }
        ProfileDelta::SetFunctionRange { param, range } => {
            profile.function_space.insert(param.clone(), range.clone());
        }
        ProfileDelta::AddCapability { capability } => profile.tools.push(capability.clone()),
        ProfileDelta::RemoveCapability { name } => profile.tools.retain(|t| &t.name != name),
    }
}

/// Replay `events` on top of `base`. Events must continue `base.version` without gaps.
pub fn fold_events<'a, I>(base: &KnowledgeGraph, events: I) -> Result<KnowledgeGraph, RegistryError>
where
    I: IntoIterator<Item = &'a GraphEvent>,
{
    let mut graph = base.clone();
    for event in events {
        graph.apply(event)?;
    }
    Ok(graph)
}
