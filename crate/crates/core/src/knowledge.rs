//! Application and network knowledge bases shared across layers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::NetworkState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnowledgeError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid representation `{name}`: {reason}")]
    InvalidRepresentation { name: String, reason: String },
    #[error("mapping rule for task `{task}` references missing representation `{representation}`")]
    DanglingRule { task: String, representation: String },
    #[error("state for channel `{channel}` at t={timestamp} precedes last record at t={last}")]
    TimestampRegression { channel: String, timestamp: f64, last: f64 },
    #[error("no network state recorded for channel `{0}`")]
    NoStateYet(String),
    #[error("asset `{0}` already registered")]
    DuplicateAsset(String),
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
}

/// One semantic encoding of a task's raw data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationSpec {
    pub name: String,
    pub size_bits: f64,
    #[serde(default)]
    pub extract_latency_s: f64,
    #[serde(default)]
    pub extract_energy_j: f64,
    /// Probability the representation carries enough information for the task.
    pub sufficiency: f64,
    /// Tool name that produces this representation.
    pub producer_capability: String,
}

impl RepresentationSpec {
    fn validate(&self) -> Result<(), KnowledgeError> {
        let bad = |reason: &str| {
            Err(KnowledgeError::InvalidRepresentation {
                name: self.name.clone(),
                reason: reason.to_owned(),
            })
        };
        if !(self.size_bits.is_finite() && self.size_bits > 0.0) {
            return bad("size_bits must be positive");
        }
        if !(0.0..=1.0).contains(&self.sufficiency) {
            return bad("sufficiency must lie in [0, 1]");
        }
        if !(self.extract_latency_s >= 0.0 && self.extract_energy_j >= 0.0)
            || !self.extract_latency_s.is_finite()
            || !self.extract_energy_j.is_finite()
        {
            return bad("extraction costs must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    pub task_type: String,
    pub raw_modality: String,
    pub representation: String,
    pub consumes: String,
    pub produced_for: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Codebook,
    Dataset,
    Model,
    KineticModel,
    Other,
}

/// Shared asset held by reference; contents are never materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    pub id: String,
    pub kind: AssetKind,
    pub blob_ref: String,
}

/// Append-only per-channel history of network states.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkStateLog {
    records: BTreeMap<String, Vec<NetworkState>>,
}

impl NetworkStateLog {
    pub fn record(&mut self, state: NetworkState) -> Result<(), KnowledgeError> {
        let history = self.records.entry(state.channel_id.clone()).or_default();
        if let Some(last) = history.last() {
            if state.timestamp < last.timestamp {
                return Err(KnowledgeError::TimestampRegression {
                    channel: state.channel_id,
                    timestamp: state.timestamp,
                    last: last.timestamp,
                });
            }
        }
        history.push(state);
        Ok(())
    }

    pub fn latest(&self, channel: &str) -> Result<&NetworkState, KnowledgeError> {
        self.records
            .get(channel)
            .and_then(|h| h.last())
            .ok_or_else(|| KnowledgeError::NoStateYet(channel.to_owned()))
    }

    pub fn history(&self, channel: &str) -> &[NetworkState] {
        self.records.get(channel).map_or(&[], Vec::as_slice)
    }
}

/// Methods agents may use on the wire.
pub const DEFAULT_METHODS: [&str; 7] = [
    "agent/register",
    "agent/deregister",
    "agent/invoke",
    "agent/event",
    "graph/query",
    "graph/subscribe",
    "ping",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    /// Per task, sorted by size ascending (name breaks ties).
    catalog: BTreeMap<String, Vec<RepresentationSpec>>,
    rules: Vec<MappingRule>,
    assets: BTreeMap<String, Asset>,
    pub states: NetworkStateLog,
    methods: BTreeSet<String>,
}

impl KnowledgeBase {
    /// Builds the base and checks that every rule references a catalogued representation.
    pub fn new(
        catalog: BTreeMap<String, Vec<RepresentationSpec>>,
        rules: Vec<MappingRule>,
    ) -> Result<Self, KnowledgeError> {
        let mut sorted = BTreeMap::new();
        for (task, mut entries) in catalog {
            for e in &entries {
                e.validate()?;
            }
            entries.sort_by(|a, b| a.size_bits.total_cmp(&b.size_bits).then_with(|| a.name.cmp(&b.name)));
            if let Some(w) = entries.windows(2).find(|w| w[0].name == w[1].name) {
                return Err(KnowledgeError::InvalidRepresentation {
                    name: w[0].name.clone(),
                    reason: format!("listed twice for task `{task}`"),
                });
            }
            sorted.insert(task, entries);
        }
        for rule in &rules {
            let known = sorted
                .get(&rule.task_type)
                .is_some_and(|c: &Vec<RepresentationSpec>| c.iter().any(|r| r.name == rule.representation));
            if !known {
                return Err(KnowledgeError::DanglingRule {
                    task: rule.task_type.clone(),
                    representation: rule.representation.clone(),
                });
            }
        }
        Ok(Self {
            catalog: sorted,
            rules,
            assets: BTreeMap::new(),
            states: NetworkStateLog::default(),
            methods: DEFAULT_METHODS.iter().map(|m| (*m).to_owned()).collect(),
        })
    }

    pub fn get_representations(&self, task_type: &str) -> Result<&[RepresentationSpec], KnowledgeError> {
        self.catalog
            .get(task_type)
            .map(Vec::as_slice)
            .ok_or_else(|| KnowledgeError::UnknownTask(task_type.to_owned()))
    }

    pub fn representation(&self, task_type: &str, name: &str) -> Option<&RepresentationSpec> {
        self.catalog.get(task_type)?.iter().find(|r| r.name == name)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &str> {
        self.catalog.keys().map(String::as_str)
    }

    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    pub fn allows_method(&self, method: &str) -> bool {
        self.methods.contains(method)
    }

    pub fn record_state(&mut self, state: NetworkState) -> Result<(), KnowledgeError> {
        self.states.record(state)
    }

    pub fn latest_state(&self, channel: &str) -> Result<&NetworkState, KnowledgeError> {
        self.states.latest(channel)
    }

    pub fn register_asset(&mut self, asset: Asset) -> Result<(), KnowledgeError> {
        if self.assets.contains_key(&asset.id) {
            return Err(KnowledgeError::DuplicateAsset(asset.id));
        }
        self.assets.insert(asset.id.clone(), asset);
        Ok(())
    }

    pub fn fetch_asset(&self, id: &str) -> Result<&Asset, KnowledgeError> {
        self.assets.get(id).ok_or_else(|| KnowledgeError::UnknownAsset(id.to_owned()))
    }
}
