//! Linear task templates (HTN-lite): ordered subtasks with a precedence DAG.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::intent::{Constraint, Goal, Kpi, Relation};
use crate::registry::CapabilityRole;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub name: String,
    pub required_capability_kind: CapabilityRole,
    pub kpi_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub task_type: String,
    pub subtasks: Vec<Subtask>,
    /// `(before, after)` pairs of subtask names.
    #[serde(default)]
    pub precedence: Vec<(String, String)>,
    /// KPI names this task can report.
    #[serde(default)]
    pub kpis: Vec<String>,
}

impl TaskTemplate {
    /// Template whose precedence is the subtask order itself.
    pub fn chain(task_type: &str, subtasks: Vec<Subtask>, kpis: &[&str]) -> Self {
        let precedence = subtasks
            .windows(2)
            .map(|w| (w[0].name.clone(), w[1].name.clone()))
            .collect();
        Self {
            task_type: task_type.to_owned(),
            subtasks,
            precedence,
            kpis: kpis.iter().map(|k| (*k).to_owned()).collect(),
        }
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.subtasks.iter().position(|s| s.name == name)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |reason: String| OrchestratorError::InvalidTemplate {
            task: self.task_type.clone(),
            reason,
        };
        if self.subtasks.is_empty() {
            return Err(bad("no subtasks".into()));
        }
        for (i, s) in self.subtasks.iter().enumerate() {
            if self.subtasks[..i].iter().any(|o| o.name == s.name) {
                return Err(bad(format!("duplicate subtask `{}`", s.name)));
            }
            if s.required_capability_kind == CapabilityRole::Relay {
                return Err(bad(format!("subtask `{}` cannot require a relay", s.name)));
            }
            if !(s.kpi_share.is_finite() && s.kpi_share >= 0.0) {
                return Err(bad(format!("subtask `{}` has a negative share", s.name)));
            }
        }
        let total: f64 = self.subtasks.iter().map(|s| s.kpi_share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(bad(format!("kpi shares sum to {total}, expected 1")));
        }
        // The list order is the execution order, so every precedence pair must
        // point forward in it. That also rules out cycles.
        for (before, after) in &self.precedence {
            let (Some(a), Some(b)) = (self.index_of(before), self.index_of(after)) else {
                return Err(bad(format!("precedence names unknown subtask in ({before}, {after})")));
            };
            if a >= b {
                return Err(bad(format!("precedence ({before}, {after}) contradicts the subtask order")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateSet {
    templates: BTreeMap<String, TaskTemplate>,
}

impl TemplateSet {
    pub fn new(templates: impl IntoIterator<Item = TaskTemplate>) -> Result<Self, OrchestratorError> {
        let mut map = BTreeMap::new();
        for t in templates {
            t.validate()?;
            if map.contains_key(&t.task_type) {
                return Err(OrchestratorError::InvalidTemplate {
                    task: t.task_type,
                    reason: "defined twice".into(),
                });
            }
            map.insert(t.task_type.clone(), t);
        }
        Ok(Self { templates: map })
    }

    pub fn get(&self, task_type: &str) -> Option<&TaskTemplate> {
        self.templates.get(task_type)
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaskTemplate> {
        self.templates.values()
    }
}

/// A subtask with its slice of the goal's KPIs and constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedSubtask {
    pub name: String,
    pub required_capability_kind: CapabilityRole,
    pub kpi_share: f64,
    pub kpis: Vec<Kpi>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskDag {
    pub task_type: String,
    pub subtasks: Vec<PlannedSubtask>,
    pub precedence: Vec<(String, String)>,
}

/// Quantities that add up along a path and can therefore be split by share.
fn is_additive(quantity: &str) -> bool {
    matches!(quantity, "latency_s" | "energy_j")
}

/// Split `goal` over the subtasks of its template.
///
/// Upper bounds on additive quantities (latency, energy) are scaled by each
/// subtask's share; every other constraint applies to all subtasks unchanged.
pub fn decompose(goal: &Goal, templates: &TemplateSet) -> Result<SubtaskDag, OrchestratorError> {
    let template = templates
        .get(&goal.task_type)
        .ok_or_else(|| OrchestratorError::UnknownTask(goal.task_type.clone()))?;
    let subtasks = template
        .subtasks
        .iter()
        .map(|s| PlannedSubtask {
            name: s.name.clone(),
            required_capability_kind: s.required_capability_kind,
            kpi_share: s.kpi_share,
            kpis: goal.kpis.clone(),
            constraints: goal
                .constraints
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    if c.relation == Relation::Le && is_additive(&c.quantity) {
                        c.value.value *= s.kpi_share;
                    }
                    c
                })
                .collect(),
        })
        .collect();
    Ok(SubtaskDag {
        task_type: template.task_type.clone(),
        subtasks,
        precedence: template.precedence.clone(),
    })
}
