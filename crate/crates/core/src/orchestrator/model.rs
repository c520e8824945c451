//! Cost model shared by every planner: which tools a node may run in a given
//! plan state, and what each step adds to latency, energy, transfer and history.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::template::{Subtask, TaskTemplate};
use super::OrchestratorError;
use crate::intent::Goal;
use crate::knowledge::{KnowledgeBase, RepresentationSpec};
use crate::netmodel::Channel;
use crate::registry::{AgentProfile, Capability, CapabilityRole, KnowledgeGraph, NodeId};
use crate::scenario::{success_model, SuccessParams};

use super::TemplateSet;

/// Utility = S - w_energy (E_c + E_x) / E_ref - w_transfer * transfer - w_history * history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    /// Per joule.
    pub energy: f64,
    pub transfer: f64,
    pub history: f64,
    pub energy_ref_j: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            energy: 0.1,
            transfer: 0.0,
            history: 0.0,
            energy_ref_j: 1.0,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let ok = [self.energy, self.transfer, self.history]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
            && self.energy_ref_j.is_finite()
            && self.energy_ref_j > 0.0;
        if ok {
            Ok(())
        } else {
            Err(OrchestratorError::InvalidWeights)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityInputs {
    pub success: f64,
    pub comm_energy_j: f64,
    pub compute_energy_j: f64,
    pub transfer: f64,
    pub history: f64,
}

pub fn utility(inputs: &UtilityInputs, weights: &UtilityWeights) -> f64 {
    inputs.success
        - weights.energy * (inputs.comm_energy_j + inputs.compute_energy_j) / weights.energy_ref_j
        - weights.transfer * inputs.transfer
        - weights.history * inputs.history
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub node: NodeId,
    pub capability: String,
    pub role: CapabilityRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicted {
    pub latency_s: f64,
    pub comm_energy_j: f64,
    pub compute_energy_j: f64,
    pub transfer: f64,
    pub history: f64,
    pub success: f64,
    pub utility: f64,
}

impl Predicted {
    pub fn total_energy_j(&self) -> f64 {
        self.comm_energy_j + self.compute_energy_j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub path: Vec<NodeId>,
    pub steps: Vec<PlanStep>,
    pub representation: String,
    pub predicted: Predicted,
    pub feasible: bool,
}

impl ExecutionPlan {
    pub fn path_string(&self) -> String {
        self.path.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("→")
    }

    /// Plan ranking: higher utility, then lower total energy, then the
    /// lexicographically smaller node sequence, then tool names.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .predicted
            .utility
            .total_cmp(&self.predicted.utility)
            .then_with(|| self.predicted.total_energy_j().total_cmp(&other.predicted.total_energy_j()))
            .then_with(|| self.path.cmp(&other.path))
            .then_with(|| {
                let a = self.steps.iter().map(|s| s.capability.as_str());
                let b = other.steps.iter().map(|s| s.capability.as_str());
                a.cmp(b)
            })
    }
}

/// Everything a planner reads.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub goal: &'a Goal,
    pub templates: &'a TemplateSet,
    pub graph: &'a KnowledgeGraph,
    pub knowledge: &'a KnowledgeBase,
    pub channel: &'a Channel,
    pub weights: &'a UtilityWeights,
    pub success: &'a SuccessParams,
    /// Per-agent orchestration-history penalty; absent agents count as 0.
    pub history: Option<&'a BTreeMap<NodeId, f64>>,
}

/// Progress through the template: subtasks completed and representation in hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct Cursor {
    pub done: usize,
    pub rep: Option<usize>,
}

impl Cursor {
    pub const START: Cursor = Cursor { done: 0, rep: None };
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Costs {
    pub latency: f64,
    pub comm: f64,
    pub compute: f64,
    pub transfer: f64,
    pub history: f64,
}

impl Costs {
    pub fn weakly_below(&self, o: &Costs) -> bool {
        self.latency <= o.latency
            && self.comm <= o.comm
            && self.compute <= o.compute
            && self.transfer <= o.transfer
            && self.history <= o.history
    }
}

pub(crate) struct StepOption<'g> {
    pub tool: &'g Capability,
    pub next: Cursor,
    pub latency: f64,
    pub comm: f64,
    pub compute: f64,
}

/// Planning view of a [`PlanContext`] with the template and catalog resolved.
pub(crate) struct Model<'a> {
    pub ctx: PlanContext<'a>,
    pub subtasks: &'a [Subtask],
    pub catalog: &'a [RepresentationSpec],
    latency_cap: Option<f64>,
    energy_cap: Option<f64>,
}

impl<'a> Model<'a> {
    pub fn new(ctx: PlanContext<'a>) -> Result<Self, OrchestratorError> {
        ctx.weights.validate()?;
        let template: &TaskTemplate = ctx
            .templates
            .get(&ctx.goal.task_type)
            .ok_or_else(|| OrchestratorError::UnknownTask(ctx.goal.task_type.clone()))?;
        let catalog = ctx.knowledge.get_representations(&ctx.goal.task_type)?;
        Ok(Self {
            ctx,
            subtasks: &template.subtasks,
            catalog,
            latency_cap: ctx.goal.upper_bound("latency_s"),
            energy_cap: ctx.goal.upper_bound("energy_j"),
        })
    }

    pub fn is_complete(&self, c: Cursor) -> bool {
        c.done == self.subtasks.len()
    }

    fn producer(&self, tool: &Capability) -> Option<usize> {
        self.catalog.iter().position(|r| r.producer_capability == tool.name)
    }

    pub fn history_of(&self, node: NodeId) -> f64 {
        self.ctx.history.and_then(|h| h.get(&node)).copied().unwrap_or(0.0)
    }

    /// Tools `profile` may run given `cur`, in tool order.
    pub fn options<'g>(&self, profile: &'g AgentProfile, cur: Cursor) -> Vec<StepOption<'g>> {
        let n = self.subtasks.len();
        let in_bits = cur.rep.map_or(0.0, |r| self.catalog[r].size_bits);
        let mut out = Vec::new();
        for tool in &profile.tools {
            let generic = |next: Cursor| StepOption {
                tool,
                next,
                latency: tool.cost_model.latency_s.eval(in_bits),
                comm: 0.0,
                compute: tool.cost_model.energy_j.eval(in_bits),
            };
            if tool.role == CapabilityRole::Relay {
                if cur.done >= 1 && cur.done < n {
                    out.push(generic(cur));
                }
                continue;
            }
            if cur.done >= n || tool.role != self.subtasks[cur.done].required_capability_kind {
                continue;
            }
            let advanced = Cursor {
                done: cur.done + 1,
                rep: cur.rep,
            };
            match tool.role {
                CapabilityRole::Sense | CapabilityRole::Extract => match self.producer(tool) {
                    Some(r) => {
                        let spec = &self.catalog[r];
                        out.push(StepOption {
                            tool,
                            next: Cursor {
                                done: cur.done + 1,
                                rep: Some(r),
                            },
                            latency: spec.extract_latency_s,
                            comm: 0.0,
                            compute: spec.extract_energy_j,
                        });
                    }
                    None if tool.role == CapabilityRole::Sense => out.push(generic(advanced)),
                    None => {}
                },
                CapabilityRole::Transmit => {
                    let Some(r) = cur.rep else { continue };
                    let channel = self.ctx.channel;
                    if !profile.supports_bandwidth(channel.bandwidth_hz) {
                        continue;
                    }
                    let bits = self.catalog[r].size_bits;
                    out.push(StepOption {
                        tool,
                        next: advanced,
                        latency: channel.attempt_latency(bits),
                        comm: channel.attempt_energy(bits),
                        compute: 0.0,
                    });
                }
                CapabilityRole::Reason | CapabilityRole::Actuate => out.push(generic(advanced)),
                CapabilityRole::Relay => unreachable!(),
            }
        }
        out
    }

    /// Accumulate one step into `costs`. Every planner adds in this order.
    pub fn add_step(&self, costs: &mut Costs, node: NodeId, opt: &StepOption<'_>) {
        costs.history += self.history_of(node);
        costs.latency += opt.latency;
        costs.comm += opt.comm;
        costs.compute += opt.compute;
    }

    /// Whether partial costs already break a hard constraint. Costs only grow.
    pub fn violates_caps(&self, costs: &Costs) -> bool {
        self.latency_cap.is_some_and(|cap| costs.latency > cap)
            || self.energy_cap.is_some_and(|cap| costs.comm + costs.compute > cap)
    }

    /// Final plan for a completed traversal, or `None` if it breaks a hard constraint.
    pub fn finish(&self, steps: Vec<PlanStep>, cur: Cursor, costs: &Costs) -> Option<ExecutionPlan> {
        let r = cur.rep?;
        if self.violates_caps(costs) {
            return None;
        }
        let spec = &self.catalog[r];
        let success = success_model(spec.sufficiency, costs.latency, self.ctx.success);
        let inputs = UtilityInputs {
            success,
            comm_energy_j: costs.comm,
            compute_energy_j: costs.compute,
            transfer: costs.transfer,
            history: costs.history,
        };
        Some(ExecutionPlan {
            path: steps.iter().map(|s| s.node).collect(),
            steps,
            representation: spec.name.clone(),
            predicted: Predicted {
                latency_s: costs.latency,
                comm_energy_j: costs.comm,
                compute_energy_j: costs.compute,
                transfer: costs.transfer,
                history: costs.history,
                success,
                utility: utility(&inputs, self.ctx.weights),
            },
            feasible: true,
        })
    }

    /// Re-evaluate an explicit sequence of `(node, tool)` steps.
    ///
    /// With `follow_edges` the consecutive nodes must be joined by interaction
    /// links; without it the sequence is taken as a fixed pipeline.
    pub fn evaluate(&self, steps: &[(NodeId, &str)], follow_edges: bool) -> Result<ExecutionPlan, OrchestratorError> {
        use crate::registry::EdgeKind;
        let invalid = |msg: String| OrchestratorError::InvalidStep(msg);
        let mut cur = Cursor::START;
        let mut costs = Costs::default();
        let mut out = Vec::with_capacity(steps.len());
        for (i, (node, tool_name)) in steps.iter().enumerate() {
            let profile = self
                .ctx
                .graph
                .node(*node)
                .ok_or_else(|| invalid(format!("agent {node} is not registered")))?;
            if i > 0 {
                let prev = steps[i - 1].0;
                match self.ctx.graph.edge(prev, *node, EdgeKind::InteractionLink) {
                    Some(e) => costs.transfer += e.transfer_cost(),
                    None if follow_edges => return Err(invalid(format!("no link {prev} -> {node}"))),
                    None => {}
                }
            }
            let options = self.options(profile, cur);
            let opt = options
                .iter()
                .find(|o| o.tool.name == *tool_name)
                .ok_or_else(|| invalid(format!("agent {node} cannot run `{tool_name}` at this point")))?;
            self.add_step(&mut costs, *node, opt);
            out.push(PlanStep {
                node: *node,
                capability: opt.tool.name.clone(),
                role: opt.tool.role,
            });
            cur = opt.next;
        }
        if !self.is_complete(cur) {
            return Err(invalid("steps do not complete the task template".into()));
        }
        self.finish(out, cur, &costs).ok_or(OrchestratorError::NoFeasiblePlan)
    }
}
