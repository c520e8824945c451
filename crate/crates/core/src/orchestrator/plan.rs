use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use super::model::{Costs, Cursor, Model};
use super::{ExecutionPlan, OrchestratorError, PlanContext, PlanStep};
use crate::netmodel::NetworkState;
use crate::registry::{CapabilityRole, EdgeKind, GraphEvent, NodeId};

/// Largest graph [`plan_bruteforce`] will enumerate.
pub const BRUTEFORCE_MAX_NODES: usize = 14;

/// What prompted a replan.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplanTrigger {
    Graph(GraphEvent),
    Network(NetworkState),
}

/// Node-visited set indexed by position in the graph's node order.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Visited(Vec<u64>);

impl Visited {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64).max(1)])
    }

    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn with(&self, i: usize) -> Self {
        let mut v = self.clone();
        v.0[i / 64] |= 1 << (i % 64);
        v
    }

    fn is_subset(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

struct Label {
    node: NodeId,
    cur: Cursor,
    costs: Costs,
    visited: Visited,
    steps: Vec<PlanStep>,
    alive: bool,
}

/// Node sequence first, then tool names; the tail of the plan ranking.
fn sequence_cmp(a: &[PlanStep], b: &[PlanStep]) -> Ordering {
    a.iter()
        .map(|s| s.node)
        .cmp(b.iter().map(|s| s.node))
        .then_with(|| a.iter().map(|s| s.capability.as_str()).cmp(b.iter().map(|s| s.capability.as_str())))
}

/// `a` dominates `b` when every completion of `b` is also open to `a` and
/// scores at least as well there, tie-breaks included.
fn dominates(a: &Label, b: &Label) -> bool {
    a.costs.weakly_below(&b.costs)
        && a.visited.is_subset(&b.visited)
        && sequence_cmp(&a.steps, &b.steps) != Ordering::Greater
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    latency: OrdF64,
    label: usize,
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn keep_best(best: &mut Option<ExecutionPlan>, candidate: ExecutionPlan) {
    match best {
        Some(b) if candidate.rank_cmp(b) != Ordering::Less => {}
        _ => *best = Some(candidate),
    }
}

/// Utility-maximizing execution plan.
///
/// Searches the expanded graph whose states are (agent, subtasks completed,
/// representation held). Because success decays non-linearly with latency, a
/// single scalar distance is not enough: each state keeps the Pareto set of
/// partial paths over (latency, comm energy, compute energy, transfer,
/// history, visited agents). The result is identical to [`plan_bruteforce`].
pub fn plan(ctx: &PlanContext<'_>) -> Result<ExecutionPlan, OrchestratorError> {
    let model = Model::new(*ctx)?;
    let graph = ctx.graph;
    let index: BTreeMap<NodeId, usize> = graph.node_ids().enumerate().map(|(i, id)| (id, i)).collect();
    let empty = Visited::new(index.len());

    let mut labels: Vec<Label> = Vec::new();
    let mut fronts: BTreeMap<(NodeId, Cursor), Vec<usize>> = BTreeMap::new();
    let mut queue = BinaryHeap::new();
    let mut best: Option<ExecutionPlan> = None;

    let mut push = |labels: &mut Vec<Label>, queue: &mut BinaryHeap<Reverse<QueueKey>>, label: Label| {
        let front = fronts.entry((label.node, label.cur)).or_default();
        if front.iter().any(|&i| dominates(&labels[i], &label)) {
            return;
        }
        front.retain(|&i| {
            if dominates(&label, &labels[i]) {
                labels[i].alive = false;
                false
            } else {
                true
            }
        });
        let id = labels.len();
        front.push(id);
        queue.push(Reverse(QueueKey {
            latency: OrdF64(label.costs.latency),
            label: id,
        }));
        labels.push(label);
    };

    for profile in graph.nodes() {
        for opt in model.options(profile, Cursor::START) {
            let mut costs = Costs::default();
            model.add_step(&mut costs, profile.id, &opt);
            if model.violates_caps(&costs) {
                continue;
            }
            let steps = vec![PlanStep {
                node: profile.id,
                capability: opt.tool.name.clone(),
                role: opt.tool.role,
            }];
            if model.is_complete(opt.next) {
                if let Some(p) = model.finish(steps, opt.next, &costs) {
                    keep_best(&mut best, p);
                }
                continue;
            }
            let label = Label {
                node: profile.id,
                cur: opt.next,
                costs,
                visited: empty.with(index[&profile.id]),
                steps,
                alive: true,
            };
            push(&mut labels, &mut queue, label);
        }
    }

    while let Some(Reverse(QueueKey { label: id, .. })) = queue.pop() {
        if !labels[id].alive {
            continue;
        }
        let (node, cur) = (labels[id].node, labels[id].cur);
        for edge in graph.successors(node, EdgeKind::InteractionLink) {
            let next_idx = index[&edge.to];
            if labels[id].visited.contains(next_idx) {
                continue;
            }
            let Some(profile) = graph.node(edge.to) else { continue };
            for opt in model.options(profile, cur) {
                let parent = &labels[id];
                let mut costs = parent.costs;
                costs.transfer += edge.transfer_cost();
                model.add_step(&mut costs, edge.to, &opt);
                if model.violates_caps(&costs) {
                    continue;
                }
                let mut steps = parent.steps.clone();
                steps.push(PlanStep {
                    node: edge.to,
                    capability: opt.tool.name.clone(),
                    role: opt.tool.role,
                });
                if model.is_complete(opt.next) {
                    if let Some(p) = model.finish(steps, opt.next, &costs) {
                        keep_best(&mut best, p);
                    }
                    continue;
                }
                let label = Label {
                    node: edge.to,
                    cur: opt.next,
                    costs,
                    visited: parent.visited.with(next_idx),
                    steps,
                    alive: true,
                };
                push(&mut labels, &mut queue, label);
            }
        }
    }
    log::debug!("planner created {} labels", labels.len());
    best.ok_or(OrchestratorError::NoFeasiblePlan)
}

/// Reference planner: enumerates every simple path and per-agent tool choice,
/// re-evaluates each complete one from scratch and keeps the best.
pub fn plan_bruteforce(ctx: &PlanContext<'_>) -> Result<ExecutionPlan, OrchestratorError> {
    let nodes = ctx.graph.node_count();
    if nodes > BRUTEFORCE_MAX_NODES {
        return Err(OrchestratorError::GraphTooLarge {
            nodes,
            limit: BRUTEFORCE_MAX_NODES,
        });
    }
    let model = Model::new(*ctx)?;
    let mut complete: Vec<Vec<(NodeId, String)>> = Vec::new();
    let mut trail = Vec::new();
    for id in ctx.graph.node_ids() {
        enumerate(&model, id, Cursor::START, &mut trail, &mut complete);
    }
    let mut best = None;
    for steps in &complete {
        let steps: Vec<(NodeId, &str)> = steps.iter().map(|(n, t)| (*n, t.as_str())).collect();
        match model.evaluate(&steps, true) {
            Ok(p) => keep_best(&mut best, p),
            Err(OrchestratorError::NoFeasiblePlan) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(OrchestratorError::NoFeasiblePlan)
}

fn enumerate(
    model: &Model<'_>,
    node: NodeId,
    cur: Cursor,
    trail: &mut Vec<(NodeId, String)>,
    out: &mut Vec<Vec<(NodeId, String)>>,
) {
    let graph = model.ctx.graph;
    let Some(profile) = graph.node(node) else { return };
    for opt in model.options(profile, cur) {
        trail.push((node, opt.tool.name.clone()));
        if model.is_complete(opt.next) {
            out.push(trail.clone());
        } else {
            for edge in graph.successors(node, EdgeKind::InteractionLink) {
                if !trail.iter().any(|(n, _)| *n == edge.to) {
                    enumerate(model, edge.to, opt.next, trail, out);
                }
            }
        }
        trail.pop();
    }
}

/// Predicted figures for an explicit `(agent, tool)` sequence.
///
/// With `follow_edges` consecutive agents must share an interaction link;
/// otherwise the sequence is treated as a fixed pipeline and only existing
/// links contribute transfer cost.
pub fn evaluate_steps(
    ctx: &PlanContext<'_>,
    steps: &[(NodeId, &str)],
    follow_edges: bool,
) -> Result<ExecutionPlan, OrchestratorError> {
    Model::new(*ctx)?.evaluate(steps, follow_edges)
}

/// Agents able to carry out subtask `subtask` of the goal's template, ascending.
///
/// An agent qualifies when its type suits the subtask role and one of its tools
/// with that role is usable here (extractors must produce a catalogued
/// representation, transmitters must be rated for the channel bandwidth) and
/// emits data some agent serving the next subtask accepts.
pub fn match_agents(ctx: &PlanContext<'_>, subtask: &str) -> Vec<NodeId> {
    let Some(template) = ctx.templates.get(&ctx.goal.task_type) else {
        return Vec::new();
    };
    let Some(pos) = template.subtasks.iter().position(|s| s.name == subtask) else {
        return Vec::new();
    };
    let role = template.subtasks[pos].required_capability_kind;
    let next_role = template.subtasks.get(pos + 1).map(|s| s.required_capability_kind);
    let catalog = ctx.knowledge.get_representations(&ctx.goal.task_type).unwrap_or(&[]);
    let graph = ctx.graph;

    let consumed = |output: &crate::registry::DataType| match next_role {
        None => true,
        Some(next) => graph
            .nodes()
            .flat_map(|p| p.tools.iter())
            .any(|t| t.role == next && t.input_schema.accepts(output)),
    };

    graph
        .nodes()
        .filter(|p| role.accepts_agent(p.agent_type))
        .filter(|p| {
            p.tools.iter().any(|t| {
                t.role == role
                    && match role {
                        CapabilityRole::Extract => catalog.iter().any(|r| r.producer_capability == t.name),
                        CapabilityRole::Transmit => p.supports_bandwidth(ctx.channel.bandwidth_hz),
                        _ => true,
                    }
                    && consumed(&t.output_schema)
            })
        })
        .map(|p| p.id)
        .collect()
}

/// Re-plan after a registry or network change.
///
/// Returns `current` unchanged when it is still feasible and still the best
/// plan under the new inputs; otherwise the fresh plan.
pub fn replan_on_event(
    current: &ExecutionPlan,
    trigger: &ReplanTrigger,
    ctx: &PlanContext<'_>,
) -> Result<ExecutionPlan, OrchestratorError> {
    let fresh = plan(ctx)?;
    let steps: Vec<(NodeId, &str)> = current.steps.iter().map(|s| (s.node, s.capability.as_str())).collect();
    let kept = evaluate_steps(ctx, &steps, true)
        .map(|re| re.rank_cmp(&fresh) == Ordering::Equal && re == *current)
        .unwrap_or(false);
    if kept {
        log::debug!("replan after {trigger:?}: plan unchanged");
        Ok(current.clone())
    } else {
        log::info!("replan after {trigger:?}: {} -> {}", current.path_string(), fresh.path_string());
        Ok(fresh)
    }
}
