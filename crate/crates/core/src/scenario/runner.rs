use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{Arch, DerivedBound, Measured, RunReport};
use super::{success_model, Scenario, ScenarioError};
use crate::intent::{parse_intent, Goal, IntentSpec};
use crate::knowledge::RepresentationSpec;
use crate::netmodel::Channel;
use crate::orchestrator::{
    evaluate_steps, plan, utility, ExecutionPlan, OrchestratorError, PlanContext, TaskTemplate, TemplateSet,
    UtilityInputs,
};
use crate::protocol::{AgentHandler, Bus, InvokeOutcome, InvokeParams, RpcError};
use crate::registry::{AgentProfile, CapabilityRole, DataType, NodeId};

/// Simulated agent: answers invocations from its profile's cost model and
/// the task's representation catalog.
pub struct SimAgent {
    profile: AgentProfile,
    catalog: Vec<RepresentationSpec>,
}

/// Result document of a simulated invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub representation: String,
    pub size_bits: f64,
    pub energy_j: f64,
}

impl SimAgent {
    pub fn new(profile: AgentProfile, catalog: Vec<RepresentationSpec>) -> Self {
        Self { profile, catalog }
    }
}

impl AgentHandler for SimAgent {
    fn handle(&mut self, capability: &str, params: &InvokeParams) -> Result<InvokeOutcome, RpcError> {
        let tool = self.profile.tool(capability).ok_or_else(|| {
            RpcError::new(
                RpcError::CAPABILITY_NOT_FOUND,
                format!("agent {} has no capability `{capability}`", self.profile.id),
            )
        })?;
        let input = self.catalog.iter().find(|r| r.name == params.data_type.kind);
        let in_bits = input.map_or(params.size_bits as f64, |r| r.size_bits);
        let produced = matches!(tool.role, CapabilityRole::Sense | CapabilityRole::Extract)
            .then(|| self.catalog.iter().find(|r| r.producer_capability == tool.name))
            .flatten();
        let (result, latency) = match (produced, tool.role) {
            (Some(r), _) => (
                SimResult {
                    representation: r.name.clone(),
                    size_bits: r.size_bits,
                    energy_j: r.extract_energy_j,
                },
                r.extract_latency_s,
            ),
            // Airtime and transmit energy are charged by the channel.
            (None, CapabilityRole::Transmit) => (
                SimResult {
                    representation: params.data_type.kind.clone(),
                    size_bits: in_bits,
                    energy_j: 0.0,
                },
                0.0,
            ),
            (None, _) => (
                SimResult {
                    representation: params.data_type.kind.clone(),
                    size_bits: in_bits,
                    energy_j: tool.cost_model.energy_j.eval(in_bits),
                },
                tool.cost_model.latency_s.eval(in_bits),
            ),
        };
        let result = serde_json::to_value(result).map_err(|e| RpcError::new(RpcError::INTERNAL, e.to_string()))?;
        Ok(InvokeOutcome {
            result,
            sim_latency_s: latency,
        })
    }
}

/// Template set with extraction subtasks removed, for the legacy pipeline.
fn legacy_templates(templates: &TemplateSet) -> Result<TemplateSet, OrchestratorError> {
    let stripped = templates.iter().map(|t| {
        let mut subtasks: Vec<_> = t
            .subtasks
            .iter()
            .filter(|s| s.required_capability_kind != CapabilityRole::Extract)
            .cloned()
            .collect();
        let total: f64 = subtasks.iter().map(|s| s.kpi_share).sum();
        let n = subtasks.len() as f64;
        for s in &mut subtasks {
            s.kpi_share = if total > 0.0 { s.kpi_share / total } else { 1.0 / n };
        }
        let kpis: Vec<&str> = t.kpis.iter().map(String::as_str).collect();
        TaskTemplate::chain(&t.task_type, subtasks, &kpis)
    });
    TemplateSet::new(stripped)
}

struct Prepared {
    goal: Goal,
    channel: Channel,
    scenario: Scenario,
}

fn prepare(scenario: &Scenario, intent: &str) -> Result<Prepared, ScenarioError> {
    let goal = parse_intent(&IntentSpec::text(intent))?;
    let mut scenario = scenario.clone();
    let mut channel = scenario.channel.clone();
    let bandwidth = goal.upper_bound("bandwidth_hz").unwrap_or(channel.bandwidth_hz);
    let state = channel.set_bandwidth(bandwidth, 0.0)?;
    scenario.knowledge.record_state(state)?;
    Ok(Prepared {
        goal,
        channel,
        scenario,
    })
}

fn context<'a>(p: &'a Prepared, templates: &'a TemplateSet) -> PlanContext<'a> {
    PlanContext {
        goal: &p.goal,
        templates,
        graph: p.scenario.registry.graph(),
        knowledge: &p.scenario.knowledge,
        channel: &p.channel,
        weights: &p.scenario.weights,
        success: &p.scenario.success,
        history: None,
    }
}

fn derived_bounds(scenario: &Scenario) -> Vec<DerivedBound> {
    let Some(scm) = &scenario.scm else {
        return Vec::new();
    };
    scenario
        .bounds
        .iter()
        .map(|q| {
            let r = scm.derive_bound(&q.goal, q.threshold, &q.target, q.range, &q.baseline);
            DerivedBound {
                goal: q.goal.clone(),
                threshold: q.threshold,
                target: q.target.clone(),
                bound: r.as_ref().ok().copied(),
                error: r.err().map(|e| e.to_string()),
            }
        })
        .collect()
}

/// Carry out `plan` over the protocol bus and the channel.
fn execute(mut p: Prepared, plan: ExecutionPlan, intent: &str, arch: Arch, seed: u64) -> Result<RunReport, ScenarioError> {
    let task = p.goal.task_type.clone();
    let catalog = p.scenario.knowledge.get_representations(&task)?.to_vec();
    let mut bus = Bus::new(p.scenario.registry.clone());
    for profile in p.scenario.registry.graph().nodes() {
        bus.attach(profile.id, Box::new(SimAgent::new(profile.clone(), catalog.clone())))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut data: Option<(String, f64)> = None;
    let (mut latency, mut comm, mut compute) = (0.0, 0.0, 0.0);
    let mut delivered = true;
    let mut attempts = 0;
    let mut prev: Option<NodeId> = None;
    for (i, step) in plan.steps.iter().enumerate() {
        let data_type = match &data {
            Some((rep, _)) => DataType::new(rep, "semantic", "bits"),
            None => p
                .scenario
                .registry
                .graph()
                .node(step.node)
                .and_then(|n| n.tool(&step.capability))
                .map(|t| t.input_schema.clone())
                .unwrap_or_else(|| DataType::new(DataType::ANY, DataType::ANY, "bits")),
        };
        let size = data.as_ref().map_or(0.0, |(_, s)| *s);
        let out = bus.invoke(
            prev,
            InvokeParams {
                target: step.node,
                capability: step.capability.clone(),
                data_type,
                size_bits: size.round() as u64,
                payload_ref: format!("sim://{seed}/{i}"),
            },
        )?;
        let result: SimResult = serde_json::from_value(out.result)
            .map_err(|e| ScenarioError::Execution(format!("agent {} returned {e}", step.node)))?;
        if step.role == CapabilityRole::Transmit {
            let tx = p.channel.transmit(size, &mut rng);
            latency += tx.latency_s;
            comm += tx.energy_j;
            delivered &= tx.delivered;
            attempts += tx.attempts;
        } else {
            latency += out.sim_latency_s;
            compute += result.energy_j;
        }
        if catalog.iter().any(|r| r.name == result.representation) {
            data = Some((result.representation, result.size_bits));
        }
        prev = Some(step.node);
    }

    let spec = catalog
        .iter()
        .find(|r| r.name == plan.representation)
        .ok_or_else(|| ScenarioError::Execution(format!("unknown representation `{}`", plan.representation)))?;
    let success = if delivered {
        success_model(spec.sufficiency, latency, &p.scenario.success)
    } else {
        0.0
    };
    let inputs = UtilityInputs {
        success,
        comm_energy_j: comm,
        compute_energy_j: compute,
        transfer: plan.predicted.transfer,
        history: plan.predicted.history,
    };
    let state = p.channel.report_state(latency);
    p.scenario.knowledge.record_state(state.clone())?;
    Ok(RunReport {
        scenario: p.scenario.name.clone(),
        intent_id: intent.trim().to_owned(),
        arch,
        seed,
        bandwidth_hz: p.channel.bandwidth_hz,
        goal: p.goal.clone(),
        measured: Measured {
            latency_s: latency,
            comm_energy_j: comm,
            compute_energy_j: compute,
            success,
            utility: utility(&inputs, &p.scenario.weights),
            delivered,
            attempts,
        },
        plan,
        network_state: state,
        derived_bounds: derived_bounds(&p.scenario),
        events: bus.take_trace(),
    })
}

/// Parse the intent, plan over the knowledge graph and execute the plan.
pub fn run_goagentnet(scenario: &Scenario, intent: &str, seed: u64) -> Result<RunReport, ScenarioError> {
    let p = prepare(scenario, intent)?;
    let plan = plan(&context(&p, &p.scenario.templates))?;
    log::info!("goagentnet plan {} ({})", plan.path_string(), plan.representation);
    execute(p, plan, intent, Arch::GoAgentNet, seed)
}

/// Fixed legacy pipeline sending the raw capture over the link agent rated
/// for the intent's bandwidth.
pub fn run_baseline(scenario: &Scenario, intent: &str, seed: u64) -> Result<RunReport, ScenarioError> {
    let p = prepare(scenario, intent)?;
    let link = p
        .scenario
        .registry
        .graph()
        .nodes()
        .find_map(|n| {
            let tool = n.tools.iter().find(|t| t.role == CapabilityRole::Transmit)?;
            n.supports_bandwidth(p.channel.bandwidth_hz).then(|| (n.id, tool.name.clone()))
        })
        .ok_or(OrchestratorError::NoFeasiblePlan)?;
    let spec = &p.scenario.baseline;
    let steps: Vec<(NodeId, &str)> = spec
        .pre_link
        .iter()
        .map(|s| (s.node, s.capability.as_str()))
        .chain(std::iter::once((link.0, link.1.as_str())))
        .chain(spec.post_link.iter().map(|s| (s.node, s.capability.as_str())))
        .collect();
    let templates = legacy_templates(&p.scenario.templates)?;
    let plan = evaluate_steps(&context(&p, &templates), &steps, false)?;
    log::info!("baseline pipeline {} ({})", plan.path_string(), plan.representation);
    execute(p, plan, intent, Arch::Baseline, seed)
}

