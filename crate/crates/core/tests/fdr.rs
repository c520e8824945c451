//! Canonical fault-detection-and-recovery scenario, end to end.

use goagentnet_core::intent::{parse_intent, IntentSpec};
use goagentnet_core::netmodel::Channel;
use goagentnet_core::orchestrator::{
    match_agents, plan, plan_bruteforce, replan_on_event, utility, PlanContext, ReplanTrigger, UtilityInputs,
    UtilityWeights,
};
use goagentnet_core::protocol::{Bus, BusError, InvokeParams};
use goagentnet_core::registry::{query, DataType, NodeId, ProfileDelta, QueryFilter};
use goagentnet_core::scenario::{compare, run_baseline, run_goagentnet, Scenario, SimAgent};

const INTENT: [&str; 3] = [
    "Achieve the highest task success rate for robotic FDR under a 5MHz bandwidth constraint.",
    "Achieve the highest task success rate for robotic FDR under a 10MHz bandwidth constraint.",
    "Achieve the highest task success rate for robotic FDR under a 100MHz bandwidth constraint.",
];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

struct Inputs {
    scenario: Scenario,
    goal: goagentnet_core::Goal,
    channel: Channel,
}

impl Inputs {
    fn new(intent: &str) -> Self {
        let scenario = Scenario::canonical();
        let goal = parse_intent(&IntentSpec::text(intent)).unwrap();
        let mut channel = scenario.channel.clone();
        channel.bandwidth_hz = goal.upper_bound("bandwidth_hz").unwrap();
        Self {
            scenario,
            goal,
            channel,
        }
    }

    fn ctx(&self) -> PlanContext<'_> {
        PlanContext {
            goal: &self.goal,
            templates: &self.scenario.templates,
            graph: self.scenario.registry.graph(),
            knowledge: &self.scenario.knowledge,
            channel: &self.channel,
            weights: &self.scenario.weights,
            success: &self.scenario.success,
            history: None,
        }
    }
}

#[test]
fn goagentnet_runs_match_hand_values() {
    let expected = [("scene_graph", 0.008, 0.72), ("edge_points", 1.6, 0.95), ("edge_points", 0.16, 0.95)];
    for (intent, (rep, ec, s)) in INTENT.iter().zip(expected) {
        let r = run_goagentnet(&Scenario::canonical(), intent, 7).unwrap();
        assert_eq!(r.plan.representation, rep);
        assert!(close(r.measured.comm_energy_j, ec, 1e-12), "{}", r.measured.comm_energy_j);
        assert!(close(r.measured.success, s, 1e-12));
        assert_eq!(r.measured.latency_s, r.plan.predicted.latency_s);
        assert_eq!(r.measured.comm_energy_j, r.plan.predicted.comm_energy_j);
        assert_eq!(r.measured.compute_energy_j, r.plan.predicted.compute_energy_j);
        assert_eq!(r.measured.success, r.plan.predicted.success);
        assert_eq!(r.measured.utility, r.plan.predicted.utility);
    }
}

#[test]
fn intent_one_utility_by_hand() {
    let r = run_goagentnet(&Scenario::canonical(), INTENT[0], 1).unwrap();
    assert!(close(r.plan.predicted.utility, 0.72 - 0.1 * 0.308, 1e-12));
    let inputs = UtilityInputs {
        success: 0.72,
        comm_energy_j: 0.008,
        compute_energy_j: 0.3,
        transfer: 0.0,
        history: 0.0,
    };
    assert!(close(utility(&inputs, &UtilityWeights::default()), 0.6892, 1e-12));
}

#[test]
fn baseline_runs_match_hand_values() {
    let expected = [(8.0, 0.95 * (-6.2f64).exp()), (4.0, 0.95 * (-2.2f64).exp()), (0.4, 0.95)];
    for (intent, (ec, s)) in INTENT.iter().zip(expected) {
        let r = run_baseline(&Scenario::canonical(), intent, 7).unwrap();
        assert_eq!(r.plan.representation, "raw_point_cloud");
        assert!(close(r.measured.comm_energy_j, ec, 1e-12));
        assert!(close(r.measured.success, s, 1e-12), "{} vs {s}", r.measured.success);
    }
    let r = run_baseline(&Scenario::canonical(), INTENT[0], 7).unwrap();
    let nodes: Vec<u32> = r.plan.path.iter().map(|n| n.0).collect();
    assert_eq!(nodes, vec![1, 2, 3, 6, 7, 10, 11]);
}

#[test]
fn goagentnet_never_worse_than_baseline() {
    for intent in INTENT {
        let s = Scenario::canonical();
        let g = run_goagentnet(&s, intent, 3).unwrap();
        let b = run_baseline(&s, intent, 3).unwrap();
        assert!(g.measured.comm_energy_j <= b.measured.comm_energy_j);
        assert!(g.measured.success >= b.measured.success);
    }
}

#[test]
fn self_comparison_is_neutral() {
    let r = run_baseline(&Scenario::canonical(), INTENT[1], 3).unwrap();
    let row = compare(&r, &r).unwrap();
    assert_eq!(row.energy_reduction_pct, 0.0);
    assert_eq!(row.success_delta, 0.0);
}

#[test]
fn reports_are_byte_identical() {
    let s = Scenario::canonical();
    let a = serde_json::to_string(&run_goagentnet(&s, INTENT[0], 11).unwrap()).unwrap();
    let b = serde_json::to_string(&run_goagentnet(&s, INTENT[0], 11).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn planners_agree_on_canonical_graph() {
    for intent in INTENT {
        let inputs = Inputs::new(intent);
        assert_eq!(plan(&inputs.ctx()).unwrap(), plan_bruteforce(&inputs.ctx()).unwrap());
    }
}

#[test]
fn crossover_between_five_and_ten_mhz() {
    let rep_at = |bw: f64| {
        let mut inputs = Inputs::new(INTENT[0]);
        inputs.channel.bandwidth_hz = bw;
        // Keep the intent's link rating consistent with the probed bandwidth.
        let link = if bw <= 5e6 { 7 } else if bw <= 1e7 { 8 } else { 9 };
        let p = plan(&inputs.ctx()).unwrap();
        assert!(p.path.contains(&NodeId(link)));
        p.representation
    };
    assert_eq!(rep_at(5e6), "scene_graph");
    assert_eq!(rep_at(1e7), "edge_points");
    let (mut lo, mut hi) = (5e6, 1e7);
    while hi - lo > 1.0 {
        let mid = 0.5 * (lo + hi);
        if rep_at(mid) == "scene_graph" {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!(lo > 5e6 && hi <= 1e7);
    // Single crossover: everything below is scene graph, everything above edge points.
    for i in 0..50 {
        let bw = 5e6 + (hi - 5e6) * i as f64 / 50.0;
        assert_eq!(rep_at(bw.max(5e6)), "scene_graph");
        let bw = hi + (1e7 - hi) * (i + 1) as f64 / 50.0;
        assert_eq!(rep_at(bw), "edge_points");
    }
}

#[test]
fn capability_matching() {
    let inputs = Inputs::new(INTENT[0]);
    let ids = |v: Vec<NodeId>| v.into_iter().map(|n| n.0).collect::<Vec<_>>();
    assert_eq!(ids(match_agents(&inputs.ctx(), "extract")), vec![4, 5]);
    assert_eq!(ids(match_agents(&inputs.ctx(), "transmit")), vec![7]);
    assert!(match_agents(&inputs.ctx(), "teleport").is_empty());

    let graph = inputs.scenario.registry.graph();
    let computation = QueryFilter {
        agent_type: Some(goagentnet_core::registry::AgentType::Computation),
        ..Default::default()
    };
    assert_eq!(ids(query(graph, &computation)), vec![2, 3, 4, 5, 10]);
    let sg = QueryFilter {
        capability_name: Some("extract_scene_graph".into()),
        ..Default::default()
    };
    assert_eq!(ids(query(graph, &sg)), vec![4]);
    assert_eq!(query(graph, &QueryFilter::default()).len(), 11);
}

#[test]
fn bandwidth_change_switches_representation() {
    let mut inputs = Inputs::new(INTENT[0]);
    let current = plan(&inputs.ctx()).unwrap();
    assert_eq!(current.representation, "scene_graph");
    let state = inputs.channel.set_bandwidth(1e7, 1.0).unwrap();
    let next = replan_on_event(&current, &ReplanTrigger::Network(state), &inputs.ctx()).unwrap();
    assert_eq!(next.representation, "edge_points");
}

#[test]
fn irrelevant_event_keeps_plan() {
    let mut inputs = Inputs::new(INTENT[0]);
    let current = plan(&inputs.ctx()).unwrap();
    let event = inputs
        .scenario
        .registry
        .update_state(
            NodeId(9),
            ProfileDelta::SetResource {
                name: "buffer_bits".into(),
                value: 1.0,
            },
        )
        .unwrap();
    let next = replan_on_event(&current, &ReplanTrigger::Graph(event), &inputs.ctx()).unwrap();
    assert_eq!(next, current);
}

#[test]
fn invoke_scene_graph_extractor() {
    let s = Scenario::canonical();
    let catalog = s.knowledge.get_representations("robotic_fdr").unwrap().to_vec();
    let mut bus = Bus::new(s.registry.clone());
    for p in s.registry.graph().nodes() {
        bus.attach(p.id, Box::new(SimAgent::new(p.clone(), catalog.clone()))).unwrap();
    }
    let params = |target: u32, capability: &str| InvokeParams {
        target: NodeId(target),
        capability: capability.into(),
        data_type: DataType::new("raw_point_cloud", "point_cloud", "bits"),
        size_bits: 40_000_000,
        payload_ref: "sim://frame/0".into(),
    };
    let out = bus.invoke(None, params(4, "extract_scene_graph")).unwrap();
    assert_eq!(out.result["representation"], "scene_graph");
    assert_eq!(out.result["size_bits"], 4e4);
    assert!(matches!(bus.invoke(None, params(42, "x")), Err(BusError::UnknownTarget(_))));
    assert!(matches!(
        bus.invoke(None, params(6, "extract_scene_graph")),
        Err(BusError::CapabilityNotFound { .. })
    ));
}
