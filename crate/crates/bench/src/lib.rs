//! Benchmark fixtures shared by the criterion benches.

use goagentnet_core::intent::{parse_intent, Goal, IntentSpec};
use goagentnet_core::netmodel::Channel;
use goagentnet_core::orchestrator::PlanContext;
use goagentnet_core::protocol::{Message, Method, RpcError};
use goagentnet_core::scenario::Scenario;
use serde_json::json;

/// Canonical scenario with the goal and channel of one intent.
pub struct Fixture {
    pub scenario: Scenario,
    pub goal: Goal,
    pub channel: Channel,
}

impl Fixture {
    pub fn canonical(bandwidth: &str) -> Self {
        let scenario = Scenario::canonical();
        let text = format!("Achieve the highest task success rate for robotic FDR under a {bandwidth} bandwidth constraint.");
        let goal = parse_intent(&IntentSpec::text(&text)).expect("canonical intent parses");
        let mut channel = scenario.channel.clone();
        channel.bandwidth_hz = goal.upper_bound("bandwidth_hz").expect("intent names a bandwidth");
        Self {
            scenario,
            goal,
            channel,
        }
    }

    pub fn ctx(&self) -> PlanContext<'_> {
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

/// Mix of requests, results, errors and event notifications.
pub fn sample_messages(n: usize) -> Vec<Message> {
    (0..n as u64)
        .map(|i| match i % 4 {
            0 => Message::request(
                i,
                Method::Invoke,
                Some(json!({
                    "target": 4,
                    "capability": "extract_scene_graph",
                    "data_type": {"kind": "raw_point_cloud", "modality": "point_cloud", "unit": "bits"},
                    "size_bits": 40_000_000u64,
                    "payload_ref": format!("sim://frame/{i}")
                })),
            ),
            1 => Message::result(i, json!({"result": {"representation": "scene_graph", "size_bits": 4e4}, "sim_latency_s": 0.3})),
            2 => Message::error(i, RpcError::new(RpcError::UNKNOWN_TARGET, "unknown target agent 42")),
            _ => Message::notification(Method::Event, Some(json!({"seq": i, "kind": "updated"}))),
        })
        .collect()
}
