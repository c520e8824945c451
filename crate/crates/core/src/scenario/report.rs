use std::cmp::Ordering;
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use super::{run_baseline, run_goagentnet, Scenario, ScenarioError};
use crate::intent::Goal;
use crate::netmodel::NetworkState;
use crate::orchestrator::ExecutionPlan;
use crate::protocol::TraceEntry;

/// Architecture under test. Variant order is the report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arch {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "goagentnet")]
    GoAgentNet,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Baseline => "baseline",
            Arch::GoAgentNet => "goagentnet",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub latency_s: f64,
    pub comm_energy_j: f64,
    pub compute_energy_j: f64,
    pub success: f64,
    pub utility: f64,
    pub delivered: bool,
    pub attempts: u32,
}

/// Outcome of one interventional bound query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedBound {
    pub goal: String,
    pub threshold: f64,
    pub target: String,
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub intent_id: String,
    pub arch: Arch,
    pub seed: u64,
    pub bandwidth_hz: f64,
    pub goal: Goal,
    pub plan: ExecutionPlan,
    pub measured: Measured,
    pub network_state: NetworkState,
    /// Advisory per-domain bounds from the scenario's causal model.
    pub derived_bounds: Vec<DerivedBound>,
    pub events: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub intent_id: String,
    pub bandwidth_hz: f64,
    /// `100 * (1 - E_c goagentnet / E_c baseline)`.
    pub energy_reduction_pct: f64,
    /// `S goagentnet - S baseline`.
    pub success_delta: f64,
    pub comm_energy_goagentnet_j: f64,
    pub comm_energy_baseline_j: f64,
    pub success_goagentnet: f64,
    pub success_baseline: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(goagent: &RunReport, baseline: &RunReport) -> Result<ComparisonRow, ScenarioError> {
    if goagent.intent_id != baseline.intent_id {
        return Err(ScenarioError::IntentMismatch {
            left: goagent.intent_id.clone(),
            right: baseline.intent_id.clone(),
        });
    }
    let (g, b) = (&goagent.measured, &baseline.measured);
    if b.comm_energy_j.is_nan() || b.comm_energy_j <= 0.0 {
        return Err(ScenarioError::BaselineZeroEnergy);
    }
    Ok(ComparisonRow {
        intent_id: goagent.intent_id.clone(),
        bandwidth_hz: goagent.bandwidth_hz,
        energy_reduction_pct: 100.0 * (1.0 - g.comm_energy_j / b.comm_energy_j),
        success_delta: g.success - b.success,
        comm_energy_goagentnet_j: g.comm_energy_j,
        comm_energy_baseline_j: b.comm_energy_j,
        success_goagentnet: g.success,
        success_baseline: b.success,
    })
}

/// Report CSV header.
pub const CSV_COLUMNS: [&str; 8] = ["bandwidth_hz", "arch", "representation", "t_e2e", "E_c", "E_x", "S", "U"];

/// Comparison CSV header.
pub const COMPARISON_COLUMNS: [&str; 8] = [
    "bandwidth_hz",
    "intent",
    "energy_reduction_pct",
    "success_delta",
    "E_c_goagentnet",
    "E_c_baseline",
    "S_goagentnet",
    "S_baseline",
];

fn csv_err(e: csv::Error) -> ScenarioError {
    ScenarioError::Io(io::Error::other(e))
}

/// One row per report, measured values, in the given order.
pub fn write_csv<W: io::Write>(reports: &[RunReport], out: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in reports {
        let m = &r.measured;
        w.write_record([
            r.bandwidth_hz.to_string(),
            r.arch.to_string(),
            r.plan.representation.clone(),
            m.latency_s.to_string(),
            m.comm_energy_j.to_string(),
            m.compute_energy_j.to_string(),
            m.success.to_string(),
            m.utility.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv<W: io::Write>(report: &ComparisonReport, out: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_COLUMNS).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            r.bandwidth_hz.to_string(),
            r.intent_id.clone(),
            r.energy_reduction_pct.to_string(),
            r.success_delta.to_string(),
            r.comm_energy_goagentnet_j.to_string(),
            r.comm_energy_baseline_j.to_string(),
            r.success_goagentnet.to_string(),
            r.success_baseline.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Placeholder replaced by the bandwidth in sweep intent templates.
pub const BANDWIDTH_PLACEHOLDER: &str = "{bandwidth}";

/// `5000000` -> `5MHz`; values that are not a whole number of hertz after
/// scaling fall back to plain hertz.
pub fn format_bandwidth(hz: f64) -> String {
    let mhz = hz / 1e6;
    if mhz * 1e6 == hz {
        format!("{mhz}MHz")
    } else {
        format!("{hz}Hz")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by (bandwidth, arch).
    pub reports: Vec<RunReport>,
    /// One row per bandwidth when both architectures ran.
    pub comparison: ComparisonReport,
}

pub fn run_arch(scenario: &Scenario, arch: Arch, intent: &str, seed: u64) -> Result<RunReport, ScenarioError> {
    match arch {
        Arch::GoAgentNet => run_goagentnet(scenario, intent, seed),
        Arch::Baseline => run_baseline(scenario, intent, seed),
    }
}

/// Run every (bandwidth, arch) pair of `template` with `{bandwidth}` filled in.
pub fn sweep(
    scenario: &Scenario,
    template: &str,
    bandwidths: &[f64],
    archs: &[Arch],
    seed: u64,
) -> Result<SweepResult, ScenarioError> {
    if bandwidths.is_empty() {
        return Err(ScenarioError::Usage("at least one bandwidth is required".into()));
    }
    if archs.is_empty() {
        return Err(ScenarioError::Usage("at least one architecture is required".into()));
    }
    if !template.contains(BANDWIDTH_PLACEHOLDER) {
        return Err(ScenarioError::Usage(format!(
            "intent template must contain {BANDWIDTH_PLACEHOLDER}"
        )));
    }
    if let Some(b) = bandwidths.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(ScenarioError::Usage(format!("invalid bandwidth {b}")));
    }
    let mut bws = bandwidths.to_vec();
    bws.sort_by(f64::total_cmp);
    bws.dedup();
    let mut archs = archs.to_vec();
    archs.sort();
    archs.dedup();

    let mut result = SweepResult::default();
    for bw in bws {
        let intent = template.replace(BANDWIDTH_PLACEHOLDER, &format_bandwidth(bw));
        let runs = archs
            .iter()
            .map(|a| run_arch(scenario, *a, &intent, seed))
            .collect::<Result<Vec<_>, _>>()?;
        if let [base, goa] = &runs[..] {
            result.comparison.rows.push(compare(goa, base)?);
        }
        result.reports.extend(runs);
    }
    debug_assert!(result
        .reports
        .windows(2)
        .all(|w| (w[0].bandwidth_hz, w[0].arch).partial_cmp(&(w[1].bandwidth_hz, w[1].arch)) == Some(Ordering::Less)));
    Ok(result)
}
