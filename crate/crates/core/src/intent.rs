//! Intent translation: template sentences and structured documents become a
//! [`Goal`], which is exchanged between layers as flat subject/predicate/object
//! triples ([`GoalRecord`]).
//!
//! Units are canonicalized while parsing: Hz, bits, seconds, joules, watts.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::TemplateSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntentError {
    #[error("intent body is empty")]
    Empty,
    #[error("text matches no intent template: {0:?}")]
    UnrecognizedTemplate(String),
    #[error("structured intent violates schema: {0}")]
    SchemaViolation(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("unit `{unit}` does not measure `{quantity}`")]
    UnitMismatch { quantity: String, unit: String },
    #[error("invalid trade-off weights: {0}")]
    InvalidTradeoffs(String),
    #[error("malformed goal record: {0}")]
    MalformedRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Structured,
    PatternText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentSpec {
    pub source_kind: SourceKind,
    pub body: String,
}

impl IntentSpec {
    pub fn text(body: &str) -> Self {
        Self {
            source_kind: SourceKind::PatternText,
            body: body.to_owned(),
        }
    }

    pub fn structured(body: &str) -> Self {
        Self {
            source_kind: SourceKind::Structured,
            body: body.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Self {
            value,
            unit: unit.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    #[serde(alias = "<=", alias = "≤")]
    Le,
    #[serde(alias = ">=", alias = "≥")]
    Ge,
    #[serde(alias = "=", alias = "==")]
    Eq,
}

impl Relation {
    fn as_str(self) -> &'static str {
        match self {
            Relation::Le => "le",
            Relation::Ge => "ge",
            Relation::Eq => "eq",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "le" => Some(Relation::Le),
            "ge" => Some(Relation::Ge),
            "eq" => Some(Relation::Eq),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpi {
    pub name: String,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub quantity: String,
    pub relation: Relation,
    pub value: Quantity,
}

impl Constraint {
    pub fn new(quantity: &str, relation: Relation, value: Quantity) -> Self {
        Self {
            quantity: quantity.to_owned(),
            relation,
            value,
        }
    }
}

/// Translated intent. Lists are kept in canonical order (KPIs by name,
/// constraints by quantity, relation, value) so that equal goals compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub task_type: String,
    pub kpis: Vec<Kpi>,
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub tradeoffs: BTreeMap<String, f64>,
}

impl Goal {
    pub fn new(
        task_type: &str,
        kpis: Vec<Kpi>,
        constraints: Vec<Constraint>,
        tradeoffs: BTreeMap<String, f64>,
    ) -> Self {
        let mut goal = Self {
            task_type: task_type.to_owned(),
            kpis,
            constraints,
            tradeoffs,
        };
        goal.canonicalize();
        goal
    }

    fn canonicalize(&mut self) {
        self.kpis.sort_by(|a, b| a.name.cmp(&b.name));
        self.constraints.sort_by(|a, b| {
            a.quantity
                .cmp(&b.quantity)
                .then(a.relation.cmp(&b.relation))
                .then(a.value.value.total_cmp(&b.value.value))
                .then(a.value.unit.cmp(&b.value.unit))
        });
    }

    /// First constraint on `quantity` with an upper bound or equality.
    pub fn upper_bound(&self, quantity: &str) -> Option<f64> {
        self.constraints
            .iter()
            .find(|c| c.quantity == quantity && matches!(c.relation, Relation::Le | Relation::Eq))
            .map(|c| c.value.value)
    }

    fn check(&self) -> Result<(), IntentError> {
        for (i, k) in self.kpis.iter().enumerate() {
            if self.kpis[..i].iter().any(|o| o.name == k.name) {
                return Err(IntentError::SchemaViolation(format!("KPI `{}` listed twice", k.name)));
            }
            if let Some(t) = &k.target {
                if !t.value.is_finite() || t.unit.is_empty() {
                    return Err(IntentError::SchemaViolation(format!(
                        "KPI `{}` target must be finite and carry a unit",
                        k.name
                    )));
                }
            }
        }
        if let Some(c) = self.constraints.iter().find(|c| !c.value.value.is_finite()) {
            return Err(IntentError::SchemaViolation(format!("constraint on `{}` is not finite", c.quantity)));
        }
        if !self.tradeoffs.is_empty() {
            if self.tradeoffs.values().any(|w| !(w.is_finite() && *w >= 0.0 && *w <= 1.0)) {
                return Err(IntentError::InvalidTradeoffs("weights must lie in [0, 1]".into()));
            }
            let total: f64 = self.tradeoffs.values().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(IntentError::InvalidTradeoffs(format!("weights sum to {total}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Units

/// `(scale to base unit, base unit)`.
fn unit_scale(unit: &str) -> Option<(f64, &'static str)> {
    Some(match unit {
        "Hz" | "hz" => (1.0, "Hz"),
        "kHz" | "KHz" => (1e3, "Hz"),
        "MHz" => (1e6, "Hz"),
        "GHz" => (1e9, "Hz"),
        "bit" | "bits" | "b" => (1.0, "bits"),
        "kbit" | "kb" | "Kb" => (1e3, "bits"),
        "Mbit" | "Mb" => (1e6, "bits"),
        "Gbit" | "Gb" => (1e9, "bits"),
        "B" | "byte" | "bytes" => (8.0, "bits"),
        "kB" | "KB" => (8e3, "bits"),
        "MB" => (8e6, "bits"),
        "GB" => (8e9, "bits"),
        "s" | "sec" | "seconds" => (1.0, "s"),
        "ms" => (1e-3, "s"),
        "us" | "µs" => (1e-6, "s"),
        "min" => (60.0, "s"),
        "J" => (1.0, "J"),
        "mJ" => (1e-3, "J"),
        "uJ" | "µJ" => (1e-6, "J"),
        "kJ" => (1e3, "J"),
        "W" => (1.0, "W"),
        "mW" => (1e-3, "W"),
        "%" | "percent" => (1e-2, "1"),
        "1" | "" => (1.0, "1"),
        _ => return None,
    })
}

fn base_suffix(base: &str) -> &'static str {
    match base {
        "Hz" => "hz",
        "bits" => "bits",
        "s" => "s",
        "J" => "j",
        "W" => "w",
        _ => "ratio",
    }
}

/// Base unit expected for well-known quantity identifiers.
fn expected_base(quantity: &str) -> Option<&'static str> {
    match quantity {
        "bandwidth_hz" => Some("Hz"),
        "latency_s" | "delay_s" => Some("s"),
        "energy_j" => Some("J"),
        "size_bits" => Some("bits"),
        "power_w" => Some("W"),
        _ => None,
    }
}

fn canonical_quantity(q: &Quantity) -> Result<Quantity, IntentError> {
    let (scale, base) = unit_scale(&q.unit).ok_or_else(|| IntentError::UnknownUnit(q.unit.clone()))?;
    Ok(Quantity::new(q.value * scale, base))
}

fn check_unit(quantity: &str, q: &Quantity) -> Result<(), IntentError> {
    match expected_base(quantity) {
        Some(base) if base != q.unit => Err(IntentError::UnitMismatch {
            quantity: quantity.to_owned(),
            unit: q.unit.clone(),
        }),
        _ => Ok(()),
    }
}

fn snake(phrase: &str) -> String {
    phrase
        .split(|c: char| c.is_whitespace() || c == '-')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

fn kpi_id(phrase: &str) -> String {
    match snake(phrase).as_str() {
        "task_success_rate" | "success_rate" | "fdr_success_rate" => "success_rate".into(),
        "latency" | "end_to_end_latency" | "delay" => "latency_s".into(),
        "energy" | "energy_consumption" | "communication_energy" => "energy_j".into(),
        other => other.to_owned(),
    }
}

fn quantity_id(phrase: &str, base: &str) -> String {
    let word = snake(phrase);
    match word.as_str() {
        "bandwidth" => "bandwidth_hz".into(),
        "latency" | "delay" => "latency_s".into(),
        "energy" => "energy_j".into(),
        "data" | "data_size" | "payload" => "size_bits".into(),
        "power" | "transmit_power" => "power_w".into(),
        _ => format!("{word}_{}", base_suffix(base)),
    }
}

// ---------------------------------------------------------------------------
// Parsing

fn template() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)^\s*
            (?i:achieve\s+the)\s+(?P<dir>(?i:highest|maximum|lowest|minimum))\s+
            (?P<kpi>[A-Za-z][A-Za-z0-9\ \-]*?)\s+(?i:for)\s+
            (?P<task>[A-Za-z][A-Za-z0-9\ \-]*?)
            (?:\s+(?i:under)\s+(?i:an?)\s+
                (?P<num>[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)\s*(?P<unit>[A-Za-zµ%]+)\s+
                (?P<quantity>[A-Za-z][A-Za-z\ \-]*?)\s+(?i:constraint))?
            \s*\.?\s*$",
        )
        .expect("intent template compiles")
    })
}

fn parse_text(body: &str) -> Result<Goal, IntentError> {
    let caps = template()
        .captures(body)
        .ok_or_else(|| IntentError::UnrecognizedTemplate(body.to_owned()))?;
    let direction = match caps["dir"].to_lowercase().as_str() {
        "highest" | "maximum" => Direction::Maximize,
        _ => Direction::Minimize,
    };
    let kpi = Kpi {
        name: kpi_id(&caps["kpi"]),
        direction,
        target: None,
    };
    let mut constraints = Vec::new();
    if let Some(num) = caps.name("num") {
        let value: f64 = num
            .as_str()
            .parse()
            .map_err(|_| IntentError::UnrecognizedTemplate(body.to_owned()))?;
        let q = canonical_quantity(&Quantity::new(value, &caps["unit"]))?;
        let quantity = quantity_id(&caps["quantity"], &q.unit);
        check_unit(&quantity, &q)?;
        constraints.push(Constraint {
            quantity,
            relation: Relation::Le,
            value: q,
        });
    }
    Ok(Goal::new(&snake(&caps["task"]), vec![kpi], constraints, BTreeMap::new()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredConstraint {
    quantity: String,
    relation: Relation,
    value: f64,
    #[serde(default)]
    unit: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredIntent {
    task_type: String,
    #[serde(default)]
    kpis: Vec<Kpi>,
    #[serde(default)]
    constraints: Vec<StructuredConstraint>,
    #[serde(default)]
    tradeoffs: BTreeMap<String, f64>,
}

fn parse_structured(body: &str) -> Result<Goal, IntentError> {
    let doc: StructuredIntent =
        serde_json::from_str(body).map_err(|e| IntentError::SchemaViolation(e.to_string()))?;
    if doc.task_type.trim().is_empty() {
        return Err(IntentError::SchemaViolation("task_type is empty".into()));
    }
    let kpis = doc
        .kpis
        .into_iter()
        .map(|mut k| {
            if let Some(t) = &k.target {
                k.target = Some(canonical_quantity(t)?);
            }
            Ok(k)
        })
        .collect::<Result<Vec<_>, IntentError>>()?;
    let constraints = doc
        .constraints
        .into_iter()
        .map(|c| {
            let q = canonical_quantity(&Quantity::new(c.value, &c.unit))?;
            check_unit(&c.quantity, &q)?;
            Ok(Constraint {
                quantity: c.quantity,
                relation: c.relation,
                value: q,
            })
        })
        .collect::<Result<Vec<_>, IntentError>>()?;
    Ok(Goal::new(&doc.task_type, kpis, constraints, doc.tradeoffs))
}

/// Translate an intent into a goal.
pub fn parse_intent(spec: &IntentSpec) -> Result<Goal, IntentError> {
    if spec.body.trim().is_empty() {
        return Err(IntentError::Empty);
    }
    let goal = match spec.source_kind {
        SourceKind::PatternText => parse_text(&spec.body)?,
        SourceKind::Structured => parse_structured(&spec.body)?,
    };
    goal.check()?;
    Ok(goal)
}

// ---------------------------------------------------------------------------
// Goal records

const SUBJECT: &str = "goal";
const HAS_TASK: &str = "hasTaskType";
const HAS_KPI: &str = "hasKpi";
const HAS_CONSTRAINT: &str = "hasConstraint";
const HAS_TRADEOFF: &str = "hasTradeoff";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

/// Flat triple encoding of a goal, ordered by predicate then object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRecord {
    pub triples: Vec<Triple>,
}

fn triple(predicate: &str, object: String) -> Triple {
    Triple {
        subject: SUBJECT.to_owned(),
        predicate: predicate.to_owned(),
        object,
    }
}

/// Objects are `;`-separated fields; numbers use the shortest exact decimal form.
pub fn encode_goal(goal: &Goal) -> GoalRecord {
    let mut triples = vec![triple(HAS_TASK, goal.task_type.clone())];
    for k in &goal.kpis {
        let dir = match k.direction {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        };
        let object = match &k.target {
            Some(t) => format!("{};{dir};{};{}", k.name, t.value, t.unit),
            None => format!("{};{dir}", k.name),
        };
        triples.push(triple(HAS_KPI, object));
    }
    for c in &goal.constraints {
        triples.push(triple(
            HAS_CONSTRAINT,
            format!("{};{};{};{}", c.quantity, c.relation.as_str(), c.value.value, c.value.unit),
        ));
    }
    for (name, w) in &goal.tradeoffs {
        triples.push(triple(HAS_TRADEOFF, format!("{name};{w}")));
    }
    triples.sort_by(|a, b| a.predicate.cmp(&b.predicate).then_with(|| a.object.cmp(&b.object)));
    GoalRecord { triples }
}

pub fn decode_goal(record: &GoalRecord) -> Result<Goal, IntentError> {
    let bad = |t: &Triple| IntentError::MalformedRecord(t.to_string());
    let number = |s: &str, t: &Triple| s.parse::<f64>().map_err(|_| bad(t));
    let mut task = None;
    let mut kpis = Vec::new();
    let mut constraints = Vec::new();
    let mut tradeoffs = BTreeMap::new();
    for t in &record.triples {
        if t.subject != SUBJECT {
            return Err(bad(t));
        }
        let fields: Vec<&str> = t.object.split(';').collect();
        match (t.predicate.as_str(), fields.as_slice()) {
            (HAS_TASK, [name]) if task.is_none() => task = Some((*name).to_owned()),
            (HAS_KPI, [name, dir, rest @ ..]) => {
                let direction = match *dir {
                    "maximize" => Direction::Maximize,
                    "minimize" => Direction::Minimize,
                    _ => return Err(bad(t)),
                };
                let target = match rest {
                    [] => None,
                    [v, u] => Some(Quantity::new(number(v, t)?, u)),
                    _ => return Err(bad(t)),
                };
                kpis.push(Kpi {
                    name: (*name).to_owned(),
                    direction,
                    target,
                });
            }
            (HAS_CONSTRAINT, [q, rel, v, u]) => constraints.push(Constraint {
                quantity: (*q).to_owned(),
                relation: Relation::parse(rel).ok_or_else(|| bad(t))?,
                value: Quantity::new(number(v, t)?, u),
            }),
            (HAS_TRADEOFF, [name, w]) => {
                tradeoffs.insert((*name).to_owned(), number(w, t)?);
            }
            _ => return Err(bad(t)),
        }
    }
    let task = task.ok_or_else(|| IntentError::MalformedRecord("missing task type".into()))?;
    Ok(Goal::new(&task, kpis, constraints, tradeoffs))
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    UnknownTask { task_type: String },
    UnknownKpi { name: String },
    InfeasibleConstraint { quantity: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

fn is_physical(quantity: &str) -> bool {
    ["_hz", "_bits", "_s", "_j", "_w"].iter().any(|s| quantity.ends_with(s))
}

/// Check a goal against the registered task templates.
pub fn validate_goal(goal: &Goal, templates: &TemplateSet) -> ValidationReport {
    let mut findings = Vec::new();
    match templates.get(&goal.task_type) {
        None => findings.push(Finding::UnknownTask {
            task_type: goal.task_type.clone(),
        }),
        Some(t) => {
            for k in &goal.kpis {
                if !t.kpis.contains(&k.name) {
                    findings.push(Finding::UnknownKpi { name: k.name.clone() });
                }
            }
        }
    }
    for c in &goal.constraints {
        if is_physical(&c.quantity) && c.value.value <= 0.0 {
            findings.push(Finding::InfeasibleConstraint {
                quantity: c.quantity.clone(),
                reason: format!("{} {} is not a positive physical value", c.relation.as_str(), c.value.value),
            });
        }
    }
    // Upper bound below a lower bound on the same quantity.
    for hi in goal.constraints.iter().filter(|c| c.relation != Relation::Ge) {
        for lo in goal.constraints.iter().filter(|c| c.relation != Relation::Le) {
            if hi.quantity == lo.quantity && lo.value.value > hi.value.value {
                findings.push(Finding::InfeasibleConstraint {
                    quantity: hi.quantity.clone(),
                    reason: format!("requires >= {} and <= {}", lo.value.value, hi.value.value),
                });
            }
        }
    }
    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::orchestrator::{Subtask, TaskTemplate};
    use crate::registry::CapabilityRole;

    const INTENT_1: &str = "Achieve the highest task success rate for robotic FDR under a 5MHz bandwidth constraint.";
    const INTENT_2: &str = "Achieve the highest task success rate for robotic FDR under a 10MHz bandwidth constraint.";
    const INTENT_3: &str = "Achieve the highest task success rate for robotic FDR under a 100MHz bandwidth constraint.";

    fn templates() -> TemplateSet {
        TemplateSet::new([TaskTemplate::chain(
            "robotic_fdr",
            vec![Subtask {
                name: "all".into(),
                required_capability_kind: CapabilityRole::Sense,
                kpi_share: 1.0,
            }],
            &["success_rate", "latency_s"],
        )])
        .unwrap()
    }

    #[test]
    fn intent_one() {
        let goal = parse_intent(&IntentSpec::text(INTENT_1)).unwrap();
        assert_eq!(goal.task_type, "robotic_fdr");
        assert_eq!(
            goal.kpis,
            vec![Kpi {
                name: "success_rate".into(),
                direction: Direction::Maximize,
                target: None
            }]
        );
        assert_eq!(
            goal.constraints,
            vec![Constraint::new("bandwidth_hz", Relation::Le, Quantity::new(5e6, "Hz"))]
        );
        assert!(validate_goal(&goal, &templates()).is_clean());
    }

    #[test]
    fn megahertz_scaling() {
        let goal = parse_intent(&IntentSpec::text(INTENT_3)).unwrap();
        assert_eq!(goal.upper_bound("bandwidth_hz"), Some(1e8));
    }

    #[test]
    fn table_intents_differ_only_in_bandwidth() {
        let goals: Vec<Goal> = [INTENT_1, INTENT_2, INTENT_3]
            .iter()
            .map(|t| parse_intent(&IntentSpec::text(t)).unwrap())
            .collect();
        for g in &goals[1..] {
            assert_eq!(g.task_type, goals[0].task_type);
            assert_eq!(g.kpis, goals[0].kpis);
            assert_eq!(g.constraints.len(), 1);
            assert_eq!(g.constraints[0].quantity, "bandwidth_hz");
        }
        let bws: Vec<f64> = goals.iter().map(|g| g.upper_bound("bandwidth_hz").unwrap()).collect();
        assert_eq!(bws, [5e6, 1e7, 1e8]);
    }

    #[test]
    fn other_template_forms() {
        let g = parse_intent(&IntentSpec::text("achieve the lowest latency for pick and place")).unwrap();
        assert_eq!(g.task_type, "pick_and_place");
        assert_eq!(g.kpis[0].name, "latency_s");
        assert_eq!(g.kpis[0].direction, Direction::Minimize);
        assert!(g.constraints.is_empty());

        let g = parse_intent(&IntentSpec::text(
            "Achieve the highest accuracy for VQA under a 250ms latency constraint.",
        ))
        .unwrap();
        assert_eq!(g.constraints[0], Constraint::new("latency_s", Relation::Le, Quantity::new(0.25, "s")));
    }

    #[test]
    fn rejects_unmatched_text() {
        assert!(matches!(
            parse_intent(&IntentSpec::text("Please make the robot faster")),
            Err(IntentError::UnrecognizedTemplate(_))
        ));
        assert_eq!(parse_intent(&IntentSpec::text("  ")), Err(IntentError::Empty));
        assert!(matches!(
            parse_intent(&IntentSpec::text(
                "Achieve the highest success rate for robotic FDR under a 5MJ bandwidth constraint."
            )),
            Err(IntentError::UnknownUnit(_)) | Err(IntentError::UnitMismatch { .. })
        ));
        assert!(matches!(
            parse_intent(&IntentSpec::text(
                "Achieve the highest success rate for robotic FDR under a 5ms bandwidth constraint."
            )),
            Err(IntentError::UnitMismatch { .. })
        ));
    }

    #[test]
    fn structured_empty_lists() {
        let g = parse_intent(&IntentSpec::structured(
            r#"{"task_type":"robotic_fdr","kpis":[],"constraints":[]}"#,
        ))
        .unwrap();
        assert_eq!(g, Goal::new("robotic_fdr", vec![], vec![], BTreeMap::new()));
    }

    #[test]
    fn structured_units_and_errors() {
        let g = parse_intent(&IntentSpec::structured(
            r#"{"task_type":"robotic_fdr",
                "kpis":[{"name":"latency_s","direction":"minimize","target":{"value":500,"unit":"ms"}}],
                "constraints":[{"quantity":"bandwidth_hz","relation":"<=","value":10,"unit":"MHz"}],
                "tradeoffs":{"success_rate":0.75,"latency_s":0.25}}"#,
        ))
        .unwrap();
        assert_eq!(g.kpis[0].target, Some(Quantity::new(0.5, "s")));
        assert_eq!(g.upper_bound("bandwidth_hz"), Some(1e7));

        for bad in [
            r#"{"kpis":[]}"#,
            r#"[1, 2]"#,
            r#"{"task_type":"x"} {"task_type":"y"}"#,
            r#"{"task_type":"x","extra":1}"#,
        ] {
            assert!(
                matches!(parse_intent(&IntentSpec::structured(bad)), Err(IntentError::SchemaViolation(_))),
                "{bad}"
            );
        }
        assert!(matches!(
            parse_intent(&IntentSpec::structured(r#"{"task_type":"x","tradeoffs":{"a":0.3}}"#)),
            Err(IntentError::InvalidTradeoffs(_))
        ));
    }

    #[test]
    fn record_counts() {
        let g = parse_intent(&IntentSpec::text(INTENT_1)).unwrap();
        let rec = encode_goal(&g);
        assert_eq!(rec.triples.len(), 1 + g.kpis.len() + g.constraints.len());
        assert_eq!(rec.triples[0].object, "bandwidth_hz;le;5000000;Hz");
        let minimal = Goal::new("robotic_fdr", vec![], vec![], BTreeMap::new());
        assert_eq!(encode_goal(&minimal).triples.len(), 1);
    }

    #[test]
    fn intent_two_round_trip() {
        let g = parse_intent(&IntentSpec::text(INTENT_2)).unwrap();
        assert_eq!(decode_goal(&encode_goal(&g)).unwrap(), g);
    }

    #[test]
    fn validation_findings() {
        let t = templates();
        let unknown = Goal::new("unknown_task", vec![], vec![], BTreeMap::new());
        assert_eq!(
            validate_goal(&unknown, &t).findings,
            vec![Finding::UnknownTask {
                task_type: "unknown_task".into()
            }]
        );
        let negative = Goal::new(
            "robotic_fdr",
            vec![],
            vec![Constraint::new("bandwidth_hz", Relation::Le, Quantity::new(-1.0, "Hz"))],
            BTreeMap::new(),
        );
        assert!(matches!(
            validate_goal(&negative, &t).findings.as_slice(),
            [Finding::InfeasibleConstraint { .. }]
        ));
        let odd_kpi = Goal::new(
            "robotic_fdr",
            vec![Kpi {
                name: "throughput".into(),
                direction: Direction::Maximize,
                target: None,
            }],
            vec![],
            BTreeMap::new(),
        );
        assert_eq!(
            validate_goal(&odd_kpi, &t).findings,
            vec![Finding::UnknownKpi {
                name: "throughput".into()
            }]
        );
        let crossed = Goal::new(
            "robotic_fdr",
            vec![],
            vec![
                Constraint::new("latency_s", Relation::Le, Quantity::new(1.0, "s")),
                Constraint::new("latency_s", Relation::Ge, Quantity::new(2.0, "s")),
            ],
            BTreeMap::new(),
        );
        assert_eq!(validate_goal(&crossed, &t).findings.len(), 1);
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,10}"
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e12f64..1e12, Just(0.0), Just(5e6), Just(1.0 / 3.0)]
    }

    fn goal_strategy() -> impl Strategy<Value = Goal> {
        let kpi = (ident(), any::<bool>(), prop::option::of((finite(), "[A-Za-z]{1,3}"))).prop_map(
            |(name, max, target)| Kpi {
                name,
                direction: if max { Direction::Maximize } else { Direction::Minimize },
                target: target.map(|(v, u)| Quantity::new(v, &u)),
            },
        );
        let relation = prop_oneof![Just(Relation::Le), Just(Relation::Ge), Just(Relation::Eq)];
        let constraint = (ident(), relation, finite(), "[A-Za-z]{1,3}")
            .prop_map(|(q, r, v, u)| Constraint::new(&q, r, Quantity::new(v, &u)));
        (
            ident(),
            prop::collection::btree_map(ident(), kpi, 0..4),
            prop::collection::vec(constraint, 0..4),
            prop::collection::btree_map(ident(), 0.0f64..1.0, 0..3),
        )
            .prop_map(|(task, kpis, constraints, tradeoffs)| {
                let kpis = kpis
                    .into_iter()
                    .map(|(name, mut k)| {
                        k.name = name;
                        k
                    })
                    .collect();
                Goal::new(&task, kpis, constraints, tradeoffs)
            })
    }

    proptest! {
        #[test]
        fn goal_record_round_trip(g in goal_strategy()) {
            let rec = encode_goal(&g);
            prop_assert_eq!(decode_goal(&rec).unwrap(), g);
            let mut sorted = rec.triples.clone();
            sorted.sort_by(|a, b| a.predicate.cmp(&b.predicate).then(a.object.cmp(&b.object)));
            prop_assert_eq!(sorted, rec.triples);
        }

        #[test]
        fn parsing_is_deterministic(bw in 1u32..1000, unit in prop_oneof![Just("kHz"), Just("MHz"), Just("GHz")]) {
            let text = format!("Achieve the highest task success rate for robotic FDR under a {bw}{unit} bandwidth constraint.");
            let a = parse_intent(&IntentSpec::text(&text)).unwrap();
            let b = parse_intent(&IntentSpec::text(&text)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
