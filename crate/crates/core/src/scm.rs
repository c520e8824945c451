//! Structural causal model over monotone structural equations.
//!
//! Each endogenous variable is defined by one equation whose function is
//! monotone in every input with a declared sign. That makes interventional
//! bound search a one-dimensional bisection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScmError {
    #[error("dependency cycle through {0:?}")]
    CycleDetected(Vec<String>),
    #[error("variable `{0}` is defined twice")]
    DuplicateDefinition(String),
    #[error("invalid equation for `{output}`: {reason}")]
    InvalidEquation { output: String, reason: String },
    #[error("`{output}` is not {sign:?} in `{input}` on its domain")]
    MonotonicityViolation { output: String, input: String, sign: Sign },
    #[error("no value for exogenous variable `{0}`")]
    MissingExogenous(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{goal}` is not non-decreasing in `{target}` along every causal path")]
    NonMonotonePath { goal: String, target: String },
    #[error("`{goal}` stays below {threshold} over the whole search range")]
    Unsatisfiable { goal: String, threshold: f64 },
    #[error("search range [{0}, {1}] is empty or not finite")]
    InvalidRange(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Increasing,
    Decreasing,
}

impl Sign {
    fn compose(self, other: Sign) -> Sign {
        if self == other {
            Sign::Increasing
        } else {
            Sign::Decreasing
        }
    }
}

/// Named function families available to structural equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FunctionKind {
    /// `intercept + sum(coefficients[i] * x[i])`.
    Linear { coefficients: Vec<f64>, #[serde(default)] intercept: f64 },
    /// Smallest input.
    Min,
    /// `ceiling * x / (x + half_point)` for one input `x >= 0`.
    Saturation { half_point: f64, #[serde(default = "one")] ceiling: f64 },
    /// `exp(-rate * x)`.
    ExpDecay { rate: f64 },
    /// `1 / (1 + scale * x)` for one input `x >= 0`.
    Inverse { scale: f64 },
    /// Value fixed by an intervention.
    Constant { value: f64 },
}

fn one() -> f64 {
    1.0
}

impl FunctionKind {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FunctionKind::Linear { coefficients, intercept } => {
                intercept + coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            }
            FunctionKind::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
            FunctionKind::Saturation { half_point, ceiling } => ceiling * x[0] / (x[0] + half_point),
            FunctionKind::ExpDecay { rate } => (-rate * x[0]).exp(),
            FunctionKind::Inverse { scale } => 1.0 / (1.0 + scale * x[0]),
            FunctionKind::Constant { value } => *value,
        }
    }

    /// Sign implied by the function family for input `i`, if fixed.
    fn intrinsic_sign(&self, i: usize) -> Option<Sign> {
        match self {
            FunctionKind::Linear { coefficients, .. } => Some(if coefficients[i] >= 0.0 {
                Sign::Increasing
            } else {
                Sign::Decreasing
            }),
            FunctionKind::Min => Some(Sign::Increasing),
            FunctionKind::Saturation { ceiling, .. } => Some(if *ceiling >= 0.0 {
                Sign::Increasing
            } else {
                Sign::Decreasing
            }),
            FunctionKind::ExpDecay { rate } | FunctionKind::Inverse { scale: rate } => Some(if *rate >= 0.0 {
                Sign::Decreasing
            } else {
                Sign::Increasing
            }),
            FunctionKind::Constant { .. } => None,
        }
    }

    fn arity_ok(&self, n: usize) -> bool {
        match self {
            FunctionKind::Linear { coefficients, .. } => coefficients.len() == n,
            FunctionKind::Min => n >= 1,
            FunctionKind::Saturation { .. } | FunctionKind::ExpDecay { .. } | FunctionKind::Inverse { .. } => n == 1,
            FunctionKind::Constant { .. } => n == 0,
        }
    }
}

fn default_domain() -> (f64, f64) {
    (0.0, 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralEquation {
    pub output: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub function: FunctionKind,
    /// Declared monotonicity per input; defaults to the family's own sign.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signs: Vec<Sign>,
    /// Input domain on which monotonicity is checked.
    #[serde(default = "default_domain")]
    pub domain: (f64, f64),
}

impl StructuralEquation {
    pub fn new(output: &str, inputs: &[&str], function: FunctionKind) -> Self {
        Self {
            output: output.to_owned(),
            inputs: inputs.iter().map(|s| (*s).to_owned()).collect(),
            function,
            signs: Vec::new(),
            domain: default_domain(),
        }
    }

    pub fn sign(&self, i: usize) -> Sign {
        self.signs
            .get(i)
            .copied()
            .or_else(|| self.function.intrinsic_sign(i))
            .unwrap_or(Sign::Increasing)
    }

    fn check(&self) -> Result<(), ScmError> {
        let bad = |reason: &str| ScmError::InvalidEquation {
            output: self.output.clone(),
            reason: reason.to_owned(),
        };
        if !self.function.arity_ok(self.inputs.len()) {
            return Err(bad("input count does not fit the function"));
        }
        if !self.signs.is_empty() && self.signs.len() != self.inputs.len() {
            return Err(bad("one sign per input is required"));
        }
        if self.inputs.iter().any(|i| i == &self.output) {
            return Err(ScmError::CycleDetected(vec![self.output.clone()]));
        }
        let (lo, hi) = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(bad("domain must be a finite, non-empty interval"));
        }
        self.check_monotone()
    }

    /// Sweep each input over the domain with the others held at a few grid
    /// points and verify the declared direction.
    fn check_monotone(&self) -> Result<(), ScmError> {
        const STEPS: usize = 24;
        const ANCHORS: [f64; 3] = [0.0, 0.5, 1.0];
        let (lo, hi) = self.domain;
        let at = |u: f64| lo + (hi - lo) * u;
        let n = self.inputs.len();
        for i in 0..n {
            let sign = self.sign(i);
            for &anchor in &ANCHORS {
                let mut x = vec![at(anchor); n];
                let mut prev: Option<f64> = None;
                for k in 0..=STEPS {
                    x[i] = at(k as f64 / STEPS as f64);
                    let y = self.function.eval(&x);
                    if let Some(p) = prev {
                        let slack = 1e-12 * (1.0 + p.abs());
                        let ok = match sign {
                            Sign::Increasing => y >= p - slack,
                            Sign::Decreasing => y <= p + slack,
                        };
                        if !ok || !y.is_finite() {
                            return Err(ScmError::MonotonicityViolation {
                                output: self.output.clone(),
                                input: self.inputs[i].clone(),
                                sign,
                            });
                        }
                    }
                    prev = Some(y);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scm {
    equations: BTreeMap<String, StructuralEquation>,
    exogenous: BTreeSet<String>,
    topo_order: Vec<String>,
}

pub type Assignment = BTreeMap<String, f64>;

/// Validate equations and order them topologically.
pub fn build_scm(equations: Vec<StructuralEquation>) -> Result<Scm, ScmError> {
    let mut defs = BTreeMap::new();
    for eq in equations {
        eq.check()?;
        if defs.contains_key(&eq.output) {
            return Err(ScmError::DuplicateDefinition(eq.output));
        }
        defs.insert(eq.output.clone(), eq);
    }
    let exogenous: BTreeSet<String> = defs
        .values()
        .flat_map(|e| e.inputs.iter())
        .filter(|v| !defs.contains_key(*v))
        .cloned()
        .collect();

    // Kahn's algorithm; BTreeSet keeps the order deterministic.
    let mut pending: BTreeMap<&str, usize> = defs
        .values()
        .map(|e| {
            let deps = e.inputs.iter().filter(|v| defs.contains_key(*v)).collect::<BTreeSet<_>>().len();
            (e.output.as_str(), deps)
        })
        .collect();
    let mut ready: BTreeSet<&str> = pending.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
    let mut topo_order = Vec::with_capacity(defs.len());
    while let Some(v) = ready.pop_first() {
        pending.remove(v);
        topo_order.push(v.to_owned());
        for e in defs.values() {
            if e.inputs.iter().any(|i| i == v) {
                let d = pending.get_mut(e.output.as_str()).expect("pending");
                *d -= 1;
                if *d == 0 {
                    ready.insert(e.output.as_str());
                }
            }
        }
    }
    if !pending.is_empty() {
        return Err(ScmError::CycleDetected(pending.keys().map(|v| (*v).to_owned()).collect()));
    }
    Ok(Scm {
        equations: defs,
        exogenous,
        topo_order,
    })
}

impl Scm {
    pub fn exogenous(&self) -> &BTreeSet<String> {
        &self.exogenous
    }

    pub fn topo_order(&self) -> &[String] {
        &self.topo_order
    }

    pub fn equation(&self, var: &str) -> Option<&StructuralEquation> {
        self.equations.get(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.equations.contains_key(var) || self.exogenous.contains(var)
    }

    /// Values of every variable. Entries of `assignment` for endogenous variables are ignored.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<Assignment, ScmError> {
        let mut values = Assignment::new();
        for v in &self.exogenous {
            let x = assignment.get(v).ok_or_else(|| ScmError::MissingExogenous(v.clone()))?;
            values.insert(v.clone(), *x);
        }
        for v in &self.topo_order {
            let eq = &self.equations[v];
            let x: Vec<f64> = eq.inputs.iter().map(|i| values[i]).collect();
            values.insert(v.clone(), eq.function.eval(&x));
        }
        Ok(values)
    }

    /// do(var = value): the defining equation is replaced by a constant.
    pub fn intervene(&self, var: &str, value: f64) -> Result<Scm, ScmError> {
        if !self.contains(var) {
            return Err(ScmError::UnknownVariable(var.to_owned()));
        }
        let mut equations: Vec<StructuralEquation> = self
            .equations
            .values()
            .filter(|e| e.output != var)
            .cloned()
            .collect();
        equations.push(StructuralEquation::new(var, &[], FunctionKind::Constant { value }));
        let mut scm = build_scm(equations)?;
        // A variable that only fed the replaced equation is still an input the
        // caller may supply; keep it visible as exogenous so assignments stay valid.
        for v in &self.exogenous {
            if v != var && !scm.equations.contains_key(v) {
                scm.exogenous.insert(v.clone());
            }
        }
        Ok(scm)
    }

    /// Signs with which `goal` can respond to `target` over all causal paths.
    fn path_signs(&self, target: &str, goal: &str) -> BTreeSet<Sign> {
        let mut signs: BTreeMap<&str, BTreeSet<Sign>> = BTreeMap::new();
        signs.insert(target, BTreeSet::from([Sign::Increasing]));
        for v in &self.topo_order {
            if v == target {
                continue;
            }
            let eq = &self.equations[v];
            let mut acc = BTreeSet::new();
            for (i, input) in eq.inputs.iter().enumerate() {
                if let Some(s) = signs.get(input.as_str()) {
                    acc.extend(s.iter().map(|s| s.compose(eq.sign(i))));
                }
            }
            if !acc.is_empty() {
                signs.insert(v, acc);
            }
        }
        signs.remove(goal).unwrap_or_default()
    }

    /// Smallest `v` in `range` such that, with `target := v` and the other
    /// exogenous variables taken from `baseline`, `goal >= threshold`.
    /// Bisection stops at `1e-6` of the range width.
    pub fn derive_bound(
        &self,
        goal: &str,
        threshold: f64,
        target: &str,
        range: (f64, f64),
        baseline: &Assignment,
    ) -> Result<f64, ScmError> {
        const REL_TOL: f64 = 1e-6;
        for v in [goal, target] {
            if !self.contains(v) {
                return Err(ScmError::UnknownVariable(v.to_owned()));
            }
        }
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(ScmError::InvalidRange(lo, hi));
        }
        if self.path_signs(target, goal).contains(&Sign::Decreasing) {
            return Err(ScmError::NonMonotonePath {
                goal: goal.to_owned(),
                target: target.to_owned(),
            });
        }
        let goal_at = |v: f64| -> Result<f64, ScmError> {
            let scm = self.intervene(target, v)?;
            Ok(scm.evaluate(baseline)?[goal])
        };
        if goal_at(hi)? < threshold {
            return Err(ScmError::Unsatisfiable {
                goal: goal.to_owned(),
                threshold,
            });
        }
        if goal_at(lo)? >= threshold {
            return Ok(lo);
        }
        let tol = REL_TOL * (hi - lo);
        let (mut below, mut above) = (lo, hi);
        while above - below > tol {
            let mid = below + (above - below) / 2.0;
            if goal_at(mid)? >= threshold {
                above = mid;
            } else {
                below = mid;
            }
        }
        Ok(above)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_model() -> Scm {
        build_scm(vec![
            StructuralEquation::new("acc", &["quality", "timeliness"], FunctionKind::Min),
            StructuralEquation::new("timeliness", &["delay"], FunctionKind::Inverse { scale: 1.0 }),
        ])
        .unwrap()
    }

    fn assign(pairs: &[(&str, f64)]) -> Assignment {
        pairs.iter().map(|(k, v)| ((*k).to_owned(), *v)).collect()
    }

    #[test]
    fn builds_dag_with_exogenous() {
        let scm = min_model();
        let exo: Vec<_> = scm.exogenous().iter().map(String::as_str).collect();
        assert_eq!(exo, ["delay", "quality"]);
        assert_eq!(scm.topo_order(), ["timeliness", "acc"]);
    }

    #[test]
    fn empty_model() {
        let scm = build_scm(vec![]).unwrap();
        assert!(scm.exogenous().is_empty());
        assert!(scm.topo_order().is_empty());
        assert!(scm.evaluate(&Assignment::new()).unwrap().is_empty());
    }

    #[test]
    fn two_cycle_and_duplicate() {
        let lin = || FunctionKind::Linear {
            coefficients: vec![1.0],
            intercept: 0.0,
        };
        assert!(matches!(
            build_scm(vec![
                StructuralEquation::new("a", &["b"], lin()),
                StructuralEquation::new("b", &["a"], lin()),
            ]),
            Err(ScmError::CycleDetected(_))
        ));
        assert_eq!(
            build_scm(vec![
                StructuralEquation::new("a", &["x"], lin()),
                StructuralEquation::new("a", &["y"], lin()),
            ]),
            Err(ScmError::DuplicateDefinition("a".into()))
        );
    }

    #[test]
    fn declared_sign_is_checked() {
        let mut eq = StructuralEquation::new("t", &["d"], FunctionKind::ExpDecay { rate: 1.0 });
        eq.signs = vec![Sign::Increasing];
        assert!(matches!(build_scm(vec![eq]), Err(ScmError::MonotonicityViolation { .. })));
    }

    #[test]
    fn evaluation_examples() {
        let id = build_scm(vec![StructuralEquation::new(
            "y",
            &["x"],
            FunctionKind::Linear {
                coefficients: vec![1.0],
                intercept: 0.0,
            },
        )])
        .unwrap();
        assert_eq!(id.evaluate(&assign(&[("x", 3.5)])).unwrap()["y"], 3.5);

        let out = min_model().evaluate(&assign(&[("quality", 0.9), ("delay", 1.0)])).unwrap();
        assert_eq!(out["acc"], 0.5);

        let chain = build_scm(vec![
            StructuralEquation::new(
                "y",
                &["x"],
                FunctionKind::Linear {
                    coefficients: vec![2.0],
                    intercept: 0.0,
                },
            ),
            StructuralEquation::new(
                "z",
                &["y"],
                FunctionKind::Linear {
                    coefficients: vec![1.0],
                    intercept: 1.0,
                },
            ),
        ])
        .unwrap();
        assert_eq!(chain.evaluate(&assign(&[("x", 2.0)])).unwrap()["z"], 5.0);

        assert_eq!(
            min_model().evaluate(&assign(&[("quality", 0.9)])),
            Err(ScmError::MissingExogenous("delay".into()))
        );
    }

    #[test]
    fn exogenous_intervention_equals_assignment() {
        let scm = min_model();
        let base = assign(&[("quality", 0.6), ("delay", 0.5)]);
        let set = scm.evaluate(&assign(&[("quality", 0.3), ("delay", 0.5)])).unwrap();
        let done = scm.intervene("quality", 0.3).unwrap().evaluate(&base).unwrap();
        assert_eq!(set, done);
    }

    #[test]
    fn intervention_severs_delay() {
        let cut = min_model().intervene("timeliness", 1.0).unwrap();
        let a = cut.evaluate(&assign(&[("quality", 0.7), ("delay", 0.1)])).unwrap();
        let b = cut.evaluate(&assign(&[("quality", 0.7), ("delay", 9.0)])).unwrap();
        assert_eq!(a["acc"], b["acc"]);
        assert_eq!(a["acc"], 0.7);
    }

    #[test]
    fn clamped_output() {
        let cut = min_model().intervene("acc", 0.8).unwrap();
        for (q, d) in [(0.0, 0.0), (1.0, 5.0), (0.3, 0.2)] {
            assert_eq!(cut.evaluate(&assign(&[("quality", q), ("delay", d)])).unwrap()["acc"], 0.8);
        }
        assert_eq!(min_model().intervene("nope", 1.0), Err(ScmError::UnknownVariable("nope".into())));
    }

    #[test]
    fn bound_examples() {
        let id = build_scm(vec![StructuralEquation::new(
            "acc",
            &["quality"],
            FunctionKind::Linear {
                coefficients: vec![1.0],
                intercept: 0.0,
            },
        )])
        .unwrap();
        let v = id.derive_bound("acc", 0.8, "quality", (0.0, 1.0), &Assignment::new()).unwrap();
        assert!((v - 0.8).abs() <= 1e-6);

        let scm = min_model();
        let base = assign(&[("delay", 0.25), ("quality", 0.0)]);
        let v = scm.derive_bound("acc", 0.8, "quality", (0.0, 1.0), &base).unwrap();
        assert!((v - 0.8).abs() <= 1e-6, "{v}");
        // Interior bound: satisfied at v, violated a little below.
        let at = |q: f64| scm.intervene("quality", q).unwrap().evaluate(&base).unwrap()["acc"];
        assert!(at(v) >= 0.8);
        assert!(at(v - 1e-5) < 0.8);

        assert!(matches!(
            scm.derive_bound("acc", 0.95, "quality", (0.0, 1.0), &base),
            Err(ScmError::Unsatisfiable { .. })
        ));
    }

    #[test]
    fn decreasing_path_rejected() {
        let scm = min_model();
        assert!(matches!(
            scm.derive_bound("acc", 0.5, "delay", (0.0, 2.0), &assign(&[("quality", 1.0)])),
            Err(ScmError::NonMonotonePath { .. })
        ));
    }

    #[test]
    fn lower_end_already_satisfies() {
        let scm = min_model();
        let base = assign(&[("delay", 0.0)]);
        assert_eq!(scm.derive_bound("acc", 0.5, "quality", (0.6, 1.0), &base).unwrap(), 0.6);
    }
}
