//! The frequency-budget stability certificate.
//!
//! Given a [`FrequencyBudget`] the certificate value is
//!
//! ```text
//! lhs = -(1/Delta_max) * ( sum_{P_S} |lambda_p| rho^S_p delta_p + sum_{E_-} |ln mu_pq| rho^-_pq )
//!       +(1/delta_min) * ( sum_{P_U} |lambda_p| rho^U_p Delta_p + sum_{E_+} |ln mu_pq| rho^+_pq )
//! ```
//!
//! and the budget certifies the class when `lhs < 0`. The objective is linear
//! in the `rho` scalars over a product of capped simplices, so the best
//! budget is found in closed form by [`search_budget`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Edge, EdgeClass, StabilityClass, SubsystemId, SwitchedSystemModel};

/// `lhs` must be below `-FEASIBILITY_TOL` to count as negative.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Largest value the search assigns to a single `rho` (the range is `[0, 1[`).
pub const RHO_MAX: f64 = 1.0 - 1e-9;

const SUM_TOL: f64 = 1e-12;

/// Serde helper for maps keyed by an edge, written as `"p->q"` strings.
pub mod edge_map {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn format_edge((p, q): Edge) -> String {
        format!("{p}->{q}")
    }

    pub fn parse_edge(s: &str) -> std::result::Result<Edge, String> {
        let (p, q) = s
            .split_once("->")
            .ok_or_else(|| format!("edge key `{s}` is not of the form `p->q`"))?;
        let p = p.trim().parse().map_err(|e| format!("edge key `{s}`: {e}"))?;
        let q = q.trim().parse().map_err(|e| format!("edge key `{s}`: {e}"))?;
        Ok((p, q))
    }

    pub fn serialize<S, V>(map: &BTreeMap<Edge, V>, ser: S) -> std::result::Result<S::Ok, S::Error>
    where
        S: Serializer,
        V: Serialize,
    {
        ser.collect_map(map.iter().map(|(k, v)| (format_edge(*k), v)))
    }

    pub fn deserialize<'de, D, V>(de: D) -> std::result::Result<BTreeMap<Edge, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        let raw: BTreeMap<String, V> = BTreeMap::deserialize(de)?;
        raw.into_iter()
            .map(|(k, v)| parse_edge(&k).map(|e| (e, v)).map_err(D::Error::custom))
            .collect()
    }
}

/// The `rho` scalars and the integer offsets `rho~`.
///
/// Missing `rho` keys read as 0 and missing offsets as 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyBudget {
    #[serde(default)]
    pub rho_s: BTreeMap<SubsystemId, f64>,
    #[serde(default)]
    pub rho_u: BTreeMap<SubsystemId, f64>,
    #[serde(default, with = "edge_map")]
    pub rho_minus: BTreeMap<Edge, f64>,
    #[serde(default, with = "edge_map")]
    pub rho_plus: BTreeMap<Edge, f64>,
    #[serde(default)]
    pub rho_tilde_u: BTreeMap<SubsystemId, u32>,
    #[serde(default, with = "edge_map")]
    pub rho_tilde_plus: BTreeMap<Edge, u32>,
}

impl FrequencyBudget {
    pub fn stable(&self, p: SubsystemId) -> f64 {
        self.rho_s.get(&p).copied().unwrap_or(0.0)
    }

    pub fn unstable(&self, p: SubsystemId) -> f64 {
        self.rho_u.get(&p).copied().unwrap_or(0.0)
    }

    pub fn minus(&self, e: Edge) -> f64 {
        self.rho_minus.get(&e).copied().unwrap_or(0.0)
    }

    pub fn plus(&self, e: Edge) -> f64 {
        self.rho_plus.get(&e).copied().unwrap_or(0.0)
    }

    pub fn offset_unstable(&self, p: SubsystemId) -> u32 {
        self.rho_tilde_u.get(&p).copied().unwrap_or(1)
    }

    pub fn offset_plus(&self, e: Edge) -> u32 {
        self.rho_tilde_plus.get(&e).copied().unwrap_or(1)
    }

    /// `rho^S = rho''`, `rho^- = rho''`, `rho^U = rho'`, `rho^+ = rho'` on every key.
    pub fn uniform(model: &SwitchedSystemModel, rho_prime: f64, rho_double_prime: f64) -> Self {
        let part = model.classify_edges();
        FrequencyBudget {
            rho_s: model.stable_ids().into_iter().map(|p| (p, rho_double_prime)).collect(),
            rho_u: model.unstable_ids().into_iter().map(|p| (p, rho_prime)).collect(),
            rho_minus: part.minus.into_iter().map(|e| (e, rho_double_prime)).collect(),
            rho_plus: part.plus.into_iter().map(|e| (e, rho_prime)).collect(),
            ..Default::default()
        }
    }

    /// Checks keys against the model partitions, then the range and sum caps.
    pub fn validate(&self, model: &SwitchedSystemModel) -> Result<()> {
        self.check_keys(model)?;
        self.check_ranges()?;
        let caps = [
            ("sum rho^S", self.rho_s.values().sum::<f64>(), false),
            ("sum rho^U", self.rho_u.values().sum::<f64>(), true),
            ("sum rho^-", self.rho_minus.values().sum::<f64>(), false),
            ("sum rho^+", self.rho_plus.values().sum::<f64>(), false),
        ];
        for (name, sum, strict) in caps {
            let bad = if strict { sum >= 1.0 } else { sum > 1.0 + SUM_TOL };
            if bad {
                let rel = if strict { "< 1" } else { "<= 1" };
                return Err(Error::BudgetInvariant(format!("{name} = {sum} must be {rel}")));
            }
        }
        Ok(())
    }

    fn check_ranges(&self) -> Result<()> {
        let all = self
            .rho_s
            .values()
            .chain(self.rho_u.values())
            .chain(self.rho_minus.values())
            .chain(self.rho_plus.values());
        for &r in all {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::BudgetInvariant(format!("rho = {r} not in [0, 1[")));
            }
        }
        for &k in self.rho_tilde_u.values().chain(self.rho_tilde_plus.values()) {
            if k < 1 {
                return Err(Error::BudgetInvariant("rho~ offsets must be >= 1".into()));
            }
        }
        Ok(())
    }

    fn check_keys(&self, model: &SwitchedSystemModel) -> Result<()> {
        let class_of = |p: SubsystemId| {
            model
                .subsystem(p)
                .map(|s| s.class)
                .ok_or_else(|| Error::BudgetMismatch(format!("subsystem {p} is not in the model")))
        };
        for &p in self.rho_s.keys() {
            if class_of(p)? != StabilityClass::Stable {
                return Err(Error::BudgetMismatch(format!("rho^S given for unstable subsystem {p}")));
            }
        }
        for &p in self.rho_u.keys().chain(self.rho_tilde_u.keys()) {
            if class_of(p)? != StabilityClass::Unstable {
                return Err(Error::BudgetMismatch(format!("rho^U given for stable subsystem {p}")));
            }
        }
        let edge_check = |e: Edge, want: EdgeClass, what: &str| match model.edge_class(e.0, e.1) {
            None => Err(Error::BudgetMismatch(format!(
                "{what} for ({},{}) which is not in E(P)",
                e.0, e.1
            ))),
            Some(c) if c != want => Err(Error::BudgetMismatch(format!(
                "{what} for ({},{}) which is in {c:?} edges",
                e.0, e.1
            ))),
            Some(_) => Ok(()),
        };
        for &e in self.rho_minus.keys() {
            edge_check(e, EdgeClass::Minus, "rho^-")?;
        }
        for &e in self.rho_plus.keys().chain(self.rho_tilde_plus.keys()) {
            edge_check(e, EdgeClass::Plus, "rho^+")?;
        }
        Ok(())
    }
}

/// The four weighted sums inside the certificate, before the `1/Delta_max`
/// and `1/delta_min` factors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateTerms {
    pub stable: f64,
    pub e_minus: f64,
    pub unstable: f64,
    pub e_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub lhs: f64,
    pub feasible: bool,
    pub terms: CertificateTerms,
    pub delta_min: f64,
    #[serde(rename = "Delta_max")]
    pub delta_max: f64,
}

impl CertificateReport {
    /// The decay constant `-lhs` (positive exactly when feasible).
    pub fn decay_rate(&self) -> f64 {
        -self.lhs
    }
}

/// Per-key weights of the four certificate sums.
struct Coefficients {
    stable: Vec<(SubsystemId, f64)>,
    unstable: Vec<(SubsystemId, f64)>,
    minus: Vec<(Edge, f64)>,
    plus: Vec<(Edge, f64)>,
}

fn coefficients(model: &SwitchedSystemModel) -> Coefficients {
    let part = model.classify_edges();
    let ln = |e: Edge| model.mu(e.0, e.1).expect("edge from partition").ln().abs();
    Coefficients {
        stable: model
            .subsystems()
            .filter(|s| s.is_stable())
            .map(|s| (s.id, s.lambda.abs() * s.min_dwell))
            .collect(),
        unstable: model
            .subsystems()
            .filter(|s| !s.is_stable())
            .map(|s| (s.id, s.lambda.abs() * s.max_dwell))
            .collect(),
        minus: part.minus.iter().map(|&e| (e, ln(e))).collect(),
        plus: part.plus.iter().map(|&e| (e, ln(e))).collect(),
    }
}

fn report_from_terms(model: &SwitchedSystemModel, terms: CertificateTerms) -> CertificateReport {
    let delta_min = model.min_dwell();
    let delta_max = model.max_dwell();
    let lhs = -(terms.stable + terms.e_minus) / delta_max + (terms.unstable + terms.e_plus) / delta_min;
    CertificateReport {
        lhs,
        feasible: lhs < -FEASIBILITY_TOL,
        terms,
        delta_min,
        delta_max,
    }
}

/// Evaluates the certificate for `budget`.
pub fn evaluate(model: &SwitchedSystemModel, budget: &FrequencyBudget) -> Result<CertificateReport> {
    budget.validate(model)?;
    let c = coefficients(model);
    let terms = CertificateTerms {
        stable: c.stable.iter().map(|&(p, k)| k * budget.stable(p)).sum(),
        e_minus: c.minus.iter().map(|&(e, k)| k * budget.minus(e)).sum(),
        unstable: c.unstable.iter().map(|&(p, k)| k * budget.unstable(p)).sum(),
        e_plus: c.plus.iter().map(|&(e, k)| k * budget.plus(e)).sum(),
    };
    Ok(report_from_terms(model, terms))
}

/// Result of [`search_budget`].
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetSearch {
    /// A budget meeting the floors with `lhs <= -margin`.
    Feasible {
        budget: FrequencyBudget,
        report: CertificateReport,
    },
    /// The polytope vertex minimising `lhs`; its value is the best achievable.
    Infeasible {
        vertex: FrequencyBudget,
        report: CertificateReport,
    },
}

impl BudgetSearch {
    pub fn report(&self) -> &CertificateReport {
        match self {
            BudgetSearch::Feasible { report, .. } | BudgetSearch::Infeasible { report, .. } => report,
        }
    }

    pub fn budget(&self) -> &FrequencyBudget {
        match self {
            BudgetSearch::Feasible { budget, .. } => budget,
            BudgetSearch::Infeasible { vertex, .. } => vertex,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, BudgetSearch::Feasible { .. })
    }
}

/// Raises keys from their floors, largest coefficient first, until the group
/// cap is used up.
fn fill_group<K: Ord + Copy>(coeffs: &[(K, f64)], floors: &BTreeMap<K, f64>, cap: f64) -> BTreeMap<K, f64> {
    let mut out: BTreeMap<K, f64> = coeffs
        .iter()
        .map(|&(k, _)| (k, floors.get(&k).copied().unwrap_or(0.0)))
        .collect();
    let mut left = cap - out.values().sum::<f64>();
    let mut order: Vec<_> = coeffs.iter().filter(|(_, c)| *c > 0.0).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    for &(k, _) in order {
        if left <= 0.0 {
            break;
        }
        let v = out.get_mut(&k).unwrap();
        let raise = (RHO_MAX - *v).max(0.0).min(left);
        *v += raise;
        left -= raise;
    }
    out
}

fn pinned<K: Ord + Copy>(coeffs: &[(K, f64)], floors: &BTreeMap<K, f64>) -> BTreeMap<K, f64> {
    coeffs
        .iter()
        .map(|&(k, _)| (k, floors.get(&k).copied().unwrap_or(0.0)))
        .collect()
}

/// Finds the budget minimising `lhs` subject to per-key floors.
///
/// `floors` uses the budget shape; its `rho~` offsets are carried over to the
/// result unchanged. Stable and `E_-` scalars are raised as far as the caps
/// allow; unstable and `E_+` scalars stay on their floors.
pub fn search_budget(model: &SwitchedSystemModel, floors: &FrequencyBudget, margin: f64) -> Result<BudgetSearch> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::InvalidArgument(format!("margin {margin} must be >= 0")));
    }
    floors.validate(model).map_err(|e| match e {
        Error::BudgetInvariant(msg) => Error::ContradictoryFloors(msg),
        other => other,
    })?;
    let c = coefficients(model);
    let budget = FrequencyBudget {
        rho_s: fill_group(&c.stable, &floors.rho_s, 1.0),
        rho_minus: fill_group(&c.minus, &floors.rho_minus, 1.0),
        rho_u: pinned(&c.unstable, &floors.rho_u),
        rho_plus: pinned(&c.plus, &floors.rho_plus),
        rho_tilde_u: floors.rho_tilde_u.clone(),
        rho_tilde_plus: floors.rho_tilde_plus.clone(),
    };
    let report = evaluate(model, &budget)?;
    if report.feasible && report.lhs <= -margin {
        Ok(BudgetSearch::Feasible { budget, report })
    } else {
        Ok(BudgetSearch::Infeasible { vertex: budget, report })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Common Lyapunov function (all `mu = 1`).
    CommonLyapunov,
    /// Uniform `rho'` on the growth side, `rho''` on the decay side.
    UniformBudget,
    /// As the uniform-budget condition, with homogeneous rates, comparison factors and dwell windows.
    Homogeneous,
}

impl Condition {
    fn name(self) -> &'static str {
        match self {
            Condition::CommonLyapunov => "common-lyapunov",
            Condition::UniformBudget => "uniform-budget",
            Condition::Homogeneous => "homogeneous",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientOutcome {
    pub holds: bool,
    /// `rho' * growth / (rho'' * decay)`, when the denominator is non-zero.
    pub ratio: Option<f64>,
    /// `delta_min / Delta_max`.
    pub threshold: f64,
    /// The induced budget and its certificate, when the condition holds.
    pub induced: Option<(FrequencyBudget, CertificateReport)>,
}

fn common_value(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut it = values.into_iter();
    let first = it.next()?;
    it.all(|v| (v - first).abs() <= 1e-12 * (1.0 + first.abs()))
        .then_some(first)
}

/// Checks one of the closed-form sufficient conditions for `rho'`, `rho''`.
pub fn sufficient_condition(
    model: &SwitchedSystemModel,
    which: Condition,
    rho_prime: f64,
    rho_double_prime: f64,
) -> Result<SufficientOutcome> {
    for r in [rho_prime, rho_double_prime] {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("rho = {r} not in [0, 1[")));
        }
    }
    let hyp = |reason: String| Error::ConditionHypotheses {
        which: which.name(),
        reason,
    };
    let part = model.classify_edges();
    let n_s = model.stable_ids().len() as f64;
    let n_u = model.unstable_ids().len() as f64;
    let n_minus = part.minus.len() as f64;
    let n_plus = part.plus.len() as f64;
    let ln = |e: &Edge| model.mu(e.0, e.1).unwrap().ln().abs();

    let stable_sum: f64 = model
        .subsystems()
        .filter(|s| s.is_stable())
        .map(|s| s.lambda.abs() * s.min_dwell)
        .sum();
    let unstable_sum: f64 = model
        .subsystems()
        .filter(|s| !s.is_stable())
        .map(|s| s.lambda.abs() * s.max_dwell)
        .sum();

    let (caps_ok, growth, decay) = match which {
        Condition::CommonLyapunov => {
            if !part.minus.is_empty() || !part.plus.is_empty() {
                return Err(hyp("some mu_pq differs from 1".into()));
            }
            (
                n_u * rho_prime < 1.0 && n_s * rho_double_prime <= 1.0,
                unstable_sum,
                stable_sum,
            )
        }
        Condition::UniformBudget | Condition::Homogeneous => {
            let caps = n_u * rho_prime < 1.0
                && n_plus * rho_prime <= 1.0
                && n_s * rho_double_prime <= 1.0
                && n_minus * rho_double_prime <= 1.0;
            let growth = unstable_sum + part.plus.iter().map(ln).sum::<f64>();
            let decay = stable_sum + part.minus.iter().map(ln).sum::<f64>();
            if which == Condition::Homogeneous {
                let stable = model.subsystems().filter(|s| s.is_stable());
                let unstable = model.subsystems().filter(|s| !s.is_stable());
                let checks = [
                    ("lambda on P_S", stable.map(|s| s.lambda).collect::<Vec<_>>()),
                    ("lambda on P_U", unstable.map(|s| s.lambda).collect()),
                    (
                        "mu on E_+",
                        part.plus.iter().map(|e| model.mu(e.0, e.1).unwrap()).collect(),
                    ),
                    (
                        "mu on E_-",
                        part.minus.iter().map(|e| model.mu(e.0, e.1).unwrap()).collect(),
                    ),
                    ("delta_p", model.subsystems().map(|s| s.min_dwell).collect()),
                    ("Delta_p", model.subsystems().map(|s| s.max_dwell).collect()),
                ];
                for (what, vals) in checks {
                    if !vals.is_empty() && common_value(vals).is_none() {
                        return Err(hyp(format!("{what} is not common")));
                    }
                }
            }
            (caps, growth, decay)
        }
    };

    let threshold = model.min_dwell() / model.max_dwell();
    let num = rho_prime * growth;
    let den = rho_double_prime * decay;
    let ratio = (den > 0.0).then(|| num / den);
    // ratio < delta_min / Delta_max, cross-multiplied so den = 0 is handled
    let holds = caps_ok && num * model.max_dwell() < den * model.min_dwell();
    let induced = if holds {
        let budget = FrequencyBudget::uniform(model, rho_prime, rho_double_prime);
        let report = evaluate(model, &budget)?;
        debug_assert!(report.lhs < 0.0, "sufficient condition held but lhs = {}", report.lhs);
        Some((budget, report))
    } else {
        None
    };
    Ok(SufficientOutcome {
        holds,
        ratio,
        threshold,
        induced,
    })
}
