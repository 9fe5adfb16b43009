//! Switched-system specifications.
//!
//! A [`SwitchedSystemModel`] carries the index set `P` with per-subsystem
//! decay/growth rates and dwell windows, and the admissible transition set
//! `E(P)` with the comparison factors `mu_pq` linking neighbouring
//! Lyapunov-like functions (`V_q <= mu_pq V_p`).
//!
//! Edges are split by the sign of `ln mu_pq`:
//!
//! ```text
//! E_minus = { ln mu < 0 }     (switch shrinks V)
//! E_plus  = { ln mu > 0 }     (switch inflates V)
//! E_zero  = { |ln mu| < ZERO_TOL }
//! ```
//!
//! `E_zero` edges contribute nothing to any weighted sum but still count as
//! switches, which keeps the edge-count conservation identity exact.

mod signal;

pub use signal::{count, CountingResult, SwitchingSignal};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subsystem identifier `p`.
pub type SubsystemId = u32;

/// Ordered pair `(from, to)` of subsystem ids.
pub type Edge = (SubsystemId, SubsystemId);

/// `|ln mu|` below this is treated as `mu = 1`.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityClass {
    Stable,
    Unstable,
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityClass::Stable => f.write_str("stable"),
            StabilityClass::Unstable => f.write_str("unstable"),
        }
    }
}

/// One member of the family: its rate `lambda` and dwell window
/// `[min_dwell, max_dwell]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub id: SubsystemId,
    pub class: StabilityClass,
    /// Positive for stable subsystems, negative for unstable ones.
    pub lambda: f64,
    pub min_dwell: f64,
    pub max_dwell: f64,
}

impl SubsystemSpec {
    /// Builds a spec, deriving the class from the sign of `lambda`.
    pub fn new(id: SubsystemId, lambda: f64, min_dwell: f64, max_dwell: f64) -> Result<Self> {
        let class = if lambda > 0.0 {
            StabilityClass::Stable
        } else {
            StabilityClass::Unstable
        };
        let spec = SubsystemSpec {
            id,
            class,
            lambda,
            min_dwell,
            max_dwell,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidSubsystem {
            id: self.id,
            reason: reason.to_string(),
        };
        if !self.lambda.is_finite() || self.lambda == 0.0 {
            return Err(bad("lambda must be finite and non-zero"));
        }
        match self.class {
            StabilityClass::Stable if self.lambda < 0.0 => return Err(bad("stable subsystem needs lambda > 0")),
            StabilityClass::Unstable if self.lambda > 0.0 => return Err(bad("unstable subsystem needs lambda < 0")),
            _ => {}
        }
        if !(self.min_dwell.is_finite() && self.min_dwell > 0.0) {
            return Err(bad("min_dwell must be > 0"));
        }
        if !(self.max_dwell.is_finite() && self.max_dwell >= self.min_dwell) {
            return Err(bad("max_dwell must be finite and >= min_dwell"));
        }
        Ok(())
    }

    pub fn is_stable(&self) -> bool {
        self.class == StabilityClass::Stable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub from: SubsystemId,
    pub to: SubsystemId,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    Minus,
    Plus,
    Zero,
}

impl EdgeClass {
    pub fn of(mu: f64) -> Self {
        let l = mu.ln();
        if l.abs() < ZERO_TOL {
            EdgeClass::Zero
        } else if l < 0.0 {
            EdgeClass::Minus
        } else {
            EdgeClass::Plus
        }
    }
}

/// `(E_minus, E_plus, E_zero)`, each sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgePartition {
    pub minus: Vec<Edge>,
    pub plus: Vec<Edge>,
    pub zero: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    subsystems: Vec<SubsystemSpec>,
    #[serde(default)]
    edges: Vec<TransitionSpec>,
}

/// Index set, rates, dwell windows and admissible transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct SwitchedSystemModel {
    subsystems: BTreeMap<SubsystemId, SubsystemSpec>,
    edges: BTreeMap<Edge, f64>,
}

impl TryFrom<ModelRepr> for SwitchedSystemModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        SwitchedSystemModel::new(r.subsystems, r.edges)
    }
}

impl From<SwitchedSystemModel> for ModelRepr {
    fn from(m: SwitchedSystemModel) -> Self {
        ModelRepr {
            subsystems: m.subsystems.into_values().collect(),
            edges: m
                .edges
                .into_iter()
                .map(|((from, to), mu)| TransitionSpec { from, to, mu })
                .collect(),
        }
    }
}

impl SwitchedSystemModel {
    pub fn new(
        subsystems: impl IntoIterator<Item = SubsystemSpec>,
        edges: impl IntoIterator<Item = TransitionSpec>,
    ) -> Result<Self> {
        let mut subs = BTreeMap::new();
        for s in subsystems {
            s.validate()?;
            let id = s.id;
            if subs.insert(id, s).is_some() {
                return Err(Error::InvalidSubsystem {
                    id,
                    reason: "duplicate id".into(),
                });
            }
        }
        if subs.is_empty() {
            return Err(Error::InvalidArgument("model has no subsystems".into()));
        }
        let mut map = BTreeMap::new();
        for e in edges {
            let bad = |reason: &str| Error::InvalidTransition {
                from: e.from,
                to: e.to,
                reason: reason.to_string(),
            };
            if e.from == e.to {
                return Err(bad("self-loops are not switches"));
            }
            if !subs.contains_key(&e.from) || !subs.contains_key(&e.to) {
                return Err(bad("endpoint is not a subsystem"));
            }
            if !(e.mu.is_finite() && e.mu > 0.0) {
                return Err(bad("mu must be finite and > 0"));
            }
            if map.insert((e.from, e.to), e.mu).is_some() {
                return Err(bad("duplicate edge"));
            }
        }
        Ok(SwitchedSystemModel {
            subsystems: subs,
            edges: map,
        })
    }

    pub fn subsystem(&self, id: SubsystemId) -> Option<&SubsystemSpec> {
        self.subsystems.get(&id)
    }

    pub fn require(&self, id: SubsystemId) -> Result<&SubsystemSpec> {
        self.subsystem(id).ok_or(Error::UnknownSubsystem(id))
    }

    pub fn subsystems(&self) -> impl Iterator<Item = &SubsystemSpec> {
        self.subsystems.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = SubsystemId> + '_ {
        self.subsystems.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    /// `P_S`, sorted.
    pub fn stable_ids(&self) -> Vec<SubsystemId> {
        self.subsystems().filter(|s| s.is_stable()).map(|s| s.id).collect()
    }

    /// `P_U`, sorted.
    pub fn unstable_ids(&self) -> Vec<SubsystemId> {
        self.subsystems().filter(|s| !s.is_stable()).map(|s| s.id).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.edges.iter().map(|(&e, &mu)| (e, mu))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn mu(&self, from: SubsystemId, to: SubsystemId) -> Option<f64> {
        self.edges.get(&(from, to)).copied()
    }

    pub fn has_edge(&self, from: SubsystemId, to: SubsystemId) -> bool {
        self.edges.contains_key(&(from, to))
    }

    /// Targets reachable by one admissible switch from `from`.
    pub fn successors(&self, from: SubsystemId) -> impl Iterator<Item = SubsystemId> + '_ {
        self.edges
            .range((from, SubsystemId::MIN)..=(from, SubsystemId::MAX))
            .map(|(&(_, to), _)| to)
    }

    pub fn edge_class(&self, from: SubsystemId, to: SubsystemId) -> Option<EdgeClass> {
        self.mu(from, to).map(EdgeClass::of)
    }

    /// Splits `E(P)` into `E_minus`, `E_plus` and `E_zero`.
    pub fn classify_edges(&self) -> EdgePartition {
        let mut part = EdgePartition::default();
        for (e, mu) in self.edges() {
            match EdgeClass::of(mu) {
                EdgeClass::Minus => part.minus.push(e),
                EdgeClass::Plus => part.plus.push(e),
                EdgeClass::Zero => part.zero.push(e),
            }
        }
        part
    }

    /// `delta_min = min_p delta_p`.
    pub fn min_dwell(&self) -> f64 {
        self.subsystems().map(|s| s.min_dwell).fold(f64::INFINITY, f64::min)
    }

    /// `Delta_max = max_p Delta_p`.
    pub fn max_dwell(&self) -> f64 {
        self.subsystems().map(|s| s.max_dwell).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Ids appearing in the model, as a set (handy for key checks).
    pub fn id_set(&self) -> BTreeSet<SubsystemId> {
        self.subsystems.keys().copied().collect()
    }

    /// Returns a copy with subsystem ids renamed through `map`.
    ///
    /// `map` must be injective on the model's ids.
    pub fn relabel(&self, map: impl Fn(SubsystemId) -> SubsystemId) -> Result<Self> {
        let subs = self.subsystems().map(|s| SubsystemSpec {
            id: map(s.id),
            ..s.clone()
        });
        let edges = self.edges().map(|((f, t), mu)| TransitionSpec {
            from: map(f),
            to: map(t),
            mu,
        });
        SwitchedSystemModel::new(subs.collect::<Vec<_>>(), edges.collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_mode() -> SwitchedSystemModel {
        let subs = vec![
            SubsystemSpec::new(1, 1.75, 1.0, 2.0).unwrap(),
            SubsystemSpec::new(2, 1.75, 1.0, 1.5).unwrap(),
            SubsystemSpec::new(3, -2.1667, 1.5, 2.0).unwrap(),
            SubsystemSpec::new(4, -2.1667, 1.2, 1.5).unwrap(),
        ];
        let e = |from, to, mu| TransitionSpec { from, to, mu };
        let edges = vec![
            e(1, 2, 1.0),
            e(1, 4, 1.0),
            e(2, 1, 1.0),
            e(2, 3, 1.0),
            e(3, 4, 1.0),
            e(4, 1, 1.25),
        ];
        SwitchedSystemModel::new(subs, edges).unwrap()
    }

    #[test]
    fn four_mode_edges_classify() {
        let part = four_mode().classify_edges();
        assert!(part.minus.is_empty());
        assert_eq!(part.plus, vec![(4, 1)]);
        assert_eq!(part.zero, vec![(1, 2), (1, 4), (2, 1), (2, 3), (3, 4)]);
    }

    #[test]
    fn two_mode_edges_classify() {
        let m = SwitchedSystemModel::new(
            vec![
                SubsystemSpec::new(1, 1.25, 3.4, 4.0).unwrap(),
                SubsystemSpec::new(2, -0.5, 2.0, 3.5).unwrap(),
            ],
            vec![
                TransitionSpec {
                    from: 1,
                    to: 2,
                    mu: 1.25,
                },
                TransitionSpec {
                    from: 2,
                    to: 1,
                    mu: 0.8,
                },
            ],
        )
        .unwrap();
        let part = m.classify_edges();
        assert_eq!(part.plus, vec![(1, 2)]);
        assert_eq!(part.minus, vec![(2, 1)]);
        assert!(part.zero.is_empty());
    }

    #[test]
    fn near_unit_mu_is_zero_class() {
        assert_eq!(EdgeClass::of(1.0 + 1e-14), EdgeClass::Zero);
        assert_eq!(EdgeClass::of(1.0 + 1e-9), EdgeClass::Plus);
        assert_eq!(EdgeClass::of(1.0 - 1e-9), EdgeClass::Minus);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SubsystemSpec::new(1, 0.0, 1.0, 2.0).is_err());
        assert!(SubsystemSpec::new(1, 1.0, 0.0, 2.0).is_err());
        assert!(SubsystemSpec::new(1, 1.0, 2.0, 1.0).is_err());
        let mismatched = SubsystemSpec {
            id: 1,
            class: StabilityClass::Stable,
            lambda: -1.0,
            min_dwell: 1.0,
            max_dwell: 1.0,
        };
        assert!(mismatched.validate().is_err());

        let one = || vec![SubsystemSpec::new(1, 1.0, 1.0, 2.0).unwrap()];
        let loop_edge = vec![TransitionSpec {
            from: 1,
            to: 1,
            mu: 1.0,
        }];
        assert!(SwitchedSystemModel::new(one(), loop_edge).is_err());
        let dangling = vec![TransitionSpec {
            from: 1,
            to: 9,
            mu: 1.0,
        }];
        assert!(SwitchedSystemModel::new(one(), dangling).is_err());
    }

    #[test]
    fn rejects_duplicate_edges_and_bad_mu() {
        let subs = || {
            vec![
                SubsystemSpec::new(1, 1.0, 1.0, 2.0).unwrap(),
                SubsystemSpec::new(2, 1.0, 1.0, 2.0).unwrap(),
            ]
        };
        let dup = vec![
            TransitionSpec {
                from: 1,
                to: 2,
                mu: 1.0,
            },
            TransitionSpec {
                from: 1,
                to: 2,
                mu: 2.0,
            },
        ];
        assert!(SwitchedSystemModel::new(subs(), dup).is_err());
        let zero_mu = vec![TransitionSpec {
            from: 1,
            to: 2,
            mu: 0.0,
        }];
        assert!(SwitchedSystemModel::new(subs(), zero_mu).is_err());
    }

    #[test]
    fn dwell_extremes_and_successors() {
        let m = four_mode();
        assert_eq!(m.min_dwell(), 1.0);
        assert_eq!(m.max_dwell(), 2.0);
        assert_eq!(m.successors(1).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(m.successors(3).collect::<Vec<_>>(), vec![4]);
        assert_eq!(m.stable_ids(), vec![1, 2]);
        assert_eq!(m.unstable_ids(), vec![3, 4]);
    }

    #[test]
    fn json_round_trip() {
        let m = four_mode();
        let s = serde_json::to_string(&m).unwrap();
        let back: SwitchedSystemModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
