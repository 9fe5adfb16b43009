//! Versioned JSON project files and the bundled example configurations.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificate::FrequencyBudget;
use crate::error::{Error, Result};
use crate::model::{SubsystemId, SwitchedSystemModel};
use crate::signals::{DwellRule, GeneratorPolicy, InitialRule};
use crate::sim::{
    AuditSampler, DynamicsFamily, LinearCoefficients, QuadraticLyapunov, SimOptions, SineCoefficients, DIVERGENCE_GUARD,
};

pub const SCHEMA: &str = "switchcert/v1";

/// Names accepted by [`ProjectConfig::bundled`].
pub const BUNDLED: [&str; 4] = ["coupled-sine", "two-mode", "three-mode", "ten-mode"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: SwitchedSystemModel,
    #[serde(default)]
    pub budget: FrequencyBudget,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub horizon: f64,
    pub seed: u64,
    pub lookahead: usize,
    pub max_backtrack: usize,
    pub max_restarts: usize,
    pub dwell_rule: DwellRule,
    pub initial: InitialRule,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let p = GeneratorPolicy::default();
        GeneratorConfig {
            horizon: 25.0,
            seed: 0,
            lookahead: p.lookahead,
            max_backtrack: p.max_backtrack,
            max_restarts: p.max_restarts,
            dwell_rule: p.dwell_rule,
            initial: p.initial,
        }
    }
}

impl GeneratorConfig {
    pub fn policy(&self) -> GeneratorPolicy {
        GeneratorPolicy {
            lookahead: self.lookahead,
            max_backtrack: self.max_backtrack,
            max_restarts: self.max_restarts,
            dwell_rule: self.dwell_rule,
            initial: self.initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    CoupledSine {
        #[serde(deserialize_with = "id_keys")]
        coefficients: BTreeMap<SubsystemId, SineCoefficients>,
    },
    LinearDiagonal {
        #[serde(deserialize_with = "id_keys")]
        coefficients: BTreeMap<SubsystemId, LinearCoefficients>,
    },
}

/// Subsystem-keyed map with keys written as strings. Needed inside the
/// tagged enum, where buffered content no longer coerces keys to integers.
fn id_keys<'de, D, V>(de: D) -> std::result::Result<BTreeMap<SubsystemId, V>, D::Error>
where
    D: serde::Deserializer<'de>,
    V: Deserialize<'de>,
{
    let raw = BTreeMap::<String, V>::deserialize(de)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|id| (id, v))
                .map_err(|_| serde::de::Error::custom(format!("subsystem id {k:?} is not an integer")))
        })
        .collect()
}

impl FamilyConfig {
    pub fn build(&self) -> Result<DynamicsFamily> {
        match self {
            FamilyConfig::CoupledSine { coefficients } => DynamicsFamily::coupled_sine(coefficients),
            FamilyConfig::LinearDiagonal { coefficients } => DynamicsFamily::linear_diagonal(coefficients),
        }
    }
}

fn default_dt() -> f64 {
    0.01
}

fn default_count() -> usize {
    10
}

fn default_audit_samples() -> usize {
    100_000
}

fn default_guard() -> f64 {
    DIVERGENCE_GUARD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub family: FamilyConfig,
    pub lyapunov: QuadraticLyapunov,
    /// Every coordinate of `x0` is drawn uniformly from this range.
    pub x0_box: [f64; 2],
    /// Input values are drawn uniformly from this range on each grid cell.
    pub input_range: [f64; 2],
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub signals: usize,
    #[serde(default = "default_count")]
    pub initial_states: usize,
    #[serde(default = "default_audit_samples")]
    pub audit_samples: usize,
    #[serde(default = "default_guard")]
    pub divergence_guard: f64,
}

impl SimulationConfig {
    pub fn options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt,
            divergence_guard: self.divergence_guard,
        }
    }

    pub fn audit_sampler(&self, seed: u64) -> AuditSampler {
        AuditSampler {
            state_box: self.x0_box,
            input_box: self.input_range,
            count: self.audit_samples,
            seed,
        }
    }
}

/// Quadratic gain coefficients: `gamma1(r) = k1 r^2`, `gamma2(r) = k2 r^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub k1: f64,
    pub k2: f64,
}

fn check_range(what: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::Config(format!(
            "{what}: expected [lo, hi] with lo <= hi, got {r:?}"
        )));
    }
    Ok(())
}

impl ProjectConfig {
    pub fn new(model: SwitchedSystemModel, budget: FrequencyBudget) -> Self {
        ProjectConfig {
            schema: SCHEMA.into(),
            name: None,
            model,
            budget,
            generator: GeneratorConfig::default(),
            simulation: None,
            gamma: None,
        }
    }

    /// Parses and validates. Syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProjectConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let text = match name {
            "coupled-sine" => include_str!("../configs/coupled_sine.json"),
            "two-mode" => include_str!("../configs/two_mode.json"),
            "three-mode" => include_str!("../configs/three_mode.json"),
            "ten-mode" => include_str!("../configs/ten_mode.json"),
            other => {
                return Err(Error::Config(format!(
                    "no bundled config named {other:?}; available: {}",
                    BUNDLED.join(", ")
                )))
            }
        };
        Self::from_json(text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!(
                "schema {:?} is not supported (expected {SCHEMA:?})",
                self.schema
            )));
        }
        self.budget.validate(&self.model)?;
        let g = &self.generator;
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "generator.horizon must be > 0, got {}",
                g.horizon
            )));
        }
        if let Some(k) = &self.gamma {
            if !(k.k1 >= 0.0 && k.k2 >= 0.0) {
                return Err(Error::Config(format!("gamma coefficients must be >= 0, got {k:?}")));
            }
        }
        if let Some(s) = &self.simulation {
            check_range("simulation.x0_box", s.x0_box)?;
            check_range("simulation.input_range", s.input_range)?;
            if !(s.dt > 0.0 && s.horizon > 0.0 && s.divergence_guard > 0.0) {
                return Err(Error::Config(
                    "simulation.dt, horizon and divergence_guard must be > 0".into(),
                ));
            }
            let family = s.family.build()?;
            for p in self.model.ids() {
                if !family.ids().any(|q| q == p) {
                    return Err(Error::Config(format!(
                        "simulation.family has no coefficients for subsystem {p}"
                    )));
                }
                let w = s
                    .lyapunov
                    .weights(p)
                    .map_err(|_| Error::Config(format!("simulation.lyapunov has no weights for subsystem {p}")))?;
                if w.len() != family.state_dim() {
                    return Err(Error::Config(format!(
                        "simulation.lyapunov weights for {p} have {} entries, the state has {}",
                        w.len(),
                        family.state_dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::evaluate;

    #[test]
    fn bundled_configs_parse_and_round_trip() {
        for name in BUNDLED {
            let cfg = ProjectConfig::bundled(name).unwrap();
            let again = ProjectConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(cfg, again, "{name}");
        }
    }

    #[test]
    fn bundled_configs_are_feasible() {
        for name in BUNDLED {
            let cfg = ProjectConfig::bundled(name).unwrap();
            assert!(evaluate(&cfg.model, &cfg.budget).unwrap().feasible, "{name}");
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = include_str!("../configs/two_mode.json").replace("\"budget\"", "\"budgte\"");
        let err = ProjectConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("unknown field"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn bad_model_reports_location() {
        let text = include_str!("../configs/two_mode.json").replace("\"mu\": 0.8", "\"mu\": -0.8");
        let err = ProjectConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn schema_checked() {
        let text = include_str!("../configs/two_mode.json").replace("switchcert/v1", "switchcert/v0");
        assert!(matches!(ProjectConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_bundled_name() {
        assert!(ProjectConfig::bundled("nope").is_err());
    }

    #[test]
    fn missing_lyapunov_weights() {
        let mut cfg = ProjectConfig::bundled("coupled-sine").unwrap();
        let sim = cfg.simulation.as_mut().unwrap();
        sim.lyapunov = QuadraticLyapunov::new([(1, vec![1.0, 1.0])].into()).unwrap();
        assert!(cfg.validate().is_err());
    }
}
