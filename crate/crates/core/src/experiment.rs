//! Seeded batches: generated class members, sampled initial states and
//! inputs, simulated trajectories and their envelope checks.
//!
//! Every work item draws from its own ChaCha8 stream, so results do not
//! depend on thread count or scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{constants, decay_check, DecayCheck, EnvelopeReport};
use crate::config::{GammaConfig, ProjectConfig, SimulationConfig};
use crate::error::{Error, Result};
use crate::model::SwitchingSignal;
use crate::signals::generate;
use crate::sim::{calibrate_gains, envelope_along, integrate, PiecewiseConstantInput, Trajectory};

/// Seed for item `item` of a batch seeded with `seed`.
pub fn item_seed(seed: u64, item: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item);
    rng.next_u64()
}

/// `n` class members on the generator horizon, signal `i` seeded with
/// `item_seed(seed, i)`.
pub fn generate_signals(cfg: &ProjectConfig, n: usize, seed: u64) -> Result<Vec<SwitchingSignal>> {
    let policy = cfg.generator.policy();
    (0..n)
        .into_par_iter()
        .map(|i| {
            generate(
                &cfg.model,
                &cfg.budget,
                cfg.generator.horizon,
                item_seed(seed, i as u64),
                &policy,
            )
        })
        .collect()
}

fn simulation(cfg: &ProjectConfig) -> Result<&SimulationConfig> {
    cfg.simulation
        .as_ref()
        .ok_or_else(|| Error::Config("the config has no simulation block".into()))
}

/// Gain coefficients from the config, or calibrated from samples when the
/// config has none.
pub fn gains(cfg: &ProjectConfig) -> Result<GammaConfig> {
    if let Some(g) = cfg.gamma {
        return Ok(g);
    }
    let sim = simulation(cfg)?;
    let family = sim.family.build()?;
    let cal = calibrate_gains(&family, &sim.lyapunov, &cfg.model, &sim.audit_sampler(sim.seed))?;
    Ok(GammaConfig { k1: cal.k1, k2: cal.k2 })
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub signal: usize,
    pub state: usize,
    pub x0: Vec<f64>,
    pub trajectory: Trajectory,
    pub envelope: EnvelopeReport,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub signal: usize,
    pub state: usize,
    pub x0: Vec<f64>,
    pub max_norm: f64,
    pub dominated: bool,
    pub worst_margin: f64,
}

impl RunResult {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            signal: self.signal,
            state: self.state,
            x0: self.x0.clone(),
            max_norm: self.max_norm,
            dominated: self.envelope.dominated,
            worst_margin: self.envelope.worst_margin,
        }
    }
}

/// Simulates every signal from `states` initial conditions each. Signals
/// are truncated to the simulation horizon when they are longer.
pub fn simulate_batch(
    cfg: &ProjectConfig,
    signals: &[SwitchingSignal],
    states: usize,
    seed: u64,
    gamma: GammaConfig,
) -> Result<Vec<RunResult>> {
    let sim = simulation(cfg)?;
    let family = sim.family.build()?;
    let k = constants(&cfg.model, &cfg.budget)?;
    let opts = sim.options();
    let jobs: Vec<(usize, usize)> = (0..signals.len())
        .flat_map(|i| (0..states).map(move |j| (i, j)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, j)| {
            let signal = if signals[i].horizon() > sim.horizon {
                signals[i].truncate(sim.horizon)?
            } else {
                signals[i].clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((i as u64) << 32) | j as u64);
            let [lo, hi] = sim.x0_box;
            let x0: Vec<f64> = (0..family.state_dim())
                .map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect();
            let [ulo, uhi] = sim.input_range;
            let input =
                PiecewiseConstantInput::uniform(family.input_dim(), ulo, uhi, sim.dt, signal.horizon(), &mut rng);
            let mut trajectory = integrate(&family, &signal, &input, &x0, &opts).map_err(|e| Error::RunFailed {
                signal: i,
                state: j,
                reason: e.to_string(),
            })?;
            trajectory.evaluate_lyapunov(&sim.lyapunov)?;
            let envelope = envelope_along(&cfg.model, &signal, &k, &trajectory, gamma.k1, gamma.k2)?;
            let max_norm = trajectory.state_norms().into_iter().fold(0.0, f64::max);
            Ok(RunResult {
                signal: i,
                state: j,
                x0,
                trajectory,
                envelope,
                max_norm,
            })
        })
        .collect()
}

/// Decay check with a 0.1 grid on each signal.
pub fn decay_checks(cfg: &ProjectConfig, signals: &[SwitchingSignal]) -> Result<Vec<DecayCheck>> {
    signals
        .par_iter()
        .map(|s| decay_check(&cfg.model, s, &cfg.budget, 0.1))
        .collect()
}
