//! Fixed-step simulation of switched dynamics, quadratic Lyapunov-like
//! functions, and a sampling audit of the dissipation inequality.
//!
//! Integration is classical RK4 on the uniform grid `k * dt` merged with the
//! switching instants, so no step straddles a switch. The input is sampled
//! once per step, at the step midpoint, and held over the four stages; for
//! inputs that are constant on grid cells this is exact.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{envelope_report, EnvelopeInput, EnvelopeReport, ProofConstants};
use crate::error::{Error, Result};
use crate::model::{Edge, SubsystemId, SwitchedSystemModel, SwitchingSignal};

/// Default bound on `|x|` before a run is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e9;

/// Grid points closer than this to a switching instant are merged into it.
const MERGE_TOL: f64 = 1e-12;

type FieldFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type OutputFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
struct Field {
    f: Arc<FieldFn>,
    h: Arc<OutputFn>,
}

/// Vector fields `f_p(x, v)` and output maps `h_p(x)` keyed by subsystem id.
#[derive(Clone)]
pub struct DynamicsFamily {
    state_dim: usize,
    input_dim: usize,
    output_dim: usize,
    fields: BTreeMap<SubsystemId, Field>,
}

impl std::fmt::Debug for DynamicsFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DynamicsFamily")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("ids", &self.fields.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Coefficients of the two-state coupled-sine field
/// `f = (a1 x1 + b1 sin(x1 - x2) + c1 v, a2 x2 + b2 sin(x2 - x1) + c2 v)`,
/// `h = x1 - x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineCoefficients {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
}

/// Diagonal linear field `f = a * x + c v` (elementwise), `h = x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCoefficients {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl DynamicsFamily {
    pub fn new(state_dim: usize, input_dim: usize, output_dim: usize) -> Self {
        DynamicsFamily {
            state_dim,
            input_dim,
            output_dim,
            fields: BTreeMap::new(),
        }
    }

    /// Registers a subsystem after checking dimensions and that the origin is
    /// an equilibrium with zero output.
    pub fn register<F, H>(&mut self, id: SubsystemId, f: F, h: H) -> Result<()>
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        H: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let zx = vec![0.0; self.state_dim];
        let zv = vec![0.0; self.input_dim];
        let f0 = f(&zx, &zv);
        let h0 = h(&zx);
        if f0.len() != self.state_dim || h0.len() != self.output_dim {
            return Err(Error::Dynamics(format!(
                "subsystem {id}: field or output has the wrong dimension"
            )));
        }
        if f0.iter().chain(&h0).any(|v| *v != 0.0) {
            return Err(Error::Dynamics(format!(
                "subsystem {id}: f(0,0) and h(0) must vanish, got {f0:?}, {h0:?}"
            )));
        }
        if self.fields.contains_key(&id) {
            return Err(Error::Dynamics(format!("subsystem {id} registered twice")));
        }
        self.fields.insert(
            id,
            Field {
                f: Arc::new(f),
                h: Arc::new(h),
            },
        );
        Ok(())
    }

    pub fn coupled_sine(coefficients: &BTreeMap<SubsystemId, SineCoefficients>) -> Result<Self> {
        let mut fam = DynamicsFamily::new(2, 1, 1);
        for (&id, k) in coefficients {
            let k = *k;
            fam.register(
                id,
                move |x, v| {
                    let d = x[0] - x[1];
                    vec![
                        k.a[0] * x[0] + k.b[0] * d.sin() + k.c[0] * v[0],
                        k.a[1] * x[1] - k.b[1] * d.sin() + k.c[1] * v[0],
                    ]
                },
                |x| vec![x[0] - x[1]],
            )?;
        }
        Ok(fam)
    }

    pub fn linear_diagonal(coefficients: &BTreeMap<SubsystemId, LinearCoefficients>) -> Result<Self> {
        let dim = coefficients.values().next().map(|k| k.a.len()).unwrap_or(0);
        let mut fam = DynamicsFamily::new(dim, 1, dim);
        for (&id, k) in coefficients {
            if k.a.len() != dim || k.c.len() != dim {
                return Err(Error::Dynamics(format!("subsystem {id}: coefficient length mismatch")));
            }
            let k = k.clone();
            fam.register(
                id,
                move |x, v| {
                    x.iter()
                        .zip(&k.a)
                        .zip(&k.c)
                        .map(|((x, a), c)| a * x + c * v[0])
                        .collect()
                },
                |x| x.to_vec(),
            )?;
        }
        Ok(fam)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn ids(&self) -> impl Iterator<Item = SubsystemId> + '_ {
        self.fields.keys().copied()
    }

    fn field(&self, p: SubsystemId) -> Result<&Field> {
        self.fields.get(&p).ok_or(Error::UnknownSubsystem(p))
    }

    pub fn f(&self, p: SubsystemId, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok((self.field(p)?.f)(x, v))
    }

    pub fn h(&self, p: SubsystemId, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.field(p)?.h)(x))
    }
}

/// Exogenous input `v(t)`.
pub trait Input: Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64) -> Vec<f64>;
}

/// `v(t) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroInput(pub usize);

impl Input for ZeroInput {
    fn dim(&self) -> usize {
        self.0
    }

    fn value(&self, _: f64) -> Vec<f64> {
        vec![0.0; self.0]
    }
}

/// Holds `values[k]` on `[k step, (k+1) step)`; the last value persists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantInput {
    pub step: f64,
    pub values: Vec<Vec<f64>>,
}

impl PiecewiseConstantInput {
    /// Each cell value uniform in `[lo, hi]^dim`, drawn from `rng`.
    pub fn uniform<R: Rng>(dim: usize, lo: f64, hi: f64, step: f64, horizon: f64, rng: &mut R) -> Self {
        let cells = (horizon / step).ceil() as usize + 1;
        let values = (0..cells)
            .map(|_| {
                (0..dim)
                    .map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                    .collect()
            })
            .collect();
        PiecewiseConstantInput { step, values }
    }
}

impl Input for PiecewiseConstantInput {
    fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn value(&self, t: f64) -> Vec<f64> {
        let k = ((t / self.step).floor().max(0.0) as usize).min(self.values.len() - 1);
        self.values[k].clone()
    }
}

/// Wraps a closure as an [`Input`].
pub struct FnInput<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64) -> Vec<f64> + Sync> Input for FnInput<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64) -> Vec<f64> {
        (self.f)(t)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sampled solution of the switched system.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub sigma: Vec<SubsystemId>,
    /// Running `|v|_[0,t]`.
    pub sup_v: Vec<f64>,
    /// Running `|y|_[0,t]`.
    pub sup_y: Vec<f64>,
    /// `V_sigma(t)(x(t))`; empty until [`Trajectory::evaluate_lyapunov`].
    pub lyapunov: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| norm(x)).collect()
    }

    pub fn evaluate_lyapunov(&mut self, lyap: &QuadraticLyapunov) -> Result<()> {
        self.lyapunov = self
            .sigma
            .iter()
            .zip(&self.states)
            .map(|(&p, x)| lyap.eval(p, x))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Columns `t, x1..xd, y1..yp, sigma, V, sup_v, sup_y`; `V` is left empty
    /// when it has not been evaluated.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.states.first().map_or(0, Vec::len);
        let p = self.outputs.first().map_or(0, Vec::len);
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|k| format!("x{k}")));
        header.extend((1..=p).map(|k| format!("y{k}")));
        header.extend(["sigma", "V", "sup_v", "sup_y"].map(String::from));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.times[i].to_string()];
            row.extend(self.states[i].iter().map(f64::to_string));
            row.extend(self.outputs[i].iter().map(f64::to_string));
            row.push(self.sigma[i].to_string());
            row.push(self.lyapunov.get(i).map(f64::to_string).unwrap_or_default());
            row.push(self.sup_v[i].to_string());
            row.push(self.sup_y[i].to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub divergence_guard: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 0.01,
            divergence_guard: DIVERGENCE_GUARD,
        }
    }
}

/// Uniform grid on `[0, horizon]` merged with the switching instants.
pub fn time_grid(signal: &SwitchingSignal, dt: f64) -> Vec<f64> {
    let h = signal.horizon();
    let mut ts: Vec<f64> = signal.instants().to_vec();
    let mut k = 1u64;
    loop {
        let t = k as f64 * dt;
        if t >= h - MERGE_TOL {
            break;
        }
        ts.push(t);
        k += 1;
    }
    ts.push(h);
    ts.sort_by(f64::total_cmp);
    // keep switching instants exactly; drop grid points that crowd them
    let switches = signal.instants();
    let mut out: Vec<f64> = Vec::with_capacity(ts.len());
    for t in ts {
        match out.last() {
            Some(&last) if t - last <= MERGE_TOL => {
                if switches.contains(&t) {
                    *out.last_mut().unwrap() = t;
                }
            }
            _ => out.push(t),
        }
    }
    out
}

fn rk4_step(field: &Field, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
    let k1 = (field.f)(x, v);
    let k2 = (field.f)(&axpy(0.5 * h, &k1), v);
    let k3 = (field.f)(&axpy(0.5 * h, &k2), v);
    let k4 = (field.f)(&axpy(h, &k3), v);
    x.iter()
        .enumerate()
        .map(|(i, x)| x + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrates `x' = f_sigma(t)(x, v(t))` from `x0` over the signal's horizon.
pub fn integrate(
    family: &DynamicsFamily,
    signal: &SwitchingSignal,
    input: &dyn Input,
    x0: &[f64],
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", opts.dt)));
    }
    if x0.len() != family.state_dim() {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} entries, the family has {} states",
            x0.len(),
            family.state_dim()
        )));
    }
    if input.dim() != family.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "input has dimension {}, the family expects {}",
            input.dim(),
            family.input_dim()
        )));
    }
    for &p in signal.indices() {
        family.field(p)?;
    }
    let grid = time_grid(signal, opts.dt);
    let mut traj = Trajectory::default();
    let mut x = x0.to_vec();
    let mut sup_v = norm(&input.value(0.0));
    let mut sup_y = 0.0f64;
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], sup_v: f64, sup_y: &mut f64| -> Result<()> {
        let p = signal.active_index(t)?;
        let y = family.h(p, x)?;
        *sup_y = sup_y.max(norm(&y));
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.outputs.push(y);
        traj.sigma.push(p);
        traj.sup_v.push(sup_v);
        traj.sup_y.push(*sup_y);
        Ok(())
    };
    record(&mut traj, grid[0], &x, sup_v, &mut sup_y)?;
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = 0.5 * (t0 + t1);
        let p = signal.active_index(mid)?;
        let v = input.value(mid);
        sup_v = sup_v.max(norm(&v));
        x = rk4_step(family.field(p)?, &x, &v, t1 - t0);
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { t: t1 });
        }
        let n = norm(&x);
        if n > opts.divergence_guard {
            return Err(Error::Diverged { t: t1, norm: n });
        }
        record(&mut traj, t1, &x, sup_v, &mut sup_y)?;
    }
    Ok(traj)
}

/// `V_p(x) = 0.5 sum_k w_{p,k} x_k^2` with positive diagonal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<SubsystemId, Vec<f64>>",
    into = "BTreeMap<SubsystemId, Vec<f64>>"
)]
pub struct QuadraticLyapunov {
    weights: BTreeMap<SubsystemId, Vec<f64>>,
}

impl TryFrom<BTreeMap<SubsystemId, Vec<f64>>> for QuadraticLyapunov {
    type Error = Error;

    fn try_from(weights: BTreeMap<SubsystemId, Vec<f64>>) -> Result<Self> {
        QuadraticLyapunov::new(weights)
    }
}

impl From<QuadraticLyapunov> for BTreeMap<SubsystemId, Vec<f64>> {
    fn from(l: QuadraticLyapunov) -> Self {
        l.weights
    }
}

impl QuadraticLyapunov {
    pub fn new(weights: BTreeMap<SubsystemId, Vec<f64>>) -> Result<Self> {
        let dim = weights.values().next().map(Vec::len);
        for (p, w) in &weights {
            if Some(w.len()) != dim || w.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "Lyapunov weights for {p} have the wrong length"
                )));
            }
            if w.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "Lyapunov weights for {p} must be positive"
                )));
            }
        }
        Ok(QuadraticLyapunov { weights })
    }

    pub fn weights(&self, p: SubsystemId) -> Result<&[f64]> {
        self.weights
            .get(&p)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownSubsystem(p))
    }

    pub fn ids(&self) -> impl Iterator<Item = SubsystemId> + '_ {
        self.weights.keys().copied()
    }

    pub fn eval(&self, p: SubsystemId, x: &[f64]) -> Result<f64> {
        let w = self.weights(p)?;
        Ok(0.5 * w.iter().zip(x).map(|(w, x)| w * x * x).sum::<f64>())
    }

    pub fn gradient(&self, p: SubsystemId, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.weights(p)?.iter().zip(x).map(|(w, x)| w * x).collect())
    }

    /// Coefficient `a` of the upper comparison function `a r^2`.
    pub fn upper_coefficient(&self) -> f64 {
        0.5 * self.weights.values().flatten().copied().fold(0.0, f64::max)
    }

    /// Coefficient `a` of the lower comparison function `a r^2`.
    pub fn lower_coefficient(&self) -> f64 {
        0.5 * self.weights.values().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Smallest `mu` with `V_q <= mu V_p`: `max_k w_{q,k} / w_{p,k}`.
pub fn mu_from_quadratic(lyap: &QuadraticLyapunov, (p, q): Edge) -> Result<f64> {
    let wp = lyap.weights(p)?;
    let wq = lyap.weights(q)?;
    Ok(wq.iter().zip(wp).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max))
}

/// Where and how many points the audit samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSampler {
    /// Every state coordinate is drawn from this range.
    pub state_box: [f64; 2],
    /// Every input coordinate is drawn from this range.
    pub input_box: [f64; 2],
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemAudit {
    pub id: SubsystemId,
    pub lambda: f64,
    pub worst_margin: f64,
    pub worst_state: Vec<f64>,
    pub worst_input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub k1: f64,
    pub k2: f64,
    pub subsystems: Vec<SubsystemAudit>,
    /// Every sampled margin is non-positive.
    pub passed: bool,
}

/// `grad V_p . f_p + lambda_p V_p`, the part of the margin without gains.
fn drift(
    family: &DynamicsFamily,
    lyap: &QuadraticLyapunov,
    p: SubsystemId,
    lambda: f64,
    x: &[f64],
    v: &[f64],
) -> Result<f64> {
    let g = lyap.gradient(p, x)?;
    let f = family.f(p, x, v)?;
    Ok(g.iter().zip(&f).map(|(g, f)| g * f).sum::<f64>() + lambda * lyap.eval(p, x)?)
}

/// `grad V_p . f_p + lambda_p V_p - k1 |v|^2 - k2 |h_p(x)|^2`.
pub fn dissipation_margin(
    family: &DynamicsFamily,
    lyap: &QuadraticLyapunov,
    p: SubsystemId,
    lambda: f64,
    k: (f64, f64),
    x: &[f64],
    v: &[f64],
) -> Result<f64> {
    let y = family.h(p, x)?;
    let nv = norm(v);
    let ny = norm(&y);
    Ok(drift(family, lyap, p, lambda, x, v)? - k.0 * nv * nv - k.1 * ny * ny)
}

fn sample_point(rng: &mut ChaCha8Rng, dim: usize, range: [f64; 2]) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            if range[1] > range[0] {
                rng.gen_range(range[0]..=range[1])
            } else {
                range[0]
            }
        })
        .collect()
}

fn sampler_rng(seed: u64, p: SubsystemId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p as u64);
    rng
}

/// Worst sampled margin per subsystem for gains `k1 r^2`, `k2 r^2`.
///
/// A positive worst margin is a counterexample for the given gains; a
/// non-positive one is evidence, not proof, on the sampled box.
pub fn dissipation_audit(
    family: &DynamicsFamily,
    lyap: &QuadraticLyapunov,
    model: &SwitchedSystemModel,
    k1: f64,
    k2: f64,
    sampler: &AuditSampler,
) -> Result<AuditReport> {
    let mut subsystems = Vec::new();
    for spec in model.subsystems() {
        let p = spec.id;
        let mut rng = sampler_rng(sampler.seed, p);
        let mut worst = SubsystemAudit {
            id: p,
            lambda: spec.lambda,
            worst_margin: f64::NEG_INFINITY,
            worst_state: vec![],
            worst_input: vec![],
        };
        for _ in 0..sampler.count {
            let x = sample_point(&mut rng, family.state_dim(), sampler.state_box);
            let v = sample_point(&mut rng, family.input_dim(), sampler.input_box);
            let m = dissipation_margin(family, lyap, p, spec.lambda, (k1, k2), &x, &v)?;
            if m > worst.worst_margin {
                worst.worst_margin = m;
                worst.worst_state = x;
                worst.worst_input = v;
            }
        }
        subsystems.push(worst);
    }
    Ok(AuditReport {
        k1,
        k2,
        passed: subsystems.iter().all(|s| s.worst_margin <= 0.0),
        subsystems,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCalibration {
    /// Smallest sampled `k2` (zero input), before the safety factor.
    pub raw_k2: f64,
    /// Smallest sampled `k1` given the final `k2`, before the safety factor.
    pub raw_k1: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Safety factor applied to the sampled gain coefficients.
pub const GAIN_SAFETY: f64 = 2.0;

/// Estimates `k2` from zero-input samples, then `k1` with that `k2` fixed,
/// doubling each. The gains are shared by all subsystems.
pub fn calibrate_gains(
    family: &DynamicsFamily,
    lyap: &QuadraticLyapunov,
    model: &SwitchedSystemModel,
    sampler: &AuditSampler,
) -> Result<GainCalibration> {
    let zero_v = vec![0.0; family.input_dim()];
    let mut raw_k2 = 0.0f64;
    for spec in model.subsystems() {
        let mut rng = sampler_rng(sampler.seed, spec.id);
        for _ in 0..sampler.count {
            let x = sample_point(&mut rng, family.state_dim(), sampler.state_box);
            let _ = sample_point(&mut rng, family.input_dim(), sampler.input_box);
            let y = norm(&family.h(spec.id, &x)?);
            if y > 1e-9 {
                raw_k2 = raw_k2.max(drift(family, lyap, spec.id, spec.lambda, &x, &zero_v)? / (y * y));
            }
        }
    }
    let k2 = GAIN_SAFETY * raw_k2;
    let mut raw_k1 = 0.0f64;
    for spec in model.subsystems() {
        let mut rng = sampler_rng(sampler.seed, spec.id);
        for _ in 0..sampler.count {
            let x = sample_point(&mut rng, family.state_dim(), sampler.state_box);
            let v = sample_point(&mut rng, family.input_dim(), sampler.input_box);
            let nv = norm(&v);
            if nv > 1e-9 {
                let rest = dissipation_margin(family, lyap, spec.id, spec.lambda, (0.0, k2), &x, &v)?;
                raw_k1 = raw_k1.max(rest / (nv * nv));
            }
        }
    }
    Ok(GainCalibration {
        raw_k2,
        raw_k1,
        k1: GAIN_SAFETY * raw_k1,
        k2,
    })
}

/// Envelope check of a trajectory with quadratic gains `k1 r^2`, `k2 r^2`.
/// The trajectory must carry Lyapunov values.
pub fn envelope_along(
    model: &SwitchedSystemModel,
    signal: &SwitchingSignal,
    constants: &ProofConstants,
    traj: &Trajectory,
    k1: f64,
    k2: f64,
) -> Result<EnvelopeReport> {
    if traj.lyapunov.len() != traj.len() {
        return Err(Error::InvalidArgument("trajectory has no Lyapunov values".into()));
    }
    let points: Vec<_> = (0..traj.len())
        .map(|i| EnvelopeInput {
            t: traj.times[i],
            v: traj.lyapunov[i],
            g1: k1 * traj.sup_v[i] * traj.sup_v[i],
            g2: k2 * traj.sup_y[i] * traj.sup_y[i],
        })
        .collect();
    envelope_report(model, signal, constants, &points)
}
