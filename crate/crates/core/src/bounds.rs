//! Decay and gain functions along a switching signal, the constants that
//! bound them uniformly, and envelope dominance checks.
//!
//! With `tau_0 = 0 < tau_1 < ... < tau_N <= t` and `tau_{N+1} := t`:
//!
//! - `psi1(t) = exp(-sum_i lambda_i d_i + sum_{i<N} ln mu_{i,i+1})`
//! - `psi2(t) = sum_i exp(E_i) (1 - exp(-lambda_i d_i)) / lambda_i`, where
//!   `E_i = -sum_{j>i} lambda_j d_j + sum_{i<j<N} ln mu_{j,j+1}`.
//!
//! Everything is accumulated in log space; only the final value is
//! exponentiated.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::certificate::{evaluate, FrequencyBudget};
use crate::error::{Error, Result};
use crate::model::{count, SubsystemId, SwitchedSystemModel, SwitchingSignal};

/// Relative slack used by dominance checks.
pub const DOMINANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofConstants {
    pub c_prime: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_dprime: f64,
    pub cbar1: f64,
    pub cbar2: f64,
    pub ctilde1: f64,
    pub ctilde2: f64,
    pub psi2_bar: f64,
}

impl ProofConstants {
    /// `exp(c1 - c2 t)`.
    pub fn decay_bound(&self, t: f64) -> f64 {
        (self.c1 - self.c2 * t).exp()
    }
}

/// Constants of the uniform bounds. Requires a feasible certificate.
pub fn constants(model: &SwitchedSystemModel, budget: &FrequencyBudget) -> Result<ProofConstants> {
    let report = evaluate(model, budget)?;
    if !report.feasible {
        return Err(Error::NotFeasible { lhs: report.lhs });
    }
    let part = model.classify_edges();
    let ln_mu = |e: &(SubsystemId, SubsystemId)| model.mu(e.0, e.1).expect("partitioned edge").ln().abs();
    let lam = |p: SubsystemId| model.subsystem(p).expect("known id").lambda.abs();

    let mut overshoot = 0.0;
    for p in model.unstable_ids() {
        overshoot += lam(p) * budget.offset_unstable(p) as f64 * model.subsystem(p).unwrap().max_dwell;
    }
    for e in &part.plus {
        overshoot += ln_mu(e) * budget.offset_plus(*e) as f64;
    }
    for p in model.stable_ids() {
        let s = model.subsystem(p).unwrap();
        overshoot += lam(p) * s.min_dwell * (1.0 + budget.stable(p));
    }
    for e in &part.minus {
        overshoot += ln_mu(e) * (1.0 + budget.minus(*e));
    }

    let c2 = -report.lhs;
    let dmin = model.min_dwell();
    let geometric = 1.0 / (c2 * dmin).exp_m1();
    let mut psi2_bar = 0.0;
    for p in model.stable_ids() {
        psi2_bar += overshoot.exp() * geometric / lam(p);
    }
    for p in model.unstable_ids() {
        psi2_bar += overshoot.exp() * (1.0 + geometric) / lam(p);
    }
    Ok(ProofConstants {
        c_prime: overshoot,
        c1: overshoot,
        c2,
        c_dprime: overshoot,
        cbar1: overshoot,
        cbar2: c2,
        ctilde1: overshoot,
        ctilde2: c2,
        psi2_bar,
    })
}

/// Per-segment data up to `t`: `(lambda, duration)` for segments `0..=N`
/// and `ln mu` for the `N` transitions.
struct Prefix {
    lambda: Vec<f64>,
    dwell: Vec<f64>,
    ln_mu: Vec<f64>,
}

fn prefix(model: &SwitchedSystemModel, signal: &SwitchingSignal, t: f64) -> Result<Prefix> {
    if !(t > 0.0 && t <= signal.horizon()) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: signal.horizon(),
        });
    }
    let last = signal.segment_at(t)?;
    let inst = signal.instants();
    let idx = signal.indices();
    let mut lambda = Vec::with_capacity(last + 1);
    let mut dwell = Vec::with_capacity(last + 1);
    let mut ln_mu = Vec::with_capacity(last);
    for i in 0..=last {
        lambda.push(model.require(idx[i])?.lambda);
        let end = if i == last { t } else { inst[i + 1] };
        dwell.push(end - inst[i]);
        if i < last {
            let mu = model
                .mu(idx[i], idx[i + 1])
                .ok_or(Error::MissingEdge(idx[i], idx[i + 1]))?;
            ln_mu.push(mu.ln());
        }
    }
    Ok(Prefix { lambda, dwell, ln_mu })
}

/// `ln psi1(t)`, summed segment by segment.
pub fn ln_psi1(model: &SwitchedSystemModel, signal: &SwitchingSignal, t: f64) -> Result<f64> {
    let pre = prefix(model, signal, t)?;
    let flow: f64 = pre.lambda.iter().zip(&pre.dwell).map(|(l, d)| -l * d).sum();
    let jumps: f64 = pre.ln_mu.iter().sum();
    Ok(flow + jumps)
}

pub fn psi1(model: &SwitchedSystemModel, signal: &SwitchingSignal, t: f64) -> Result<f64> {
    ln_psi1(model, signal, t).map(f64::exp)
}

/// The exponent of `psi1(t)` grouped by stability class and edge class,
/// built from occupation times and transition counts on `]0, t]`.
pub fn psi1_exponent_regrouped(model: &SwitchedSystemModel, signal: &SwitchingSignal, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= signal.horizon()) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: signal.horizon(),
        });
    }
    let c = count(signal, 0.0, t)?;
    let part = model.classify_edges();
    for &(p, q) in c.transitions.keys() {
        if !model.has_edge(p, q) {
            return Err(Error::MissingEdge(p, q));
        }
    }
    let lam = |p: SubsystemId| model.subsystem(p).map(|s| s.lambda.abs()).unwrap_or(0.0);
    let ln_mu = |p: SubsystemId, q: SubsystemId| model.mu(p, q).unwrap().ln().abs();
    let decay_time: f64 = model.stable_ids().iter().map(|&p| lam(p) * c.duration_of(p)).sum();
    let growth_time: f64 = model.unstable_ids().iter().map(|&p| lam(p) * c.duration_of(p)).sum();
    let decay_jump: f64 = part
        .minus
        .iter()
        .map(|&(p, q)| ln_mu(p, q) * c.transitions_of((p, q)) as f64)
        .sum();
    let growth_jump: f64 = part
        .plus
        .iter()
        .map(|&(p, q)| ln_mu(p, q) * c.transitions_of((p, q)) as f64)
        .sum();
    Ok(-decay_time - decay_jump + growth_time + growth_jump)
}

/// `ln((1 - exp(-lambda d)) / lambda)` for `d > 0`, `lambda != 0`.
fn ln_segment_gain(lambda: f64, d: f64) -> f64 {
    let x = lambda * d;
    if lambda > 0.0 {
        (-(-x).exp_m1()).ln() - lambda.ln()
    } else {
        // (exp(|x|) - 1) / |lambda| = exp(|x|) (1 - exp(-|x|)) / |lambda|
        let a = -x;
        a + (-(-a).exp_m1()).ln() - (-lambda).ln()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln psi2(t)` via a backward recurrence on the tail exponent.
pub fn ln_psi2(model: &SwitchedSystemModel, signal: &SwitchingSignal, t: f64) -> Result<f64> {
    let pre = prefix(model, signal, t)?;
    let n = pre.lambda.len() - 1;
    let mut terms = Vec::with_capacity(n + 1);
    let mut tail = 0.0;
    for i in (0..=n).rev() {
        if i < n {
            tail -= pre.lambda[i + 1] * pre.dwell[i + 1];
            if i + 1 < n {
                tail += pre.ln_mu[i + 1];
            }
        }
        if pre.dwell[i] > 0.0 {
            terms.push(tail + ln_segment_gain(pre.lambda[i], pre.dwell[i]));
        }
    }
    Ok(log_sum_exp(&terms))
}

pub fn psi2(model: &SwitchedSystemModel, signal: &SwitchingSignal, t: f64) -> Result<f64> {
    ln_psi2(model, signal, t).map(f64::exp)
}

/// `sum_{i <= N(0,t)} exp(-c (t - tau_i))`.
pub fn geometric_sum(signal: &SwitchingSignal, c: f64, t: f64) -> f64 {
    signal
        .instants()
        .iter()
        .take_while(|&&tau| tau <= t)
        .map(|tau| (-c * (t - tau)).exp())
        .sum()
}

/// `1 + 1/(exp(c delta_min) - 1)`, the uniform bound on [`geometric_sum`].
pub fn geometric_bound(c: f64, min_dwell: f64) -> f64 {
    1.0 + 1.0 / (c * min_dwell).exp_m1()
}

/// Sample times: every switching instant after 0, every multiple of `step`
/// in `]0, horizon]`, and the horizon itself; sorted and deduplicated.
pub fn sample_times(signal: &SwitchingSignal, step: f64) -> Vec<f64> {
    let h = signal.horizon();
    let mut ts: Vec<f64> = signal.instants().iter().copied().filter(|&t| t > 0.0).collect();
    let mut k = 1u64;
    loop {
        let t = k as f64 * step;
        if t > h {
            break;
        }
        ts.push(t);
        k += 1;
    }
    ts.push(h);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub holds: bool,
    /// `min (c1 - c2 t - ln psi1(t))` over the samples.
    pub worst_log_margin: f64,
    pub worst_t: f64,
    pub samples: usize,
}

/// Checks `psi1(t) <= exp(c1 - c2 t)` at every switching instant and on a
/// grid of spacing `step`.
pub fn decay_check(
    model: &SwitchedSystemModel,
    signal: &SwitchingSignal,
    budget: &FrequencyBudget,
    step: f64,
) -> Result<DecayCheck> {
    let k = constants(model, budget)?;
    let times = sample_times(signal, step);
    let mut worst = f64::INFINITY;
    let mut worst_t = f64::NAN;
    for &t in &times {
        let m = k.c1 - k.c2 * t - ln_psi1(model, signal, t)?;
        if m < worst {
            worst = m;
            worst_t = t;
        }
    }
    Ok(DecayCheck {
        holds: worst >= -DOMINANCE_TOL,
        worst_log_margin: worst,
        worst_t,
        samples: times.len(),
    })
}

fn check_gains(g1: f64, g2: f64) -> Result<()> {
    if g1 < 0.0 || g2 < 0.0 || !g1.is_finite() || !g2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gain values must be finite and >= 0, got {g1}, {g2}"
        )));
    }
    Ok(())
}

/// `exp(c1 - c2 t) V0 + (g1 + g2) psi2_bar`, where `g1`, `g2` are the gain
/// functions already evaluated at the running sup-norms of input and output.
pub fn envelope(k: &ProofConstants, v0: f64, g1: f64, g2: f64, t: f64) -> Result<f64> {
    check_gains(g1, g2)?;
    Ok(k.decay_bound(t) * v0 + (g1 + g2) * k.psi2_bar)
}

/// Same as [`envelope`] with the signal-specific `psi1(t)`, `psi2(t)`.
pub fn envelope_exact(
    model: &SwitchedSystemModel,
    signal: &SwitchingSignal,
    v0: f64,
    g1: f64,
    g2: f64,
    t: f64,
) -> Result<f64> {
    check_gains(g1, g2)?;
    Ok(psi1(model, signal, t)? * v0 + (g1 + g2) * psi2(model, signal, t)?)
}

/// One point of a trajectory to test against the envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeInput {
    pub t: f64,
    /// `V_sigma(t)(x(t))`
    pub v: f64,
    /// `gamma1(|v|_[0,t])`
    pub g1: f64,
    /// `gamma2(|y|_[0,t])`
    pub g2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub t: f64,
    pub psi1: f64,
    pub decay_bound: f64,
    pub psi2: f64,
    pub psi2_bar: f64,
    pub envelope: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub samples: Vec<EnvelopeSample>,
    pub dominated: bool,
    /// `min (envelope - V)` over the samples.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub samples: usize,
    pub dominated: bool,
    pub worst_margin: f64,
    pub violations: usize,
}

impl EnvelopeReport {
    pub fn summary(&self) -> EnvelopeSummary {
        EnvelopeSummary {
            samples: self.samples.len(),
            dominated: self.dominated,
            worst_margin: self.worst_margin,
            violations: self.samples.iter().filter(|s| !s.ok).count(),
        }
    }

    /// Columns `t, psi1, decay_bound, psi2, V, envelope, ok`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "psi1", "decay_bound", "psi2", "V", "envelope", "ok"])?;
        for s in &self.samples {
            wr.write_record([
                s.t.to_string(),
                s.psi1.to_string(),
                s.decay_bound.to_string(),
                s.psi2.to_string(),
                s.v.to_string(),
                s.envelope.to_string(),
                s.ok.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Compares each point's `V` against the uniform envelope built from the
/// first point's `V` as `V0`. Points at `t = 0` are compared against
/// `V0 exp(c1)` with `psi1 = 1`, `psi2 = 0`.
pub fn envelope_report(
    model: &SwitchedSystemModel,
    signal: &SwitchingSignal,
    k: &ProofConstants,
    points: &[EnvelopeInput],
) -> Result<EnvelopeReport> {
    let Some(first) = points.first() else {
        return Ok(EnvelopeReport {
            samples: vec![],
            dominated: true,
            worst_margin: f64::INFINITY,
        });
    };
    let v0 = first.v;
    let mut samples = Vec::with_capacity(points.len());
    let mut worst = f64::INFINITY;
    for p in points {
        let (p1, p2) = if p.t > 0.0 {
            (psi1(model, signal, p.t)?, psi2(model, signal, p.t)?)
        } else {
            (1.0, 0.0)
        };
        let env = envelope(k, v0, p.g1, p.g2, p.t)?;
        let margin = env - p.v;
        worst = worst.min(margin);
        samples.push(EnvelopeSample {
            t: p.t,
            psi1: p1,
            decay_bound: k.decay_bound(p.t),
            psi2: p2,
            psi2_bar: k.psi2_bar,
            envelope: env,
            v: p.v,
            ok: margin >= -DOMINANCE_TOL * env.abs().max(1.0),
        });
    }
    Ok(EnvelopeReport {
        dominated: samples.iter().all(|s| s.ok),
        samples,
        worst_margin: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SubsystemSpec, TransitionSpec};
    use proptest::prelude::*;

    fn e(from: SubsystemId, to: SubsystemId, mu: f64) -> TransitionSpec {
        TransitionSpec { from, to, mu }
    }

    fn two_mode() -> SwitchedSystemModel {
        SwitchedSystemModel::new(
            vec![
                SubsystemSpec::new(1, 1.25, 3.0, 4.0).unwrap(),
                SubsystemSpec::new(2, -0.5, 1.0, 2.0).unwrap(),
            ],
            vec![e(1, 2, 1.25), e(2, 1, 0.8)],
        )
        .unwrap()
    }

    /// Direct double loop over the defining sums.
    fn psi2_naive(model: &SwitchedSystemModel, sig: &SwitchingSignal, t: f64) -> f64 {
        let n = sig.segment_at(t).unwrap();
        let inst = sig.instants();
        let idx = sig.indices();
        let end = |i: usize| if i == n { t } else { inst[i + 1] };
        let lam = |i: usize| model.subsystem(idx[i]).unwrap().lambda;
        let mut total = 0.0;
        for i in 0..=n {
            let mut ex = 0.0;
            for j in i + 1..=n {
                ex -= lam(j) * (end(j) - inst[j]);
            }
            for j in i + 1..n {
                ex += model.mu(idx[j], idx[j + 1]).unwrap().ln();
            }
            let d = end(i) - inst[i];
            total += ex.exp() * (1.0 - (-lam(i) * d).exp()) / lam(i);
        }
        total
    }

    #[test]
    fn constant_signal_closed_forms() {
        let m = two_mode();
        let s = SwitchingSignal::constant(1, 3.0).unwrap();
        assert!((psi1(&m, &s, 2.0).unwrap() - (-2.5f64).exp()).abs() < 1e-15);
        let want = (1.0 - (-1.25f64 * 2.0).exp()) / 1.25;
        assert!((psi2(&m, &s, 2.0).unwrap() - want).abs() < 1e-15);
        assert!((psi1(&m, &s, 1e-12).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn alternating_period_exponent() {
        let m = two_mode();
        // (1 for 3.4, 2 for 2) repeated; t at the end of the second period
        let s = SwitchingSignal::from_dwells(1, &[(3.4, 2), (2.0, 1), (3.4, 2)], 2.0).unwrap();
        let t = 10.8;
        let want = 2.0 * (-1.25 * 3.4 + 0.5 * 2.0) + 3.0 * 1.25f64.ln() + 0.8f64.ln() - 1.25f64.ln();
        let got = psi1_exponent_regrouped(&m, &s, t).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        // one full period: 1 -> 2 -> back to 1 at 5.4; the jumps cancel
        let one = psi1_exponent_regrouped(&m, &s, 5.4).unwrap();
        assert!((one - (-1.25 * 3.4 + 0.5 * 2.0)).abs() < 1e-12, "{one}");
        assert!((one - (-3.25)).abs() < 1e-12);
    }

    #[test]
    fn missing_edge_is_reported() {
        let m = SwitchedSystemModel::new(
            vec![
                SubsystemSpec::new(1, 1.0, 1.0, 2.0).unwrap(),
                SubsystemSpec::new(2, 1.0, 1.0, 2.0).unwrap(),
            ],
            vec![e(1, 2, 1.0)],
        )
        .unwrap();
        let s = SwitchingSignal::from_dwells(2, &[(1.0, 1)], 1.0).unwrap();
        assert_eq!(ln_psi1(&m, &s, 1.5), Err(Error::MissingEdge(2, 1)));
        assert_eq!(psi1_exponent_regrouped(&m, &s, 1.5), Err(Error::MissingEdge(2, 1)));
    }

    #[test]
    fn time_range() {
        let m = two_mode();
        let s = SwitchingSignal::constant(1, 3.0).unwrap();
        assert!(psi1(&m, &s, 0.0).is_err());
        assert!(psi2(&m, &s, 3.5).is_err());
    }

    #[test]
    fn constants_need_feasibility() {
        let m = two_mode();
        let b = FrequencyBudget::uniform(&m, 0.9, 0.0);
        assert!(matches!(constants(&m, &b), Err(Error::NotFeasible { .. })));
    }

    #[test]
    fn constants_without_edges_reduce() {
        let m = SwitchedSystemModel::new(
            vec![
                SubsystemSpec::new(1, 2.0, 1.0, 2.0).unwrap(),
                SubsystemSpec::new(2, -1.0, 0.5, 1.0).unwrap(),
            ],
            vec![e(1, 2, 1.0), e(2, 1, 1.0)],
        )
        .unwrap();
        let b = FrequencyBudget {
            rho_s: [(1, 0.5)].into(),
            rho_u: [(2, 0.1)].into(),
            rho_tilde_u: [(2, 2)].into(),
            ..Default::default()
        };
        let k = constants(&m, &b).unwrap();
        let want = 1.0 * 2.0 * 1.0 + 2.0 * 1.0 * 1.5;
        assert!((k.c_prime - want).abs() < 1e-12);
        assert_eq!(k.c1, k.c_prime);
        let lhs = evaluate(&m, &b).unwrap().lhs;
        assert_eq!(k.c2, -lhs);
        assert!(k.psi2_bar.is_finite() && k.psi2_bar > 0.0);
    }

    #[test]
    fn envelope_limits() {
        let k = ProofConstants {
            c_prime: 1.0,
            c1: 1.0,
            c2: 0.5,
            c_dprime: 1.0,
            cbar1: 1.0,
            cbar2: 0.5,
            ctilde1: 1.0,
            ctilde2: 0.5,
            psi2_bar: 3.0,
        };
        assert_eq!(envelope(&k, 0.0, 0.0, 0.0, 4.0).unwrap(), 0.0);
        assert!(envelope(&k, 1.0, 0.0, 0.0, 200.0).unwrap() < 1e-40);
        assert!(envelope(&k, 1.0, -1.0, 0.0, 1.0).is_err());
        assert!((envelope(&k, 0.0, 1.0, 1.0, 1.0).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn sample_times_include_switches() {
        let s = SwitchingSignal::from_dwells(1, &[(0.25, 2)], 0.3).unwrap();
        let ts = sample_times(&s, 0.1);
        assert!(ts.contains(&0.25));
        assert_eq!(*ts.last().unwrap(), 0.55);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn report_csv_header() {
        let m = two_mode();
        let b = FrequencyBudget {
            rho_s: [(1, 0.5)].into(),
            rho_u: [(2, 0.1)].into(),
            rho_minus: [((2, 1), 0.5)].into(),
            rho_plus: [((1, 2), 0.1)].into(),
            ..Default::default()
        };
        let k = constants(&m, &b).unwrap();
        let s = SwitchingSignal::constant(1, 2.0).unwrap();
        let pts = [
            EnvelopeInput {
                t: 0.0,
                v: 1.0,
                g1: 0.0,
                g2: 0.0,
            },
            EnvelopeInput {
                t: 1.0,
                v: 0.5,
                g1: 0.0,
                g2: 0.0,
            },
        ];
        let r = envelope_report(&m, &s, &k, &pts).unwrap();
        assert!(r.dominated);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,psi1,decay_bound,psi2,V,envelope,ok\n"));
        assert_eq!(text.lines().count(), 3);
    }

    fn arb_signal() -> impl Strategy<Value = SwitchingSignal> {
        (any::<bool>(), prop::collection::vec(0.1f64..3.0, 1..12), 0.01f64..3.0).prop_map(|(start2, dwells, last)| {
            let mut p = if start2 { 2 } else { 1 };
            let first = p;
            let steps: Vec<_> = dwells
                .iter()
                .map(|&d| {
                    p = 3 - p;
                    (d, p)
                })
                .collect();
            SwitchingSignal::from_dwells(first, &steps, last).unwrap()
        })
    }

    proptest! {
        #[test]
        fn regrouping_matches_segment_sum(sig in arb_signal(), frac in 0.01f64..1.0) {
            let m = two_mode();
            let t = frac * sig.horizon();
            let a = ln_psi1(&m, &sig, t).unwrap();
            let b = psi1_exponent_regrouped(&m, &sig, t).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn psi2_matches_double_loop(sig in arb_signal(), frac in 0.01f64..1.0) {
            let m = two_mode();
            let t = frac * sig.horizon();
            let a = psi2(&m, &sig, t).unwrap();
            let b = psi2_naive(&m, &sig, t);
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300), "{} vs {}", a, b);
        }

        #[test]
        fn cocycle_on_switch_free_stretch(sig in arb_signal(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let m = two_mode();
            let i = sig.indices().len() - 1;
            let start = sig.instants()[i];
            let len = sig.horizon() - start;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let t1 = start + len * lo.max(1e-6);
            let t2 = start + len * hi.max(1e-6);
            let lam = m.subsystem(sig.indices()[i]).unwrap().lambda;
            let l1 = ln_psi1(&m, &sig, t1).unwrap();
            let l2 = ln_psi1(&m, &sig, t2).unwrap();
            prop_assert!((l2 - (l1 - lam * (t2 - t1))).abs() <= 1e-10 * (1.0 + l2.abs()));
        }
    }
}
