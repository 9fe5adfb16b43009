//! Finite prefixes of switching signals and the interval counting functions.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Edge, SubsystemId};

/// A switching signal restricted to `[0, horizon]`.
///
/// `sigma(t) = indices[i]` for `t` in `[instants[i], instants[i+1])`, and the
/// last index stays active up to and including `horizon`. `instants[0]` is
/// always `0` and is an activation, not a switch.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSignal {
    instants: Vec<f64>,
    indices: Vec<SubsystemId>,
    horizon: f64,
}

impl SwitchingSignal {
    pub fn new(instants: Vec<f64>, indices: Vec<SubsystemId>, horizon: f64) -> Result<Self> {
        if instants.is_empty() || instants.len() != indices.len() {
            return Err(Error::MalformedSignal(
                "need as many indices as instants, and at least one".into(),
            ));
        }
        if instants[0] != 0.0 {
            return Err(Error::MalformedSignal("first instant must be 0".into()));
        }
        for w in instants.windows(2) {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) || !w[1].is_finite() {
                return Err(Error::MalformedSignal(format!(
                    "instants must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for (i, w) in indices.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::MalformedSignal(format!(
                    "no switch at instant #{} (index {} repeated)",
                    i + 1,
                    w[0]
                )));
            }
        }
        let last = *instants.last().unwrap();
        if !(horizon.is_finite() && horizon >= last) {
            return Err(Error::MalformedSignal(format!(
                "horizon {horizon} precedes last instant {last}"
            )));
        }
        Ok(SwitchingSignal {
            instants,
            indices,
            horizon,
        })
    }

    /// A switch-free signal on `[0, horizon]`.
    pub fn constant(index: SubsystemId, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![index], horizon)
    }

    /// Builds a signal from an initial index and `(dwell, next index)` steps.
    pub fn from_dwells(first: SubsystemId, steps: &[(f64, SubsystemId)], final_dwell: f64) -> Result<Self> {
        let mut instants = vec![0.0];
        let mut indices = vec![first];
        let mut t = 0.0;
        for &(d, q) in steps {
            t += d;
            instants.push(t);
            indices.push(q);
        }
        Self::new(instants, indices, t + final_dwell)
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn indices(&self) -> &[SubsystemId] {
        &self.indices
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of switches `n` (instants after `tau_0`).
    pub fn switch_count(&self) -> usize {
        self.instants.len() - 1
    }

    /// End of segment `i`: the next instant, or the horizon for the last one.
    pub fn segment_end(&self, i: usize) -> f64 {
        self.instants.get(i + 1).copied().unwrap_or(self.horizon)
    }

    /// `(start, end, index)` for each activation segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, SubsystemId)> + '_ {
        (0..self.indices.len()).map(move |i| (self.instants[i], self.segment_end(i), self.indices[i]))
    }

    /// `(from, to)` for every switch, in order.
    pub fn transitions(&self) -> impl Iterator<Item = Edge> + '_ {
        self.indices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Index of the segment containing `t` (right-continuous).
    pub fn segment_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.instants.partition_point(|&x| x <= t) - 1)
    }

    /// `sigma(t)`.
    pub fn active_index(&self, t: f64) -> Result<SubsystemId> {
        Ok(self.indices[self.segment_at(t)?])
    }

    /// Copy truncated to `[0, horizon]`.
    pub fn truncate(&self, horizon: f64) -> Result<Self> {
        let keep = self.instants.partition_point(|&x| x <= horizon).max(1);
        Self::new(self.instants[..keep].to_vec(), self.indices[..keep].to_vec(), horizon)
    }

    /// Writes `instant,index` rows; a trailing row with an empty index field
    /// carries the horizon.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["instant", "index"])?;
        for (t, p) in self.instants.iter().zip(&self.indices) {
            wr.write_record([t.to_string(), p.to_string()])?;
        }
        wr.write_record([self.horizon.to_string(), String::new()])?;
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Reads the format written by [`write_csv`](Self::write_csv). Without a
    /// horizon row the horizon defaults to the last instant.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rd.headers()?.clone();
        if header.len() != 2 || &header[0] != "instant" || &header[1] != "index" {
            return Err(Error::Csv("expected header `instant,index`".into()));
        }
        let mut instants = Vec::new();
        let mut indices = Vec::new();
        let mut horizon = None;
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            if horizon.is_some() {
                return Err(Error::Csv(format!("row {} follows the horizon row", line + 2)));
            }
            let t: f64 = rec[0]
                .parse()
                .map_err(|e| Error::Csv(format!("row {}: instant: {e}", line + 2)))?;
            if rec[1].is_empty() {
                horizon = Some(t);
                continue;
            }
            let p: SubsystemId = rec[1]
                .parse()
                .map_err(|e| Error::Csv(format!("row {}: index: {e}", line + 2)))?;
            instants.push(t);
            indices.push(p);
        }
        let horizon = horizon.or_else(|| instants.last().copied()).unwrap_or(0.0);
        Self::new(instants, indices, horizon)
    }
}

/// Counts of switches, activations and activation time on an interval `]s, t]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountingResult {
    /// `N(s,t)`.
    pub total: usize,
    /// `N_p(s,t)`: switches on `]s,t]` that activate `p`.
    pub activations: BTreeMap<SubsystemId, usize>,
    /// `N_pq(s,t)`.
    pub transitions: BTreeMap<Edge, usize>,
    /// `T_p(s,t)`: measure of `{u in ]s,t] : sigma(u) = p}`.
    pub durations: BTreeMap<SubsystemId, f64>,
}

impl CountingResult {
    pub fn activations_of(&self, p: SubsystemId) -> usize {
        self.activations.get(&p).copied().unwrap_or(0)
    }

    pub fn transitions_of(&self, e: Edge) -> usize {
        self.transitions.get(&e).copied().unwrap_or(0)
    }

    pub fn duration_of(&self, p: SubsystemId) -> f64 {
        self.durations.get(&p).copied().unwrap_or(0.0)
    }
}

/// Evaluates `N`, `N_p`, `N_pq` and `T_p` on `]s, t]`.
pub fn count(signal: &SwitchingSignal, s: f64, t: f64) -> Result<CountingResult> {
    if !(s >= 0.0 && s < t && t <= signal.horizon) {
        return Err(Error::InvalidInterval {
            s,
            t,
            horizon: signal.horizon,
        });
    }
    let inst = &signal.instants;
    let idx = &signal.indices;
    // switches i >= 1 with s < tau_i <= t
    let lo = inst.partition_point(|&x| x <= s).max(1);
    let hi = inst.partition_point(|&x| x <= t);
    let mut out = CountingResult {
        total: hi.saturating_sub(lo),
        ..Default::default()
    };
    for i in lo..hi {
        *out.activations.entry(idx[i]).or_default() += 1;
        *out.transitions.entry((idx[i - 1], idx[i])).or_default() += 1;
    }
    let first_seg = inst.partition_point(|&x| x <= s) - 1;
    for i in first_seg..hi.max(first_seg + 1) {
        let a = inst[i].max(s);
        let b = signal.segment_end(i).min(t);
        if b > a {
            *out.durations.entry(idx[i]).or_default() += b - a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alt() -> SwitchingSignal {
        SwitchingSignal::new(vec![0.0, 1.0, 2.0], vec![1, 2, 1], 2.0).unwrap()
    }

    #[test]
    fn constant_signal_counts() {
        let s = SwitchingSignal::constant(3, 5.0).unwrap();
        let c = count(&s, 1.0, 4.5).unwrap();
        assert_eq!(c.total, 0);
        assert!(c.activations.is_empty());
        assert_eq!(c.duration_of(3), 3.5);
    }

    #[test]
    fn alternation_counts() {
        let c = count(&alt(), 0.0, 2.0).unwrap();
        assert_eq!(c.total, 2);
        assert_eq!(c.activations_of(1), 1);
        assert_eq!(c.activations_of(2), 1);
        assert_eq!(c.transitions_of((1, 2)), 1);
        assert_eq!(c.transitions_of((2, 1)), 1);
        assert_eq!(c.duration_of(1), 1.0);
        assert_eq!(c.duration_of(2), 1.0);
    }

    #[test]
    fn left_end_is_open() {
        let c = count(&alt(), 1.0, 2.0).unwrap();
        assert_eq!(c.total, 1);
        assert_eq!(c.activations_of(1), 1);
        let c = count(&alt(), 0.5, 1.0).unwrap();
        assert_eq!(c.total, 1);
        assert_eq!(c.activations_of(2), 1);
    }

    #[test]
    fn bad_intervals() {
        assert!(count(&alt(), 1.0, 1.0).is_err());
        assert!(count(&alt(), -0.1, 1.0).is_err());
        assert!(count(&alt(), 0.0, 2.5).is_err());
    }

    #[test]
    fn active_index_right_continuous() {
        let s = alt();
        assert_eq!(s.active_index(0.0).unwrap(), 1);
        assert_eq!(s.active_index(1.0).unwrap(), 2);
        assert_eq!(s.active_index(0.999).unwrap(), 1);
        assert_eq!(s.active_index(1.5).unwrap(), 2);
        assert_eq!(s.active_index(2.0).unwrap(), 1);
        assert!(s.active_index(2.1).is_err());
        assert!(s.active_index(-1e-9).is_err());
    }

    #[test]
    fn malformed_signals_rejected() {
        assert!(SwitchingSignal::new(vec![0.5], vec![1], 1.0).is_err());
        assert!(SwitchingSignal::new(vec![0.0, 1.0, 1.0], vec![1, 2, 1], 2.0).is_err());
        assert!(SwitchingSignal::new(vec![0.0, 1.0], vec![1, 1], 2.0).is_err());
        assert!(SwitchingSignal::new(vec![0.0, 1.0], vec![1, 2], 0.5).is_err());
        assert!(SwitchingSignal::new(vec![0.0], vec![1, 2], 1.0).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = SwitchingSignal::new(
            vec![0.0, 0.1 + 0.2, 1.0 / 3.0 + 1.0],
            vec![4, 1, 2],
            std::f64::consts::PI,
        )
        .unwrap();
        let text = s.to_csv_string();
        assert!(text.starts_with("instant,index\n"));
        let back = SwitchingSignal::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_without_horizon_row() {
        let s = SwitchingSignal::read_csv("instant,index\n0,1\n2.5,2\n".as_bytes()).unwrap();
        assert_eq!(s.horizon(), 2.5);
        assert!(SwitchingSignal::read_csv("t,i\n0,1\n".as_bytes()).is_err());
    }

    /// Naive rescan over the instant list, independent of the binary-search
    /// path in `count`.
    fn rescan(sig: &SwitchingSignal, s: f64, t: f64) -> CountingResult {
        let mut out = CountingResult::default();
        let inst = sig.instants();
        let idx = sig.indices();
        for i in 1..inst.len() {
            if s < inst[i] && inst[i] <= t {
                out.total += 1;
                *out.activations.entry(idx[i]).or_default() += 1;
                *out.transitions.entry((idx[i - 1], idx[i])).or_default() += 1;
            }
        }
        for i in 0..inst.len() {
            let end = if i + 1 < inst.len() { inst[i + 1] } else { sig.horizon() };
            let ov = end.min(t) - inst[i].max(s);
            if ov > 0.0 {
                *out.durations.entry(idx[i]).or_default() += ov;
            }
        }
        out
    }

    fn random_signal() -> impl Strategy<Value = SwitchingSignal> {
        (
            1u32..=3,
            prop::collection::vec((0.05f64..2.0, 0u32..2), 0..12),
            0.0f64..2.0,
        )
            .prop_map(|(first, steps, tail)| {
                // walk a 3-cycle so consecutive indices always differ
                let mut cur = first;
                let steps: Vec<_> = steps
                    .into_iter()
                    .map(|(d, k)| {
                        cur = (cur + k) % 3 + 1;
                        (d, cur)
                    })
                    .collect();
                SwitchingSignal::from_dwells(first, &steps, tail).unwrap()
            })
    }

    fn interval(sig: &SwitchingSignal, a: f64, b: f64) -> (f64, f64) {
        let h = sig.horizon();
        let (a, b) = (a * h, b * h);
        (a.min(b), a.max(b))
    }

    proptest! {
        #[test]
        fn matches_rescan(sig in random_signal(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (s, t) = interval(&sig, a, b);
            prop_assume!(t > s);
            let c = count(&sig, s, t).unwrap();
            let o = rescan(&sig, s, t);
            prop_assert_eq!(c.total, o.total);
            prop_assert_eq!(&c.activations, &o.activations);
            prop_assert_eq!(&c.transitions, &o.transitions);
            for (p, d) in &o.durations {
                prop_assert!((c.duration_of(*p) - d).abs() < 1e-12);
            }
        }

        #[test]
        fn additive_and_conserving(sig in random_signal(), a in 0.0f64..1.0, b in 0.0f64..1.0, m in 0.01f64..0.99) {
            let (s, t) = interval(&sig, a, b);
            prop_assume!(t - s > 1e-6);
            let u = s + m * (t - s);
            let whole = count(&sig, s, t).unwrap();
            let left = count(&sig, s, u).unwrap();
            let right = count(&sig, u, t).unwrap();
            prop_assert_eq!(whole.total, left.total + right.total);
            for p in 1..=3 {
                prop_assert_eq!(whole.activations_of(p), left.activations_of(p) + right.activations_of(p));
                let dt = whole.duration_of(p) - left.duration_of(p) - right.duration_of(p);
                prop_assert!(dt.abs() < 1e-9);
            }
            for (e, n) in &whole.transitions {
                prop_assert_eq!(*n, left.transitions_of(*e) + right.transitions_of(*e));
            }
            prop_assert_eq!(whole.activations.values().sum::<usize>(), whole.total);
            prop_assert_eq!(whole.transitions.values().sum::<usize>(), whole.total);
            let dur: f64 = whole.durations.values().sum();
            prop_assert!((dur - (t - s)).abs() <= 1e-12 * (1.0 + t));
        }
    }
}
