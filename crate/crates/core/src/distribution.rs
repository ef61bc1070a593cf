//! Stationary distributions over (phase, orbit), with an optional matrix-geometric tail.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Result;
use crate::model::{ServerPhase, SystemState};
use crate::numeric::KahanSum;
use crate::sojourn::CaseTag;
use crate::unobservable::QbdTail;

/// Probability table indexed by phase and orbit length.
///
/// Observable distributions are finite. Unobservable ones store levels up
/// to `N` explicitly and evaluate higher levels from the geometric tail on
/// demand.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    case_tag: CaseTag,
    /// `rows[phase][n]`; the idle row carries a zero placeholder at `n = 0`.
    rows: [Vec<f64>; 3],
    pivot: f64,
    tail: Option<QbdTail>,
}

impl StationaryDistribution {
    pub(crate) fn finite(case_tag: CaseTag, rows: [Vec<f64>; 3], pivot: f64) -> Self {
        StationaryDistribution { case_tag, rows, pivot, tail: None }
    }

    pub(crate) fn with_tail(rows: [Vec<f64>; 3], pivot: f64, tail: QbdTail) -> Self {
        StationaryDistribution { case_tag: CaseTag::Unobservable, rows, pivot, tail: Some(tail) }
    }

    pub fn case_tag(&self) -> CaseTag {
        self.case_tag
    }

    /// Probability of the busy server with an empty orbit.
    pub fn pivot(&self) -> f64 {
        self.pivot
    }

    pub fn tail(&self) -> Option<&QbdTail> {
        self.tail.as_ref()
    }

    /// Largest orbit length in the support; `None` for an infinite support.
    pub fn max_orbit(&self) -> Option<usize> {
        match self.tail {
            Some(_) => None,
            None => self.rows.iter().map(|r| r.len().saturating_sub(1)).max(),
        }
    }

    /// Highest orbit length of each phase row stored explicitly.
    pub fn explicit_len(&self, phase: ServerPhase) -> usize {
        self.rows[phase.code()].len()
    }

    /// Whether `(phase, n)` belongs to the state space.
    pub fn in_support(&self, phase: ServerPhase, n: usize) -> bool {
        if phase == ServerPhase::Idle && n == 0 {
            return false;
        }
        match &self.tail {
            Some(_) => true,
            None => n < self.rows[phase.code()].len(),
        }
    }

    pub fn prob(&self, phase: ServerPhase, n: usize) -> f64 {
        if phase == ServerPhase::Idle && n == 0 {
            return 0.0;
        }
        let row = &self.rows[phase.code()];
        if n < row.len() {
            return row[n];
        }
        match &self.tail {
            Some(t) if n >= t.level() => t.level_probs(n - t.level())[phase.code()],
            _ => 0.0,
        }
    }

    pub fn prob_state(&self, s: SystemState) -> f64 {
        self.prob(s.phase(), s.orbit())
    }

    /// Support states with orbit at most `cap`, in lexicographic (orbit, phase) order.
    pub fn states_upto(&self, cap: usize) -> Vec<(SystemState, f64)> {
        let top = self.max_orbit().map_or(cap, |m| m.min(cap));
        let mut out = Vec::new();
        for n in 0..=top {
            for phase in ServerPhase::ALL {
                if self.in_support(phase, n) {
                    out.push((SystemState::raw(phase, n), self.prob(phase, n)));
                }
            }
        }
        out
    }

    /// Orbit length beyond which the remaining mass is below `eps`.
    pub fn effective_cap(&self, eps: f64) -> usize {
        match (&self.tail, self.max_orbit()) {
            (None, Some(m)) => m,
            (Some(t), _) => t.level() + t.levels_for_mass(eps),
            (None, None) => 0,
        }
    }

    fn explicit_sum(&self, weight: impl Fn(usize) -> f64) -> f64 {
        let mut s = KahanSum::new();
        for row in &self.rows {
            for (n, &p) in row.iter().enumerate() {
                s.add(weight(n) * p);
            }
        }
        s.value()
    }

    /// Sum of all probabilities, tail included in closed form.
    pub fn total_mass(&self) -> f64 {
        let explicit = self.explicit_sum(|_| 1.0);
        match &self.tail {
            Some(t) => explicit + t.mass_beyond_level(),
            None => explicit,
        }
    }

    /// Mean orbit length `Σ n π_n`.
    pub fn mean_orbit(&self) -> f64 {
        let explicit = self.explicit_sum(|n| n as f64);
        match &self.tail {
            Some(t) => explicit + t.orbit_moment_beyond_level(),
            None => explicit,
        }
    }

    /// Total probability of one phase.
    pub fn phase_mass(&self, phase: ServerPhase) -> f64 {
        let explicit: f64 = self.rows[phase.code()].iter().sum();
        match &self.tail {
            Some(t) => explicit + t.phase_mass_beyond_level()[phase.code()],
            None => explicit,
        }
    }

    /// Total-variation distance to an empirical table; missing keys count as zero.
    pub fn tv_distance(&self, other: &BTreeMap<SystemState, f64>) -> f64 {
        let cap = other
            .keys()
            .map(|s| s.orbit())
            .max()
            .unwrap_or(0)
            .max(self.effective_cap(1e-14));
        let mut total = KahanSum::new();
        let mut seen = 0.0;
        for (s, p) in self.states_upto(cap) {
            let q = other.get(&s).copied().unwrap_or(0.0);
            total.add((p - q).abs());
            seen += q;
        }
        // Empirical mass outside the analytic support.
        let outside: f64 = other.values().sum::<f64>() - seen;
        total.add(outside.abs());
        0.5 * total.value()
    }

    /// Writes `phase,orbit,probability` rows up to orbit `cap`
    /// (the full support for finite distributions when `cap` is `None`).
    pub fn write_csv<W: Write>(&self, writer: W, cap: Option<usize>) -> Result<()> {
        let cap = cap.unwrap_or_else(|| self.effective_cap(1e-15));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phase", "orbit", "probability"])?;
        for (s, p) in self.states_upto(cap) {
            w.write_record([
                s.phase().code().to_string(),
                s.orbit().to_string(),
                format!("{p:.17e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
