//! Kaplan-Meier product-limit curves and the Peto & Peto two-sample test.
//!
//! Subjects are `(time, event)` pairs; `event == false` marks a right-censored
//! subject. At tied times events are processed before censorings, so a subject
//! censored at `t` is still at risk for events at `t`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::chi2_sf_1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurvivalError {
    #[error("no subjects to estimate from")]
    Empty,
    #[error("subject {index} has invalid time {time}")]
    InvalidTime { index: usize, time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
}

impl Observation {
    pub fn observed(time: f64) -> Self {
        Observation { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        Observation { time, event: false }
    }
}

/// One step of the curve, at a time where at least one event occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub time: f64,
    pub at_risk: usize,
    pub events: usize,
    /// Subjects censored at exactly this time.
    pub censored: usize,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub points: Vec<SurvivalPoint>,
    /// Times at which only censorings happened, with their counts.
    pub censor_only: Vec<(f64, usize)>,
    pub n_subjects: usize,
    pub n_events: usize,
}

impl SurvivalCurve {
    /// Right-continuous step value `Ŝ(t)`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.time <= t);
        if idx == 0 {
            1.0
        } else {
            self.points[idx - 1].survival
        }
    }

    /// First event time at which `Ŝ ≤ 0.5`.
    pub fn median(&self) -> Option<f64> {
        self.points.iter().find(|p| p.survival <= 0.5).map(|p| p.time)
    }
}

/// Distinct times in ascending order with `(events, censorings)` at each.
fn tally(obs: &[Observation]) -> Result<Vec<(f64, usize, usize)>, SurvivalError> {
    for (index, o) in obs.iter().enumerate() {
        if !(o.time >= 0.0) || !o.time.is_finite() {
            return Err(SurvivalError::InvalidTime {
                index,
                time: o.time,
            });
        }
    }
    let mut sorted: Vec<Observation> = obs.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    for o in sorted {
        match out.last_mut() {
            Some(last) if last.0 == o.time => {
                if o.event {
                    last.1 += 1
                } else {
                    last.2 += 1
                }
            }
            _ => out.push((o.time, o.event as usize, !o.event as usize)),
        }
    }
    Ok(out)
}

/// Product-limit estimate `Ŝ(t) = Π_{t_i ≤ t} (1 - d_i/n_i)`.
pub fn kaplan_meier(obs: &[Observation]) -> Result<SurvivalCurve, SurvivalError> {
    if obs.is_empty() {
        return Err(SurvivalError::Empty);
    }
    let mut at_risk = obs.len();
    let mut survival = 1.0;
    let mut points = Vec::new();
    let mut censor_only = Vec::new();
    let mut n_events = 0;
    let mut censoring_seen = false;
    for (time, events, censored) in tally(obs)? {
        if events > 0 {
            // Without prior censoring the product telescopes to a single ratio.
            survival = if censoring_seen {
                survival * (at_risk - events) as f64 / at_risk as f64
            } else {
                (at_risk - events) as f64 / obs.len() as f64
            };
            points.push(SurvivalPoint {
                time,
                at_risk,
                events,
                censored,
                survival,
            });
            n_events += events;
        } else {
            censor_only.push((time, censored));
        }
        at_risk -= events + censored;
        censoring_seen |= censored > 0;
    }
    Ok(SurvivalCurve {
        points,
        censor_only,
        n_subjects: obs.len(),
        n_events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PetoPetoResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub events_a: usize,
    pub events_b: usize,
    /// One of the groups had no observed events.
    pub warning: bool,
}

/// Peto & Peto weighted log-rank test.
///
/// At every distinct pooled event time the weight is the left-continuous
/// pooled Kaplan-Meier estimate `S̃(t_i-)`. The statistic
/// `(Σ w (d_a - e_a))² / Σ w² v` is referred to χ²₁.
pub fn peto_peto(a: &[Observation], b: &[Observation]) -> Result<PetoPetoResult, SurvivalError> {
    if a.is_empty() || b.is_empty() {
        return Err(SurvivalError::Empty);
    }
    let ta = tally(a)?;
    let tb = tally(b)?;

    let (mut ra, mut rb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0, 0);
    let mut pooled = 1.0;
    let mut num = 0.0;
    let mut den = 0.0;
    let (mut events_a, mut events_b) = (0, 0);

    while ia < ta.len() || ib < tb.len() {
        let t = match (ta.get(ia), tb.get(ib)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        let (da, ca) = match ta.get(ia) {
            Some(&(ti, d, c)) if ti == t => {
                ia += 1;
                (d as f64, c as f64)
            }
            _ => (0.0, 0.0),
        };
        let (db, cb) = match tb.get(ib) {
            Some(&(ti, d, c)) if ti == t => {
                ib += 1;
                (d as f64, c as f64)
            }
            _ => (0.0, 0.0),
        };
        events_a += da as usize;
        events_b += db as usize;

        let d = da + db;
        let n = ra + rb;
        if d > 0.0 {
            let w = pooled;
            // d_a - d·n_a/n, written so that swapping the groups negates it exactly.
            let excess = (da * rb - db * ra) / n;
            num += w * excess;
            if n > 1.0 {
                let v = d * (ra * rb) * (n - d) / (n * n * (n - 1.0));
                den += w * w * v;
            }
            pooled *= 1.0 - d / n;
        }
        ra -= da + ca;
        rb -= db + cb;
    }

    let statistic = if den > 0.0 && num != 0.0 {
        num * num / den
    } else {
        0.0
    };
    Ok(PetoPetoResult {
        statistic,
        p_value: chi2_sf_1(statistic),
        n_a: a.len(),
        n_b: b.len(),
        events_a,
        events_b,
        warning: events_a == 0 || events_b == 0,
    })
}
