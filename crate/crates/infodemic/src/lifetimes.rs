//! Commenting lifetimes of posts and users, and their survival comparison.
//!
//! A post's lifetime runs from its first to its last comment; a user's from
//! their first to their last comment on posts of one credibility group.
//! Durations are whole days, rounded down. A lifetime whose last comment
//! falls on the final day of the window is right-censored.

use std::collections::BTreeMap;

use infodemic_core::{kaplan_meier, peto_peto, CredibilityLabel, Observation, PetoPetoResult, SurvivalCurve};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Timestamp, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::sources::PostLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LifetimeUnit {
    Post,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifetimeRecord {
    pub subject_id: String,
    pub duration_days: u64,
    pub event_observed: bool,
    pub group: CredibilityLabel,
}

impl LifetimeRecord {
    pub fn observation(&self) -> Observation {
        Observation {
            time: self.duration_days as f64,
            event: self.event_observed,
        }
    }
}

#[derive(Clone, Copy)]
struct Span {
    first: Timestamp,
    last: Timestamp,
}

impl Span {
    fn extend(span: &mut Option<Span>, t: Timestamp) {
        match span {
            None => *span = Some(Span { first: t, last: t }),
            Some(s) => {
                s.first = s.first.min(t);
                s.last = s.last.max(t);
            }
        }
    }
}

fn grouped(label: CredibilityLabel) -> Option<CredibilityLabel> {
    (label != CredibilityLabel::Unknown).then_some(label)
}

fn record(corpus: &Corpus, subject_id: String, group: CredibilityLabel, span: Span, censoring: bool) -> LifetimeRecord {
    let censored = censoring
        && corpus
            .window
            .is_some_and(|w| span.last >= w.final_day_start());
    LifetimeRecord {
        subject_id,
        duration_days: ((span.last - span.first) / SECONDS_PER_DAY) as u64,
        event_observed: !censored,
        group,
    }
}

/// One record per commented Questionable or Reliable post, in post-id order.
pub fn post_lifetimes(corpus: &Corpus, labels: &PostLabels, censoring: bool) -> Vec<LifetimeRecord> {
    let mut spans: BTreeMap<&str, Option<Span>> = BTreeMap::new();
    for c in corpus.comments() {
        if grouped(labels.get(&c.parent_post_id)).is_some() {
            Span::extend(spans.entry(c.parent_post_id.as_str()).or_default(), c.created_at);
        }
    }
    spans
        .into_iter()
        .filter_map(|(id, span)| {
            let group = labels.get(id);
            span.map(|s| record(corpus, id.to_string(), group, s, censoring))
        })
        .collect()
}

/// One record per (commenting user, group), ordered by group then user.
pub fn user_lifetimes(corpus: &Corpus, labels: &PostLabels, censoring: bool) -> Vec<LifetimeRecord> {
    let mut spans: BTreeMap<(CredibilityLabel, &str), Option<Span>> = BTreeMap::new();
    for c in corpus.comments() {
        if let Some(g) = grouped(labels.get(&c.parent_post_id)) {
            Span::extend(spans.entry((g, c.author_id.as_str())).or_default(), c.created_at);
        }
    }
    spans
        .into_iter()
        .filter_map(|((g, user), span)| span.map(|s| record(corpus, user.to_string(), g, s, censoring)))
        .collect()
}

pub fn lifetimes(corpus: &Corpus, labels: &PostLabels, unit: LifetimeUnit, censoring: bool) -> Vec<LifetimeRecord> {
    match unit {
        LifetimeUnit::Post => post_lifetimes(corpus, labels, censoring),
        LifetimeUnit::User => user_lifetimes(corpus, labels, censoring),
    }
}

fn observations(records: &[LifetimeRecord], group: CredibilityLabel) -> Vec<Observation> {
    records
        .iter()
        .filter(|r| r.group == group)
        .map(LifetimeRecord::observation)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurves {
    pub questionable: Option<SurvivalCurve>,
    pub reliable: Option<SurvivalCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub unit: LifetimeUnit,
    pub censoring: bool,
    pub n_records: usize,
    pub n_censored: usize,
    pub curves: GroupCurves,
    /// Absent when either group has no lifetimes.
    pub peto_peto: Option<PetoPetoResult>,
}

/// Kaplan-Meier curves per group and the Peto & Peto comparison.
pub fn survival_analysis(records: &[LifetimeRecord], unit: LifetimeUnit, censoring: bool) -> Result<SurvivalReport> {
    let q = observations(records, CredibilityLabel::Questionable);
    let r = observations(records, CredibilityLabel::Reliable);
    let stage = |e: infodemic_core::SurvivalError| Error::Stage {
        stage: "survival",
        reason: e.to_string(),
    };
    let curve = |obs: &[Observation]| -> Result<Option<SurvivalCurve>> {
        if obs.is_empty() {
            Ok(None)
        } else {
            kaplan_meier(obs).map(Some).map_err(stage)
        }
    };
    let (cq, cr) = rayon::join(|| curve(&q), || curve(&r));
    let peto = if q.is_empty() || r.is_empty() {
        log::warn!("survival ({unit:?}): a group has no lifetimes, skipping Peto & Peto");
        None
    } else {
        let res = peto_peto(&q, &r).map_err(stage)?;
        if res.warning {
            log::warn!("survival ({unit:?}): a group has no observed events");
        }
        Some(res)
    };
    Ok(SurvivalReport {
        unit,
        censoring,
        n_records: records.len(),
        n_censored: records.iter().filter(|r| !r.event_observed).count(),
        curves: GroupCurves {
            questionable: cq?,
            reliable: cr?,
        },
        peto_peto: peto,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{comment, post, window};
    use CredibilityLabel::*;

    fn labels(pairs: &[(&str, CredibilityLabel)]) -> PostLabels {
        PostLabels {
            labels: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            coverage: Default::default(),
        }
    }

    fn fixture() -> (Corpus, PostLabels) {
        let w = window();
        let t = w.start + 1000;
        let mut c = Corpus::new("t", w);
        for id in ["q1", "r1", "u1", "q2"] {
            c.add_post(post(id, "a", w.start, &[]));
        }
        c.add_comment(comment("c1", "q1", "x", t));
        c.add_comment(comment("c2", "q1", "y", t + 90_000));
        c.add_comment(comment("c3", "r1", "x", t + 10));
        c.add_comment(comment("c4", "u1", "x", t + 10 * SECONDS_PER_DAY));
        c.add_comment(comment("c5", "q2", "x", w.end - 10));
        (c, labels(&[("q1", Questionable), ("r1", Reliable), ("u1", Unknown), ("q2", Questionable)]))
    }

    #[test]
    fn post_durations_floor_days() {
        let (c, l) = fixture();
        let recs = post_lifetimes(&c, &l, true);
        let ids: Vec<_> = recs.iter().map(|r| r.subject_id.as_str()).collect();
        assert_eq!(ids, ["q1", "q2", "r1"]);
        assert_eq!(recs[0].duration_days, 1);
        assert!(recs[0].event_observed);
        // Single comment: zero days, observed unless on the last day.
        assert_eq!((recs[2].duration_days, recs[2].event_observed), (0, true));
        assert!(!recs[1].event_observed);
        assert!(post_lifetimes(&c, &l, false).iter().all(|r| r.event_observed));
    }

    #[test]
    fn user_records_per_group() {
        let (c, l) = fixture();
        let recs = user_lifetimes(&c, &l, true);
        let x: Vec<_> = recs.iter().filter(|r| r.subject_id == "x").collect();
        assert_eq!(x.len(), 2);
        let xq = x.iter().find(|r| r.group == Questionable).unwrap();
        // First comment at t on q1, last at the window's final hour on q2.
        assert!(!xq.event_observed);
        assert!(xq.duration_days > 200);
        let xr = x.iter().find(|r| r.group == Reliable).unwrap();
        assert_eq!(xr.duration_days, 0);
        let y: Vec<_> = recs.iter().filter(|r| r.subject_id == "y").collect();
        assert_eq!((y.len(), y[0].duration_days), (1, 0));
    }

    #[test]
    fn analysis_report_shape() {
        let (c, l) = fixture();
        let recs = post_lifetimes(&c, &l, true);
        let rep = survival_analysis(&recs, LifetimeUnit::Post, true).unwrap();
        assert_eq!(rep.n_records, 3);
        assert_eq!(rep.n_censored, 1);
        assert!(rep.curves.questionable.is_some() && rep.curves.reliable.is_some());
        let p = rep.peto_peto.unwrap();
        assert!((0.0..=1.0).contains(&p.p_value));

        let only_q: Vec<_> = recs.into_iter().filter(|r| r.group == Questionable).collect();
        let rep = survival_analysis(&only_q, LifetimeUnit::Post, true).unwrap();
        assert!(rep.peto_peto.is_none());
        assert!(rep.curves.reliable.is_none());
    }
}
