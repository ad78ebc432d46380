//! Engagement distributions per post and per user, their power-law fits and
//! the Questionable-vs-Reliable Wald comparison.

use std::collections::BTreeMap;

use infodemic_core::{ccdf, fit_discrete_powerlaw, wald_compare, CredibilityLabel, PowerLawFit, WaldResult, XMin};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Post};
use crate::sources::PostLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngagementKind {
    Likes,
    Reshares,
    Replies,
}

impl EngagementKind {
    pub const ALL: [EngagementKind; 3] = [EngagementKind::Likes, EngagementKind::Reshares, EngagementKind::Replies];

    pub fn as_str(self) -> &'static str {
        match self {
            EngagementKind::Likes => "likes",
            EngagementKind::Reshares => "reshares",
            EngagementKind::Replies => "replies",
        }
    }

    fn value(self, p: &Post) -> Option<u64> {
        match self {
            EngagementKind::Likes => Some(p.likes),
            EngagementKind::Reshares => Some(p.reshares),
            EngagementKind::Replies => p.replies,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngagementUnit {
    Post,
    User,
}

impl EngagementUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            EngagementUnit::Post => "post",
            EngagementUnit::User => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngagementConfig {
    pub x_min: XMin,
    pub kinds: Vec<EngagementKind>,
    pub units: Vec<EngagementUnit>,
    /// Emit the CCDF points of every sample.
    pub ccdf: bool,
}

impl Default for EngagementConfig {
    fn default() -> Self {
        EngagementConfig {
            x_min: XMin::default(),
            kinds: EngagementKind::ALL.to_vec(),
            units: vec![EngagementUnit::Post, EngagementUnit::User],
            ccdf: true,
        }
    }
}

/// Which posts a sample is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleGroup {
    Overall,
    Questionable,
    Reliable,
}

impl SampleGroup {
    fn admits(self, label: CredibilityLabel) -> bool {
        match self {
            SampleGroup::Overall => true,
            SampleGroup::Questionable => label == CredibilityLabel::Questionable,
            SampleGroup::Reliable => label == CredibilityLabel::Reliable,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SampleGroup::Overall => "overall",
            SampleGroup::Questionable => "questionable",
            SampleGroup::Reliable => "reliable",
        }
    }
}

/// Raw engagement values of one group, zeros included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngagementSample {
    pub values: Vec<u64>,
    /// Posts (or users) with no value for this kind.
    pub absent: u64,
}

/// Values per post, or summed per author over the group's posts. Users are
/// ordered by id.
pub fn engagement_sample(
    corpus: &Corpus,
    labels: Option<&PostLabels>,
    kind: EngagementKind,
    unit: EngagementUnit,
    group: SampleGroup,
) -> EngagementSample {
    let label_of = |p: &Post| labels.map_or(CredibilityLabel::Unknown, |l| l.get(&p.post_id));
    let posts = corpus.posts().iter().filter(|p| group.admits(label_of(p)));
    match unit {
        EngagementUnit::Post => {
            let mut absent = 0;
            let values = posts
                .filter_map(|p| {
                    let v = kind.value(p);
                    absent += v.is_none() as u64;
                    v
                })
                .collect();
            EngagementSample { values, absent }
        }
        EngagementUnit::User => {
            let mut per_user: BTreeMap<&str, Option<u64>> = BTreeMap::new();
            for p in posts {
                let slot = per_user.entry(p.author_id.as_str()).or_default();
                if let Some(v) = kind.value(p) {
                    *slot = Some(slot.unwrap_or(0) + v);
                }
            }
            let absent = per_user.values().filter(|v| v.is_none()).count() as u64;
            EngagementSample {
                values: per_user.into_values().flatten().collect(),
                absent,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub group: SampleGroup,
    /// Values entering the fit (zeros excluded).
    pub n: u64,
    pub zeros_excluded: u64,
    pub absent: u64,
    pub fit: Option<PowerLawFit>,
    pub se_continuous: Option<f64>,
    pub error: Option<String>,
    pub ccdf: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementTable {
    pub kind: EngagementKind,
    pub unit: EngagementUnit,
    pub groups: Vec<GroupFit>,
    /// Questionable vs Reliable; absent unless both fits succeeded.
    pub wald: Option<WaldResult>,
}

fn fit_group(sample: EngagementSample, group: SampleGroup, config: &EngagementConfig) -> GroupFit {
    let zeros = sample.values.iter().filter(|&&v| v == 0).count() as u64;
    let positive: Vec<u64> = sample.values.into_iter().filter(|&v| v > 0).collect();
    let (fit, error) = if positive.is_empty() {
        (None, Some("no positive values".to_string()))
    } else {
        match fit_discrete_powerlaw(&positive, config.x_min) {
            Ok(f) => {
                if f.at_bound {
                    log::warn!("power-law fit for {} hit the exponent bound", group.as_str());
                }
                (Some(f), None)
            }
            Err(e) => (None, Some(e.to_string())),
        }
    };
    GroupFit {
        group,
        n: positive.len() as u64,
        zeros_excluded: zeros,
        absent: sample.absent,
        se_continuous: fit.map(|f| f.se_continuous()),
        fit,
        error,
        ccdf: if config.ccdf && !positive.is_empty() { ccdf(&positive) } else { Vec::new() },
    }
}

/// Fit every configured (kind, unit) pair for the overall sample and, with
/// labels, for each credibility group.
pub fn engagement_tables(corpus: &Corpus, labels: Option<&PostLabels>, config: &EngagementConfig) -> Vec<EngagementTable> {
    let groups: &[SampleGroup] = if labels.is_some() {
        &[SampleGroup::Overall, SampleGroup::Questionable, SampleGroup::Reliable]
    } else {
        &[SampleGroup::Overall]
    };
    let mut jobs = Vec::new();
    for &kind in &config.kinds {
        for &unit in &config.units {
            jobs.push((kind, unit));
        }
    }
    jobs.sort();
    jobs.dedup();
    jobs.par_iter()
        .map(|&(kind, unit)| {
            let fits: Vec<GroupFit> = groups
                .par_iter()
                .map(|&g| fit_group(engagement_sample(corpus, labels, kind, unit, g), g, config))
                .collect();
            let find = |g| fits.iter().find(|f| f.group == g).and_then(|f| f.fit);
            let wald = match (find(SampleGroup::Questionable), find(SampleGroup::Reliable)) {
                (Some(q), Some(r)) => Some(wald_compare(&q, &r)),
                _ => None,
            };
            EngagementTable { kind, unit, groups: fits, wald }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (kind, unit, group) with the fitted parameters.
pub fn fits_csv(tables: &[EngagementTable]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "kind", "unit", "group", "n", "zeros_excluded", "absent", "alpha_hat", "x_min", "se_alpha", "se_continuous",
        "n_tail", "loglik", "at_bound",
    ])
    .expect("in-memory write");
    for t in tables {
        for g in &t.groups {
            let f = g.fit;
            w.write_record([
                t.kind.as_str().to_string(),
                t.unit.as_str().to_string(),
                g.group.as_str().to_string(),
                g.n.to_string(),
                g.zeros_excluded.to_string(),
                g.absent.to_string(),
                opt(f.map(|f| f.alpha_hat)),
                opt(f.map(|f| f.x_min)),
                opt(f.map(|f| f.se_alpha)),
                opt(g.se_continuous),
                opt(f.map(|f| f.n_tail)),
                opt(f.map(|f| f.loglik)),
                opt(f.map(|f| f.at_bound)),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// One row per (kind, unit) with the Wald score and p-value.
pub fn wald_csv(tables: &[EngagementTable]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "unit", "statistic", "p_value"]).expect("in-memory write");
    for t in tables {
        w.write_record([
            t.kind.as_str().to_string(),
            t.unit.as_str().to_string(),
            opt(t.wald.map(|r| r.statistic)),
            opt(t.wald.map(|r| r.p_value)),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{post, window};
    use CredibilityLabel::*;

    fn corpus() -> (Corpus, PostLabels) {
        let w = window();
        let mut c = Corpus::new("t", w);
        let specs = [("p1", "a", 0, Some(3)), ("p2", "a", 5, None), ("p3", "b", 2, Some(0)), ("p4", "c", 1, Some(1))];
        for (id, author, likes, replies) in specs {
            let mut p = post(id, author, w.start, &[]);
            p.likes = likes;
            p.replies = replies;
            c.add_post(p);
        }
        let labels = PostLabels {
            labels: [("p1", Questionable), ("p2", Questionable), ("p3", Reliable)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            coverage: Default::default(),
        };
        (c, labels)
    }

    #[test]
    fn per_post_and_per_user_samples() {
        let (c, l) = corpus();
        let s = engagement_sample(&c, Some(&l), EngagementKind::Likes, EngagementUnit::Post, SampleGroup::Overall);
        assert_eq!(s.values, [0, 5, 2, 1]);
        let s = engagement_sample(&c, Some(&l), EngagementKind::Likes, EngagementUnit::User, SampleGroup::Questionable);
        assert_eq!(s.values, [5]);
        let s = engagement_sample(&c, Some(&l), EngagementKind::Replies, EngagementUnit::Post, SampleGroup::Questionable);
        assert_eq!((s.values, s.absent), (vec![3], 1));
        let s = engagement_sample(&c, Some(&l), EngagementKind::Replies, EngagementUnit::User, SampleGroup::Overall);
        assert_eq!((s.values, s.absent), (vec![3, 0, 1], 0));
    }

    #[test]
    fn zeros_are_excluded_and_counted() {
        let g = fit_group(
            EngagementSample { values: vec![0, 0, 1, 2, 1, 3], absent: 0 },
            SampleGroup::Overall,
            &EngagementConfig::default(),
        );
        assert_eq!((g.n, g.zeros_excluded), (4, 2));
        assert_eq!(g.fit.unwrap().x_min, 1);
        assert_eq!(g.ccdf[0], (1, 1.0));
    }

    #[test]
    fn degenerate_group_reports_error_without_wald() {
        let (c, l) = corpus();
        let tables = engagement_tables(&c, Some(&l), &EngagementConfig::default());
        assert_eq!(tables.len(), 6);
        let likes_post = tables
            .iter()
            .find(|t| t.kind == EngagementKind::Likes && t.unit == EngagementUnit::Post)
            .unwrap();
        assert_eq!(likes_post.groups.len(), 3);
        // Reliable holds a single value, so its fit fails.
        assert!(likes_post.groups[2].error.is_some());
        assert!(likes_post.wald.is_none());
        let csv = fits_csv(&tables);
        assert_eq!(csv.lines().count(), 1 + 6 * 3);
        assert_eq!(wald_csv(&tables).lines().count(), 7);
    }
}
