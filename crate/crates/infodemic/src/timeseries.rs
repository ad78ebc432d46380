//! Daily and cumulative counts of new posts and first-time posting users.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate};
use infodemic_core::CredibilityLabel;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Post, Timestamp, Window, SECONDS_PER_DAY};
use crate::sources::PostLabels;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Series {
    pub daily: Vec<u64>,
    pub cumulative: Vec<u64>,
}

impl Series {
    fn from_daily(daily: Vec<u64>) -> Self {
        let cumulative = daily
            .iter()
            .scan(0u64, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        Series { daily, cumulative }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSeries {
    pub posts: Series,
    /// Users counted on the day of their first post in the group.
    pub users: Series,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// UTC date of day index 0.
    pub start_date: NaiveDate,
    pub days: usize,
    pub overall: GroupSeries,
    pub questionable: Option<GroupSeries>,
    pub reliable: Option<GroupSeries>,
}

fn day_start(t: Timestamp) -> Timestamp {
    t.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY
}

fn group_series<'a>(posts: impl Iterator<Item = &'a Post>, window: Window) -> GroupSeries {
    let days = window.days();
    let mut posts_daily = vec![0u64; days];
    let mut first: BTreeMap<&str, Timestamp> = BTreeMap::new();
    for p in posts.filter(|p| window.contains(p.created_at)) {
        posts_daily[window.day_index(p.created_at)] += 1;
        first
            .entry(p.author_id.as_str())
            .and_modify(|t| *t = (*t).min(p.created_at))
            .or_insert(p.created_at);
    }
    let mut users_daily = vec![0u64; days];
    for t in first.into_values() {
        users_daily[window.day_index(t)] += 1;
    }
    GroupSeries {
        posts: Series::from_daily(posts_daily),
        users: Series::from_daily(users_daily),
    }
}

/// Bins are UTC days of the corpus window, or of the span of post dates when
/// the corpus has no window.
pub fn time_series(corpus: &Corpus, labels: Option<&PostLabels>) -> TimeSeries {
    let window = corpus.window.unwrap_or_else(|| {
        let lo = corpus.posts().iter().map(|p| p.created_at).min().unwrap_or(0);
        let hi = corpus.posts().iter().map(|p| p.created_at).max().unwrap_or(0);
        Window {
            start: day_start(lo),
            end: day_start(hi) + SECONDS_PER_DAY,
        }
    });
    let with = |label: CredibilityLabel| {
        labels.map(|l| group_series(corpus.posts().iter().filter(|p| l.get(&p.post_id) == label), window))
    };
    TimeSeries {
        start_date: DateTime::from_timestamp(window.start, 0)
            .expect("window start in range")
            .date_naive(),
        days: window.days(),
        overall: group_series(corpus.posts().iter(), window),
        questionable: with(CredibilityLabel::Questionable),
        reliable: with(CredibilityLabel::Reliable),
    }
}

/// One row per day: `date,posts,users,...` for each present group.
pub fn time_series_csv(ts: &TimeSeries) -> String {
    let mut groups = vec![("overall", &ts.overall)];
    if let Some(q) = &ts.questionable {
        groups.push(("questionable", q));
    }
    if let Some(r) = &ts.reliable {
        groups.push(("reliable", r));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    for (name, _) in &groups {
        for col in ["posts", "posts_cumulative", "users", "users_cumulative"] {
            header.push(format!("{name}_{col}"));
        }
    }
    w.write_record(&header).expect("in-memory write");
    for d in 0..ts.days {
        let mut row = vec![(ts.start_date + chrono::Days::new(d as u64)).to_string()];
        for (_, g) in &groups {
            row.extend(
                [g.posts.daily[d], g.posts.cumulative[d], g.users.daily[d], g.users.cumulative[d]].map(|v| v.to_string()),
            );
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
