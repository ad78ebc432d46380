//! Newline-delimited JSON ingestion.
//!
//! Each line is parsed on its own through a [`FieldMap`], so shards and lines
//! are decoded in parallel; admission into the [`Corpus`] then happens in
//! input order on a single thread. Malformed lines are tallied and skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::fieldmap::{lookup, FieldMap};
use super::{extract_domain, Admission, Comment, Corpus, FollowEdge, Post, Timestamp, Window};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Posts,
    Comments,
    Edges,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Posts => "posts",
            RecordKind::Comments => "comments",
            RecordKind::Edges => "edges",
        }
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "posts" => Ok(RecordKind::Posts),
            "comments" => Ok(RecordKind::Comments),
            "edges" => Ok(RecordKind::Edges),
            other => Err(Error::Usage(format!(
                "unknown record kind `{other}` (expected posts, comments or edges)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestFilter {
    /// Lowercase tags without `#`. Empty keeps every post.
    pub hashtags: BTreeSet<String>,
    pub window: Option<Window>,
    pub links_only: bool,
    /// Match a filter tag anywhere inside a post's tag instead of exactly.
    pub substring_match: bool,
}

impl IngestFilter {
    pub fn with_hashtags<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, tags: I) -> Self {
        self.hashtags = tags
            .into_iter()
            .filter_map(|t| normalize_tag(t.as_ref()))
            .collect();
        self
    }

    fn hashtag_ok(&self, post: &Post) -> bool {
        if self.hashtags.is_empty() {
            return true;
        }
        if self.substring_match {
            post.hashtags
                .iter()
                .any(|h| self.hashtags.iter().any(|f| h.contains(f.as_str())))
        } else {
            post.hashtags.iter().any(|h| self.hashtags.contains(h))
        }
    }

    fn window_ok(&self, t: Timestamp) -> bool {
        self.window.is_none_or(|w| w.contains(t))
    }
}

pub const DROP_HASHTAG: &str = "hashtag";
pub const DROP_WINDOW: &str = "window";
pub const DROP_NO_LINK: &str = "no_link";
pub const DROP_SELF_LOOP: &str = "self_loop";
pub const MALFORMED_JSON: &str = "json";
pub const MALFORMED_MISSING: &str = "missing_field";
pub const MALFORMED_INVALID: &str = "invalid_field";
pub const MALFORMED_EMPTY: &str = "empty_line";

/// Tallies for one ingestion call.
///
/// `accepted + dropped + malformed + duplicates == total_lines`. Quarantined
/// comments are part of `accepted`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub kind: RecordKind,
    pub total_lines: u64,
    pub accepted: u64,
    pub quarantined: u64,
    /// Quarantined comments released because their parent arrived.
    pub released: u64,
    pub duplicates: u64,
    pub dropped: BTreeMap<String, u64>,
    pub malformed: BTreeMap<String, u64>,
    /// URLs of accepted posts with no extractable domain.
    pub url_failures: u64,
}

impl IngestReport {
    pub fn new(kind: RecordKind) -> Self {
        IngestReport {
            kind,
            total_lines: 0,
            accepted: 0,
            quarantined: 0,
            released: 0,
            duplicates: 0,
            dropped: BTreeMap::new(),
            malformed: BTreeMap::new(),
            url_failures: 0,
        }
    }

    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    pub fn malformed_total(&self) -> u64 {
        self.malformed.values().sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.accepted + self.dropped_total() + self.malformed_total() + self.duplicates
            == self.total_lines
    }

    fn bump(map: &mut BTreeMap<String, u64>, reason: &str) {
        *map.entry(reason.to_string()).or_default() += 1;
    }
}

enum Outcome {
    Post(Post),
    Comment(Comment),
    Edge(FollowEdge),
    Dropped(&'static str),
    Malformed(&'static str),
}

pub(crate) fn normalize_tag(raw: &str) -> Option<String> {
    let t = raw.trim().trim_start_matches('#').to_lowercase();
    (!t.is_empty()).then_some(t)
}

fn tags_from_text(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '#'))
        .filter(|tok| tok.starts_with('#'))
        .filter_map(normalize_tag)
        .collect()
}

fn id_field(rec: &Value, path: &str) -> Result<String, &'static str> {
    match lookup(rec, path) {
        None => Err(MALFORMED_MISSING),
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Value::Number(n)) if n.is_u64() || n.is_i64() => Ok(n.to_string()),
        Some(_) => Err(MALFORMED_INVALID),
    }
}

fn count_field(rec: &Value, path: &str) -> Result<Option<u64>, &'static str> {
    match lookup(rec, path) {
        None => Ok(None),
        Some(v) => v.as_u64().map(Some).ok_or(MALFORMED_INVALID),
    }
}

/// Epoch seconds, RFC 3339, `YYYY-MM-DD HH:MM:SS` (UTC) or the
/// `Wed Jan 01 12:00:00 +0000 2020` export format.
pub(crate) fn parse_timestamp(v: &Value) -> Option<Timestamp> {
    match v {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => {
            let s = s.trim();
            if let Ok(t) = s.parse::<i64>() {
                return Some(t);
            }
            if let Ok(t) = DateTime::parse_from_rfc3339(s) {
                return Some(t.timestamp());
            }
            if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
                return Some(t.and_utc().timestamp());
            }
            DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y")
                .ok()
                .map(|t| t.timestamp())
        }
        _ => None,
    }
}

fn time_field(rec: &Value, path: &str) -> Result<Timestamp, &'static str> {
    let v = lookup(rec, path).ok_or(MALFORMED_MISSING)?;
    parse_timestamp(v).ok_or(MALFORMED_INVALID)
}

/// Strings, or objects carrying one of `keys`.
fn string_list(v: &Value, keys: &[&str]) -> Result<Vec<String>, &'static str> {
    let items = v.as_array().ok_or(MALFORMED_INVALID)?;
    items
        .iter()
        .map(|item| match item {
            Value::String(s) => Ok(s.clone()),
            Value::Object(o) => keys
                .iter()
                .find_map(|k| o.get(*k).and_then(Value::as_str))
                .map(str::to_string)
                .ok_or(MALFORMED_INVALID),
            _ => Err(MALFORMED_INVALID),
        })
        .collect()
}

fn parse_post(rec: &Value, map: &FieldMap) -> Result<Post, &'static str> {
    let f = &map.posts;
    let text = match lookup(rec, &f.text) {
        None => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(MALFORMED_INVALID),
    };
    let hashtags = match lookup(rec, &f.hashtags) {
        None => tags_from_text(&text),
        Some(v) => string_list(v, &["name", "text", "tag"])?
            .iter()
            .filter_map(|t| normalize_tag(t))
            .collect(),
    };
    let urls = match lookup(rec, &f.urls) {
        None => Vec::new(),
        Some(v) => string_list(v, &["expanded_url", "url"])?,
    };
    Ok(Post {
        post_id: id_field(rec, &f.post_id)?,
        author_id: id_field(rec, &f.author_id)?,
        created_at: time_field(rec, &f.created_at)?,
        text,
        hashtags,
        urls,
        likes: count_field(rec, &f.likes)?.ok_or(MALFORMED_MISSING)?,
        reshares: count_field(rec, &f.reshares)?.ok_or(MALFORMED_MISSING)?,
        replies: count_field(rec, &f.replies)?,
    })
}

fn parse_comment(rec: &Value, map: &FieldMap) -> Result<Comment, &'static str> {
    let f = &map.comments;
    Ok(Comment {
        comment_id: id_field(rec, &f.comment_id)?,
        parent_post_id: id_field(rec, &f.parent_post_id)?,
        author_id: id_field(rec, &f.author_id)?,
        created_at: time_field(rec, &f.created_at)?,
    })
}

fn parse_edge(rec: &Value, map: &FieldMap) -> Result<FollowEdge, &'static str> {
    Ok(FollowEdge {
        follower_id: id_field(rec, &map.edges.follower_id)?,
        followee_id: id_field(rec, &map.edges.followee_id)?,
    })
}

fn classify_line(line: &str, kind: RecordKind, map: &FieldMap, filter: &IngestFilter) -> Outcome {
    if line.trim().is_empty() {
        return Outcome::Malformed(MALFORMED_EMPTY);
    }
    let rec: Value = match serde_json::from_str(line) {
        Ok(v @ Value::Object(_)) => v,
        _ => return Outcome::Malformed(MALFORMED_JSON),
    };
    match kind {
        RecordKind::Posts => match parse_post(&rec, map) {
            Err(reason) => Outcome::Malformed(reason),
            Ok(p) if !filter.hashtag_ok(&p) => Outcome::Dropped(DROP_HASHTAG),
            Ok(p) if !filter.window_ok(p.created_at) => Outcome::Dropped(DROP_WINDOW),
            Ok(p) if filter.links_only && !p.has_link() => Outcome::Dropped(DROP_NO_LINK),
            Ok(p) => Outcome::Post(p),
        },
        RecordKind::Comments => match parse_comment(&rec, map) {
            Err(reason) => Outcome::Malformed(reason),
            Ok(c) if !filter.window_ok(c.created_at) => Outcome::Dropped(DROP_WINDOW),
            Ok(c) => Outcome::Comment(c),
        },
        RecordKind::Edges => match parse_edge(&rec, map) {
            Err(reason) => Outcome::Malformed(reason),
            Ok(e) if e.follower_id == e.followee_id => Outcome::Dropped(DROP_SELF_LOOP),
            Ok(e) => Outcome::Edge(e),
        },
    }
}

fn admit(corpus: &mut Corpus, outcomes: Vec<Outcome>, report: &mut IngestReport) {
    for outcome in outcomes {
        report.total_lines += 1;
        let admission = match outcome {
            Outcome::Dropped(r) => {
                IngestReport::bump(&mut report.dropped, r);
                continue;
            }
            Outcome::Malformed(r) => {
                IngestReport::bump(&mut report.malformed, r);
                continue;
            }
            Outcome::Post(p) => {
                let failures = p.urls.iter().filter(|u| extract_domain(u).is_err()).count();
                let a = corpus.add_post(p);
                if a == Admission::Accepted {
                    report.url_failures += failures as u64;
                }
                a
            }
            Outcome::Comment(c) => corpus.add_comment(c),
            Outcome::Edge(e) => corpus.add_edge(e),
        };
        match admission {
            Admission::Accepted => report.accepted += 1,
            Admission::Quarantined => {
                report.accepted += 1;
                report.quarantined += 1;
            }
            Admission::Duplicate => report.duplicates += 1,
            Admission::SelfLoop => IngestReport::bump(&mut report.dropped, DROP_SELF_LOOP),
        }
    }
    if report.kind == RecordKind::Posts && !corpus.quarantine().is_empty() {
        report.released = corpus.resolve_quarantine() as u64;
    }
}

/// Ingest records from in-memory lines.
pub fn ingest_lines<'a, I>(
    corpus: &mut Corpus,
    kind: RecordKind,
    lines: I,
    map: &FieldMap,
    filter: &IngestFilter,
) -> IngestReport
where
    I: IntoIterator<Item = &'a str>,
{
    let lines: Vec<&str> = lines.into_iter().collect();
    let outcomes: Vec<Outcome> = lines
        .par_iter()
        .map(|l| classify_line(l, kind, map, filter))
        .collect();
    let mut report = IngestReport::new(kind);
    admit(corpus, outcomes, &mut report);
    report
}

/// Ingest a set of shard files. Shards are read and decoded in parallel and
/// merged in the order given. Any unreadable shard aborts before the corpus
/// is touched.
pub fn ingest_paths(
    corpus: &mut Corpus,
    kind: RecordKind,
    paths: &[PathBuf],
    map: &FieldMap,
    filter: &IngestFilter,
) -> Result<IngestReport> {
    let shards: Vec<Vec<Outcome>> = paths
        .par_iter()
        .map(|path| read_shard(path).map(|text| decode_shard(&text, kind, map, filter)))
        .collect::<Result<_>>()?;
    let mut report = IngestReport::new(kind);
    for shard in shards {
        admit(corpus, shard, &mut report);
    }
    log::info!(
        "ingested {} {} lines: {} accepted, {} dropped, {} malformed, {} duplicate",
        report.total_lines,
        kind.as_str(),
        report.accepted,
        report.dropped_total(),
        report.malformed_total(),
        report.duplicates
    );
    Ok(report)
}

fn read_shard(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn decode_shard(text: &str, kind: RecordKind, map: &FieldMap, filter: &IngestFilter) -> Vec<Outcome> {
    text.par_lines()
        .map(|l| classify_line(l, kind, map, filter))
        .collect()
}
