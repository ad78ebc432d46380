//! Posts, comments and follow edges, and the in-memory corpus that holds them.

mod domain;
mod fieldmap;
pub mod ingest;
mod stats;
mod store;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

pub use domain::{extract_domain, DomainError};
pub use fieldmap::{FieldMap, PlatformPreset};
pub use ingest::{ingest_lines, ingest_paths, IngestFilter, IngestReport, RecordKind};
pub use stats::{corpus_stats, BreakdownColumn, BreakdownTable, BREAKDOWN_ROWS};
pub use store::{load_corpus, save_corpus, CorpusCounts, CorpusManifest, StoredCorpus, CORPUS_MANIFEST};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub author_id: String,
    pub created_at: Timestamp,
    #[serde(default)]
    pub text: String,
    pub hashtags: BTreeSet<String>,
    pub urls: Vec<String>,
    pub likes: u64,
    pub reshares: u64,
    /// `None` when the export does not carry reply counts at all.
    pub replies: Option<u64>,
}

impl Post {
    /// Normalized domains of the post's URLs, in order, skipping failures.
    pub fn domains(&self) -> impl Iterator<Item = String> + '_ {
        self.urls.iter().filter_map(|u| extract_domain(u).ok())
    }

    pub fn has_link(&self) -> bool {
        self.domains().next().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub parent_post_id: String,
    pub author_id: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FollowEdge {
    pub follower_id: String,
    pub followee_id: String,
}

/// Half-open analysis window `[start, end)`, in UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Window {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, String> {
        if start >= end {
            return Err(format!("window start {start} is not before end {end}"));
        }
        Ok(Window { start, end })
    }

    /// Whole UTC days `first..=last`.
    pub fn from_dates(first: NaiveDate, last: NaiveDate) -> Result<Self, String> {
        let start = Utc
            .from_utc_datetime(&first.and_hms_opt(0, 0, 0).expect("midnight"))
            .timestamp();
        let end = Utc
            .from_utc_datetime(&last.and_hms_opt(0, 0, 0).expect("midnight"))
            .timestamp()
            + SECONDS_PER_DAY;
        Window::new(start, end)
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.start && t < self.end
    }

    pub fn days(&self) -> usize {
        ((self.end - self.start + SECONDS_PER_DAY - 1) / SECONDS_PER_DAY) as usize
    }

    /// Day offset of `t` from the window start.
    pub fn day_index(&self, t: Timestamp) -> usize {
        ((t - self.start).div_euclid(SECONDS_PER_DAY)) as usize
    }

    /// Start of the final day, the censoring horizon for lifetimes.
    pub fn final_day_start(&self) -> Timestamp {
        self.end - SECONDS_PER_DAY
    }

    pub fn start_date(&self) -> NaiveDate {
        Utc.timestamp_opt(self.start, 0)
            .single()
            .expect("valid timestamp")
            .date_naive()
    }
}

impl FromStr for Window {
    type Err = String;

    /// `YYYY-MM-DD..YYYY-MM-DD`, both days inclusive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("expected FIRST..LAST, got `{s}`"))?;
        let parse = |d: &str| {
            NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").map_err(|e| format!("`{d}`: {e}"))
        };
        Window::from_dates(parse(a)?, parse(b)?)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = Utc
            .timestamp_opt(self.end - 1, 0)
            .single()
            .expect("valid timestamp")
            .date_naive();
        write!(f, "{}..{}", self.start_date(), last)
    }
}

/// Serde adapter writing a [`Window`] as `YYYY-MM-DD..YYYY-MM-DD`.
pub mod window_str {
    use super::Window;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &Window, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(w)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Window, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

/// Outcome of adding one record to a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    /// Comment held back: its parent is missing or newer than the comment.
    Quarantined,
    Duplicate,
    SelfLoop,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub platform_tag: String,
    pub window: Option<Window>,
    posts: Vec<Post>,
    comments: Vec<Comment>,
    quarantine: Vec<Comment>,
    edges: Vec<FollowEdge>,
    post_index: HashMap<String, usize>,
    comment_ids: HashSet<String>,
    edge_set: HashSet<FollowEdge>,
}

impl Corpus {
    pub fn new(platform_tag: impl Into<String>, window: Window) -> Self {
        Corpus {
            platform_tag: platform_tag.into(),
            window: Some(window),
            ..Default::default()
        }
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn quarantine(&self) -> &[Comment] {
        &self.quarantine
    }

    pub fn edges(&self) -> &[FollowEdge] {
        &self.edges
    }

    pub fn post(&self, id: &str) -> Option<&Post> {
        self.post_index.get(id).map(|&i| &self.posts[i])
    }

    pub fn add_post(&mut self, post: Post) -> Admission {
        if self.post_index.contains_key(&post.post_id) {
            return Admission::Duplicate;
        }
        self.post_index.insert(post.post_id.clone(), self.posts.len());
        self.posts.push(post);
        Admission::Accepted
    }

    pub fn add_comment(&mut self, comment: Comment) -> Admission {
        if !self.comment_ids.insert(comment.comment_id.clone()) {
            return Admission::Duplicate;
        }
        if self.resolves(&comment) {
            self.comments.push(comment);
            Admission::Accepted
        } else {
            self.quarantine.push(comment);
            Admission::Quarantined
        }
    }

    pub fn add_edge(&mut self, edge: FollowEdge) -> Admission {
        if edge.follower_id == edge.followee_id {
            return Admission::SelfLoop;
        }
        if !self.edge_set.insert(edge.clone()) {
            return Admission::Duplicate;
        }
        self.edges.push(edge);
        Admission::Accepted
    }

    fn resolves(&self, c: &Comment) -> bool {
        self.post(&c.parent_post_id)
            .is_some_and(|p| c.created_at >= p.created_at)
    }

    /// Move quarantined comments whose parent has since arrived into the
    /// corpus. Returns how many were released.
    pub fn resolve_quarantine(&mut self) -> usize {
        let held = std::mem::take(&mut self.quarantine);
        let (ready, still): (Vec<Comment>, Vec<Comment>) =
            held.into_iter().partition(|c| self.resolves(c));
        let released = ready.len();
        self.comments.extend(ready);
        self.quarantine = still;
        released
    }

    /// Keep the posts for which `keep` holds, with their comments.
    pub fn retain_posts(&mut self, mut keep: impl FnMut(&Post) -> bool) {
        self.posts.retain(|p| keep(p));
        self.post_index = self
            .posts
            .iter()
            .enumerate()
            .map(|(i, p)| (p.post_id.clone(), i))
            .collect();
        let index = &self.post_index;
        self.comments.retain(|c| index.contains_key(&c.parent_post_id));
        self.quarantine.retain(|c| index.contains_key(&c.parent_post_id));
        self.comment_ids = self
            .comments
            .iter()
            .chain(&self.quarantine)
            .map(|c| c.comment_id.clone())
            .collect();
    }

    /// Distinct authors of retained posts.
    pub fn posting_users(&self) -> BTreeSet<&str> {
        self.posts.iter().map(|p| p.author_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinksOnlyReport {
    pub posts_before: usize,
    pub posts_after: usize,
    pub comments_before: usize,
    pub comments_after: usize,
}

/// Sub-corpus of posts with at least one extractable domain.
pub fn links_only(corpus: &Corpus) -> (Corpus, LinksOnlyReport) {
    let mut out = corpus.clone();
    out.retain_posts(Post::has_link);
    let report = LinksOnlyReport {
        posts_before: corpus.posts.len(),
        posts_after: out.posts.len(),
        comments_before: corpus.comments.len(),
        comments_after: out.comments.len(),
    };
    if report.posts_after == 0 {
        log::warn!("links-only filter left no posts ({} before)", report.posts_before);
    }
    (out, report)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn post(id: &str, author: &str, t: Timestamp, urls: &[&str]) -> Post {
        Post {
            post_id: id.into(),
            author_id: author.into(),
            created_at: t,
            text: String::new(),
            hashtags: ["covid".to_string()].into(),
            urls: urls.iter().map(|u| u.to_string()).collect(),
            likes: 1,
            reshares: 0,
            replies: None,
        }
    }

    pub fn comment(id: &str, parent: &str, author: &str, t: Timestamp) -> Comment {
        Comment {
            comment_id: id.into(),
            parent_post_id: parent.into(),
            author_id: author.into(),
            created_at: t,
        }
    }

    pub fn window() -> Window {
        "2020-01-01..2020-09-30".parse().unwrap()
    }

    #[test]
    fn window_parsing() {
        let w = window();
        assert_eq!(w.start, 1_577_836_800);
        assert_eq!(w.end, 1_601_510_400);
        assert_eq!(w.days(), 274);
        assert_eq!(w.to_string(), "2020-01-01..2020-09-30");
        assert!(w.contains(w.start) && !w.contains(w.end));
        assert!("2020-02-01..2020-01-01".parse::<Window>().is_err());
        assert!("2020-01-01".parse::<Window>().is_err());
    }

    #[test]
    fn comments_before_parents_are_quarantined_then_released() {
        let w = window();
        let mut c = Corpus::new("t", w);
        assert_eq!(c.add_comment(comment("c1", "p1", "u", w.start + 50)), Admission::Quarantined);
        assert_eq!(c.add_comment(comment("c2", "p1", "u", w.start + 5)), Admission::Quarantined);
        assert_eq!(c.add_comment(comment("c1", "p1", "u", w.start + 50)), Admission::Duplicate);
        c.add_post(post("p1", "a", w.start + 10, &[]));
        assert_eq!(c.resolve_quarantine(), 1);
        assert_eq!(c.comments().len(), 1);
        // c2 predates its parent and stays held.
        assert_eq!(c.quarantine().len(), 1);
    }

    #[test]
    fn edges_collapse() {
        let mut c = Corpus::new("t", window());
        let e = |a: &str, b: &str| FollowEdge { follower_id: a.into(), followee_id: b.into() };
        assert_eq!(c.add_edge(e("a", "b")), Admission::Accepted);
        assert_eq!(c.add_edge(e("a", "b")), Admission::Duplicate);
        assert_eq!(c.add_edge(e("a", "a")), Admission::SelfLoop);
        assert_eq!(c.add_edge(e("b", "a")), Admission::Accepted);
        assert_eq!(c.edges().len(), 2);
    }

    #[test]
    fn links_only_filters_posts_and_comments() {
        let w = window();
        let mut c = Corpus::new("t", w);
        c.add_post(post("p1", "a", w.start, &["https://example.com/x"]));
        c.add_post(post("p2", "a", w.start, &[]));
        c.add_post(post("p3", "b", w.start, &["not a url"]));
        c.add_post(post("p4", "b", w.start, &["http://bbc.co.uk/n"]));
        c.add_post(post("p5", "c", w.start, &[]));
        c.add_comment(comment("c1", "p1", "x", w.start + 1));
        c.add_comment(comment("c2", "p2", "x", w.start + 1));
        let (only, report) = links_only(&c);
        assert_eq!(report.posts_before, 5);
        assert_eq!(report.posts_after, 2);
        assert_eq!(report.comments_after, 1);
        assert_eq!(only.comments()[0].comment_id, "c1");
        let (twice, _) = links_only(&only);
        assert_eq!(twice.posts(), only.posts());
        assert_eq!(twice.comments(), only.comments());
    }

    #[test]
    fn links_only_on_linkless_corpus_is_empty() {
        let w = window();
        let mut c = Corpus::new("t", w);
        c.add_post(post("p1", "a", w.start, &[]));
        let (only, report) = links_only(&c);
        assert!(only.posts().is_empty());
        assert_eq!(report.posts_after, 0);
    }
}
