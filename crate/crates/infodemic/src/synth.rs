//! Synthetic corpora with planted ground truth.
//!
//! [`generate`] writes platform-shaped exports (posts, comments, follow edges,
//! an outlet registry and the matching field map) and a [`Manifest`] that
//! records every planted quantity plus the values each analysis should
//! recover from the exports. The manifest is tallied directly from the
//! generated entities, not by running the analysis code.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use infodemic_core::{ClassifierConfig, CredibilityLabel, MbfcCategory, NgSpecial, OutletRecord, PowerLawSampler};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::ingest::{DROP_HASHTAG, DROP_NO_LINK, MALFORMED_INVALID, MALFORMED_JSON, MALFORMED_MISSING};
use crate::corpus::{
    BreakdownColumn, BreakdownTable, FieldMap, IngestReport, PlatformPreset, RecordKind, Timestamp, Window,
    SECONDS_PER_DAY,
};
use crate::error::{Error, Result};
use crate::hashing::{config_hash, sha256_hex};
use crate::lifetimes::LifetimeRecord;
use crate::sources::{registry_to_csv, Coverage, LabelCounts};
use crate::timeseries::{GroupSeries, Series};
use crate::SCHEMA_VERSION;

pub const POSTS_FILE: &str = "posts.jsonl";
pub const COMMENTS_FILE: &str = "comments.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";
pub const REGISTRY_FILE: &str = "registry.csv";
pub const FIELDMAP_FILE: &str = "fieldmap.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cluster {
    pub q: f64,
    pub weight: f64,
    /// Standard deviation of user leanings around `q`, clamped to `[0, 1]`.
    #[serde(default)]
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngagementAlpha {
    pub likes: f64,
    pub reshares: f64,
    pub replies: f64,
}

impl Default for EngagementAlpha {
    fn default() -> Self {
        EngagementAlpha {
            likes: 1.5,
            reshares: 1.8,
            replies: 2.2,
        }
    }
}

/// Per-day rate at which a post stops attracting comments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifetimeHazards {
    pub questionable: f64,
    pub reliable: f64,
}

impl Default for LifetimeHazards {
    fn default() -> Self {
        LifetimeHazards {
            questionable: 0.1,
            reliable: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowConfig {
    pub homophily: f64,
    pub mean_degree: f64,
    /// Leaning distance under which a followee counts as like-minded.
    pub window: f64,
    /// Export a degree-preserving rewiring instead of the homophilous graph.
    pub rewire: bool,
}

impl Default for FollowConfig {
    fn default() -> Self {
        FollowConfig {
            homophily: 0.9,
            mean_degree: 8.0,
            window: 0.2,
            rewire: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistryConfig {
    pub questionable: usize,
    pub reliable: usize,
    /// NG humor and platform sites.
    pub unrated: usize,
    /// Linked domains absent from the registry.
    pub unregistered: usize,
    /// Share of rated outlets carried by NG rather than MBFC.
    pub ng_share: f64,
    /// NG rows repeating an MBFC domain with the opposite verdict.
    pub cross_provider_duplicates: usize,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        RegistryConfig {
            questionable: 12,
            reliable: 18,
            unrated: 2,
            unregistered: 6,
            ng_share: 0.25,
            cross_provider_duplicates: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_users: usize,
    pub n_posts: usize,
    #[serde(with = "crate::corpus::window_str")]
    pub window: Window,
    pub platform: PlatformPreset,
    pub hashtags: Vec<String>,
    /// Share of on-topic posts carrying a URL.
    pub link_rate: f64,
    /// Share of linked posts pointing at unregistered or unrated outlets.
    pub uncategorized_rate: f64,
    /// Share of posts without any filter hashtag.
    pub offtopic_rate: f64,
    /// Share of post lines replaced by malformed records.
    pub malformed_rate: f64,
    /// When set, every user has this leaning and the clusters are ignored.
    pub questionable_share: Option<f64>,
    pub clusters: Vec<Cluster>,
    pub engagement_alpha: EngagementAlpha,
    /// Share of engagement values forced to zero.
    pub zero_engagement_rate: f64,
    pub replies_present: bool,
    pub lifetime_hazards: LifetimeHazards,
    /// Comments per day while a post is alive.
    pub comment_rate: f64,
    pub follow: FollowConfig,
    pub registry: RegistryConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_users: 150,
            n_posts: 1000,
            window: "2020-01-01..2020-09-30".parse().expect("valid window"),
            platform: PlatformPreset::Gab,
            hashtags: ["covid", "covid19", "corona", "coronavirus"].map(String::from).to_vec(),
            link_rate: 1.0,
            uncategorized_rate: 0.1,
            offtopic_rate: 0.0,
            malformed_rate: 0.0,
            questionable_share: None,
            clusters: vec![
                Cluster { q: 0.15, weight: 0.5, spread: 0.05 },
                Cluster { q: 0.85, weight: 0.5, spread: 0.05 },
            ],
            engagement_alpha: EngagementAlpha::default(),
            zero_engagement_rate: 0.2,
            replies_present: true,
            lifetime_hazards: LifetimeHazards::default(),
            comment_rate: 1.0,
            follow: FollowConfig::default(),
            registry: RegistryConfig::default(),
        }
    }
}

fn rate(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Usage(format!("synth: {field} = {v} is outside [0, 1]")))
    }
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SynthConfig::from_toml_str(&text).map_err(|reason| Error::Parse {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::Usage("synth: n_users must be at least 1".into()));
        }
        if self.hashtags.is_empty() {
            return Err(Error::Usage("synth: at least one hashtag is required".into()));
        }
        for (f, v) in [
            ("link_rate", self.link_rate),
            ("uncategorized_rate", self.uncategorized_rate),
            ("offtopic_rate", self.offtopic_rate),
            ("malformed_rate", self.malformed_rate),
            ("zero_engagement_rate", self.zero_engagement_rate),
            ("follow.homophily", self.follow.homophily),
            ("registry.ng_share", self.registry.ng_share),
        ] {
            rate(f, v)?;
        }
        if let Some(s) = self.questionable_share {
            rate("questionable_share", s)?;
        } else {
            if self.clusters.is_empty() {
                return Err(Error::Usage("synth: clusters or questionable_share required".into()));
            }
            let total: f64 = self.clusters.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Usage(format!("synth: cluster weights sum to {total}, not 1")));
            }
            for c in &self.clusters {
                rate("clusters.q", c.q)?;
                if c.weight < 0.0 || !(c.spread >= 0.0) {
                    return Err(Error::Usage("synth: cluster weight and spread must be non-negative".into()));
                }
            }
        }
        let a = self.engagement_alpha;
        for (f, v) in [("likes", a.likes), ("reshares", a.reshares), ("replies", a.replies)] {
            if !(v > 1.0) || !v.is_finite() {
                return Err(Error::Usage(format!("synth: engagement_alpha.{f} must exceed 1")));
            }
        }
        let h = self.lifetime_hazards;
        for (f, v) in [("questionable", h.questionable), ("reliable", h.reliable), ("comment_rate", self.comment_rate)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Usage(format!("synth: {f} must be positive")));
            }
        }
        if !(self.follow.mean_degree >= 0.0) || !(self.follow.window > 0.0) {
            return Err(Error::Usage("synth: follow.mean_degree >= 0 and follow.window > 0 required".into()));
        }
        let r = self.registry;
        let needs_q = self.questionable_share != Some(0.0);
        if (needs_q && r.questionable == 0) || r.reliable == 0 {
            return Err(Error::Usage("synth: registry needs questionable and reliable outlets".into()));
        }
        if self.uncategorized_rate > 0.0 && r.unregistered + r.unrated == 0 {
            return Err(Error::Usage("synth: uncategorized posts need unregistered or unrated outlets".into()));
        }
        if r.cross_provider_duplicates > r.questionable + r.reliable {
            return Err(Error::Usage("synth: more duplicates than rated outlets".into()));
        }
        Ok(())
    }
}

/// Each user follows a Poisson(`mean_degree`) number of others. With
/// probability `h` a followee is drawn from users whose leaning is within
/// `window` of the follower's, otherwise uniformly. No self-loops or
/// repeated edges.
pub fn generate_follow_graph(leanings: &[f64], h: f64, mean_degree: f64, window: f64, seed: u64) -> Vec<(usize, usize)> {
    let n = leanings.len();
    if n < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| leanings[a].total_cmp(&leanings[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| leanings[i]).collect();
    let degree = (mean_degree > 0.0).then(|| Poisson::new(mean_degree).expect("positive mean"));
    let mut edges = Vec::new();
    for i in 0..n {
        let d = degree.as_ref().map_or(0, |p| p.sample(&mut rng) as usize).min(n - 1);
        let lo = sorted.partition_point(|&q| q <= leanings[i] - window);
        let hi = sorted.partition_point(|&q| q < leanings[i] + window);
        let mut chosen = BTreeSet::new();
        let mut attempts = 0;
        while chosen.len() < d && attempts < 50 * (d + 1) {
            attempts += 1;
            let j = if rng.random::<f64>() < h && hi - lo > 1 {
                order[rng.random_range(lo..hi)]
            } else {
                rng.random_range(0..n)
            };
            if j != i {
                chosen.insert(j);
            }
        }
        edges.extend(chosen.into_iter().map(|j| (i, j)));
    }
    edges
}

/// Degree-preserving null: repeated double edge swaps `(a→b, c→d) ⇒
/// (a→d, c→b)`, rejecting swaps that would create self-loops or repeats.
/// Every node keeps its in- and out-degree.
pub fn rewire_edges(edges: &[(usize, usize)], swaps_per_edge: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut out = edges.to_vec();
    if out.len() < 2 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut present: HashSet<(usize, usize)> = out.iter().copied().collect();
    let target = swaps_per_edge * out.len();
    let mut done = 0;
    let mut attempts = 0;
    while done < target && attempts < 20 * target {
        attempts += 1;
        let x = rng.random_range(0..out.len());
        let y = rng.random_range(0..out.len());
        let ((a, b), (c, d)) = (out[x], out[y]);
        if x == y || a == d || c == b || present.contains(&(a, d)) || present.contains(&(c, b)) {
            continue;
        }
        present.remove(&(a, b));
        present.remove(&(c, d));
        present.insert((a, d));
        present.insert((c, b));
        out[x] = (a, d);
        out[y] = (c, b);
        done += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostTruth {
    pub label: CredibilityLabel,
    pub comments: u64,
    pub duration_days: Option<u64>,
    pub event_observed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub planted_q: f64,
    /// Index into the configured clusters, absent with a fixed share.
    pub cluster: Option<usize>,
    /// Categorized posts (Questionable or Reliable).
    pub k: u32,
    pub questionable: u32,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedIngest {
    pub posts: IngestReport,
    pub comments: IngestReport,
    pub edges: IngestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRegistry {
    pub rows: u64,
    pub outlets: u64,
    pub duplicates: u64,
    pub by_provider: BTreeMap<String, u64>,
    pub by_label: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTimeSeries {
    pub overall: GroupSeries,
    pub questionable: GroupSeries,
    pub reliable: GroupSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub config: SynthConfig,
    pub config_hash: String,
    /// SHA-256 of every export file.
    pub files: BTreeMap<String, String>,
    /// Tallies expected from ingesting the exports with the configured
    /// hashtags and window and the links-only filter.
    pub ingest: ExpectedIngest,
    /// On-topic well-formed posts, with and without a link.
    pub posts_on_topic: u64,
    pub posts_with_link: u64,
    pub registry: ExpectedRegistry,
    pub coverage: Coverage,
    pub breakdown: BreakdownTable,
    pub time_series: ExpectedTimeSeries,
    /// Ingested posts only.
    pub posts: BTreeMap<String, PostTruth>,
    pub users: BTreeMap<String, UserTruth>,
    pub user_lifetimes: Vec<LifetimeRecord>,
    pub graph_edges: u64,
}

#[derive(Debug)]
pub struct SynthOutput {
    /// `(file name, bytes)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub manifest: Manifest,
}

struct Outlet {
    domain: String,
    label: CredibilityLabel,
    registered: bool,
}

#[derive(Clone)]
struct GenPost {
    id: String,
    author: usize,
    created_at: Timestamp,
    tag: Option<String>,
    url: Option<String>,
    label: CredibilityLabel,
    registered: bool,
    likes: u64,
    reshares: u64,
    replies: Option<u64>,
    malformed: Option<usize>,
}

struct GenComment {
    id: String,
    post: usize,
    author: usize,
    created_at: Timestamp,
}

fn build_registry(cfg: &RegistryConfig, rng: &mut ChaCha8Rng) -> (Vec<OutletRecord>, Vec<Outlet>, Vec<Outlet>, Vec<Outlet>) {
    let mut rows = Vec::new();
    let mut questionable = Vec::new();
    let mut reliable = Vec::new();
    let mut uncategorized = Vec::new();
    let q_cats = [MbfcCategory::Questionable, MbfcCategory::ConspiracyPseudoscience];
    let r_cats = [
        MbfcCategory::Right,
        MbfcCategory::RightCenter,
        MbfcCategory::LeastBiased,
        MbfcCategory::LeftCenter,
        MbfcCategory::Left,
        MbfcCategory::ProScience,
    ];
    for i in 0..cfg.questionable {
        let domain = format!("qsource{i}.com");
        let rec = if rng.random::<f64>() < cfg.ng_share {
            // Include the boundary score now and then.
            let score = if i % 4 == 0 { 60.0 } else { (rng.random_range(0..=1200) as f64) / 20.0 };
            OutletRecord::newsguard(&domain, score)
        } else {
            let mut r = OutletRecord::mbfc(&domain, q_cats[i % q_cats.len()]);
            r.mbfc_bias_score = Some(rng.random_range(0..=100) as f64 / 10.0);
            r
        };
        rows.push(rec);
        questionable.push(Outlet { domain, label: CredibilityLabel::Questionable, registered: true });
    }
    for i in 0..cfg.reliable {
        let domain = format!("rsource{i}.org");
        let rec = if rng.random::<f64>() < cfg.ng_share {
            OutletRecord::newsguard(&domain, 60.5 + rng.random_range(0..=79) as f64 / 2.0)
        } else {
            OutletRecord::mbfc(&domain, r_cats[i % r_cats.len()])
        };
        rows.push(rec);
        reliable.push(Outlet { domain, label: CredibilityLabel::Reliable, registered: true });
    }
    for i in 0..cfg.unrated {
        let domain = format!("unrated{i}.net");
        let special = if i % 2 == 0 { NgSpecial::Humor } else { NgSpecial::Platform };
        rows.push(OutletRecord::newsguard_special(&domain, special));
        uncategorized.push(Outlet { domain, label: CredibilityLabel::Unknown, registered: true });
    }
    for i in 0..cfg.unregistered {
        uncategorized.push(Outlet {
            domain: format!("blog{i}.info"),
            label: CredibilityLabel::Unknown,
            registered: false,
        });
    }
    // An NG row contradicting an MBFC row; the MBFC verdict must survive.
    let mbfc: Vec<OutletRecord> = rows.iter().filter(|r| r.mbfc_bias.is_some()).cloned().collect();
    for r in mbfc.iter().take(cfg.cross_provider_duplicates) {
        let q = matches!(r.mbfc_bias, Some(MbfcCategory::Questionable | MbfcCategory::ConspiracyPseudoscience));
        rows.push(OutletRecord::newsguard(r.domain.clone(), if q { 95.0 } else { 10.0 }));
    }
    (rows, questionable, reliable, uncategorized)
}

fn url_for(domain: &str, post: usize, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => format!("https://www.{domain}/story/{post}"),
        1 => format!("http://news.{domain}/a/{post}?ref=share"),
        _ => format!("https://{domain}/{post}"),
    }
}

fn tag_variant(tag: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => tag.to_string(),
        1 => tag.to_uppercase(),
        _ => {
            let mut c = tag.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        }
    }
}

fn rfc3339(t: Timestamp) -> String {
    chrono::DateTime::from_timestamp(t, 0)
        .expect("timestamp in range")
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

fn post_json(p: &GenPost, users: &[String], platform: PlatformPreset, text: &str) -> Value {
    let urls: Vec<&String> = p.url.iter().collect();
    let tags: Vec<&String> = p.tag.iter().collect();
    match platform {
        PlatformPreset::Gab => {
            let mut v = json!({
                "id": p.id,
                "account": {"id": users[p.author], "username": format!("user_{}", p.author)},
                "created_at": rfc3339(p.created_at),
                "content": text,
                "tags": tags.iter().map(|t| json!({"name": t})).collect::<Vec<_>>(),
                "urls": urls,
                "favourites_count": p.likes,
                "reblogs_count": p.reshares,
            });
            if let Some(r) = p.replies {
                v["replies_count"] = json!(r);
            }
            v
        }
        _ => {
            let mut v = json!({
                "post_id": p.id,
                "author_id": users[p.author],
                "created_at": p.created_at,
                "text": text,
                "hashtags": tags,
                "urls": urls,
                "likes": p.likes,
                "reshares": p.reshares,
            });
            if let Some(r) = p.replies {
                v["replies"] = json!(r);
            }
            v
        }
    }
}

fn malformed_line(p: &GenPost, kind: usize) -> (String, &'static str) {
    match kind % 4 {
        0 => (format!("{{\"id\": \"{}\", \"content\": \"cut off", p.id), MALFORMED_JSON),
        1 => (json!({"id": p.id, "created_at": p.created_at}).to_string(), MALFORMED_MISSING),
        2 => (
            json!({
                "id": p.id, "post_id": p.id, "account": {"id": "x"}, "author_id": "x",
                "created_at": p.created_at, "favourites_count": -3, "likes": -3,
                "reblogs_count": 0, "reshares": 0
            })
            .to_string(),
            MALFORMED_INVALID,
        ),
        _ => ("[\"not\", \"an\", \"object\"]".to_string(), MALFORMED_JSON),
    }
}

fn comment_json(c: &GenComment, posts: &[GenPost], users: &[String], platform: PlatformPreset) -> Value {
    match platform {
        PlatformPreset::Gab => json!({
            "id": c.id,
            "in_reply_to_id": posts[c.post].id,
            "account": {"id": users[c.author]},
            "created_at": rfc3339(c.created_at),
        }),
        _ => json!({
            "comment_id": c.id,
            "parent_post_id": posts[c.post].id,
            "author_id": users[c.author],
            "created_at": c.created_at,
        }),
    }
}

fn edge_json(a: &str, b: &str, platform: PlatformPreset) -> Value {
    match platform {
        PlatformPreset::Gab => json!({"follower": a, "following": b}),
        _ => json!({"follower_id": a, "followee_id": b}),
    }
}

fn jsonl(values: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut out = Vec::new();
    for v in values {
        out.extend_from_slice(v.as_bytes());
        out.push(b'\n');
    }
    out
}

fn bump(map: &mut BTreeMap<String, u64>, key: &str) {
    *map.entry(key.to_string()).or_default() += 1;
}

/// Independent RNG stream per generation phase, so that changing one phase's
/// draws leaves the others untouched.
fn stream(seed: u64, phase: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(phase);
    rng
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    if config.platform == PlatformPreset::Twitter {
        return Err(Error::Usage("synth: platform must be gab or canonical".into()));
    }
    let w = config.window;
    let width = |n: usize| n.max(1).to_string().len();
    let users: Vec<String> = (0..config.n_users).map(|i| format!("u{i:0w$}", w = width(config.n_users))).collect();

    // Users.
    let mut rng = stream(config.seed, 1);
    let mut planted = Vec::with_capacity(config.n_users);
    for _ in 0..config.n_users {
        match config.questionable_share {
            Some(s) => planted.push((s, None)),
            None => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = config.clusters.len() - 1;
                for (ci, c) in config.clusters.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        idx = ci;
                        break;
                    }
                }
                let c = config.clusters[idx];
                let noise = if c.spread > 0.0 {
                    Normal::new(0.0, c.spread).expect("valid spread").sample(&mut rng)
                } else {
                    0.0
                };
                planted.push(((c.q + noise).clamp(0.0, 1.0), Some(idx)));
            }
        }
    }

    // Registry.
    let mut rng = stream(config.seed, 2);
    let (registry_rows, q_outlets, r_outlets, u_outlets) = build_registry(&config.registry, &mut rng);

    // Posts.
    let mut rng = stream(config.seed, 3);
    let alpha = config.engagement_alpha;
    let sampler = |a: f64| PowerLawSampler::new(a, 1).expect("alpha validated");
    let (s_likes, s_reshares, s_replies) = (sampler(alpha.likes), sampler(alpha.reshares), sampler(alpha.replies));
    let malformed_n = (config.malformed_rate * config.n_posts as f64).round() as usize;
    let malformed_at: BTreeSet<usize> = sample_indices(&mut rng, config.n_posts, malformed_n.min(config.n_posts))
        .into_iter()
        .collect();
    let span = w.end - w.start;
    let mut posts = Vec::with_capacity(config.n_posts);
    for j in 0..config.n_posts {
        let author = rng.random_range(0..config.n_users);
        let created_at = w.start + rng.random_range(0..span);
        let tag = (rng.random::<f64>() >= config.offtopic_rate)
            .then(|| config.hashtags[rng.random_range(0..config.hashtags.len())].clone());
        let linked = rng.random::<f64>() < config.link_rate;
        let (url, label, registered) = if linked {
            let outlet = if rng.random::<f64>() < config.uncategorized_rate {
                &u_outlets[rng.random_range(0..u_outlets.len())]
            } else if rng.random::<f64>() < planted[author].0 {
                &q_outlets[rng.random_range(0..q_outlets.len())]
            } else {
                &r_outlets[rng.random_range(0..r_outlets.len())]
            };
            (Some(url_for(&outlet.domain, j, &mut rng)), outlet.label, outlet.registered)
        } else {
            (None, CredibilityLabel::Unknown, false)
        };
        let draw = |s: &PowerLawSampler, rng: &mut ChaCha8Rng| {
            if rng.random::<f64>() < config.zero_engagement_rate {
                0
            } else {
                s.sample(rng)
            }
        };
        let likes = draw(&s_likes, &mut rng);
        let reshares = draw(&s_reshares, &mut rng);
        let replies = config.replies_present.then(|| draw(&s_replies, &mut rng));
        posts.push(GenPost {
            id: format!("p{j:0w$}", w = width(config.n_posts)),
            author,
            created_at,
            tag,
            url,
            label,
            registered,
            likes,
            reshares,
            replies,
            malformed: None,
        });
    }
    for (k, &j) in malformed_at.iter().enumerate() {
        posts[j].malformed = Some(k);
    }
    let ingested = |p: &GenPost| p.malformed.is_none() && p.tag.is_some() && p.url.is_some();

    // Comments on ingested posts: alive for Exp(hazard) days, Poisson
    // arrivals at `comment_rate` per day, cut at the window end.
    let mut rng = stream(config.seed, 4);
    let per_second = config.comment_rate / SECONDS_PER_DAY as f64;
    let gap = Exp::new(per_second).expect("positive rate");
    let mut comments = Vec::new();
    for (pi, p) in posts.iter().enumerate() {
        if !ingested(p) {
            continue;
        }
        let hazard = match p.label {
            CredibilityLabel::Questionable => config.lifetime_hazards.questionable,
            _ => config.lifetime_hazards.reliable,
        };
        let alive_days = Exp::new(hazard).expect("positive hazard").sample(&mut rng);
        let death = (p.created_at as f64 + alive_days * SECONDS_PER_DAY as f64).min((w.end - 1) as f64);
        let mut t = p.created_at as f64;
        loop {
            t += gap.sample(&mut rng);
            if t > death {
                break;
            }
            comments.push(GenComment {
                id: String::new(),
                post: pi,
                author: rng.random_range(0..config.n_users),
                created_at: t as Timestamp,
            });
        }
    }
    let cw = width(comments.len());
    for (i, c) in comments.iter_mut().enumerate() {
        c.id = format!("c{i:0cw$}");
    }

    // Follow graph.
    let leanings: Vec<f64> = planted.iter().map(|p| p.0).collect();
    let f = config.follow;
    let mut edges = generate_follow_graph(&leanings, f.homophily, f.mean_degree, f.window, config.seed ^ 0x5eed_f011_0000);
    if f.rewire {
        edges = rewire_edges(&edges, 10, config.seed ^ 0x5eed_4e41_0000);
    }

    // Exports.
    let mut rng = stream(config.seed, 5);
    let mut post_lines = Vec::with_capacity(posts.len());
    let mut expected_posts = IngestReport::new(RecordKind::Posts);
    let mut posts_on_topic = 0;
    let mut posts_with_link = 0;
    for p in &posts {
        expected_posts.total_lines += 1;
        if let Some(k) = p.malformed {
            let (line, reason) = malformed_line(p, k);
            bump(&mut expected_posts.malformed, reason);
            post_lines.push(line);
            continue;
        }
        let shown_tag = match &p.tag {
            Some(t) => tag_variant(t, &mut rng),
            None => "news".to_string(),
        };
        let text = format!("update {} #{}", p.id, shown_tag);
        let shown = GenPost {
            tag: Some(shown_tag),
            ..p.clone()
        };
        post_lines.push(post_json(&shown, &users, config.platform, &text).to_string());
        if p.tag.is_none() {
            bump(&mut expected_posts.dropped, DROP_HASHTAG);
            continue;
        }
        posts_on_topic += 1;
        if p.url.is_none() {
            bump(&mut expected_posts.dropped, DROP_NO_LINK);
            continue;
        }
        posts_with_link += 1;
        expected_posts.accepted += 1;
    }
    let comment_lines: Vec<String> = comments
        .iter()
        .map(|c| comment_json(c, &posts, &users, config.platform).to_string())
        .collect();
    let edge_lines: Vec<String> = edges
        .iter()
        .map(|&(a, b)| edge_json(&users[a], &users[b], config.platform).to_string())
        .collect();
    let mut expected_comments = IngestReport::new(RecordKind::Comments);
    expected_comments.total_lines = comments.len() as u64;
    expected_comments.accepted = comments.len() as u64;
    let mut expected_edges = IngestReport::new(RecordKind::Edges);
    expected_edges.total_lines = edges.len() as u64;
    expected_edges.accepted = edges.len() as u64;

    let fieldmap = format!(
        "# Field map for the synthetic {} export.\npreset = \"{}\"\n",
        match config.platform {
            PlatformPreset::Gab => "gab",
            _ => "canonical",
        },
        match config.platform {
            PlatformPreset::Gab => "gab",
            _ => "canonical",
        }
    );
    debug_assert!(FieldMap::from_toml_str(&fieldmap).is_ok());

    let files: Vec<(String, Vec<u8>)> = vec![
        (POSTS_FILE.into(), jsonl(post_lines)),
        (COMMENTS_FILE.into(), jsonl(comment_lines)),
        (EDGES_FILE.into(), jsonl(edge_lines)),
        (REGISTRY_FILE.into(), registry_to_csv(&registry_rows).into_bytes()),
        (FIELDMAP_FILE.into(), fieldmap.into_bytes()),
    ];

    let manifest = tally(
        config,
        &users,
        &planted,
        &registry_rows,
        &posts,
        &comments,
        &files,
        ExpectedIngest {
            posts: expected_posts,
            comments: expected_comments,
            edges: expected_edges,
        },
        posts_on_topic,
        posts_with_link,
        edges.len(),
    );
    Ok(SynthOutput { files, manifest })
}

#[allow(clippy::too_many_arguments)]
fn tally(
    config: &SynthConfig,
    users: &[String],
    planted: &[(f64, Option<usize>)],
    registry_rows: &[OutletRecord],
    posts: &[GenPost],
    comments: &[GenComment],
    files: &[(String, Vec<u8>)],
    ingest: ExpectedIngest,
    posts_on_topic: u64,
    posts_with_link: u64,
    graph_edges: usize,
) -> Manifest {
    let w = config.window;
    let kept: Vec<usize> = (0..posts.len())
        .filter(|&i| posts[i].malformed.is_none() && posts[i].tag.is_some() && posts[i].url.is_some())
        .collect();

    // Registry expectations: the first row of a domain wins unless an MBFC
    // row follows an NG one; the generator only appends NG duplicates.
    let mut seen = BTreeSet::new();
    let mut registry = ExpectedRegistry {
        rows: registry_rows.len() as u64,
        outlets: 0,
        duplicates: 0,
        by_provider: BTreeMap::new(),
        by_label: LabelCounts::default(),
    };
    for r in registry_rows {
        if !seen.insert(r.domain.clone()) {
            registry.duplicates += 1;
            continue;
        }
        registry.outlets += 1;
        bump(&mut registry.by_provider, if r.mbfc_bias.is_some() { "MBFC" } else { "NG" });
        registry.by_label.add(infodemic_core::classify_outlet(r, &ClassifierConfig::default()));
    }

    // Per-post comment spans.
    let mut spans: BTreeMap<usize, (Timestamp, Timestamp, u64)> = BTreeMap::new();
    for c in comments {
        let e = spans.entry(c.post).or_insert((c.created_at, c.created_at, 0));
        e.0 = e.0.min(c.created_at);
        e.1 = e.1.max(c.created_at);
        e.2 += 1;
    }
    let censored = |last: Timestamp| last >= w.final_day_start();

    let mut coverage = Coverage::default();
    let mut post_truth = BTreeMap::new();
    let mut cols: BTreeMap<&str, (BreakdownColumn, BTreeSet<usize>)> = BTreeMap::new();
    let mut series_posts: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    let mut first_post: BTreeMap<(&str, usize), Timestamp> = BTreeMap::new();
    let mut user_counts: BTreeMap<usize, (u32, u32)> = BTreeMap::new();
    for &i in &kept {
        let p = &posts[i];
        coverage.posts += 1;
        let mut groups = vec!["overall"];
        match p.label {
            CredibilityLabel::Questionable => {
                coverage.questionable += 1;
                groups.extend(["categorized", "questionable"]);
            }
            CredibilityLabel::Reliable => {
                coverage.reliable += 1;
                groups.extend(["categorized", "reliable"]);
            }
            CredibilityLabel::Unknown => {
                coverage.uncategorized += 1;
                coverage.unresolved += p.registered as u64;
            }
        }
        if let Some(bit) = p.label.leaning_bit() {
            let e = user_counts.entry(p.author).or_default();
            e.0 += bit as u32;
            e.1 += 1;
        }
        let span = spans.get(&i);
        for g in &groups {
            let (col, authors) = cols.entry(g).or_default();
            col.posts += 1;
            col.likes += p.likes;
            col.reshares += p.reshares;
            match p.replies {
                Some(r) => col.replies += r,
                None => col.replies_absent += 1,
            }
            col.comments += span.map_or(0, |s| s.2);
            authors.insert(p.author);
            if *g != "categorized" {
                series_posts.entry(g).or_insert_with(|| vec![0; w.days()])[w.day_index(p.created_at)] += 1;
                first_post
                    .entry((g, p.author))
                    .and_modify(|t| *t = (*t).min(p.created_at))
                    .or_insert(p.created_at);
            }
        }
        let (duration_days, event_observed) = match span {
            Some(&(first, last, _)) if p.label != CredibilityLabel::Unknown => (
                Some(((last - first) / SECONDS_PER_DAY) as u64),
                Some(!censored(last)),
            ),
            _ => (None, None),
        };
        post_truth.insert(
            p.id.clone(),
            PostTruth {
                label: p.label,
                comments: span.map_or(0, |s| s.2),
                duration_days,
                event_observed,
            },
        );
    }
    coverage.categorized = coverage.questionable + coverage.reliable;

    let column = |g: &str| {
        cols.get(g)
            .map(|(c, a)| BreakdownColumn { users: a.len() as u64, ..*c })
            .unwrap_or_default()
    };
    let breakdown = BreakdownTable {
        overall: column("overall"),
        categorized: Some(column("categorized")),
        questionable: Some(column("questionable")),
        reliable: Some(column("reliable")),
    };

    let group_series = |g: &str| {
        let posts = series_posts.get(g).cloned().unwrap_or_else(|| vec![0; w.days()]);
        let mut users_daily = vec![0u64; w.days()];
        for (_, &t) in first_post.range((g, 0)..=(g, usize::MAX)) {
            users_daily[w.day_index(t)] += 1;
        }
        let cum = |d: &[u64]| {
            d.iter()
                .scan(0u64, |a, &x| {
                    *a += x;
                    Some(*a)
                })
                .collect()
        };
        GroupSeries {
            posts: Series { cumulative: cum(&posts), daily: posts },
            users: Series { cumulative: cum(&users_daily), daily: users_daily },
        }
    };
    let time_series = ExpectedTimeSeries {
        overall: group_series("overall"),
        questionable: group_series("questionable"),
        reliable: group_series("reliable"),
    };

    let user_truth = users
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let (questionable, k) = user_counts.get(&i).copied().unwrap_or((0, 0));
            (
                id.clone(),
                UserTruth {
                    planted_q: planted[i].0,
                    cluster: planted[i].1,
                    k,
                    questionable,
                    q: (k > 0).then(|| questionable as f64 / k as f64),
                },
            )
        })
        .collect();

    let mut user_spans: BTreeMap<(CredibilityLabel, &str), (Timestamp, Timestamp)> = BTreeMap::new();
    for c in comments {
        let label = posts[c.post].label;
        if label == CredibilityLabel::Unknown {
            continue;
        }
        let e = user_spans
            .entry((label, users[c.author].as_str()))
            .or_insert((c.created_at, c.created_at));
        e.0 = e.0.min(c.created_at);
        e.1 = e.1.max(c.created_at);
    }
    let user_lifetimes = user_spans
        .into_iter()
        .map(|((group, user), (first, last))| LifetimeRecord {
            subject_id: user.to_string(),
            duration_days: ((last - first) / SECONDS_PER_DAY) as u64,
            event_observed: !censored(last),
            group,
        })
        .collect();

    Manifest {
        schema: SCHEMA_VERSION.to_string(),
        config: config.clone(),
        config_hash: config_hash(config),
        files: files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect(),
        ingest,
        posts_on_topic,
        posts_with_link,
        registry,
        coverage,
        breakdown,
        time_series,
        posts: post_truth,
        users: user_truth,
        user_lifetimes,
        graph_edges: graph_edges as u64,
    }
}

/// Generate and write the exports plus `manifest.json` into `dir`.
pub fn write_synth(dir: &Path, config: &SynthConfig) -> Result<Manifest> {
    let out = generate(config)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, bytes) in &out.files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(&out.manifest).expect("manifest serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    log::info!(
        "synth: {} posts, {} comments, {} edges written to {}",
        out.manifest.ingest.posts.total_lines,
        out.manifest.ingest.comments.total_lines,
        out.manifest.ingest.edges.total_lines,
        dir.display()
    );
    Ok(out.manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_users: 40,
            n_posts: 300,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_exports() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.files, b.files);
        assert_eq!(a.manifest, b.manifest);
        let c = generate(&SynthConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(a.files[0], c.files[0]);
    }

    #[test]
    fn malformed_lines_replace_records() {
        let cfg = SynthConfig {
            malformed_rate: 0.037,
            n_posts: 1000,
            ..small()
        };
        let m = generate(&cfg).unwrap().manifest;
        assert_eq!(m.ingest.posts.total_lines, 1000);
        assert_eq!(m.ingest.posts.malformed_total(), 37);
        assert_eq!(m.ingest.posts.accepted, 963);
        assert!(m.ingest.posts.is_balanced());
    }

    #[test]
    fn zero_share_makes_everything_reliable() {
        let cfg = SynthConfig {
            questionable_share: Some(0.0),
            uncategorized_rate: 0.0,
            ..small()
        };
        let m = generate(&cfg).unwrap().manifest;
        assert!(m.posts.values().all(|p| p.label == CredibilityLabel::Reliable));
        assert_eq!(m.coverage.questionable, 0);
    }

    #[test]
    fn infeasible_configs_are_usage_errors() {
        for cfg in [
            SynthConfig { n_users: 0, ..small() },
            SynthConfig { link_rate: 1.5, ..small() },
            SynthConfig {
                clusters: vec![Cluster { q: 0.5, weight: 0.7, spread: 0.0 }],
                ..small()
            },
            SynthConfig {
                engagement_alpha: EngagementAlpha { likes: 1.0, ..Default::default() },
                ..small()
            },
        ] {
            assert_eq!(generate(&cfg).unwrap_err().exit_code(), 2);
        }
    }

    #[test]
    fn follow_graph_basics() {
        assert!(generate_follow_graph(&[0.3], 0.5, 3.0, 0.2, 1).is_empty());
        let two = generate_follow_graph(&[0.1, 0.9], 0.0, 5.0, 0.2, 1);
        assert!(two.len() <= 2 && two.iter().all(|(a, b)| a != b));

        let q: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 0.1 } else { 0.9 }).collect();
        let e = generate_follow_graph(&q, 1.0, 6.0, 0.2, 7);
        assert!(!e.is_empty());
        assert!(e.iter().all(|&(a, b)| (q[a] - q[b]).abs() < 0.2));
        let set: HashSet<_> = e.iter().collect();
        assert_eq!(set.len(), e.len());
    }

    #[test]
    fn rewiring_preserves_degrees() {
        let q: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let e = generate_follow_graph(&q, 0.9, 5.0, 0.2, 3);
        let r = rewire_edges(&e, 10, 4);
        let degrees = |edges: &[(usize, usize)]| {
            let mut out = vec![0; 100];
            let mut inn = vec![0; 100];
            for &(a, b) in edges {
                out[a] += 1;
                inn[b] += 1;
            }
            (out, inn)
        };
        assert_eq!(degrees(&e), degrees(&r));
        assert_ne!(e, r);
        assert!(r.iter().all(|(a, b)| a != b));
        assert_eq!(r.iter().collect::<HashSet<_>>().len(), r.len());
    }
}
