//! User leaning, average neighborhood leaning and their joint distribution.
//!
//! A user's leaning `q` is the fraction of their categorized posts that link to
//! Questionable outlets. The neighborhood leaning `q^N` of a user is the mean
//! `q` of the accounts they follow. Some texts write these as `x` and `x^N`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeaningError {
    #[error("no users satisfy the eligibility threshold")]
    NoEligibleUsers,
    #[error("bin count must be at least 2, got {0}")]
    Bins(usize),
    #[error("min_posts must be at least 1")]
    MinPosts,
    #[error("smoothing bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),
    #[error("correlation undefined over {n} pairs: fewer than 2 or zero variance")]
    UndefinedCorrelation { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserLeaning {
    pub q: f64,
    /// Categorized posts by the user.
    pub k: u32,
    /// Of which link to Questionable outlets.
    pub questionable: u32,
}

impl UserLeaning {
    pub fn from_counts(questionable: u32, k: u32) -> Self {
        debug_assert!(k >= 1 && questionable <= k);
        UserLeaning {
            q: from_offset(offset(questionable, k)),
            k,
            questionable,
        }
    }

    /// `q - 1/2`, negated exactly when the labels are flipped.
    pub fn offset(&self) -> f64 {
        offset(self.questionable, self.k)
    }
}

fn offset(questionable: u32, k: u32) -> f64 {
    (2 * questionable as i64 - k as i64) as f64 / (2 * k as i64) as f64
}

/// `1/2 + d`, rounded so that `from_offset(-d) == 1.0 - from_offset(d)` bit
/// for bit and `1.0 - from_offset(d)` is exact.
fn from_offset(d: f64) -> f64 {
    if d >= 0.0 {
        0.5 + d
    } else {
        1.0 - (0.5 - d)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LeaningVector {
    users: BTreeMap<String, UserLeaning>,
}

impl LeaningVector {
    pub fn get(&self, user: &str) -> Option<&UserLeaning> {
        self.users.get(user)
    }

    pub fn insert(&mut self, user: impl Into<String>, leaning: UserLeaning) {
        self.users.insert(user.into(), leaning);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &UserLeaning)> {
        self.users.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Users with at least `min_posts` categorized posts.
    pub fn with_min_posts(&self, min_posts: u32) -> LeaningVector {
        LeaningVector {
            users: self
                .users
                .iter()
                .filter(|(_, l)| l.k >= min_posts)
                .map(|(u, l)| (u.clone(), *l))
                .collect(),
        }
    }

    /// The leaning every user would have with all post labels swapped.
    pub fn flipped(&self) -> LeaningVector {
        LeaningVector {
            users: self
                .users
                .iter()
                .map(|(u, l)| (u.clone(), UserLeaning::from_counts(l.k - l.questionable, l.k)))
                .collect(),
        }
    }
}

/// `q_i = (1/k_i) Σ_j l_j` over each author's categorized posts, given as
/// `(author, is_questionable)` pairs.
pub fn user_leaning<I, S>(labels: I) -> LeaningVector
where
    I: IntoIterator<Item = (S, bool)>,
    S: AsRef<str>,
{
    let mut counts: BTreeMap<String, (u32, u32)> = BTreeMap::new();
    for (author, questionable) in labels {
        let author = author.as_ref();
        let entry = match counts.get_mut(author) {
            Some(e) => e,
            None => counts.entry(String::from(author)).or_default(),
        };
        entry.0 += questionable as u32;
        entry.1 += 1;
    }
    LeaningVector {
        users: counts
            .into_iter()
            .map(|(u, (q, k))| (u, UserLeaning::from_counts(q, k)))
            .collect(),
    }
}

/// Directed follow graph; an edge `i → j` means `i` follows `j`.
#[derive(Debug, Clone, Default)]
pub struct FollowGraph {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Sorted, duplicate-free followee indices per node.
    out: Vec<Vec<usize>>,
    edges: usize,
}

impl FollowGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<I, S>(edges: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut g = FollowGraph::new();
        for (a, b) in edges {
            g.add_edge(a.as_ref(), b.as_ref());
        }
        g
    }

    pub fn add_node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(String::from(id));
        self.index.insert(String::from(id), i);
        self.out.push(Vec::new());
        i
    }

    /// Returns `false` for self-loops and edges already present.
    pub fn add_edge(&mut self, follower: &str, followee: &str) -> bool {
        if follower == followee {
            return false;
        }
        let a = self.add_node(follower);
        let b = self.add_node(followee);
        match self.out[a].binary_search(&b) {
            Ok(_) => false,
            Err(pos) => {
                self.out[a].insert(pos, b);
                self.edges += 1;
                true
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    pub fn out_degree(&self, id: &str) -> usize {
        self.index.get(id).map_or(0, |&i| self.out[i].len())
    }

    pub fn followees<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a str> + 'a {
        let list: &[usize] = match self.index.get(id) {
            Some(&i) => &self.out[i],
            None => &[],
        };
        list.iter().map(move |&j| self.ids[j].as_str())
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.out.iter().enumerate().flat_map(move |(i, js)| {
            js.iter()
                .map(move |&j| (self.ids[i].as_str(), self.ids[j].as_str()))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodLeaning {
    pub q_n: f64,
    /// Followees that have a leaning; the denominator of `q_n`.
    pub followees: u32,
}

/// `q^N_i = (1/k→_i) Σ_j A_ij q_j`, where only followees possessing a leaning
/// enter the sum and the count. Users following nobody with a leaning are
/// omitted.
pub fn neighborhood_leaning(
    graph: &FollowGraph,
    leanings: &LeaningVector,
) -> BTreeMap<String, NeighborhoodLeaning> {
    // Averaging offsets from 1/2 keeps the result exactly antisymmetric
    // under relabelling.
    let d: Vec<Option<f64>> = graph
        .ids
        .iter()
        .map(|id| leanings.get(id).map(UserLeaning::offset))
        .collect();
    let mut out = BTreeMap::new();
    for (i, followees) in graph.out.iter().enumerate() {
        let mut sum = 0.0;
        let mut count = 0u32;
        for dj in followees.iter().filter_map(|&j| d[j]) {
            sum += dj;
            count += 1;
        }
        if count > 0 {
            out.insert(
                graph.ids[i].clone(),
                NeighborhoodLeaning {
                    q_n: from_offset(sum / count as f64),
                    followees: count,
                },
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointDensityConfig {
    pub min_posts: u32,
    pub bins: usize,
    /// Gaussian kernel bandwidth in leaning units; `None` keeps raw counts.
    pub smoothing: Option<f64>,
}

/// Bandwidth used when smoothing is requested without a value.
pub const DEFAULT_BANDWIDTH: f64 = 0.05;

impl Default for JointDensityConfig {
    fn default() -> Self {
        JointDensityConfig {
            min_posts: 3,
            bins: 50,
            smoothing: None,
        }
    }
}

/// Probability mass over a `bins × bins` grid on `[0,1]²`; rows index `q`,
/// columns index `q^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLeaningDensity {
    pub bins: usize,
    pub grid: Vec<Vec<f64>>,
    pub marginal_q: Vec<f64>,
    pub marginal_qn: Vec<f64>,
    pub n_users: usize,
    pub bandwidth: Option<f64>,
}

impl JointLeaningDensity {
    pub fn total(&self) -> f64 {
        self.grid.iter().flatten().sum()
    }

    /// Cell with the largest mass (first in row-major order on ties).
    pub fn mode(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_mass = f64::NEG_INFINITY;
        for (i, row) in self.grid.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m > best_mass {
                    best_mass = m;
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Lower edge of bin `i`.
    pub fn bin_edge(&self, i: usize) -> f64 {
        i as f64 / self.bins as f64
    }
}

/// Bin of `x ∈ [0,1]`. Below 1/2 bin `i` covers `[i/b, (i+1)/b)`, above 1/2
/// it covers `(i/b, (i+1)/b]`, so `bin_of(1-x) = b-1-bin_of(x)` away from the
/// centre. `x = 1/2` maps to bin `b/2`.
pub fn bin_of(x: f64, bins: usize) -> usize {
    if x > 0.5 {
        bins - 1 - (((1.0 - x) * bins as f64) as usize).min(bins - 1)
    } else {
        ((x * bins as f64) as usize).min(bins - 1)
    }
}

/// Bins receiving the mass of `x`. With an even bin count, `x = 1/2` sits on
/// the central edge and is split evenly between its two neighbours.
fn bin_weights(x: f64, bins: usize) -> [(usize, f64); 2] {
    if x == 0.5 && bins.is_multiple_of(2) {
        [(bins / 2 - 1, 0.5), (bins / 2, 0.5)]
    } else {
        [(bin_of(x, bins), 1.0), (0, 0.0)]
    }
}

pub fn joint_density(
    leanings: &LeaningVector,
    neighborhood: &BTreeMap<String, NeighborhoodLeaning>,
    config: &JointDensityConfig,
) -> Result<JointLeaningDensity, LeaningError> {
    if config.bins < 2 {
        return Err(LeaningError::Bins(config.bins));
    }
    if config.min_posts < 1 {
        return Err(LeaningError::MinPosts);
    }
    if let Some(bw) = config.smoothing {
        if !(bw > 0.0) || !bw.is_finite() {
            return Err(LeaningError::Bandwidth(bw));
        }
    }
    let b = config.bins;
    let mut grid = vec![vec![0.0; b]; b];
    let mut n_users = 0usize;
    for (user, l) in leanings.iter() {
        if l.k < config.min_posts {
            continue;
        }
        let Some(nl) = neighborhood.get(user) else {
            continue;
        };
        for (i, wi) in bin_weights(l.q, b) {
            for (j, wj) in bin_weights(nl.q_n, b) {
                grid[i][j] += wi * wj;
            }
        }
        n_users += 1;
    }
    if n_users == 0 {
        return Err(LeaningError::NoEligibleUsers);
    }
    if let Some(bw) = config.smoothing {
        grid = smooth(grid, bw * b as f64);
    }
    let total: f64 = grid.iter().flatten().sum();
    for cell in grid.iter_mut().flatten() {
        *cell /= total;
    }
    let marginal_q = grid.iter().map(|row| row.iter().sum()).collect();
    let marginal_qn = (0..b).map(|j| grid.iter().map(|row| row[j]).sum()).collect();
    Ok(JointLeaningDensity {
        bins: b,
        grid,
        marginal_q,
        marginal_qn,
        n_users,
        bandwidth: config.smoothing,
    })
}

/// Separable Gaussian blur with `sigma` in bins. Each source cell's kernel is
/// truncated to the grid and renormalised, so no mass leaves the grid.
fn smooth(grid: Vec<Vec<f64>>, sigma: f64) -> Vec<Vec<f64>> {
    let b = grid.len();
    let radius = ceil(4.0 * sigma) as usize;
    let kernel: Vec<f64> = (0..=radius)
        .map(|d| exp(-((d * d) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let spread = |src: usize| -> (usize, usize, f64) {
        let lo = src.saturating_sub(radius);
        let hi = (src + radius).min(b - 1);
        let norm: f64 = (lo..=hi).map(|t| kernel[src.abs_diff(t)]).sum();
        (lo, hi, norm)
    };

    let mut rows = vec![vec![0.0; b]; b];
    for i in 0..b {
        let (lo, hi, norm) = spread(i);
        for t in lo..=hi {
            let w = kernel[i.abs_diff(t)] / norm;
            for j in 0..b {
                rows[t][j] += w * grid[i][j];
            }
        }
    }
    let mut out = vec![vec![0.0; b]; b];
    for j in 0..b {
        let (lo, hi, norm) = spread(j);
        for t in lo..=hi {
            let w = kernel[j.abs_diff(t)] / norm;
            for i in 0..b {
                out[i][t] += w * rows[i][j];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub n: usize,
}

/// Pearson correlation between `q` and `q^N` over users having both.
pub fn leaning_correlation(
    leanings: &LeaningVector,
    neighborhood: &BTreeMap<String, NeighborhoodLeaning>,
) -> Result<Correlation, LeaningError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = leanings
        .iter()
        .filter_map(|(u, l)| neighborhood.get(u).map(|nl| (l.q, nl.q_n)))
        .unzip();
    let n = xs.len();
    pearson(&xs, &ys)
        .map(|r| Correlation { r, n })
        .ok_or(LeaningError::UndefinedCorrelation { n })
}
