//! Leanings of posting users, their follow neighborhoods and the joint
//! `(q, q^N)` distribution.

use std::collections::BTreeMap;

use infodemic_core::{
    joint_density, leaning_correlation, neighborhood_leaning, user_leaning, Correlation, FollowGraph,
    JointDensityConfig, JointLeaningDensity, LeaningVector, NeighborhoodLeaning,
};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FollowEdge};
use crate::error::{Error, Result};
use crate::sources::PostLabels;

/// Leanings from the categorized posts of each author.
pub fn corpus_leanings(corpus: &Corpus, labels: &PostLabels) -> LeaningVector {
    user_leaning(corpus.posts().iter().filter_map(|p| {
        labels
            .get(&p.post_id)
            .leaning_bit()
            .map(|bit| (p.author_id.as_str(), bit))
    }))
}

pub fn follow_graph<'a, I: IntoIterator<Item = &'a FollowEdge>>(edges: I) -> FollowGraph {
    FollowGraph::from_edges(
        edges
            .into_iter()
            .map(|e| (e.follower_id.as_str(), e.followee_id.as_str())),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoReport {
    pub config: JointDensityConfig,
    pub users_with_leaning: usize,
    pub users_with_neighborhood: usize,
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub density: JointLeaningDensity,
    /// Over users meeting `min_posts` that have a neighborhood leaning.
    pub correlation: Option<Correlation>,
    pub correlation_error: Option<String>,
}

/// Neighborhoods use every followee that has a leaning; the `min_posts`
/// threshold applies to the user whose point is plotted.
pub fn echo_chamber(
    leanings: &LeaningVector,
    graph: &FollowGraph,
    config: &JointDensityConfig,
) -> Result<(EchoReport, BTreeMap<String, NeighborhoodLeaning>)> {
    let neighborhood = neighborhood_leaning(graph, leanings);
    let density = joint_density(leanings, &neighborhood, config).map_err(|e| Error::Stage {
        stage: "echo-chamber",
        reason: e.to_string(),
    })?;
    let eligible = leanings.with_min_posts(config.min_posts);
    let (correlation, correlation_error) = match leaning_correlation(&eligible, &neighborhood) {
        Ok(c) => (Some(c), None),
        Err(e) => {
            log::warn!("echo-chamber: {e}");
            (None, Some(e.to_string()))
        }
    };
    Ok((
        EchoReport {
            config: *config,
            users_with_leaning: leanings.len(),
            users_with_neighborhood: neighborhood.len(),
            graph_nodes: graph.node_count(),
            graph_edges: graph.edge_count(),
            density,
            correlation,
            correlation_error,
        },
        neighborhood,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{post, window};
    use infodemic_core::CredibilityLabel::*;

    #[test]
    fn leanings_from_labels() {
        let w = window();
        let mut c = Corpus::new("t", w);
        let mut labels = PostLabels::default();
        for (i, l) in [Questionable, Reliable, Questionable, Questionable, Unknown].into_iter().enumerate() {
            let id = format!("p{i}");
            c.add_post(post(&id, "a", w.start, &[]));
            labels.labels.insert(id, l);
        }
        c.add_post(post("z", "b", w.start, &[]));
        let v = corpus_leanings(&c, &labels);
        assert_eq!(v.len(), 1);
        let a = v.get("a").unwrap();
        assert_eq!((a.q, a.k), (0.75, 4));
    }

    #[test]
    fn two_camps() {
        let mut v = LeaningVector::default();
        let e = |a: &str, b: &str| FollowEdge { follower_id: a.into(), followee_id: b.into() };
        let mut edges = Vec::new();
        for (u, q) in [("a", 0), ("b", 0), ("c", 3), ("d", 3)] {
            v.insert(u, infodemic_core::UserLeaning::from_counts(q, 3));
        }
        edges.extend([e("a", "b"), e("b", "a"), e("c", "d"), e("d", "c")]);
        let g = follow_graph(&edges);
        let (rep, nl) = echo_chamber(&v, &g, &JointDensityConfig { bins: 2, ..Default::default() }).unwrap();
        assert_eq!(nl.len(), 4);
        assert_eq!(rep.density.grid, vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert!((rep.correlation.unwrap().r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_eligible_users_is_a_stage_error() {
        let g = FollowGraph::new();
        let r = echo_chamber(&LeaningVector::default(), &g, &JointDensityConfig::default());
        assert!(matches!(r, Err(Error::Stage { stage: "echo-chamber", .. })));
    }
}
