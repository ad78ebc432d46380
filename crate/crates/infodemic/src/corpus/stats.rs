use std::collections::{BTreeMap, BTreeSet, HashMap};

use infodemic_core::CredibilityLabel;
use serde::{Deserialize, Serialize};

use super::Corpus;

/// Counts for one column of the composition table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownColumn {
    pub posts: u64,
    /// Distinct posting users.
    pub users: u64,
    pub likes: u64,
    pub reshares: u64,
    /// Sum over posts that carry a reply count.
    pub replies: u64,
    /// Posts whose export has no reply count.
    pub replies_absent: u64,
    pub comments: u64,
}

/// Corpus composition: overall and, with labels, split into categorized,
/// Questionable and Reliable posts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownTable {
    pub overall: BreakdownColumn,
    pub categorized: Option<BreakdownColumn>,
    pub questionable: Option<BreakdownColumn>,
    pub reliable: Option<BreakdownColumn>,
}

pub const BREAKDOWN_ROWS: [&str; 7] = [
    "posts",
    "users",
    "likes",
    "reshares",
    "replies",
    "replies_absent",
    "comments",
];

impl BreakdownColumn {
    fn row(&self, name: &str) -> u64 {
        match name {
            "posts" => self.posts,
            "users" => self.users,
            "likes" => self.likes,
            "reshares" => self.reshares,
            "replies" => self.replies,
            "replies_absent" => self.replies_absent,
            "comments" => self.comments,
            _ => unreachable!("unknown breakdown row {name}"),
        }
    }
}

impl BreakdownTable {
    pub fn columns(&self) -> Vec<(&'static str, &BreakdownColumn)> {
        let mut cols = vec![("overall", &self.overall)];
        for (name, col) in [
            ("categorized", &self.categorized),
            ("questionable", &self.questionable),
            ("reliable", &self.reliable),
        ] {
            if let Some(c) = col {
                cols.push((name, c));
            }
        }
        cols
    }

    /// Rows are quantities, columns are post groups.
    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["quantity"];
        header.extend(cols.iter().map(|(n, _)| *n));
        w.write_record(&header).expect("in-memory write");
        for row in BREAKDOWN_ROWS {
            let mut rec = vec![row.to_string()];
            rec.extend(cols.iter().map(|(_, c)| c.row(row).to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[derive(Default)]
struct Acc<'a> {
    col: BreakdownColumn,
    users: BTreeSet<&'a str>,
}

impl Acc<'_> {
    fn finish(self) -> BreakdownColumn {
        BreakdownColumn {
            users: self.users.len() as u64,
            ..self.col
        }
    }
}

pub fn corpus_stats(
    corpus: &Corpus,
    labels: Option<&BTreeMap<String, CredibilityLabel>>,
) -> BreakdownTable {
    let mut comments: HashMap<&str, u64> = HashMap::new();
    for c in corpus.comments() {
        *comments.entry(c.parent_post_id.as_str()).or_default() += 1;
    }
    let mut overall = Acc::default();
    let mut categorized = Acc::default();
    let mut questionable = Acc::default();
    let mut reliable = Acc::default();
    for p in corpus.posts() {
        let label = labels.map(|l| l.get(&p.post_id).copied().unwrap_or(CredibilityLabel::Unknown));
        let mut targets: Vec<&mut Acc> = vec![&mut overall];
        match label {
            Some(CredibilityLabel::Questionable) => {
                targets.push(&mut categorized);
                targets.push(&mut questionable);
            }
            Some(CredibilityLabel::Reliable) => {
                targets.push(&mut categorized);
                targets.push(&mut reliable);
            }
            _ => {}
        }
        let n_comments = comments.get(p.post_id.as_str()).copied().unwrap_or(0);
        for acc in targets {
            acc.col.posts += 1;
            acc.col.likes += p.likes;
            acc.col.reshares += p.reshares;
            match p.replies {
                Some(r) => acc.col.replies += r,
                None => acc.col.replies_absent += 1,
            }
            acc.col.comments += n_comments;
            acc.users.insert(&p.author_id);
        }
    }
    let labelled = labels.is_some();
    BreakdownTable {
        overall: overall.finish(),
        categorized: labelled.then(|| categorized.finish()),
        questionable: labelled.then(|| questionable.finish()),
        reliable: labelled.then(|| reliable.finish()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{comment, post, window};
    use CredibilityLabel::*;

    #[test]
    fn empty_corpus_is_all_zero() {
        let c = Corpus::new("t", window());
        let t = corpus_stats(&c, None);
        assert_eq!(t, BreakdownTable::default());
        let t = corpus_stats(&c, Some(&BTreeMap::new()));
        assert_eq!(t.questionable, Some(BreakdownColumn::default()));
    }

    #[test]
    fn splits_by_label() {
        let w = window();
        let mut c = Corpus::new("t", w);
        let mut p1 = post("p1", "a", w.start, &[]);
        p1.likes = 10;
        p1.replies = Some(2);
        c.add_post(p1);
        c.add_post(post("p2", "a", w.start, &[]));
        c.add_post(post("p3", "b", w.start, &[]));
        c.add_comment(comment("c1", "p1", "x", w.start + 1));
        c.add_comment(comment("c2", "p1", "y", w.start + 2));
        c.add_comment(comment("c3", "p3", "y", w.start + 2));
        let labels: BTreeMap<String, CredibilityLabel> =
            [("p1".into(), Questionable), ("p2".into(), Reliable), ("p3".into(), Unknown)].into();
        let t = corpus_stats(&c, Some(&labels));
        assert_eq!(t.overall.posts, 3);
        assert_eq!(t.overall.users, 2);
        assert_eq!(t.overall.likes, 12);
        assert_eq!(t.overall.comments, 3);
        assert_eq!(t.overall.replies, 2);
        assert_eq!(t.overall.replies_absent, 2);
        let q = t.questionable.unwrap();
        assert_eq!((q.posts, q.users, q.likes, q.comments), (1, 1, 10, 2));
        let cat = t.categorized.unwrap();
        assert_eq!((cat.posts, cat.users), (2, 1));
        assert_eq!(t.reliable.unwrap().posts, 1);
    }

    #[test]
    fn csv_mirror_layout() {
        let t = corpus_stats(&Corpus::new("t", window()), Some(&BTreeMap::new()));
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("quantity,overall,categorized,questionable,reliable"));
        assert_eq!(lines.next(), Some("posts,0,0,0,0"));
        assert_eq!(csv.lines().count(), 1 + BREAKDOWN_ROWS.len());
    }
}
