//! Outlet registry loading and per-post credibility labels.
//!
//! The registry is a CSV file with the header
//! `domain,provider,mbfc_bias,mbfc_bias_score,ng_score,ng_special`. Domains
//! go through [`extract_domain`]; when a domain is rated by both providers the
//! MBFC row is kept.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use infodemic_core::{
    classify_outlet, majority_label, ClassifierConfig, CredibilityLabel, MbfcCategory, NgSpecial,
    OutletRecord, Provider,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_domain, Corpus};
use crate::error::{Error, Result};
use crate::SCHEMA_VERSION;

pub const REGISTRY_HEADER: [&str; 6] = [
    "domain",
    "provider",
    "mbfc_bias",
    "mbfc_bias_score",
    "ng_score",
    "ng_special",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub questionable: u64,
    pub reliable: u64,
    pub unknown: u64,
}

impl LabelCounts {
    pub fn add(&mut self, label: CredibilityLabel) {
        match label {
            CredibilityLabel::Questionable => self.questionable += 1,
            CredibilityLabel::Reliable => self.reliable += 1,
            CredibilityLabel::Unknown => self.unknown += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.questionable + self.reliable + self.unknown
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryReport {
    pub rows: u64,
    pub outlets: u64,
    /// Rows discarded because their domain was already registered.
    pub duplicates: u64,
    pub by_provider: BTreeMap<String, u64>,
    pub by_label: LabelCounts,
}

#[derive(Debug, Clone)]
pub struct OutletRegistry {
    outlets: BTreeMap<String, (OutletRecord, CredibilityLabel)>,
    report: RegistryReport,
}

#[derive(Debug, Deserialize)]
struct Row {
    domain: String,
    #[serde(default)]
    provider: String,
    #[serde(default)]
    mbfc_bias: String,
    #[serde(default)]
    mbfc_bias_score: String,
    #[serde(default)]
    ng_score: String,
    #[serde(default)]
    ng_special: String,
}

fn opt_num(field: &str, raw: &str) -> Result<Option<f64>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("{field} `{raw}` is not a number"))
}

fn record_from_row(row: &Row) -> Result<OutletRecord, String> {
    let domain = extract_domain(&row.domain).map_err(|e| e.to_string())?;
    let mbfc_bias = match row.mbfc_bias.trim() {
        "" => None,
        s => Some(s.parse::<MbfcCategory>().map_err(|e| format!("{e}: `{s}`"))?),
    };
    let ng_special = match row.ng_special.trim() {
        "" => None,
        s => Some(s.parse::<NgSpecial>().map_err(|e| format!("{e}: `{s}`"))?),
    };
    let mbfc_bias_score = opt_num("mbfc_bias_score", &row.mbfc_bias_score)?;
    let ng_score = opt_num("ng_score", &row.ng_score)?;
    let has_mbfc = mbfc_bias.is_some() || mbfc_bias_score.is_some();
    let provider = match row.provider.trim().to_ascii_uppercase().as_str() {
        "MBFC" => Provider::Mbfc,
        "NG" | "NEWSGUARD" => Provider::NewsGuard,
        "" if has_mbfc => Provider::Mbfc,
        "" => Provider::NewsGuard,
        other => return Err(format!("unknown provider `{other}`")),
    };
    let rec = OutletRecord {
        domain,
        provider,
        mbfc_bias,
        mbfc_bias_score,
        ng_score,
        ng_special,
    };
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

impl OutletRegistry {
    /// Build from validated records in file order.
    pub fn from_records<I>(records: I, config: &ClassifierConfig) -> Self
    where
        I: IntoIterator<Item = OutletRecord>,
    {
        let mut outlets: BTreeMap<String, (OutletRecord, CredibilityLabel)> = BTreeMap::new();
        let mut report = RegistryReport::default();
        for rec in records {
            report.rows += 1;
            let label = classify_outlet(&rec, config);
            match outlets.get(&rec.domain) {
                Some((old, _)) if !(old.provider == Provider::NewsGuard && rec.provider == Provider::Mbfc) => {
                    log::warn!("registry: duplicate domain {} ignored", rec.domain);
                    report.duplicates += 1;
                }
                Some(_) => {
                    report.duplicates += 1;
                    outlets.insert(rec.domain.clone(), (rec, label));
                }
                None => {
                    outlets.insert(rec.domain.clone(), (rec, label));
                }
            }
        }
        for (rec, label) in outlets.values() {
            let p = match rec.provider {
                Provider::Mbfc => "MBFC",
                Provider::NewsGuard => "NG",
            };
            *report.by_provider.entry(p.to_string()).or_default() += 1;
            report.by_label.add(*label);
        }
        report.outlets = outlets.len() as u64;
        OutletRegistry { outlets, report }
    }

    /// Parse CSV text. Row numbers in errors are file line numbers.
    pub fn from_csv_str(text: &str, config: &ClassifierConfig) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Usage(format!("registry: {e}")))?
            .clone();
        if headers.iter().next().is_none_or(|h| h != "domain") {
            return Err(Error::Usage(format!(
                "registry header must start with `domain` ({})",
                REGISTRY_HEADER.join(",")
            )));
        }
        let mut records = Vec::new();
        for result in reader.deserialize::<Row>() {
            let (line, row) = match result {
                Ok(row) => (records.len() + 2, row),
                Err(e) => {
                    let line = e.position().map_or(records.len() + 2, |p| p.line() as usize);
                    return Err(Error::RegistryRow {
                        row: line,
                        reason: e.to_string(),
                    });
                }
            };
            let rec = record_from_row(&row).map_err(|reason| Error::RegistryRow { row: line, reason })?;
            records.push(rec);
        }
        if records.is_empty() {
            return Err(Error::Usage("registry file has no rows".into()));
        }
        Ok(OutletRegistry::from_records(records, config))
    }

    pub fn load(path: &Path, config: &ClassifierConfig) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        OutletRegistry::from_csv_str(&text, config)
    }

    pub fn label_of(&self, domain: &str) -> Option<CredibilityLabel> {
        self.outlets.get(domain).map(|(_, l)| *l)
    }

    pub fn record(&self, domain: &str) -> Option<&OutletRecord> {
        self.outlets.get(domain).map(|(r, _)| r)
    }

    pub fn len(&self) -> usize {
        self.outlets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outlets.is_empty()
    }

    pub fn report(&self) -> &RegistryReport {
        &self.report
    }

    /// Same outlets with every Questionable and Reliable label swapped.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        out.report.by_label = LabelCounts::default();
        for (_, label) in out.outlets.values_mut() {
            *label = label.flipped();
            out.report.by_label.add(*label);
        }
        out
    }
}

/// Registry records as CSV with the standard header.
pub fn registry_to_csv<'a, I: IntoIterator<Item = &'a OutletRecord>>(records: I) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REGISTRY_HEADER).expect("in-memory write");
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.domain.clone(),
            match r.provider {
                Provider::Mbfc => "MBFC".into(),
                Provider::NewsGuard => "NG".into(),
            },
            r.mbfc_bias.map(|b| b.as_str().to_string()).unwrap_or_default(),
            num(r.mbfc_bias_score),
            num(r.ng_score),
            match r.ng_special {
                Some(NgSpecial::Humor) => "humor".into(),
                Some(NgSpecial::Platform) => "platform".into(),
                None => String::new(),
            },
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub posts: u64,
    /// Posts labeled Questionable or Reliable.
    pub categorized: u64,
    pub uncategorized: u64,
    pub questionable: u64,
    pub reliable: u64,
    /// Posts linking to at least one registered domain but still Unknown.
    pub unresolved: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PostLabels {
    pub labels: BTreeMap<String, CredibilityLabel>,
    pub coverage: Coverage,
}

impl PostLabels {
    pub fn get(&self, post_id: &str) -> CredibilityLabel {
        self.labels
            .get(post_id)
            .copied()
            .unwrap_or(CredibilityLabel::Unknown)
    }
}

/// Label every post by majority over its distinct registered domains.
pub fn label_posts(corpus: &Corpus, registry: &OutletRegistry) -> PostLabels {
    let labelled: Vec<(String, CredibilityLabel, bool)> = corpus
        .posts()
        .par_iter()
        .map(|p| {
            let domains: BTreeSet<String> = p.domains().collect();
            let votes: Vec<CredibilityLabel> =
                domains.iter().filter_map(|d| registry.label_of(d)).collect();
            let registered = !votes.is_empty();
            (p.post_id.clone(), majority_label(votes), registered)
        })
        .collect();
    let mut coverage = Coverage::default();
    let mut labels = BTreeMap::new();
    for (id, label, registered) in labelled {
        coverage.posts += 1;
        match label {
            CredibilityLabel::Questionable => coverage.questionable += 1,
            CredibilityLabel::Reliable => coverage.reliable += 1,
            CredibilityLabel::Unknown => {
                coverage.uncategorized += 1;
                coverage.unresolved += registered as u64;
            }
        }
        labels.insert(id, label);
    }
    coverage.categorized = coverage.questionable + coverage.reliable;
    PostLabels { labels, coverage }
}

/// `labels.json`: per-post labels with provenance hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsArtifact {
    pub schema: String,
    pub config_hash: String,
    pub corpus_manifest_hash: String,
    pub classifier: ClassifierConfig,
    pub registry: RegistryReport,
    pub coverage: Coverage,
    pub labels: BTreeMap<String, CredibilityLabel>,
}

impl LabelsArtifact {
    pub fn new(
        labels: PostLabels,
        registry: &OutletRegistry,
        classifier: ClassifierConfig,
        config_hash: String,
        corpus_manifest_hash: String,
    ) -> Self {
        LabelsArtifact {
            schema: SCHEMA_VERSION.to_string(),
            config_hash,
            corpus_manifest_hash,
            classifier,
            registry: registry.report().clone(),
            coverage: labels.coverage,
            labels: labels.labels,
        }
    }

    pub fn post_labels(&self) -> PostLabels {
        PostLabels {
            labels: self.labels.clone(),
            coverage: self.coverage,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let art: LabelsArtifact = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if art.schema != SCHEMA_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                reason: format!("schema {} is not {SCHEMA_VERSION}", art.schema),
            });
        }
        Ok(art)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{post, window};
    use CredibilityLabel::*;

    const HEADER: &str = "domain,provider,mbfc_bias,mbfc_bias_score,ng_score,ng_special\n";

    fn reg(body: &str) -> Result<OutletRegistry> {
        OutletRegistry::from_csv_str(&format!("{HEADER}{body}"), &ClassifierConfig::default())
    }

    #[test]
    fn single_ng_row() {
        let r = reg("a.com,NG,,,80,\n").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.report().by_label, LabelCounts { questionable: 0, reliable: 1, unknown: 0 });
        assert_eq!(r.label_of("a.com"), Some(Reliable));
    }

    #[test]
    fn mbfc_wins_cross_provider_duplicates() {
        for body in [
            "x.com,NG,,,90,\nhttps://www.x.com/,MBFC,Questionable,8.5,,\n",
            "x.com,MBFC,Questionable,8.5,,\nx.com,NG,,,90,\n",
        ] {
            let r = reg(body).unwrap();
            assert_eq!(r.len(), 1);
            assert_eq!(r.report().duplicates, 1);
            assert_eq!(r.record("x.com").unwrap().provider, Provider::Mbfc);
            assert_eq!(r.record("x.com").unwrap().mbfc_bias_score, Some(8.5));
            assert_eq!(r.label_of("x.com"), Some(Questionable));
        }
    }

    #[test]
    fn boundary_and_special_rows() {
        let r = reg("a.com,NG,,,60,\nb.com,MBFC,Conspiracy-Pseudoscience,,,\nc.com,NG,,,,humor\nd.com,MBFC,Left,2.1,,\n").unwrap();
        assert_eq!(r.label_of("a.com"), Some(Questionable));
        assert_eq!(r.label_of("b.com"), Some(Questionable));
        assert_eq!(r.label_of("c.com"), Some(Unknown));
        assert_eq!(r.label_of("d.com"), Some(Reliable));
        let c = r.report().by_label;
        assert_eq!(c.total(), r.report().outlets);
        assert_eq!(r.report().by_provider.get("NG"), Some(&2));
    }

    #[test]
    fn rejects_rows_with_line_numbers() {
        let e = reg("a.com,NG,,,80,\nb.com,,,,,\n").unwrap_err();
        assert!(matches!(e, Error::RegistryRow { row: 3, .. }), "{e}");
        assert!(matches!(reg("a.com,NG,,,180,\n"), Err(Error::RegistryRow { row: 2, .. })));
        assert!(matches!(reg("a.com,MBFC,Centrist,,,\n"), Err(Error::RegistryRow { .. })));
        assert!(matches!(reg("a.com,XX,,,80,\n"), Err(Error::RegistryRow { .. })));
    }

    #[test]
    fn empty_registry_is_usage_error() {
        assert_eq!(reg("").unwrap_err().exit_code(), 2);
        let e = OutletRegistry::from_csv_str("", &ClassifierConfig::default()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            OutletRecord::mbfc("a.com", MbfcCategory::ProScience),
            OutletRecord::newsguard("b.com", 42.5),
            OutletRecord::newsguard_special("c.com", NgSpecial::Platform),
        ];
        let r = OutletRegistry::from_csv_str(&registry_to_csv(&recs), &ClassifierConfig::default()).unwrap();
        for rec in &recs {
            assert_eq!(r.record(&rec.domain), Some(rec));
        }
    }

    fn labelled_corpus() -> (Corpus, OutletRegistry) {
        let w = window();
        let mut c = Corpus::new("t", w);
        c.add_post(post("p1", "a", w.start, &["https://q.com/1"]));
        c.add_post(post("p2", "a", w.start, &["https://q.com/1", "https://r.com/2"]));
        c.add_post(post("p3", "a", w.start, &["https://q.com/1", "https://www.q.com/2", "https://r.com"]));
        c.add_post(post("p4", "b", w.start, &["https://other.org"]));
        c.add_post(post("p5", "b", w.start, &["https://sat.com", "https://r.com"]));
        c.add_post(post("p6", "b", w.start, &["https://sat.com"]));
        let r = reg("q.com,MBFC,Questionable,,,\nr.com,NG,,,75,\nsat.com,NG,,,,humor\n").unwrap();
        (c, r)
    }

    #[test]
    fn post_labels_by_majority() {
        let (c, r) = labelled_corpus();
        let l = label_posts(&c, &r);
        assert_eq!(l.get("p1"), Questionable);
        assert_eq!(l.get("p2"), Unknown);
        // q.com twice is still one domain.
        assert_eq!(l.get("p3"), Unknown);
        assert_eq!(l.get("p4"), Unknown);
        assert_eq!(l.get("p5"), Reliable);
        assert_eq!(l.get("p6"), Unknown);
        assert_eq!(
            l.coverage,
            Coverage { posts: 6, categorized: 2, uncategorized: 4, questionable: 1, reliable: 1, unresolved: 3 }
        );
    }

    #[test]
    fn flipping_the_registry_flips_every_post() {
        let (c, r) = labelled_corpus();
        let a = label_posts(&c, &r);
        let b = label_posts(&c, &r.flipped());
        for (id, l) in &a.labels {
            assert_eq!(b.get(id), l.flipped(), "{id}");
        }
        assert_eq!(r.flipped().report().by_label.questionable, r.report().by_label.reliable);
    }
}
