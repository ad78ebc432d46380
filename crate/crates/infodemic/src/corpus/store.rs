//! On-disk corpus: one JSON-lines file per record type plus a manifest with
//! counts, file digests and the ingest configuration hash.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{Comment, Corpus, FollowEdge, IngestReport, LinksOnlyReport, Post, Window};
use crate::error::{Error, Result};
use crate::hashing::sha256_hex;
use crate::SCHEMA_VERSION;

pub const CORPUS_MANIFEST: &str = "corpus.json";
const POSTS: &str = "posts.jsonl";
const COMMENTS: &str = "comments.jsonl";
const QUARANTINE: &str = "quarantine.jsonl";
const EDGES: &str = "edges.jsonl";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub posts: u64,
    pub comments: u64,
    pub quarantined: u64,
    pub edges: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema: String,
    pub platform_tag: String,
    pub window: Option<Window>,
    pub counts: CorpusCounts,
    /// SHA-256 of each data file.
    pub files: BTreeMap<String, String>,
    pub config_hash: String,
    pub ingest: Vec<IngestReport>,
    pub links_only: Option<LinksOnlyReport>,
}

/// A corpus read back from disk, with the digest of its manifest file.
#[derive(Debug, Clone)]
pub struct StoredCorpus {
    pub corpus: Corpus,
    pub manifest: CorpusManifest,
    pub manifest_hash: String,
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize");
        out.push(b'\n');
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn save_corpus(
    dir: &Path,
    corpus: &Corpus,
    config_hash: &str,
    ingest: Vec<IngestReport>,
    links_only: Option<LinksOnlyReport>,
) -> Result<CorpusManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    for (name, bytes) in [
        (POSTS, jsonl(corpus.posts())),
        (COMMENTS, jsonl(corpus.comments())),
        (QUARANTINE, jsonl(corpus.quarantine())),
        (EDGES, jsonl(corpus.edges())),
    ] {
        write_file(&dir.join(name), &bytes)?;
        files.insert(name.to_string(), sha256_hex(&bytes));
    }
    let manifest = CorpusManifest {
        schema: SCHEMA_VERSION.to_string(),
        platform_tag: corpus.platform_tag.clone(),
        window: corpus.window,
        counts: CorpusCounts {
            posts: corpus.posts().len() as u64,
            comments: corpus.comments().len() as u64,
            quarantined: corpus.quarantine().len() as u64,
            edges: corpus.edges().len() as u64,
        },
        files,
        config_hash: config_hash.to_string(),
        ingest,
        links_only,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_file(&dir.join(CORPUS_MANIFEST), &bytes)?;
    Ok(manifest)
}

fn read_records<T: DeserializeOwned>(path: &Path, expected_digest: Option<&String>) -> Result<Vec<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if let Some(d) = expected_digest {
        if &sha256_hex(&bytes) != d {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                reason: "content does not match the digest in the manifest".into(),
            });
        }
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn load_corpus(dir: &Path) -> Result<StoredCorpus> {
    let manifest_path = dir.join(CORPUS_MANIFEST);
    let bytes = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: CorpusManifest = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: manifest_path.clone(),
        source,
    })?;
    if manifest.schema != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: manifest_path,
            reason: format!("schema {} is not {SCHEMA_VERSION}", manifest.schema),
        });
    }
    let mut corpus = Corpus {
        platform_tag: manifest.platform_tag.clone(),
        window: manifest.window,
        ..Default::default()
    };
    for p in read_records::<Post>(&dir.join(POSTS), manifest.files.get(POSTS))? {
        corpus.add_post(p);
    }
    for c in read_records::<Comment>(&dir.join(COMMENTS), manifest.files.get(COMMENTS))? {
        corpus.add_comment(c);
    }
    for c in read_records::<Comment>(&dir.join(QUARANTINE), manifest.files.get(QUARANTINE))? {
        corpus.comment_ids.insert(c.comment_id.clone());
        corpus.quarantine.push(c);
    }
    for e in read_records::<FollowEdge>(&dir.join(EDGES), manifest.files.get(EDGES))? {
        corpus.add_edge(e);
    }
    Ok(StoredCorpus {
        corpus,
        manifest,
        manifest_hash: sha256_hex(&bytes),
    })
}
