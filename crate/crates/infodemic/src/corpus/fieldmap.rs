//! Translation from platform export keys to the canonical record schema.
//!
//! A field map is a TOML document with `[posts]`, `[comments]` and `[edges]`
//! tables mapping canonical field names to dotted source paths
//! (`author_id = "account.id"`). An optional top-level `preset` names a
//! built-in map that the tables then override. An empty path marks a field
//! the export does not carry.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlatformPreset {
    Canonical,
    Gab,
    Twitter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostFields {
    pub post_id: String,
    pub author_id: String,
    pub created_at: String,
    pub text: String,
    pub hashtags: String,
    pub urls: String,
    pub likes: String,
    pub reshares: String,
    pub replies: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentFields {
    pub comment_id: String,
    pub parent_post_id: String,
    pub author_id: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFields {
    pub follower_id: String,
    pub followee_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMap {
    pub posts: PostFields,
    pub comments: CommentFields,
    pub edges: EdgeFields,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap::preset(PlatformPreset::Canonical)
    }
}

fn s(v: &str) -> String {
    v.to_string()
}

impl FieldMap {
    pub fn preset(p: PlatformPreset) -> Self {
        match p {
            PlatformPreset::Canonical => FieldMap {
                posts: PostFields {
                    post_id: s("post_id"),
                    author_id: s("author_id"),
                    created_at: s("created_at"),
                    text: s("text"),
                    hashtags: s("hashtags"),
                    urls: s("urls"),
                    likes: s("likes"),
                    reshares: s("reshares"),
                    replies: s("replies"),
                },
                comments: CommentFields {
                    comment_id: s("comment_id"),
                    parent_post_id: s("parent_post_id"),
                    author_id: s("author_id"),
                    created_at: s("created_at"),
                },
                edges: EdgeFields {
                    follower_id: s("follower_id"),
                    followee_id: s("followee_id"),
                },
            },
            PlatformPreset::Gab => FieldMap {
                posts: PostFields {
                    post_id: s("id"),
                    author_id: s("account.id"),
                    created_at: s("created_at"),
                    text: s("content"),
                    hashtags: s("tags"),
                    urls: s("urls"),
                    likes: s("favourites_count"),
                    reshares: s("reblogs_count"),
                    replies: s("replies_count"),
                },
                comments: CommentFields {
                    comment_id: s("id"),
                    parent_post_id: s("in_reply_to_id"),
                    author_id: s("account.id"),
                    created_at: s("created_at"),
                },
                edges: EdgeFields {
                    follower_id: s("follower"),
                    followee_id: s("following"),
                },
            },
            PlatformPreset::Twitter => FieldMap {
                posts: PostFields {
                    post_id: s("id_str"),
                    author_id: s("user.id_str"),
                    created_at: s("created_at"),
                    text: s("full_text"),
                    hashtags: s("entities.hashtags"),
                    urls: s("entities.urls"),
                    likes: s("favorite_count"),
                    reshares: s("retweet_count"),
                    replies: String::new(),
                },
                comments: CommentFields {
                    comment_id: s("id_str"),
                    parent_post_id: s("in_reply_to_status_id_str"),
                    author_id: s("user.id_str"),
                    created_at: s("created_at"),
                },
                edges: EdgeFields {
                    follower_id: s("source_id"),
                    followee_id: s("target_id"),
                },
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let preset = match table.remove("preset") {
            None => PlatformPreset::Canonical,
            Some(toml::Value::String(p)) => {
                serde_json::from_value(Value::String(p.clone())).map_err(|_| format!("unknown preset `{p}`"))?
            }
            Some(other) => return Err(format!("preset must be a string, got {other}")),
        };
        let mut base = toml::Table::try_from(FieldMap::preset(preset)).map_err(|e| e.to_string())?;
        for (section, value) in table {
            let toml::Value::Table(overrides) = value else {
                return Err(format!("`{section}` must be a table"));
            };
            let Some(toml::Value::Table(target)) = base.get_mut(&section) else {
                return Err(format!("unknown section `{section}`"));
            };
            for (k, v) in overrides {
                if !target.contains_key(&k) {
                    return Err(format!("unknown field `{section}.{k}`"));
                }
                target.insert(k, v);
            }
        }
        toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FieldMap::from_toml_str(&text).map_err(|reason| Error::Parse {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("field maps serialize")
    }
}

/// Follow a dotted path into a JSON object; `null` counts as absent.
pub(crate) fn lookup<'a>(record: &'a Value, path: &str) -> Option<&'a Value> {
    if path.is_empty() {
        return None;
    }
    let mut cur = record;
    for key in path.split('.') {
        cur = cur.as_object()?.get(key)?;
    }
    (!cur.is_null()).then_some(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_lookup() {
        let v = json!({"account": {"id": "42"}, "x": null});
        assert_eq!(lookup(&v, "account.id"), Some(&json!("42")));
        assert_eq!(lookup(&v, "account.name"), None);
        assert_eq!(lookup(&v, "x"), None);
        assert_eq!(lookup(&v, ""), None);
    }

    #[test]
    fn preset_with_overrides() {
        let fm = FieldMap::from_toml_str(
            "preset = \"gab\"\n[posts]\nlikes = \"stats.likes\"\n",
        )
        .unwrap();
        assert_eq!(fm.posts.likes, "stats.likes");
        assert_eq!(fm.posts.author_id, "account.id");
        assert_eq!(fm.edges, FieldMap::preset(PlatformPreset::Gab).edges);
    }

    #[test]
    fn empty_document_is_canonical() {
        assert_eq!(FieldMap::from_toml_str("").unwrap(), FieldMap::default());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FieldMap::from_toml_str("[posts]\nfavs = \"x\"\n").is_err());
        assert!(FieldMap::from_toml_str("[stuff]\na = \"x\"\n").is_err());
        assert!(FieldMap::from_toml_str("preset = \"myspace\"\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let fm = FieldMap::preset(PlatformPreset::Twitter);
        assert_eq!(FieldMap::from_toml_str(&fm.to_toml_string()).unwrap(), fm);
    }
}
