//! Run configuration and the end-to-end pipeline.
//!
//! Every JSON artifact is wrapped in an [`Artifact`] envelope carrying the
//! schema version, the hash of the analysis parameters and the hash of the
//! corpus manifest it was computed from.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use infodemic_core::{ClassifierConfig, JointDensityConfig};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::corpus::{
    corpus_stats, ingest_paths, links_only, load_corpus, save_corpus, window_str, BreakdownTable, Corpus, FieldMap,
    IngestFilter, PlatformPreset, RecordKind, StoredCorpus, Window,
};
use crate::echo::{corpus_leanings, echo_chamber, follow_graph, EchoReport};
use crate::engagement::{engagement_tables, fits_csv, wald_csv, EngagementConfig, EngagementTable};
use crate::error::{Error, Result};
use crate::hashing::{config_hash, sha256_hex};
use crate::lifetimes::{lifetimes, survival_analysis, LifetimeUnit, SurvivalReport};
use crate::sources::{label_posts, LabelsArtifact, OutletRegistry, PostLabels};
use crate::timeseries::{time_series, time_series_csv, TimeSeries};
use crate::SCHEMA_VERSION;

/// Prefix of environment variables overriding config keys. Nested keys are
/// joined with `__`: `INFODEMIC_ECHO_CHAMBER__BINS=20`.
pub const ENV_PREFIX: &str = "INFODEMIC_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub classify: bool,
    pub engagement: bool,
    pub survival: bool,
    pub echo_chamber: bool,
    pub time_series: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            classify: true,
            engagement: true,
            survival: true,
            echo_chamber: true,
            time_series: true,
        }
    }
}

impl Stages {
    pub fn none() -> Self {
        Stages {
            classify: false,
            engagement: false,
            survival: false,
            echo_chamber: false,
            time_series: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalConfig {
    /// Right-censor lifetimes ending on the window's final day.
    pub censoring: bool,
    pub units: Vec<LifetimeUnit>,
}

impl Default for SurvivalConfig {
    fn default() -> Self {
        SurvivalConfig {
            censoring: true,
            units: vec![LifetimeUnit::Post, LifetimeUnit::User],
        }
    }
}

/// Ingest raw exports as the first pipeline step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    #[serde(default)]
    pub posts: Vec<PathBuf>,
    #[serde(default)]
    pub comments: Vec<PathBuf>,
    #[serde(default)]
    pub edges: Vec<PathBuf>,
    /// Field map file; takes precedence over `preset`.
    pub map: Option<PathBuf>,
    pub preset: Option<PlatformPreset>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(with = "window_str")]
    pub window: Window,
    #[serde(default)]
    pub links_only: bool,
    #[serde(default)]
    pub substring_match: bool,
    #[serde(default = "default_platform")]
    pub platform: String,
}

fn default_platform() -> String {
    "unknown".into()
}

impl IngestConfig {
    pub fn filter(&self) -> IngestFilter {
        IngestFilter {
            window: Some(self.window),
            links_only: self.links_only,
            substring_match: self.substring_match,
            ..Default::default()
        }
        .with_hashtags(&self.hashtags)
    }

    pub fn field_map(&self) -> Result<FieldMap> {
        match (&self.map, self.preset) {
            (Some(p), _) => FieldMap::load(p),
            (None, Some(preset)) => Ok(FieldMap::preset(preset)),
            (None, None) => Ok(FieldMap::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory written by `ingest`; mutually exclusive with `ingest`.
    pub corpus: Option<PathBuf>,
    pub ingest: Option<IngestConfig>,
    pub registry: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stages: Stages,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub engagement: EngagementConfig,
    #[serde(default)]
    pub survival: SurvivalConfig,
    #[serde(default)]
    pub echo_chamber: JointDensityConfig,
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(path.join("."), "overrides a non-table value"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    /// Parse TOML, apply `INFODEMIC_*` overrides from `env`, and resolve
    /// relative paths against `base_dir`.
    pub fn from_toml_str<I>(text: &str, base_dir: &Path, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<document>", e.message()))?;
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_ascii_lowercase(), v)))
            .filter(|(k, _)| !k.is_empty() && k != "log")
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            let path: Vec<String> = key.split("__").map(str::to_string).collect();
            log::debug!("config override {} from environment", path.join("."));
            set_path(&mut table, &path, env_value(&raw))?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            Error::config("<document>", e.message().to_string())
        })?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml_str(&text, base, std::env::vars())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.corpus.iter_mut().for_each(fix);
        self.registry.iter_mut().for_each(fix);
        fix(&mut self.out_dir);
        if let Some(ing) = &mut self.ingest {
            ing.posts.iter_mut().chain(&mut ing.comments).chain(&mut ing.edges).for_each(fix);
            ing.map.iter_mut().for_each(fix);
        }
    }

    /// Hash of the analysis parameters. Paths are left out so that moving a
    /// run does not change it.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("struct");
        for k in ["corpus", "registry", "out_dir"] {
            obj.remove(k);
        }
        if let Some(ing) = obj.get_mut("ingest").and_then(|i| i.as_object_mut()) {
            for k in ["posts", "comments", "edges", "map"] {
                ing.remove(k);
            }
        }
        config_hash(&v)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.corpus, &self.ingest) {
            (Some(_), Some(_)) => return Err(Error::config("corpus", "set either corpus or [ingest], not both")),
            (None, None) => return Err(Error::config("corpus", "missing: set corpus or an [ingest] section")),
            (Some(dir), None) if !dir.is_dir() => {
                return Err(Error::config("corpus", format!("no such directory: {}", dir.display())))
            }
            (None, Some(ing)) => {
                if ing.posts.is_empty() {
                    return Err(Error::config("ingest.posts", "at least one posts file is required"));
                }
                for (field, list) in [("ingest.posts", &ing.posts), ("ingest.comments", &ing.comments), ("ingest.edges", &ing.edges)] {
                    if let Some(p) = list.iter().find(|p| !p.is_file()) {
                        return Err(Error::config(field, format!("no such file: {}", p.display())));
                    }
                }
                if let Some(m) = ing.map.as_ref().filter(|m| !m.is_file()) {
                    return Err(Error::config("ingest.map", format!("no such file: {}", m.display())));
                }
            }
            _ => {}
        }
        if self.stages.classify {
            match &self.registry {
                None => return Err(Error::config("registry", "required when stages.classify is enabled")),
                Some(p) if !p.is_file() => {
                    return Err(Error::config("registry", format!("no such file: {}", p.display())))
                }
                _ => {}
            }
        }
        for (field, on) in [("stages.survival", self.stages.survival), ("stages.echo_chamber", self.stages.echo_chamber)] {
            if on && !self.stages.classify {
                return Err(Error::config(field, "requires stages.classify"));
            }
        }
        let ec = &self.echo_chamber;
        if ec.bins < 2 {
            return Err(Error::config("echo_chamber.bins", "must be at least 2"));
        }
        if ec.min_posts < 1 {
            return Err(Error::config("echo_chamber.min_posts", "must be at least 1"));
        }
        if let Some(bw) = ec.smoothing.filter(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::config("echo_chamber.smoothing", format!("bandwidth {bw} must be positive")));
        }
        if let infodemic_core::XMin::Fixed(0) = self.engagement.x_min {
            return Err(Error::config("engagement.x_min", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema: String,
    pub artifact: String,
    pub config_hash: String,
    pub corpus_manifest_hash: String,
    pub data: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(artifact: &str, config_hash: &str, corpus_manifest_hash: &str, data: T) -> Self {
        Artifact {
            schema: SCHEMA_VERSION.to_string(),
            artifact: artifact.to_string(),
            config_hash: config_hash.to_string(),
            corpus_manifest_hash: corpus_manifest_hash.to_string(),
            data,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("artifacts serialize");
        bytes.push(b'\n');
        bytes
    }
}

impl<T: DeserializeOwned> Artifact<T> {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let art: Artifact<T> = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
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

/// Write `bytes` to `path`, creating parent directories. Returns the digest.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum StageStatus {
    Ok,
    Disabled,
    Failed(String),
    /// Not run because a stage it depends on failed.
    Halted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleIndex {
    pub stages: BTreeMap<String, StageStatus>,
    /// Artifact file name to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

/// Everything one pipeline run produced.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub config_hash: String,
    pub corpus_manifest_hash: String,
    pub breakdown: BreakdownTable,
    pub labels: Option<PostLabels>,
    pub engagement: Option<Vec<EngagementTable>>,
    pub survival: Option<Vec<SurvivalReport>>,
    pub echo: Option<EchoReport>,
    pub time_series: Option<TimeSeries>,
    pub index: BundleIndex,
}

impl ReportBundle {
    pub fn failed(&self) -> bool {
        self.index
            .stages
            .values()
            .any(|s| matches!(s, StageStatus::Failed(_) | StageStatus::Halted(_)))
    }
}

pub const CORPUS_SUBDIR: &str = "corpus";

/// Ingest per `[ingest]` into `out`, or load the stored corpus.
pub fn prepare_corpus(cfg: &RunConfig, out: &Path) -> Result<StoredCorpus> {
    let Some(ing) = &cfg.ingest else {
        return load_corpus(cfg.corpus.as_deref().expect("validated"));
    };
    let map = ing.field_map()?;
    let filter = ing.filter();
    let mut corpus = Corpus::new(ing.platform.clone(), ing.window);
    let mut reports = Vec::new();
    for (kind, paths) in [(RecordKind::Posts, &ing.posts), (RecordKind::Comments, &ing.comments), (RecordKind::Edges, &ing.edges)] {
        if !paths.is_empty() {
            reports.push(ingest_paths(&mut corpus, kind, paths, &map, &filter)?);
        }
    }
    let dir = out.join(CORPUS_SUBDIR);
    let ingest_hash = config_hash(&(&filter, &map));
    save_corpus(&dir, &corpus, &ingest_hash, reports, None)?;
    load_corpus(&dir)
}

fn stage_err(stage: &'static str) -> impl Fn(Error) -> String {
    move |e| {
        log::error!("stage {stage} failed: {e}");
        e.to_string()
    }
}

/// classify, then engagement, survival and echo-chamber concurrently, then
/// the time series. A failed stage halts its dependents; whatever completed is
/// still written.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let chash = cfg.config_hash();
    let started = Instant::now();

    let stored = prepare_corpus(cfg, out)?;
    let corpus = &stored.corpus;
    let mhash = stored.manifest_hash.clone();
    log::info!("corpus: {} posts, {} comments, {} edges", corpus.posts().len(), corpus.comments().len(), corpus.edges().len());

    let mut stages = BTreeMap::new();
    let mut artifacts = BTreeMap::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let digest = write_bytes(&out.join(name), &bytes)?;
        artifacts.insert(name.to_string(), digest);
        Ok(())
    };

    let labels: Option<PostLabels> = if cfg.stages.classify {
        let registry = cfg.registry.as_deref().expect("validated");
        match OutletRegistry::load(registry, &cfg.classifier) {
            Ok(reg) => {
                let l = label_posts(corpus, &reg);
                log::info!("classify: {} of {} posts categorized", l.coverage.categorized, l.coverage.posts);
                let art = LabelsArtifact::new(l.clone(), &reg, cfg.classifier, chash.clone(), mhash.clone());
                let mut bytes = serde_json::to_vec_pretty(&art).expect("labels serialize");
                bytes.push(b'\n');
                emit("labels.json", bytes)?;
                stages.insert("classify".to_string(), StageStatus::Ok);
                Some(l)
            }
            Err(e) => {
                stages.insert("classify".to_string(), StageStatus::Failed(stage_err("classify")(e)));
                None
            }
        }
    } else {
        stages.insert("classify".to_string(), StageStatus::Disabled);
        None
    };
    let classify_failed = cfg.stages.classify && labels.is_none();

    let breakdown = corpus_stats(corpus, labels.as_ref().map(|l| &l.labels));
    emit("breakdown.json", Artifact::new("breakdown", &chash, &mhash, &breakdown).to_bytes())?;
    emit("breakdown.csv", breakdown.to_csv().into_bytes())?;

    let needs_labels = |enabled: bool| -> Option<StageStatus> {
        if !enabled {
            Some(StageStatus::Disabled)
        } else if classify_failed {
            Some(StageStatus::Halted("classify failed".into()))
        } else {
            None
        }
    };
    let eng_gate = if !cfg.stages.engagement {
        Some(StageStatus::Disabled)
    } else {
        needs_labels(true)
    };
    let surv_gate = needs_labels(cfg.stages.survival);
    let echo_gate = needs_labels(cfg.stages.echo_chamber);
    let l = labels.as_ref();

    let ((eng, surv), echo) = rayon::join(
        || {
            rayon::join(
                || {
                    eng_gate.is_none().then(|| {
                        let t = Instant::now();
                        let r = engagement_tables(corpus, l, &cfg.engagement);
                        log::info!("engagement: {} tables in {:.2?}", r.len(), t.elapsed());
                        r
                    })
                },
                || {
                    surv_gate.is_none().then(|| {
                        let l = l.expect("labels present");
                        cfg.survival
                            .units
                            .iter()
                            .map(|&u| survival_analysis(&lifetimes(corpus, l, u, cfg.survival.censoring), u, cfg.survival.censoring))
                            .collect::<Result<Vec<_>>>()
                    })
                },
            )
        },
        || {
            echo_gate.is_none().then(|| {
                let leanings = corpus_leanings(corpus, l.expect("labels present"));
                let graph = follow_graph(corpus.edges());
                echo_chamber(&leanings, &graph, &cfg.echo_chamber).map(|(r, _)| r)
            })
        },
    );

    let engagement = match eng {
        Some(tables) => {
            let body = serde_json::json!({ "x_min": cfg.engagement.x_min, "tables": tables });
            emit("fits.json", Artifact::new("fits", &chash, &mhash, body).to_bytes())?;
            emit("fits.csv", fits_csv(&tables).into_bytes())?;
            emit("wald.csv", wald_csv(&tables).into_bytes())?;
            stages.insert("engagement".into(), StageStatus::Ok);
            Some(tables)
        }
        None => {
            stages.insert("engagement".into(), eng_gate.expect("gated"));
            None
        }
    };

    let survival = match surv {
        Some(Ok(reports)) => {
            emit("km.json", Artifact::new("km", &chash, &mhash, &reports).to_bytes())?;
            emit("peto.csv", peto_csv(&reports).into_bytes())?;
            stages.insert("survival".into(), StageStatus::Ok);
            Some(reports)
        }
        Some(Err(e)) => {
            stages.insert("survival".into(), StageStatus::Failed(stage_err("survival")(e)));
            None
        }
        None => {
            stages.insert("survival".into(), surv_gate.expect("gated"));
            None
        }
    };

    let echo = match echo {
        Some(Ok(report)) => {
            emit("joint.json", Artifact::new("joint", &chash, &mhash, &report).to_bytes())?;
            stages.insert("echo_chamber".into(), StageStatus::Ok);
            Some(report)
        }
        Some(Err(e)) => {
            stages.insert("echo_chamber".into(), StageStatus::Failed(stage_err("echo_chamber")(e)));
            None
        }
        None => {
            stages.insert("echo_chamber".into(), echo_gate.expect("gated"));
            None
        }
    };

    let series = if cfg.stages.time_series {
        let ts = time_series(corpus, l);
        emit("timeseries.json", Artifact::new("timeseries", &chash, &mhash, &ts).to_bytes())?;
        emit("timeseries.csv", time_series_csv(&ts).into_bytes())?;
        stages.insert("time_series".into(), StageStatus::Ok);
        Some(ts)
    } else {
        stages.insert("time_series".into(), StageStatus::Disabled);
        None
    };

    let index = BundleIndex { stages, artifacts };
    write_bytes(&out.join("bundle.json"), &Artifact::new("bundle", &chash, &mhash, &index).to_bytes())?;
    log::info!("pipeline finished in {:.2?}", started.elapsed());
    Ok(ReportBundle {
        config_hash: chash,
        corpus_manifest_hash: mhash,
        breakdown,
        labels,
        engagement,
        survival,
        echo,
        time_series: series,
        index,
    })
}

/// One row per lifetime unit with the Peto & Peto statistic and p-value.
pub fn peto_csv(reports: &[SurvivalReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["unit", "n_questionable", "n_reliable", "statistic", "p_value", "warning"])
        .expect("in-memory write");
    for r in reports {
        let p = r.peto_peto;
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            match r.unit {
                LifetimeUnit::Post => "post".to_string(),
                LifetimeUnit::User => "user".to_string(),
            },
            opt(p.map(|p| p.n_a.to_string())),
            opt(p.map(|p| p.n_b.to_string())),
            opt(p.map(|p| p.statistic.to_string())),
            opt(p.map(|p| p.p_value.to_string())),
            opt(p.map(|p| p.warning.to_string())),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Sub-corpus retained by the links-only filter, for callers that ingested
/// without it.
pub fn links_only_corpus(corpus: &Corpus) -> Corpus {
    links_only(corpus).0
}
