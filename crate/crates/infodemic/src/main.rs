use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infodemic::corpus::{
    corpus_stats, ingest_paths, load_corpus, save_corpus, Corpus, FieldMap, IngestFilter, PlatformPreset, RecordKind,
    StoredCorpus, Window, CORPUS_MANIFEST,
};
use infodemic::echo::{corpus_leanings, echo_chamber, follow_graph};
use infodemic::engagement::{engagement_tables, fits_csv, wald_csv, EngagementConfig, EngagementKind, EngagementUnit};
use infodemic::error::{Error, Result};
use infodemic::hashing::config_hash;
use infodemic::lifetimes::{lifetimes, survival_analysis, LifetimeUnit};
use infodemic::report::{peto_csv, run_pipeline, write_bytes, Artifact, RunConfig};
use infodemic::sources::{label_posts, LabelsArtifact, OutletRegistry, PostLabels};
use infodemic::synth::{write_synth, SynthConfig};
use infodemic::timeseries::{time_series, time_series_csv};
use infodemic_core::{ClassifierConfig, JointDensityConfig, XMin};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "infodemic", version, about = "Measure questionable-source diffusion in social media corpora")]
struct Cli {
    /// Log as one JSON object per line.
    #[arg(long, global = true)]
    json_logs: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus, registry and ground-truth manifest.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Append raw records to a stored corpus, creating it if needed.
    Ingest(IngestArgs),
    /// Label posts against an outlet registry.
    Classify {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        registry: PathBuf,
        /// Treat a NewsGuard score of exactly 60 as reliable.
        #[arg(long)]
        ng_inclusive: bool,
        /// Output file.
        #[arg(long, default_value = "labels.json")]
        out: PathBuf,
    },
    /// Corpus breakdown table.
    Stats {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discrete power-law fits of engagement counts.
    Engagement {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values = ["likes", "reshares", "replies"])]
        kind: Vec<EngagementKind>,
        #[arg(long, value_delimiter = ',', default_values = ["post", "user"])]
        unit: Vec<EngagementUnit>,
        /// A fixed lower cut-off, or `auto`.
        #[arg(long, default_value = "1", value_parser = parse_x_min)]
        x_min: XMin,
        #[arg(long)]
        no_ccdf: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kaplan-Meier curves and the Peto & Peto test.
    Survival {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_delimiter = ',', default_values = ["post", "user"])]
        unit: Vec<LifetimeUnit>,
        /// Treat every lifetime as observed.
        #[arg(long)]
        no_censoring: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint distribution of user and neighborhood leaning.
    EchoChamber {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        labels: PathBuf,
        /// Follow edges to use instead of the corpus edges (JSONL).
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        min_posts: u32,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        smoothing: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Daily and cumulative posts and new users.
    Timeseries {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every enabled stage from a TOML config.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct CorpusArg {
    /// Stored corpus directory.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    kind: RecordKind,
    #[arg(long)]
    corpus: PathBuf,
    /// Field map TOML. Takes precedence over --preset.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value = "canonical")]
    preset: PlatformPreset,
    /// Keep posts carrying any of these hashtags (comma separated).
    #[arg(long, value_delimiter = ',')]
    hashtags: Vec<String>,
    /// `YYYY-MM-DD..YYYY-MM-DD`, both days inclusive. Required for a new corpus.
    #[arg(long)]
    window: Option<Window>,
    #[arg(long)]
    links_only: bool,
    #[arg(long)]
    substring_match: bool,
    #[arg(long, default_value = "unknown")]
    platform: String,
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

fn parse_x_min(s: &str) -> std::result::Result<XMin, String> {
    match s {
        "auto" => Ok(XMin::Auto),
        n => match n.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or `auto`, got {n:?}")),
            Ok(v) => Ok(XMin::Fixed(v)),
        },
    }
}

fn open(arg: &CorpusArg) -> Result<StoredCorpus> {
    load_corpus(&arg.corpus)
}

fn load_labels(path: &Path, stored: &StoredCorpus) -> Result<PostLabels> {
    let art = LabelsArtifact::load(path)?;
    if art.corpus_manifest_hash != stored.manifest_hash {
        log::warn!("{} was computed from a different corpus", path.display());
    }
    Ok(art.post_labels())
}

fn emit<T: Serialize>(dir: &Path, name: &str, artifact: &str, params: &impl Serialize, stored: &StoredCorpus, data: T) -> Result<String> {
    let art = Artifact::new(artifact, &config_hash(params), &stored.manifest_hash, data);
    write_bytes(&dir.join(name), &art.to_bytes())
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let map = match &args.map {
        Some(p) => FieldMap::load(p)?,
        None => FieldMap::preset(args.preset),
    };
    let (mut corpus, mut reports) = if args.corpus.join(CORPUS_MANIFEST).is_file() {
        let stored = load_corpus(&args.corpus)?;
        if args.window.is_some_and(|w| stored.corpus.window != Some(w)) {
            return Err(Error::Usage("--window differs from the stored corpus window".into()));
        }
        (stored.corpus, stored.manifest.ingest)
    } else {
        let window = args
            .window
            .ok_or_else(|| Error::Usage("--window is required when creating a corpus".into()))?;
        (Corpus::new(args.platform.clone(), window), Vec::new())
    };
    let filter = IngestFilter {
        window: corpus.window,
        links_only: args.links_only,
        substring_match: args.substring_match,
        ..Default::default()
    }
    .with_hashtags(&args.hashtags);
    let report = ingest_paths(&mut corpus, args.kind, &args.paths, &map, &filter)?;
    log::info!(
        "{}: {} lines, {} accepted, {} duplicates, {} dropped, {} malformed",
        args.kind.as_str(),
        report.total_lines,
        report.accepted,
        report.duplicates,
        report.dropped_total(),
        report.malformed_total()
    );
    reports.push(report);
    let manifest = save_corpus(&args.corpus, &corpus, &config_hash(&(&filter, &map)), reports, None)?;
    println!("{}", serde_json::to_string_pretty(&manifest.counts).expect("counts serialize"));
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synth { config, out, seed } => {
            let mut cfg = match config {
                Some(p) => SynthConfig::load(&p)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let m = write_synth(&out, &cfg)?;
            log::info!("synth: {} posts, {} users, {} edges", m.posts.len(), m.users.len(), m.graph_edges);
        }
        Command::Ingest(args) => ingest(&args)?,
        Command::Classify { corpus, registry, ng_inclusive, out } => {
            let stored = open(&corpus)?;
            let cfg = ClassifierConfig {
                ng_reliable_strict: !ng_inclusive,
            };
            let reg = OutletRegistry::load(&registry, &cfg)?;
            let labels = label_posts(&stored.corpus, &reg);
            let art = LabelsArtifact::new(labels, &reg, cfg, config_hash(&cfg), stored.manifest_hash.clone());
            let mut bytes = serde_json::to_vec_pretty(&art).expect("labels serialize");
            bytes.push(b'\n');
            write_bytes(&out, &bytes)?;
            println!("{}", serde_json::to_string_pretty(&art.coverage).expect("coverage serializes"));
        }
        Command::Stats { corpus, labels, out } => {
            let stored = open(&corpus)?;
            let l = labels.map(|p| load_labels(&p, &stored)).transpose()?;
            let table = corpus_stats(&stored.corpus, l.as_ref().map(|l| &l.labels));
            emit(&out, "breakdown.json", "breakdown", &(), &stored, &table)?;
            write_bytes(&out.join("breakdown.csv"), table.to_csv().as_bytes())?;
            print!("{}", table.to_csv());
        }
        Command::Engagement { corpus, labels, kind, unit, x_min, no_ccdf, out } => {
            let stored = open(&corpus)?;
            let l = labels.map(|p| load_labels(&p, &stored)).transpose()?;
            let cfg = EngagementConfig {
                x_min,
                kinds: kind,
                units: unit,
                ccdf: !no_ccdf,
            };
            let tables = engagement_tables(&stored.corpus, l.as_ref(), &cfg);
            let body = serde_json::json!({ "x_min": cfg.x_min, "tables": tables });
            emit(&out, "fits.json", "fits", &cfg, &stored, body)?;
            write_bytes(&out.join("fits.csv"), fits_csv(&tables).as_bytes())?;
            write_bytes(&out.join("wald.csv"), wald_csv(&tables).as_bytes())?;
            print!("{}", fits_csv(&tables));
        }
        Command::Survival { corpus, labels, unit, no_censoring, out } => {
            let stored = open(&corpus)?;
            let l = load_labels(&labels, &stored)?;
            let censoring = !no_censoring;
            let reports = unit
                .iter()
                .map(|&u| survival_analysis(&lifetimes(&stored.corpus, &l, u, censoring), u, censoring))
                .collect::<Result<Vec<_>>>()?;
            emit(&out, "km.json", "km", &(&unit, censoring), &stored, &reports)?;
            write_bytes(&out.join("peto.csv"), peto_csv(&reports).as_bytes())?;
            print!("{}", peto_csv(&reports));
        }
        Command::EchoChamber { corpus, labels, edges, map, min_posts, bins, smoothing, out } => {
            let stored = open(&corpus)?;
            let l = load_labels(&labels, &stored)?;
            let cfg = JointDensityConfig {
                min_posts,
                bins,
                smoothing,
            };
            if bins < 2 {
                return Err(Error::Usage("--bins must be at least 2".into()));
            }
            let graph = match edges {
                Some(p) => {
                    let map = map.map(|m| FieldMap::load(&m)).transpose()?.unwrap_or_default();
                    let mut c = Corpus::default();
                    ingest_paths(&mut c, RecordKind::Edges, &[p], &map, &IngestFilter::default())?;
                    follow_graph(c.edges())
                }
                None => follow_graph(stored.corpus.edges()),
            };
            let (report, _) = echo_chamber(&corpus_leanings(&stored.corpus, &l), &graph, &cfg)?;
            emit(&out, "joint.json", "joint", &cfg, &stored, &report)?;
            match report.correlation {
                Some(c) => println!("r = {:.4} over {} users", c.r, c.n),
                None => println!("correlation undefined: {}", report.correlation_error.unwrap_or_default()),
            }
        }
        Command::Timeseries { corpus, labels, out } => {
            let stored = open(&corpus)?;
            let l = labels.map(|p| load_labels(&p, &stored)).transpose()?;
            let ts = time_series(&stored.corpus, l.as_ref());
            emit(&out, "timeseries.json", "timeseries", &(), &stored, &ts)?;
            write_bytes(&out.join("timeseries.csv"), time_series_csv(&ts).as_bytes())?;
        }
        Command::Report { config } => {
            let cfg = RunConfig::load(&config)?;
            let bundle = run_pipeline(&cfg)?;
            for (stage, status) in &bundle.index.stages {
                println!("{stage}: {}", serde_json::to_string(status).expect("status serializes"));
            }
            return Ok(!bundle.failed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    infodemic::logging::init(cli.json_logs);
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
