use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use infodemic::report::{Artifact, BundleIndex, StageStatus};
use infodemic::synth::{write_synth, SynthConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_infodemic"));
    c.env_remove("RUST_LOG");
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("INFODEMIC_")) {
        c.env_remove(k);
    }
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ingest_all(dir: &Path) {
    for kind in ["posts", "comments", "edges"] {
        let file = format!("syn/{kind}.jsonl");
        let o = run(
            &[
                "ingest", "--kind", kind, "--corpus", "corpus", "--map", "syn/fieldmap.toml",
                "--hashtags", "covid,covid19,corona,coronavirus", "--window", "2020-01-01..2020-09-30",
                "--links-only", &file,
            ],
            dir,
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
}

#[test]
fn subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["synth", "--out", "syn", "--seed", "5"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    ingest_all(d);

    let o = run(&["classify", "--corpus", "corpus", "--registry", "syn/registry.csv", "--out", "out/labels.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    for args in [
        vec!["stats", "--labels", "out/labels.json"],
        vec!["engagement", "--labels", "out/labels.json", "--kind", "likes", "--unit", "post", "--x-min", "auto"],
        vec!["survival", "--labels", "out/labels.json", "--no-censoring"],
        vec!["echo-chamber", "--labels", "out/labels.json", "--bins", "10"],
        vec!["timeseries"],
    ] {
        let mut full = vec![args[0], "--corpus", "corpus", "--out", "out"];
        full.extend(&args[1..]);
        let o = run(&full, d);
        assert!(o.status.success(), "{full:?}: {}", stderr(&o));
    }
    for f in ["breakdown.json", "fits.json", "wald.csv", "km.json", "peto.csv", "joint.json", "timeseries.csv"] {
        assert!(d.join("out").join(f).is_file(), "{f}");
    }
    let fits = fs::read_to_string(d.join("out/fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 1 + 3);

    // Re-ingesting the same posts only adds duplicates.
    let o = run(
        &["ingest", "--kind", "posts", "--corpus", "corpus", "--preset", "gab", "--hashtags", "covid", "syn/posts.jsonl"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(d.join("corpus/corpus.json")).unwrap()).unwrap();
    let last = manifest["ingest"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["accepted"], 0);
}

#[test]
fn report_from_config_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_synth(&d.join("syn"), &SynthConfig::default()).unwrap();
    ingest_all(d);
    fs::write(
        d.join("run.toml"),
        "corpus = \"corpus\"\nregistry = \"syn/registry.csv\"\nout_dir = \"out\"\n",
    )
    .unwrap();
    let o = bin()
        .args(["--json-logs", "report", "--config", "run.toml"])
        .env("INFODEMIC_ECHO_CHAMBER__BINS", "5")
        .env("INFODEMIC_STAGES__SURVIVAL", "false")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let first = stderr(&o).lines().next().unwrap().to_string();
    let line: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(line["level"], "INFO");

    let bundle: Artifact<BundleIndex> = Artifact::load(&d.join("out/bundle.json")).unwrap();
    assert_eq!(bundle.data.stages["survival"], StageStatus::Disabled);
    assert!(!d.join("out/km.json").exists());
    let joint: Artifact<serde_json::Value> = Artifact::load(&d.join("out/joint.json")).unwrap();
    assert_eq!(joint.data["density"]["bins"], 5);
    assert_eq!(joint.config_hash, bundle.config_hash);
}

#[test]
fn all_stages_off_writes_only_the_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_synth(&d.join("syn"), &SynthConfig { n_posts: 100, n_users: 20, ..Default::default() }).unwrap();
    ingest_all(d);
    let stages = "[stages]\nclassify = false\nengagement = false\nsurvival = false\necho_chamber = false\ntime_series = false\n";
    fs::write(d.join("run.toml"), format!("corpus = \"corpus\"\nout_dir = \"out\"\n{stages}")).unwrap();
    let o = run(&["report", "--config", "run.toml"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<_> = fs::read_dir(d.join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["breakdown.csv", "breakdown.json", "bundle.json"]);
}

#[test]
fn missing_registry_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("corpus")).unwrap();
    fs::write(d.join("run.toml"), "corpus = \"corpus\"\nout_dir = \"out\"\n").unwrap();
    let o = run(&["report", "--config", "run.toml"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("registry"), "{}", stderr(&o));
    assert!(!d.join("out").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("p.jsonl"), "").unwrap();
    let o = run(&["ingest", "--kind", "videos", "--corpus", "c", "p.jsonl"], d);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["ingest", "--kind", "posts", "--corpus", "c", "p.jsonl"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--window"));
    let o = run(&["engagement", "--corpus", "c", "--out", "o", "--x-min", "0"], d);
    assert_eq!(o.status.code(), Some(2));
    fs::write(d.join("s.toml"), "n_posts = 10\nlink_rate = 2.0\n").unwrap();
    let o = run(&["synth", "--config", "s.toml", "--out", "syn"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["stats", "--corpus", "nowhere", "--out", "o"], d);
    assert_eq!(o.status.code(), Some(1));

    write_synth(&d.join("syn"), &SynthConfig { n_posts: 100, n_users: 20, ..Default::default() }).unwrap();
    ingest_all(d);
    let posts = d.join("corpus/posts.jsonl");
    let mut bytes = fs::read(&posts).unwrap();
    bytes.extend_from_slice(b"\n");
    fs::write(&posts, bytes).unwrap();
    let o = run(&["stats", "--corpus", "corpus", "--out", "o"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("posts.jsonl"), "{}", stderr(&o));
}

#[test]
fn failed_stage_is_recorded_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_synth(&d.join("syn"), &SynthConfig { n_posts: 200, n_users: 30, ..Default::default() }).unwrap();
    ingest_all(d);
    // A registry that matches no domain leaves every user without a leaning.
    fs::write(d.join("empty.csv"), "domain,provider,mbfc_bias,mbfc_bias_score,ng_score,ng_special\nnowhere.example,MBFC,Least Biased,,,\n").unwrap();
    fs::write(d.join("run.toml"), "corpus = \"corpus\"\nregistry = \"empty.csv\"\nout_dir = \"out\"\n").unwrap();
    let o = run(&["report", "--config", "run.toml"], d);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let bundle: Artifact<BundleIndex> = Artifact::load(&d.join("out/bundle.json")).unwrap();
    assert!(matches!(bundle.data.stages["echo_chamber"], StageStatus::Failed(_)));
    assert_eq!(bundle.data.stages["engagement"], StageStatus::Ok);
    assert!(d.join("out/fits.json").is_file());
    assert!(!d.join("out/joint.json").exists());
}
