use std::fs;
use std::path::{Path, PathBuf};

use infodemic::report::{run_pipeline, RunConfig, CORPUS_SUBDIR};
use infodemic::synth::{write_synth, SynthConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Synthesize into `dir/syn`, run the fixture pipeline into `dir/out` and
/// return every produced file, sorted by name.
pub fn run_fixture(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let synth = SynthConfig::load(&fixtures().join("synth.toml")).unwrap();
    write_synth(&dir.join("syn"), &synth).unwrap();
    let text = fs::read_to_string(fixtures().join("run.toml")).unwrap();
    let cfg = RunConfig::from_toml_str(&text, dir, std::iter::empty()).unwrap();
    let bundle = run_pipeline(&cfg).unwrap();
    assert!(!bundle.failed(), "{:?}", bundle.index.stages);

    let out = dir.join("out");
    let mut files: Vec<(String, Vec<u8>)> = bundle
        .index
        .artifacts
        .keys()
        .map(|name| (name.clone(), fs::read(out.join(name)).unwrap()))
        .collect();
    files.push(("bundle.json".into(), fs::read(out.join("bundle.json")).unwrap()));
    files.push(("corpus.json".into(), fs::read(out.join(CORPUS_SUBDIR).join("corpus.json")).unwrap()));
    files.sort();
    files
}

/// Names of files that are missing from or differ from the golden set.
pub fn golden_mismatches(files: &[(String, Vec<u8>)]) -> Vec<String> {
    let golden = golden_dir();
    let mut out = Vec::new();
    for (name, bytes) in files {
        match fs::read(golden.join(name)) {
            Ok(expected) if expected == *bytes => {}
            Ok(_) => out.push(format!("{name}: differs")),
            Err(e) => out.push(format!("{name}: {e}")),
        }
    }
    out
}
