//! The committed fixture configs must reproduce the committed report bundle
//! byte for byte. Set `UPDATE_GOLDEN=1` to rewrite the golden files.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use common::{golden_dir, golden_mismatches, run_fixture};

#[test]
fn report_bundle_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let files = run_fixture(dir.path());
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "pipeline took {elapsed:?}");

    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let golden = golden_dir();
        fs::create_dir_all(&golden).unwrap();
        for (name, bytes) in &files {
            fs::write(golden.join(name), bytes).unwrap();
        }
        return;
    }
    let mismatched = golden_mismatches(&files);
    assert!(mismatched.is_empty(), "golden mismatch: {mismatched:#?}");
}

#[test]
fn repeated_runs_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_fixture(a.path()), run_fixture(b.path()));
}
