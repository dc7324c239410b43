use std::path::{Path, PathBuf};

use e2i2::examples::{coverage_gaps, load_manifest, run_examples};

fn scenes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes")
}

#[test]
fn every_shipped_example_matches_its_expectation() {
    let tmp = tempfile::tempdir().unwrap();
    let outcomes = run_examples(&scenes(), tmp.path()).unwrap();
    assert!(!outcomes.is_empty());
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(ToString::to_string).collect();
    assert!(failed.is_empty(), "{}", failed.join("\n"));
}

#[test]
fn manifest_covers_every_mode_and_formula() {
    let manifest = load_manifest(&scenes()).unwrap();
    let (modes, formulas) = coverage_gaps(&manifest);
    assert!(modes.is_empty(), "uncovered modes: {modes:?}");
    assert!(formulas.is_empty(), "uncovered formulas: {formulas:?}");
}

#[test]
fn manifest_entries_point_at_real_files() {
    let dir = scenes();
    for case in load_manifest(&dir).unwrap().example {
        assert!(dir.join(&case.config).is_file(), "{}", case.name);
        assert!(dir.join(&case.expected).is_file(), "{}", case.name);
    }
}
