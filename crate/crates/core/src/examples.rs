//! Shipped example configs, run through the same path as `e2i2 run` and
//! compared against stored expectations.
//!
//! `manifest.toml` lists each case; its expected file holds JSON-pointer checks
//! into `record.json`. A tolerance of zero demands a bit-exact match.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Mode};
use crate::runner::{self, RunOptions};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Every formula the examples must exercise between them.
pub const FORMULAS: [&str; 15] = [
    "hbt-rate",
    "phase-noise",
    "fringe-scan",
    "extended-source",
    "polarized-rate",
    "linked-polarization",
    "procedure-1",
    "procedure-2",
    "general-rate",
    "factorization-witness",
    "swap-operator",
    "wavelength-interference",
    "decay-interference",
    "mach-zehnder",
    "estimation",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub example: Vec<ExampleCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleCase {
    pub name: String,
    pub config: PathBuf,
    pub expected: PathBuf,
    pub mode: Mode,
    pub covers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    /// JSON pointer into the run record.
    pub pointer: String,
    pub value: serde_json::Value,
    /// Absolute tolerance for numbers; ignored for other values.
    #[serde(default)]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExampleOutcome {
    pub name: String,
    pub passed: bool,
    pub max_deviation: f64,
    pub failures: Vec<String>,
}

impl fmt::Display for ExampleOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {} (max deviation {:e})", self.name, self.max_deviation)?;
        for msg in &self.failures {
            write!(f, "\n  {msg}")?;
        }
        Ok(())
    }
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, ConfigError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {}", path.display(), e.message())))
}

/// Modes and formulas the manifest leaves uncovered.
pub fn coverage_gaps(manifest: &Manifest) -> (Vec<Mode>, Vec<&'static str>) {
    let modes: BTreeSet<&str> = manifest.example.iter().map(|e| e.mode.as_str()).collect();
    let covered: BTreeSet<&str> = manifest.example.iter().flat_map(|e| e.covers.iter().map(String::as_str)).collect();
    (
        Mode::ALL.into_iter().filter(|m| !modes.contains(m.as_str())).collect(),
        FORMULAS.into_iter().filter(|f| !covered.contains(f)).collect(),
    )
}

fn compare(record: &serde_json::Value, checks: &[Check]) -> (f64, Vec<String>) {
    let mut max_dev = 0.0_f64;
    let mut failures = Vec::new();
    for c in checks {
        let Some(actual) = record.pointer(&c.pointer) else {
            failures.push(format!("{}: missing", c.pointer));
            max_dev = f64::INFINITY;
            continue;
        };
        match (actual.as_f64(), c.value.as_f64()) {
            (Some(a), Some(e)) => {
                let dev = (a - e).abs();
                max_dev = max_dev.max(dev);
                if !(dev <= c.tol) {
                    failures.push(format!("{}: got {a:e}, expected {e:e} +- {:e}", c.pointer, c.tol));
                }
            }
            _ => {
                if actual != &c.value {
                    failures.push(format!("{}: got {actual}, expected {}", c.pointer, c.value));
                    max_dev = f64::INFINITY;
                }
            }
        }
    }
    (max_dev, failures)
}

/// Run one case into `out_dir` and check it.
pub fn run_example(dir: &Path, case: &ExampleCase, out_dir: &Path) -> ExampleOutcome {
    let fail = |msg: String| ExampleOutcome { name: case.name.clone(), passed: false, max_deviation: f64::INFINITY, failures: vec![msg] };
    let expected_path = dir.join(&case.expected);
    let expected: Expected = match std::fs::read_to_string(&expected_path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(e) => e,
        Err(e) => return fail(format!("{}: {e}", expected_path.display())),
    };
    let record = match runner::run(&dir.join(&case.config), out_dir, &RunOptions::default()) {
        Ok(r) => r,
        Err(e) => return fail(format!("run failed: {e}")),
    };
    if record.mode != case.mode {
        return fail(format!("manifest says mode {}, config ran {}", case.mode.as_str(), record.mode.as_str()));
    }
    let value = serde_json::to_value(&record).expect("record serializes");
    let (max_deviation, failures) = compare(&value, &expected.checks);
    ExampleOutcome { name: case.name.clone(), passed: failures.is_empty(), max_deviation, failures }
}

/// Run every case in `dir/manifest.toml` concurrently, each into `out_root/<name>`.
pub fn run_examples(dir: &Path, out_root: &Path) -> Result<Vec<ExampleOutcome>, ConfigError> {
    let manifest = load_manifest(dir)?;
    Ok(manifest
        .example
        .par_iter()
        .map(|case| run_example(dir, case, &out_root.join(&case.name)))
        .collect())
}
