use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_e2i2");

fn scenes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes")
}

fn e2i2(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    e2i2(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const RATE: &str = "[geometry]
emitters = [[-5e-4, 0.0, 1.0], [5e-4, 0.0, 1.0]]
detectors = [[-1e-4, 0.0, 0.0], [1e-4, 0.0, 0.0]]

[run]
mode = \"rate\"
";

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenes().join("decay-fit.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&config, &a, &[]).status.success());
    assert!(run(&config, &b, &[]).status.success());
    for f in ["record.json", "fit.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_matches_the_override() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenes().join("decay-fit.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&config, &a, &["--seed", "13"]).status.success());
    assert!(run(&config, &b, &["--override", "run.seed=13"]).status.success());
    assert_eq!(std::fs::read(a.join("record.json")).unwrap(), std::fs::read(b.join("record.json")).unwrap());
    let record: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 13);
}

#[test]
fn timing_is_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "rate.toml", RATE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&config, &a, &[]).status.success());
    assert!(run(&config, &b, &["--timing"]).status.success());
    let read = |d: &Path| -> serde_json::Value { serde_json::from_slice(&std::fs::read(d.join("record.json")).unwrap()).unwrap() };
    assert!(read(&a).get("wall_time_s").is_none());
    assert!(read(&b)["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn syntax_errors_exit_2_with_a_position() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "bad.toml", &RATE.replace("mode = \"rate\"", "mode = \"rate\"\nsteps = ="));
    let o = run(&config, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:7:"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "bad.toml", &RATE.replace("[run]", "[run]\ncolour = 1"));
    let o = e2i2(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:6:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn unnormalized_density_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = RATE.replace(
        "[run]",
        "[sources]\npolarization = [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]], [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]]\n\n[run]",
    );
    let config = write(tmp.path(), "trace.toml", &text);
    let o = run(&config, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("trace"), "{}", stderr(&o));
}

#[test]
fn non_idempotent_projector_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = RATE.replace(
        "[run]",
        "[detectors]\nprojectors = [[[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]], [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]]\n\n[run]",
    );
    let config = write(tmp.path(), "proj.toml", &text);
    let o = e2i2(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("idempotency"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&tmp.path().join("absent.toml"), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shipped_scenes_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenes()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") && path.file_name().unwrap() != "manifest.toml" {
            let o = e2i2(&["validate", "--config", path.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 15);
}

#[test]
fn scan_writes_one_csv_row_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scan");
    assert!(run(&scenes().join("fringe-scan.toml"), &out, &["--override", "run.steps=11"]).status.success());
    let mut reader = csv::Reader::from_path(out.join("scan.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["baseline", "total", "direct", "crossed"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11);
    let last: f64 = rows[10][0].parse().unwrap();
    assert_eq!(last, 2e-3);
}

#[test]
fn override_can_change_the_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenes().join("fringe-scan.toml");
    let out = tmp.path().join("o");
    assert!(run(&config, &out, &["--override", "run.mode=rate"]).status.success());
    let record: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["mode"], "rate");
    assert_eq!(record["outputs"]["kind"], "rate");
}
