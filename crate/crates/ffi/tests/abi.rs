use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;

use e2i2_ffi::*;

const SCENE: &str = r#"
[geometry]
wavelength = 5e-7
emitters = [[-5e-4, 0.0, 1.0], [5e-4, 0.0, 1.0]]
detectors = [[-1e-4, 0.0, 0.0], [1e-4, 0.0, 0.0]]

[run]
mode = "rate"
"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { e2i2_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(s.len(), n.min(511));
    s
}

fn scene(text: &str) -> (E2i2Status, *mut E2i2Scene) {
    let c = CString::new(text).unwrap();
    let mut out = std::ptr::null_mut();
    let status = unsafe { e2i2_scene_from_config(c.as_ptr(), &mut out) };
    (status, out)
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(e2i2_version()) };
    assert_eq!(v.to_str().unwrap(), e2i2::VERSION);
}

#[test]
fn rate_through_a_handle() {
    let (status, handle) = scene(SCENE);
    assert_eq!(status, E2i2Status::Ok);
    assert_eq!(unsafe { e2i2_scene_emitter_count(handle) }, 2);
    let mut rate = E2i2Rate::default();
    assert_eq!(unsafe { e2i2_scene_rate(handle, &mut rate) }, E2i2Status::Ok);
    let config = e2i2::config::parse_config(SCENE, "t", &[]).unwrap();
    let expected = e2i2::hbt::hbt_rate(&config.scene().unwrap()).unwrap();
    assert_eq!(rate.total, expected.total);
    assert_eq!(rate.crossed, expected.crossed);
    unsafe { e2i2_scene_free(handle) };
}

#[test]
fn scan_fills_caller_buffers() {
    let (_, handle) = scene(SCENE);
    let axis = [1.0, 0.0, 0.0];
    let mut b = vec![0.0; 5];
    let mut t = vec![0.0; 5];
    let status = unsafe {
        e2i2_scene_scan(handle, axis.as_ptr(), 0.0, 1e-3, 5, b.as_mut_ptr(), t.as_mut_ptr(), std::ptr::null_mut(), std::ptr::null_mut(), 5)
    };
    assert_eq!(status, E2i2Status::Ok);
    assert_eq!(b[4], 1e-3);
    // fringe spacing is 0.5 mm: minima at 0.25 and 0.75 mm
    assert!(t[1] < 1e-9 * t[0] && t[3] < 1e-9 * t[0], "{t:?}");
    assert!((t[2] - t[0]).abs() < 1e-5 * t[0], "{t:?}");
    let status = unsafe {
        e2i2_scene_scan(handle, axis.as_ptr(), 0.0, 1e-3, 9, b.as_mut_ptr(), t.as_mut_ptr(), std::ptr::null_mut(), std::ptr::null_mut(), 5)
    };
    assert_eq!(status, E2i2Status::BufferTooSmall);
    assert!(last_error().contains("capacity"));
    unsafe { e2i2_scene_free(handle) };
}

#[test]
fn error_codes() {
    let (status, handle) = scene("[run\nmode = 1");
    assert_eq!(status, E2i2Status::Parse);
    assert!(handle.is_null());
    assert!(last_error().contains("<config>:1:"));

    let bad = SCENE.replace("[run]", "[sources]\nstates = [[[2.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]\n\n[run]");
    let (status, _) = scene(&bad);
    assert_eq!(status, E2i2Status::Validation);
    assert!(last_error().contains("normalization"));

    let mut out = std::ptr::null_mut();
    assert_eq!(unsafe { e2i2_scene_from_config(std::ptr::null(), &mut out) }, E2i2Status::NullPointer);
    let mut rate = E2i2Rate::default();
    assert_eq!(unsafe { e2i2_scene_rate(std::ptr::null(), &mut rate) }, E2i2Status::NullPointer);
    unsafe { e2i2_scene_free(std::ptr::null_mut()) };

    let invalid = [0xffu8 as c_char, 0];
    assert_eq!(unsafe { e2i2_scene_from_config(invalid.as_ptr(), &mut out) }, E2i2Status::InvalidUtf8);
}

#[test]
fn procedure_rates_match_the_library() {
    let amps = [1.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.5, 0.0];
    let mut out = E2i2ProcedureRates::default();
    assert_eq!(unsafe { e2i2_procedure_rates(amps.as_ptr(), &mut out) }, E2i2Status::Ok);
    assert!((out.procedure1 - 0.25).abs() < 1e-15);
    assert!((out.procedure2 - 0.125).abs() < 1e-15);
    assert!((out.spatial_swap - 0.25).abs() < 1e-15);
}

#[test]
fn run_config_writes_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scene.toml");
    std::fs::write(&cfg, SCENE).unwrap();
    let out = dir.path().join("out");
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    let o = CString::new(out.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { e2i2_run_config(c.as_ptr(), o.as_ptr()) }, E2i2Status::Ok);
    assert!(out.join("record.json").exists());
    let missing = CString::new(dir.path().join("nope.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { e2i2_run_config(missing.as_ptr(), o.as_ptr()) }, E2i2Status::Io);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/e2i2.h")).unwrap();
    for name in [
        "e2i2_version",
        "e2i2_last_error_message",
        "e2i2_scene_from_config",
        "e2i2_scene_free",
        "e2i2_scene_emitter_count",
        "e2i2_scene_rate",
        "e2i2_scene_scan",
        "e2i2_procedure_rates",
        "e2i2_run_config",
        "typedef struct E2i2Scene E2i2Scene",
        "E2I2_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/e2i2.h");
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
