//! C ABI over the e2i2 engines.
//!
//! Scenes are opaque handles built from TOML config text. Every entry point
//! returns an [`E2i2Status`]; on failure the message is kept per thread and
//! read back with [`e2i2_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use e2i2::config::{parse_config, ConfigError, SceneConfig};
use e2i2::hbt::{scan_with, ScanSpec};
use e2i2::procedures::{procedure1_rate, procedure2_rate, spatial_swap_rate, MixedAmplitudes};
use e2i2::runner::{self, RunOptions};
use e2i2::scene::OpticalScene;
use e2i2::C64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum E2i2Status {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Compute = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

/// Scene built from a config document.
pub struct E2i2Scene {
    config: SceneConfig,
    scene: OpticalScene,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct E2i2Rate {
    pub direct: f64,
    pub crossed: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct E2i2ProcedureRates {
    pub procedure1: f64,
    pub procedure2: f64,
    pub spatial_swap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: E2i2Status, msg: impl Into<String>) -> E2i2Status {
    set_error(msg.into());
    status
}

fn config_failure(e: ConfigError) -> E2i2Status {
    let status = match &e {
        ConfigError::Io { .. } => E2i2Status::Io,
        ConfigError::Parse(_) => E2i2Status::Parse,
        ConfigError::Invalid(_) => E2i2Status::Validation,
    };
    fail(status, e.to_string())
}

fn guarded<F: FnOnce() -> E2i2Status>(f: F) -> E2i2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == E2i2Status::Ok {
                set_error(String::new());
            }
            status
        }
        Err(_) => fail(E2i2Status::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, E2i2Status> {
    if ptr.is_null() {
        return Err(fail(E2i2Status::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail(E2i2Status::InvalidUtf8, format!("argument is not UTF-8: {e}")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn e2i2_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn e2i2_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parse and validate TOML config text into a scene handle.
///
/// # Safety
/// `config_text` must be a NUL-terminated string and `out` a writable pointer.
/// The handle must be released with [`e2i2_scene_free`].
#[no_mangle]
pub unsafe extern "C" fn e2i2_scene_from_config(config_text: *const c_char, out: *mut *mut E2i2Scene) -> E2i2Status {
    guarded(|| {
        if out.is_null() {
            return fail(E2i2Status::NullPointer, "null output handle");
        }
        *out = std::ptr::null_mut();
        let text = match read_str(config_text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let config = match parse_config(text, "<config>", &[]) {
            Ok(c) => c,
            Err(e) => return config_failure(e),
        };
        if let Err(e) = config.validate() {
            return config_failure(e.into());
        }
        let scene = match config.scene() {
            Ok(s) => s,
            Err(e) => return fail(E2i2Status::Validation, e.to_string()),
        };
        *out = Box::into_raw(Box::new(E2i2Scene { config, scene }));
        E2i2Status::Ok
    })
}

/// Release a scene handle. Null is ignored.
///
/// # Safety
/// `scene` must be null or a handle from [`e2i2_scene_from_config`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn e2i2_scene_free(scene: *mut E2i2Scene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of emitters in the scene, or 0 for a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn e2i2_scene_emitter_count(scene: *const E2i2Scene) -> usize {
    scene.as_ref().map_or(0, |s| s.scene.emitters().len())
}

/// Coincidence rate of the scene at its configured detector positions, using
/// the formula the config selects (scalar, polarized or general).
///
/// # Safety
/// `scene` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn e2i2_scene_rate(scene: *const E2i2Scene, out: *mut E2i2Rate) -> E2i2Status {
    guarded(|| {
        let (Some(s), false) = (scene.as_ref(), out.is_null()) else {
            return fail(E2i2Status::NullPointer, "null scene or output");
        };
        match runner::rate_fn(&s.config).and_then(|(_, f)| f(&s.scene)) {
            Ok(r) => {
                *out = E2i2Rate { direct: r.direct, crossed: r.crossed, total: r.total };
                E2i2Status::Ok
            }
            Err(e) => fail(E2i2Status::Compute, e.to_string()),
        }
    })
}

/// Scan the detector baseline along `axis` over `steps` points in `[from, to]`.
/// Each non-null output array receives `steps` values; `capacity` is their length.
///
/// # Safety
/// `scene` must be a live handle, `axis` must point to 3 doubles, and every
/// non-null output must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn e2i2_scene_scan(
    scene: *const E2i2Scene,
    axis: *const f64,
    from: f64,
    to: f64,
    steps: usize,
    baselines: *mut f64,
    totals: *mut f64,
    direct: *mut f64,
    crossed: *mut f64,
    capacity: usize,
) -> E2i2Status {
    guarded(|| {
        let Some(s) = scene.as_ref() else {
            return fail(E2i2Status::NullPointer, "null scene");
        };
        if axis.is_null() {
            return fail(E2i2Status::NullPointer, "null axis");
        }
        if capacity < steps {
            return fail(E2i2Status::BufferTooSmall, format!("{steps} points need capacity {steps}, got {capacity}"));
        }
        let axis = [*axis, *axis.add(1), *axis.add(2)];
        let spec = ScanSpec { axis, from, to, steps };
        let curve = match runner::rate_fn(&s.config).and_then(|(_, f)| scan_with(&s.scene, &spec, f)) {
            Ok(c) => c,
            Err(e) => return fail(E2i2Status::Compute, e.to_string()),
        };
        for (dst, src) in [(baselines, &curve.baselines), (totals, &curve.totals), (direct, &curve.direct), (crossed, &curve.crossed)] {
            if !dst.is_null() {
                std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
            }
        }
        E2i2Status::Ok
    })
}

/// Procedure rates for amplitudes `S1A, D2B, D2A, S1B`, passed as 8 doubles
/// in `re, im` order.
///
/// # Safety
/// `amplitudes` must point to 8 doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn e2i2_procedure_rates(amplitudes: *const f64, out: *mut E2i2ProcedureRates) -> E2i2Status {
    guarded(|| {
        if amplitudes.is_null() || out.is_null() {
            return fail(E2i2Status::NullPointer, "null amplitudes or output");
        }
        let v = std::slice::from_raw_parts(amplitudes, 8);
        let z = |k: usize| C64::new(v[2 * k], v[2 * k + 1]);
        let a = MixedAmplitudes::new(z(0), z(1), z(2), z(3));
        *out = E2i2ProcedureRates {
            procedure1: procedure1_rate(&a),
            procedure2: procedure2_rate(&a),
            spatial_swap: spatial_swap_rate(&a),
        };
        E2i2Status::Ok
    })
}

/// Run a config file and write its outputs to `out_dir`, as `e2i2 run` does.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn e2i2_run_config(config_path: *const c_char, out_dir: *const c_char) -> E2i2Status {
    guarded(|| {
        let (config, out) = match (read_str(config_path), read_str(out_dir)) {
            (Ok(c), Ok(o)) => (c, o),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match runner::run(Path::new(config), Path::new(out), &RunOptions::default()) {
            Ok(_) => E2i2Status::Ok,
            Err(e) => config_failure(e),
        }
    })
}
