//! C ABI over the fleetline engine.
//!
//! Conventions:
//! - Handles (`FlModel`, `FlWorld`) are opaque; create them through the
//!   `*_parse`/`*_load` constructors and release them with the matching
//!   `*_free`. A null handle is tolerated everywhere and never dereferenced.
//! - Fallible calls return [`FlStatus`]; on anything but `FL_STATUS_OK` a
//!   human-readable message is retrievable via [`fl_last_error`]. The
//!   message pointer stays valid until the next failing call on the same
//!   thread.
//! - Strings returned through out-parameters or return values are owned by
//!   the caller and must be released with [`fl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use fleetline::fleetsim::{load_world, ScenarioError, World};
use fleetline::trace::{read_trace, verify_trace};
use fleetline::variability::{
    check_selection, enumerate_configurations, parse_model, FeatureModel, Selection,
};

/// Result of a fallible API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was syntactically fine but semantically out of range.
    InvalidArgument = 3,
    /// The input failed validation (model, scenario, selection, or trace).
    Validation = 4,
    /// An environmental failure such as an unreadable referenced file.
    Runtime = 5,
}

/// An opaque, validated feature model.
pub struct FlModel(FeatureModel);

/// An opaque simulation world holding fleet, knowledge base, and engine.
pub struct FlWorld(World);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: FlStatus, message: impl Into<String>) -> FlStatus {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(message).expect("nul bytes stripped"));
    });
    status
}

/// # Safety
/// `ptr` must be null or point to a nul-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, FlStatus> {
    if ptr.is_null() {
        return Err(fail(FlStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(FlStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

fn owned_c_string(text: String) -> *mut c_char {
    CString::new(text.replace('\0', " "))
        .expect("nul bytes stripped")
        .into_raw()
}

/// Last error message for this thread, or null if the previous call
/// succeeded. Do not free; the pointer is invalidated by the next failure.
#[no_mangle]
pub extern "C" fn fl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |message| message.as_ptr())
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `text` must be a pointer previously returned by this library and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn fl_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Parses and validates a feature-model JSON document.
///
/// On success stores a new handle in `*out`; free it with [`fl_model_free`].
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_model_parse(json: *const c_char, out: *mut *mut FlModel) -> FlStatus {
    if out.is_null() {
        return fail(FlStatus::NullPointer, "`out` is null");
    }
    let json = match utf8_arg(json, "json") {
        Ok(text) => text,
        Err(status) => return status,
    };
    match parse_model(json) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(FlModel(model)));
            FlStatus::Ok
        }
        Err(e) => fail(FlStatus::Validation, e.to_string()),
    }
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or a handle from [`fl_model_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fl_model_free(model: *mut FlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of features in the model, including the root. Zero for null.
///
/// # Safety
/// `model` must be null or a live handle from [`fl_model_parse`].
#[no_mangle]
pub unsafe extern "C" fn fl_model_feature_count(model: *const FlModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.feature_count())
}

/// The model's name as a caller-owned string, or null for a null handle.
///
/// # Safety
/// `model` must be null or a live handle from [`fl_model_parse`].
#[no_mangle]
pub unsafe extern "C" fn fl_model_name(model: *const FlModel) -> *mut c_char {
    match model.as_ref() {
        Some(m) => owned_c_string(m.0.name.clone()),
        None => ptr::null_mut(),
    }
}

/// Validates a comma-separated feature selection against the model.
///
/// `*out_valid` reports the verdict. Unknown feature names are a
/// `FL_STATUS_VALIDATION` error, not a verdict.
///
/// # Safety
/// `model` must be a live handle; `features` a nul-terminated string;
/// `out_valid` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_model_check_selection(
    model: *const FlModel,
    features: *const c_char,
    out_valid: *mut bool,
) -> FlStatus {
    let Some(model) = model.as_ref() else {
        return fail(FlStatus::NullPointer, "`model` is null");
    };
    if out_valid.is_null() {
        return fail(FlStatus::NullPointer, "`out_valid` is null");
    }
    let features = match utf8_arg(features, "features") {
        Ok(text) => text,
        Err(status) => return status,
    };
    let selection = Selection::new(
        features
            .split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty()),
    );
    match check_selection(&model.0, &selection) {
        Ok(verdict) => {
            *out_valid = verdict.is_valid();
            FlStatus::Ok
        }
        Err(e) => fail(FlStatus::Validation, e.to_string()),
    }
}

/// Counts the model's valid configurations into `*out_count`.
///
/// # Safety
/// `model` must be a live handle; `out_count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_model_configuration_count(
    model: *const FlModel,
    out_count: *mut u64,
) -> FlStatus {
    let Some(model) = model.as_ref() else {
        return fail(FlStatus::NullPointer, "`model` is null");
    };
    if out_count.is_null() {
        return fail(FlStatus::NullPointer, "`out_count` is null");
    }
    match enumerate_configurations(&model.0, usize::MAX) {
        Ok(enumeration) => {
            *out_count = enumeration.total as u64;
            FlStatus::Ok
        }
        Err(e) => fail(FlStatus::Validation, e.to_string()),
    }
}

/// Loads a scenario into a fresh world.
///
/// `base_dir` resolves a relative model path inside the scenario and may be
/// null when the model is inlined. On success stores a handle in `*out`;
/// free it with [`fl_world_free`].
///
/// # Safety
/// `scenario_json` must be nul-terminated; `base_dir` null or
/// nul-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_world_load(
    scenario_json: *const c_char,
    base_dir: *const c_char,
    seed: u64,
    out: *mut *mut FlWorld,
) -> FlStatus {
    if out.is_null() {
        return fail(FlStatus::NullPointer, "`out` is null");
    }
    let scenario = match utf8_arg(scenario_json, "scenario_json") {
        Ok(text) => text,
        Err(status) => return status,
    };
    let base_dir = if base_dir.is_null() {
        None
    } else {
        match utf8_arg(base_dir, "base_dir") {
            Ok(dir) => Some(Path::new(dir)),
            Err(status) => return status,
        }
    };
    match load_world(scenario, base_dir, seed) {
        Ok(world) => {
            *out = Box::into_raw(Box::new(FlWorld(world)));
            FlStatus::Ok
        }
        Err(e @ ScenarioError::ModelFile { .. }) => fail(FlStatus::Runtime, e.to_string()),
        Err(e) => fail(FlStatus::Validation, e.to_string()),
    }
}

/// Releases a world handle. Null is a no-op.
///
/// # Safety
/// `world` must be null or a handle from [`fl_world_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fl_world_free(world: *mut FlWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Advances the world to tick `until`, which must exceed the current tick
/// count of a fresh world (zero is rejected).
///
/// When `out_trace` is non-null it receives the run's full JSONL trace as
/// a caller-owned string.
///
/// # Safety
/// `world` must be a live handle; `out_trace` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_world_run(
    world: *mut FlWorld,
    until: u64,
    out_trace: *mut *mut c_char,
) -> FlStatus {
    let Some(world) = world.as_mut() else {
        return fail(FlStatus::NullPointer, "`world` is null");
    };
    let mut sink = Vec::new();
    match world.0.run(until, &mut sink) {
        Ok(_) => {
            if !out_trace.is_null() {
                let text = String::from_utf8(sink).expect("traces are UTF-8");
                *out_trace = owned_c_string(text);
            }
            FlStatus::Ok
        }
        Err(fleetline::fleetsim::RunError::InvalidUntil) => {
            fail(FlStatus::InvalidArgument, "`until` must be positive")
        }
        Err(e) => fail(FlStatus::Runtime, e.to_string()),
    }
}

/// Number of adaptations the engine has committed so far. Zero for null.
///
/// # Safety
/// `world` must be null or a live handle from [`fl_world_load`].
#[no_mangle]
pub unsafe extern "C" fn fl_world_adaptations(world: *const FlWorld) -> u64 {
    world.as_ref().map_or(0, |w| w.0.engine().adaptations())
}

/// Effective satisfaction score from the engine's last loop step.
/// Zero for a null handle.
///
/// # Safety
/// `world` must be null or a live handle from [`fl_world_load`].
#[no_mangle]
pub unsafe extern "C" fn fl_world_last_effective(world: *const FlWorld) -> f64 {
    world.as_ref().map_or(0.0, |w| w.0.engine().last_effective())
}

/// The currently deployed selection as a caller-owned comma-separated
/// string, or null for a null handle.
///
/// # Safety
/// `world` must be null or a live handle from [`fl_world_load`].
#[no_mangle]
pub unsafe extern "C" fn fl_world_selection(world: *const FlWorld) -> *mut c_char {
    match world.as_ref() {
        Some(w) => owned_c_string(w.0.engine().current().selection.to_string()),
        None => ptr::null_mut(),
    }
}

/// Verifies a JSONL trace's ordering and causality invariants.
///
/// Returns `FL_STATUS_OK` for a clean trace, `FL_STATUS_VALIDATION` with
/// the violated rule in [`fl_last_error`] for a broken one, and
/// `FL_STATUS_RUNTIME` when the text is not parseable JSONL.
///
/// # Safety
/// `trace_jsonl` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fl_trace_verify(trace_jsonl: *const c_char) -> FlStatus {
    let text = match utf8_arg(trace_jsonl, "trace_jsonl") {
        Ok(text) => text,
        Err(status) => return status,
    };
    let events = match read_trace(text.as_bytes()) {
        Ok(events) => events,
        Err(e) => return fail(FlStatus::Runtime, e.to_string()),
    };
    match verify_trace(&events) {
        Ok(_) => FlStatus::Ok,
        Err(violation) => fail(FlStatus::Validation, violation.to_string()),
    }
}
