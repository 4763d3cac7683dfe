//! C ABI over the chansem pipeline.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `*_new`/`*_open`/`*_run`-style function and released with the matching
//! `*_free`. Fallible functions return a [`ChansemStatus`]; on failure
//! [`chansem_last_error`] describes the problem. Strings returned to the
//! caller are NUL-terminated UTF-8 and must be released with
//! [`chansem_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chansem::dsp::{to_cir, to_pdp, FrequencyResponse};
use chansem::engine::{default_rules, RuleSet};
use chansem::io::{read_trace, write_trace};
use chansem::pipeline::{characterize, PipelineConfig};
use chansem::scene::{run_scene, Scene, SnapshotTrace, SoundingConfig};
use chansem::semantic::{
    read_map_from, validate_map, write_map_to, SemanticMap, SemanticQuery, SemanticStore,
    StoreError,
};
use chansem::Error;
use num_complex::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChansemStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 1,
    /// Malformed scene, trace, rules, query or configuration.
    InvalidInput = 2,
    /// A pipeline stage failed on valid input.
    PipelineError = 3,
    /// File-system failure.
    IoError = 4,
    /// Unknown record identifier.
    NotFound = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

pub struct ChansemScene(Scene);
pub struct ChansemTrace(SnapshotTrace);
pub struct ChansemMap(SemanticMap);
pub struct ChansemStore(SemanticStore);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(ChansemStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Store(StoreError::Unavailable { .. }) => {
                ChansemStatus::IoError
            }
            Error::Store(StoreError::UnknownId(_)) => ChansemStatus::NotFound,
            Error::Store(StoreError::InvalidQuery(_) | StoreError::Malformed { .. }) => {
                ChansemStatus::InvalidInput
            }
            e if e.is_input_error() => ChansemStatus::InvalidInput,
            _ => ChansemStatus::PipelineError,
        };
        Failure(status, e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Error::from(e).into()
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ChansemStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ChansemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ChansemStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ChansemStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| invalid(format!("{what} is null")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(ChansemStatus::PipelineError, "output contains NUL".into()))
}

/// Message describing the last failure on the calling thread; empty after a
/// successful call. Valid until the next chansem call on the same thread.
#[no_mangle]
pub extern "C" fn chansem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn chansem_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a scene description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_scene_from_json(
    json: *const c_char,
    out: *mut *mut ChansemScene,
) -> ChansemStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let scene = Scene::from_json(str_arg(json, "json")?).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(ChansemScene(scene)));
        Ok(())
    })
}

/// # Safety
/// `scene` must come from [`chansem_scene_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn chansem_scene_free(scene: *mut ChansemScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Synthesizes the scene's snapshot trace.
///
/// # Safety
/// `scene` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_scene_run(
    scene: *const ChansemScene,
    out: *mut *mut ChansemTrace,
) -> ChansemStatus {
    guard(|| {
        let scene = handle(scene, "scene")?;
        let out = out_ptr(out, "out")?;
        let trace = run_scene(&scene.0).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(ChansemTrace(trace)));
        Ok(())
    })
}

/// Reads a trace file (binary or JSON-lines).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_trace_read(
    path: *const c_char,
    out: *mut *mut ChansemTrace,
) -> ChansemStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let trace = read_trace(Path::new(str_arg(path, "path")?)).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(ChansemTrace(trace)));
        Ok(())
    })
}

/// Writes a trace; `.jsonl` paths get JSON-lines framing, others binary.
///
/// # Safety
/// `trace` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn chansem_trace_write(
    trace: *const ChansemTrace,
    path: *const c_char,
) -> ChansemStatus {
    guard(|| {
        let trace = handle(trace, "trace")?;
        write_trace(Path::new(str_arg(path, "path")?), &trace.0).map_err(Error::from)?;
        Ok(())
    })
}

/// Number of snapshots in a trace; 0 for null.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chansem_trace_len(trace: *const ChansemTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `trace` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn chansem_trace_free(trace: *mut ChansemTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Runs the characterization pipeline.
///
/// `config_json` (a partial pipeline configuration object) and `rules_json`
/// (a rule list) may be null for the defaults.
///
/// # Safety
/// `trace` must be a live handle; strings NUL-terminated or null; `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_characterize(
    trace: *const ChansemTrace,
    config_json: *const c_char,
    rules_json: *const c_char,
    out: *mut *mut ChansemMap,
) -> ChansemStatus {
    guard(|| {
        let trace = handle(trace, "trace")?;
        let out = out_ptr(out, "out")?;
        let config = match opt_str_arg(config_json, "config_json")? {
            Some(text) => serde_json::from_str::<PipelineConfig>(text)
                .map_err(|e| Error::Config(e.to_string()))?,
            None => PipelineConfig::default(),
        };
        let rules = match opt_str_arg(rules_json, "rules_json")? {
            Some(text) => RuleSet::from_json(text).map_err(Error::from)?,
            None => default_rules(),
        };
        let result = characterize(&trace.0, &config, &rules, None)?;
        *out = Box::into_raw(Box::new(ChansemMap(result.map)));
        Ok(())
    })
}

/// Record counts of a map. Any output pointer may be null.
///
/// # Safety
/// `map` must be a live handle; non-null outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chansem_map_counts(
    map: *const ChansemMap,
    statuses: *mut usize,
    behaviors: *mut usize,
    events: *mut usize,
) -> ChansemStatus {
    guard(|| {
        let m = &handle(map, "map")?.0;
        if let Some(p) = statuses.as_mut() {
            *p = m.statuses.len();
        }
        if let Some(p) = behaviors.as_mut() {
            *p = m.behaviors.len();
        }
        if let Some(p) = events.as_mut() {
            *p = m.events.len();
        }
        Ok(())
    })
}

/// Serializes a map as JSON lines. Free the result with
/// [`chansem_string_free`].
///
/// # Safety
/// `map` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_map_to_jsonl(
    map: *const ChansemMap,
    out: *mut *mut c_char,
) -> ChansemStatus {
    guard(|| {
        let m = handle(map, "map")?;
        let out = out_ptr(out, "out")?;
        let mut buf = Vec::new();
        write_map_to(&m.0, &mut buf).map_err(|e| Error::io("serializing map", e))?;
        let text = String::from_utf8(buf).expect("JSON is UTF-8");
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Parses a JSON-lines map export.
///
/// # Safety
/// `jsonl` must be NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_map_from_jsonl(
    jsonl: *const c_char,
    out: *mut *mut ChansemMap,
) -> ChansemStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let map = read_map_from(str_arg(jsonl, "jsonl")?.as_bytes())?;
        *out = Box::into_raw(Box::new(ChansemMap(map)));
        Ok(())
    })
}

/// Counts model-invariant violations of a map (0 = valid).
///
/// # Safety
/// `map` must be a live handle; `violations` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_map_validate(
    map: *const ChansemMap,
    violations: *mut usize,
) -> ChansemStatus {
    guard(|| {
        let m = handle(map, "map")?;
        let out = out_ptr(violations, "violations")?;
        *out = validate_map(&m.0).len();
        Ok(())
    })
}

/// # Safety
/// `map` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn chansem_map_free(map: *mut ChansemMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Opens (creating if absent) a persistent semantic store.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chansem_store_open(
    path: *const c_char,
    out: *mut *mut ChansemStore,
) -> ChansemStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let store = SemanticStore::open(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(ChansemStore(store)));
        Ok(())
    })
}

/// Validates and persists a map. Storing the same map again is a no-op.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn chansem_store_put(
    store: *mut ChansemStore,
    map: *const ChansemMap,
) -> ChansemStatus {
    guard(|| {
        let m = handle(map, "map")?;
        let s = out_ptr(store, "store")?;
        s.0.store(&m.0)?;
        Ok(())
    })
}

/// Evaluates a query given as JSON (e.g. `{"kind":"approach"}` or
/// `{"and":[{"label":"trees"},{"record_type":"status"}]}`) and returns the
/// matching records as JSON lines.
///
/// # Safety
/// `store` must be a live handle; `query_json` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn chansem_store_query(
    store: *const ChansemStore,
    query_json: *const c_char,
    out: *mut *mut c_char,
) -> ChansemStatus {
    guard(|| {
        let s = handle(store, "store")?;
        let out = out_ptr(out, "out")?;
        let q: SemanticQuery = serde_json::from_str(str_arg(query_json, "query_json")?)
            .map_err(|e| Failure(ChansemStatus::InvalidInput, format!("query: {e}")))?;
        let mut text = String::new();
        for r in s.0.query(&q)? {
            text.push_str(&serde_json::to_string(&r).expect("records serialize"));
            text.push('\n');
        }
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// # Safety
/// `store` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn chansem_store_free(store: *mut ChansemStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Power delay profile of one multi-tone response: unitary inverse DFT,
/// then squared magnitude per bin.
///
/// `samples` holds `n` interleaved (re, im) pairs; `pdp_out` receives `n`
/// values.
///
/// # Safety
/// `samples` must be readable for `2n` doubles and `pdp_out` writable for
/// `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn chansem_pdp_from_response(
    samples: *const f64,
    n: usize,
    pdp_out: *mut f64,
) -> ChansemStatus {
    guard(|| {
        if samples.is_null() || pdp_out.is_null() {
            return Err(invalid("null buffer"));
        }
        let raw = std::slice::from_raw_parts(samples, 2 * n);
        let fr = FrequencyResponse {
            snapshot_time: 0.0,
            samples: raw
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        };
        let sounding = SoundingConfig {
            n_tones: n,
            ..SoundingConfig::default()
        };
        let pdp = to_pdp(&to_cir(&fr, &sounding).map_err(Error::from)?);
        ptr::copy_nonoverlapping(pdp.bins.as_ptr(), pdp_out, n);
        Ok(())
    })
}
