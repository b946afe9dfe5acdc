//! C ABI over the `rulerank` core.
//!
//! Every entry point returns an [`RrStatus`]. On failure a message is stored
//! per thread and can be read with [`rr_last_error`]. Handles are opaque and
//! must be released with their matching `_free` function. Panics never cross
//! the boundary; they surface as `RR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rulerank::catalog::Rulebook;
use rulerank::config::Config;
use rulerank::harness::{build_mask, run_strategy, BenchItem, MaskPolicy};
use rulerank::proxy::evaluate;
use rulerank::scenario::{load_document, ScenarioDocument};
use rulerank::select::Strategy;
use rulerank::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Config = 5,
    UnknownRule = 6,
    DimensionMismatch = 7,
    EmptyCandidates = 8,
    MissingCandidates = 9,
    Io = 10,
    /// Any other core error; see the message.
    Failed = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RrStrategy {
    Lexicographic = 0,
    Scalarized = 1,
    WeightedSum = 2,
    ConfidenceOnly = 3,
}

impl From<RrStrategy> for Strategy {
    fn from(s: RrStrategy) -> Self {
        match s {
            RrStrategy::Lexicographic => Strategy::Lexicographic,
            RrStrategy::Scalarized => Strategy::Scalarized,
            RrStrategy::WeightedSum => Strategy::WeightedSum,
            RrStrategy::ConfidenceOnly => Strategy::ConfidenceOnly,
        }
    }
}

/// Outcome of a selection.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RrSelection {
    /// Zero-based index into the candidate set.
    pub selected: usize,
    /// True when the selected candidate still violates a safety rule.
    pub infeasible: bool,
    /// Safety, legal, road, comfort.
    pub tier_scores: [f64; 4],
}

/// Configuration and rulebook shared by calls.
pub struct RrEngine {
    config: Config,
    rulebook: Rulebook,
}

/// A parsed scenario document with its candidate set.
pub struct RrScenario {
    doc: ScenarioDocument,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse(_) => RrStatus::Parse,
            Error::Validation { .. } | Error::InsufficientFrames { .. } | Error::Geometry(_) => RrStatus::Validation,
            Error::Config(_) | Error::Weights(_) | Error::MissingApplicability { .. } => RrStatus::Config,
            Error::UnknownRule(_) => RrStatus::UnknownRule,
            Error::DimensionMismatch(_) => RrStatus::DimensionMismatch,
            Error::EmptyCandidates => RrStatus::EmptyCandidates,
            Error::Io(_) => RrStatus::Io,
            _ => RrStatus::Failed,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            RrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or null after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an engine from a JSON config string. Null selects the defaults.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_engine_new(config_json: *const c_char, out: *mut *mut RrEngine) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = if config_json.is_null() {
            Config::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|e| Failure(RrStatus::InvalidUtf8, e.to_string()))?;
            Config::from_json(text.as_bytes())?
        };
        let rulebook = config.rulebook()?;
        *out = Box::into_raw(Box::new(RrEngine { config, rulebook }));
        Ok(())
    })
}

/// # Safety
/// `engine` must be null or a handle from [`rr_engine_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_engine_free(engine: *mut RrEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Parses a scenario document carrying candidates.
///
/// # Safety
/// `json` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_scenario_load(json: *const u8, len: usize, out: *mut *mut RrScenario) -> RrStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = load_document(std::slice::from_raw_parts(json, len))?;
        if doc.candidates.is_none() {
            return Err(Failure(RrStatus::MissingCandidates, "document has no candidates".into()));
        }
        *out = Box::into_raw(Box::new(RrScenario { doc }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle from [`rr_scenario_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_scenario_free(scenario: *mut RrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_scenario_candidate_count(scenario: *const RrScenario, out: *mut usize) -> RrStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.doc.candidates.as_ref().map_or(0, |c| c.len());
        Ok(())
    })
}

fn item(s: &RrScenario) -> BenchItem {
    let candidates = s.doc.candidates.clone().expect("checked at load");
    BenchItem::new(s.doc.scenario.clone(), candidates)
}

/// Evaluates the candidates under the activation-derived mask and selects
/// one with `strategy`.
///
/// # Safety
/// `engine` and `scenario` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_select(
    engine: *const RrEngine,
    scenario: *const RrScenario,
    strategy: RrStrategy,
    out: *mut RrSelection,
) -> RrStatus {
    guard(|| {
        let e = deref(engine, "engine")?;
        let s = deref(scenario, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let item = item(s);
        let opts = e.config.eval_options();
        let mask = build_mask(&item, MaskPolicy::Activation, &e.rulebook, &opts)?;
        let eval = evaluate(&item.candidates, &item.scenario, &mask, &e.rulebook, &opts)?;
        let r = run_strategy(strategy.into(), &eval, &mask, item.candidates.confidences(), &e.config.selector())?;
        *out = RrSelection { selected: r.selected, infeasible: r.infeasible, tier_scores: r.tier_scores };
        Ok(())
    })
}

/// Full evaluation (severities, tier scores, activation trace) as JSON.
/// Release the string with [`rr_string_free`].
///
/// # Safety
/// `engine` and `scenario` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_evaluate_json(
    engine: *const RrEngine,
    scenario: *const RrScenario,
    out: *mut *mut c_char,
) -> RrStatus {
    guard(|| {
        let e = deref(engine, "engine")?;
        let s = deref(scenario, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let item = item(s);
        let opts = e.config.eval_options();
        let mask = build_mask(&item, MaskPolicy::Activation, &e.rulebook, &opts)?;
        let eval = evaluate(&item.candidates, &item.scenario, &mask, &e.rulebook, &opts)?;
        let json = serde_json::to_string(&eval).map_err(Error::from)?;
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the property suite; `all_passed` receives the verdict.
///
/// # Safety
/// `all_passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_verify(seed: u64, instances: usize, all_passed: *mut bool) -> RrStatus {
    guard(|| {
        if all_passed.is_null() {
            return Err(null("all_passed"));
        }
        *all_passed = rulerank::harness::verify(seed, instances)?.all_passed;
        Ok(())
    })
}
