//! C ABI over the `beliefnet` engine.
//!
//! Networks and evidence sets are opaque handles created and released by
//! this library. Every fallible call returns a [`BnStatus`]; on failure the
//! message is available from [`bn_last_error`] on the same thread until
//! the next call. Strings handed out by the library are released with
//! [`bn_string_free`]. No call unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use beliefnet::canonical::parameter_counts;
use beliefnet::decision::{expected_utility, recommend, DecisionError};
use beliefnet::inference::{posterior, prob_of_evidence, InferenceError, Query};
use beliefnet::model::{Evidence, ModelError, Network};
use beliefnet::netlang::{parse_network, serialize_network};
use beliefnet::sensitivity::{
    likelihood_sensitivity, posterior_from_odds, sensitivity_range, Event, SensitivityError,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The network text did not parse or validate.
    ParseError = 3,
    /// A variable, level or alternative name is not in the network.
    UnknownName = 4,
    /// The evidence has probability zero.
    ImpossibleEvidence = 5,
    /// The output buffer is shorter than the result.
    BufferTooSmall = 6,
    /// Any other engine failure; see `bn_last_error`.
    EngineError = 7,
    /// The library caught an internal panic.
    Panic = 99,
}

/// Parsed, validated network.
pub struct BnNetwork(Network);

/// Set of `variable = level` observations.
pub struct BnEvidence(Evidence);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(BnStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(BnStatus::NullArgument, format!("`{what}` is null"))
    }
}

fn model_status(e: &ModelError) -> BnStatus {
    match e {
        ModelError::UnknownNode(_) | ModelError::UnknownLevel { .. } => BnStatus::UnknownName,
        _ => BnStatus::EngineError,
    }
}

impl From<InferenceError> for Failure {
    fn from(e: InferenceError) -> Self {
        let status = match &e {
            InferenceError::ImpossibleEvidence => BnStatus::ImpossibleEvidence,
            InferenceError::Model(m) => model_status(m),
            _ => BnStatus::EngineError,
        };
        Failure(status, e.to_string())
    }
}

impl From<DecisionError> for Failure {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::Inference(inner) => inner.into(),
            other => Failure(BnStatus::EngineError, other.to_string()),
        }
    }
}

impl From<SensitivityError> for Failure {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::Inference(inner) => inner.into(),
            SensitivityError::Decision(inner) => inner.into(),
            SensitivityError::ZeroProbabilityPivot { .. } => Failure(BnStatus::ImpossibleEvidence, e.to_string()),
            other => Failure(BnStatus::EngineError, other.to_string()),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BnStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BnStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(BnStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn network<'a>(p: *const BnNetwork) -> Result<&'a Network, Failure> {
    p.as_ref().map(|n| &n.0).ok_or_else(|| Failure::null("network"))
}

/// A null evidence handle means no observations.
unsafe fn evidence(p: *const BnEvidence) -> Evidence {
    p.as_ref().map(|e| e.0.clone()).unwrap_or_default()
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn bn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses netlang text. On success `*out` owns a new network that must be
/// released with `bn_network_free`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bn_network_parse(source: *const c_char, out: *mut *mut BnNetwork) -> BnStatus {
    guard(|| {
        let source = text(source, "source")?;
        let parsed = parse_network(source).map_err(|diags| {
            let lines: Vec<String> = diags.iter().filter(|d| d.is_error()).map(ToString::to_string).collect();
            Failure(BnStatus::ParseError, lines.join("\n"))
        })?;
        write(out, Box::into_raw(Box::new(BnNetwork(parsed.value))), "out")
    })
}

/// # Safety
/// `net` must come from `bn_network_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bn_network_free(net: *mut BnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of nodes, including decision and utility nodes; 0 for null.
///
/// # Safety
/// `net` must be null or a live network handle.
#[no_mangle]
pub unsafe extern "C" fn bn_network_node_count(net: *const BnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.len())
}

/// Canonical netlang text for the network, released with `bn_string_free`.
///
/// # Safety
/// `net` must be a live network handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bn_network_serialize(net: *const BnNetwork, out: *mut *mut c_char) -> BnStatus {
    guard(|| {
        let net = network(net)?;
        write(out, owned_string(serialize_network(net)), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn bn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of levels of `variable`, written to `*out`.
///
/// # Safety
/// Pointers must be valid; `variable` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bn_variable_cardinality(net: *const BnNetwork, variable: *const c_char, out: *mut usize) -> BnStatus {
    guard(|| {
        let net = network(net)?;
        let name = text(variable, "variable")?;
        let node = net.node(name).ok_or_else(|| Failure(BnStatus::UnknownName, format!("unknown variable `{name}`")))?;
        write(out, node.cardinality(), "out")
    })
}

/// Creates an empty evidence set, released with `bn_evidence_free`.
#[no_mangle]
pub extern "C" fn bn_evidence_new() -> *mut BnEvidence {
    Box::into_raw(Box::new(BnEvidence(Evidence::new())))
}

/// # Safety
/// `ev` must come from `bn_evidence_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bn_evidence_free(ev: *mut BnEvidence) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Observes `variable = level`, replacing any earlier observation. Names
/// are checked against the network when the evidence is used.
///
/// # Safety
/// `ev` must be a live evidence handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bn_evidence_set(ev: *mut BnEvidence, variable: *const c_char, level: *const c_char) -> BnStatus {
    guard(|| {
        let ev = ev.as_mut().ok_or_else(|| Failure::null("evidence"))?;
        ev.0.set(text(variable, "variable")?, text(level, "level")?);
        Ok(())
    })
}

/// Removes any observation of `variable`.
///
/// # Safety
/// `ev` must be a live evidence handle; `variable` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bn_evidence_clear(ev: *mut BnEvidence, variable: *const c_char) -> BnStatus {
    guard(|| {
        let ev = ev.as_mut().ok_or_else(|| Failure::null("evidence"))?;
        ev.0.remove(text(variable, "variable")?);
        Ok(())
    })
}

/// Posterior distribution of `variable` given `ev` (null for none), in
/// level order. `*written` receives the cardinality even when `len` is too
/// small, in which case `BN_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `out` must point to `len` doubles; other pointers valid or as noted.
#[no_mangle]
pub unsafe extern "C" fn bn_posterior(
    net: *const BnNetwork,
    ev: *const BnEvidence,
    variable: *const c_char,
    out: *mut c_double,
    len: usize,
    written: *mut usize,
) -> BnStatus {
    guard(|| {
        let net = network(net)?;
        let dist = posterior(net, &Query::single(text(variable, "variable")?, evidence(ev)))?;
        let probs = dist.probabilities();
        write(written, probs.len(), "written")?;
        if len < probs.len() {
            return Err(Failure(BnStatus::BufferTooSmall, format!("need room for {} values", probs.len())));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        ptr::copy_nonoverlapping(probs.as_ptr(), out, probs.len());
        Ok(())
    })
}

/// Probability of the evidence under the model.
///
/// # Safety
/// `net` and `out` must be valid; `ev` may be null.
#[no_mangle]
pub unsafe extern "C" fn bn_evidence_probability(net: *const BnNetwork, ev: *const BnEvidence, out: *mut c_double) -> BnStatus {
    guard(|| {
        let net = network(net)?;
        write(out, prob_of_evidence(net, &evidence(ev))?, "out")
    })
}

/// Expected utility of choosing `alternative` for the network's decision.
///
/// # Safety
/// `net`, `alternative` and `out` must be valid; `ev` may be null.
#[no_mangle]
pub unsafe extern "C" fn bn_expected_utility(
    net: *const BnNetwork,
    ev: *const BnEvidence,
    alternative: *const c_char,
    out: *mut c_double,
) -> BnStatus {
    guard(|| {
        let net = network(net)?;
        let alternative = text(alternative, "alternative")?;
        let decision = beliefnet::decision::decision_node(net)?;
        if decision.variable.level_index(alternative).is_none() {
            return Err(Failure(BnStatus::UnknownName, format!("`{}` has no alternative `{alternative}`", decision.name())));
        }
        let choice = Evidence::new().with(decision.name(), alternative);
        write(out, expected_utility(net, &evidence(ev), &choice)?, "out")
    })
}

/// Best alternative (released with `bn_string_free`) and its expected
/// utility. `expected_utility` may be null.
///
/// # Safety
/// `net` and `alternative` must be valid; `ev` may be null.
#[no_mangle]
pub unsafe extern "C" fn bn_recommend(
    net: *const BnNetwork,
    ev: *const BnEvidence,
    alternative: *mut *mut c_char,
    expected_utility: *mut c_double,
) -> BnStatus {
    guard(|| {
        let net = network(net)?;
        if alternative.is_null() {
            return Err(Failure::null("alternative"));
        }
        let rec = recommend(net, &evidence(ev))?;
        if !expected_utility.is_null() {
            expected_utility.write(rec.expected_utility_of(&rec.recommended).unwrap_or(f64::NAN));
        }
        alternative.write(owned_string(rec.recommended));
        Ok(())
    })
}

/// `P(target | pivot, ev) - P(target | not pivot, ev)`.
///
/// # Safety
/// All strings NUL-terminated; `net` and `out` valid; `ev` may be null.
#[no_mangle]
pub unsafe extern "C" fn bn_sensitivity_range(
    net: *const BnNetwork,
    ev: *const BnEvidence,
    target_variable: *const c_char,
    target_level: *const c_char,
    pivot_variable: *const c_char,
    pivot_level: *const c_char,
    out: *mut c_double,
) -> BnStatus {
    guard(|| {
        let net = network(net)?;
        let target = Event::new(text(target_variable, "target_variable")?, text(target_level, "target_level")?);
        let pivot = Event::new(text(pivot_variable, "pivot_variable")?, text(pivot_level, "pivot_level")?);
        write(out, sensitivity_range(net, &target, &pivot, &evidence(ev))?.value, "out")
    })
}

/// Full and canonical parameter counts of a noisy-OR/MAX node.
///
/// # Safety
/// `parent_cards` must point to `n_parents` values; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn bn_parameter_counts(
    parent_cards: *const usize,
    n_parents: usize,
    child_card: usize,
    leak: bool,
    full: *mut usize,
    canonical: *mut usize,
) -> BnStatus {
    guard(|| {
        let cards: &[usize] = match (parent_cards.is_null(), n_parents) {
            (_, 0) => &[],
            (true, _) => return Err(Failure::null("parent_cards")),
            (false, n) => std::slice::from_raw_parts(parent_cards, n),
        };
        let counts =
            parameter_counts(cards, child_card, leak).map_err(|e| Failure(BnStatus::EngineError, e.to_string()))?;
        write(full, counts.full, "full")?;
        write(canonical, counts.canonical, "canonical")
    })
}

/// Posterior probability `L * O / (L * O + 1)` from prior odds and a
/// likelihood ratio.
#[no_mangle]
pub extern "C" fn bn_posterior_from_odds(prior_odds: c_double, likelihood_ratio: c_double) -> c_double {
    posterior_from_odds(prior_odds, likelihood_ratio)
}

/// Derivative of the posterior with respect to the likelihood ratio.
#[no_mangle]
pub extern "C" fn bn_likelihood_sensitivity(prior_odds: c_double, likelihood_ratio: c_double) -> c_double {
    likelihood_sensitivity(prior_odds, likelihood_ratio)
}
