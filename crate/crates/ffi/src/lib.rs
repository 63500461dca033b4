//! C interface to the `spdc-metrology` toolkit.
//!
//! Every function returns an [`SpdcStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read back with
//! [`spdc_last_error_message`]. Handles are opaque and released with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use spdc_metrology::calibration::{calibrate, RateSummary};
use spdc_metrology::detector::{lossless_weights, stirling2};
use spdc_metrology::engine::{detection_probability, fourfold_distribution};
use spdc_metrology::estimation::{fisher_information, snl_fisher, TheoryFamily};
use spdc_metrology::heralding::{conditional_fisher_per_photon, HeraldSpec};
use spdc_metrology::timetag::{
    ChannelMap, CoincidenceCounter, CountResult, CounterConfig, TimetagRecord, WindowAnchor,
};
use spdc_metrology::{Arity, DetectionPattern, DetectorModel, Error, RotationSpec, SourceParams};

/// Outcome of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    UnsupportedRegime = 3,
    Fit = 4,
    Calibration = 5,
    NoSolution = 6,
    Parse = 7,
    Io = 8,
    /// The handle is in the wrong state for the call.
    State = 9,
    /// A result does not fit the output type.
    Overflow = 10,
    Panic = 11,
}

/// Number of four-fold patterns written by [`spdc_fourfold`].
pub const SPDC_FOURFOLD_PATTERNS: usize = 9;

enum Failure {
    Core(Error),
    Null(&'static str),
    State(&'static str),
    Overflow(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn status(&self) -> SpdcStatus {
        match self {
            Failure::Null(_) => SpdcStatus::NullPointer,
            Failure::State(_) => SpdcStatus::State,
            Failure::Overflow(_) => SpdcStatus::Overflow,
            Failure::Core(e) => match e {
                Error::Domain(_) => SpdcStatus::Domain,
                Error::UnsupportedRegime(_) => SpdcStatus::UnsupportedRegime,
                Error::Fit(_) => SpdcStatus::Fit,
                Error::Calibration { .. } => SpdcStatus::Calibration,
                Error::NoSolution(_) => SpdcStatus::NoSolution,
                Error::Parse { .. } => SpdcStatus::Parse,
                Error::Io(_) => SpdcStatus::Io,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Null(arg) => format!("null pointer passed as {arg}"),
            Failure::State(msg) => (*msg).to_owned(),
            Failure::Overflow(msg) => msg.clone(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SpdcStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message());
            failure.status()
        }
        Err(_) => {
            set_last_error("internal panic");
            SpdcStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(ptr: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or(Failure::Null(name))
}

unsafe fn handle<'a, T>(ptr: *const T, name: &'static str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or(Failure::Null(name))
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn spdc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spdc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn arity(d: u32) -> Arity {
    if d == 0 {
        Arity::PerfectCounting
    } else {
        Arity::Multiplexed(d)
    }
}

/// Source and detector parameters.
pub struct SpdcModel {
    src: SourceParams,
    det: DetectorModel,
}

/// Create a model. `d = 0` selects photon-number-resolving detection;
/// `eps` is the truncation tolerance on the pair-number tail.
///
/// # Safety
/// `out_model` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_model_new(
    tau: f64,
    eta_a: f64,
    eta_b: f64,
    d: u32,
    eps: f64,
    out_model: *mut *mut SpdcModel,
) -> SpdcStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let src = SourceParams::new(tau)?.with_epsilon(eps)?;
        let det = DetectorModel::for_source(arity(d), eta_a, eta_b, &src)?;
        *slot = Box::into_raw(Box::new(SpdcModel { src, det }));
        Ok(())
    })
}

/// Release a model; null is ignored.
///
/// # Safety
/// `model` must come from [`spdc_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spdc_model_free(model: *mut SpdcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Pair-number cutoff the model sums to.
///
/// # Safety
/// `model` must be a live handle and `n_max` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_model_n_max(model: *const SpdcModel, n_max: *mut u32) -> SpdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        *out(n_max, "n_max")? = m.src.n_max()?;
        Ok(())
    })
}

/// Probability of the click pattern `(a_h, a_v, b_h, b_v)` at sensing phase
/// `phi` and reference phase `theta`.
///
/// # Safety
/// `model` must be a live handle and `probability` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_detection_probability(
    model: *const SpdcModel,
    a_h: u32,
    a_v: u32,
    b_h: u32,
    b_v: u32,
    phi: f64,
    theta: f64,
    probability: *mut f64,
) -> SpdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let r = DetectionPattern::new(a_h, a_v, b_h, b_v);
        *out(probability, "probability")? =
            detection_probability(&r, RotationSpec::new(phi, theta), &m.src, &m.det)?;
        Ok(())
    })
}

/// The nine four-fold probabilities, normalized, in the order 2002, 2011,
/// 2020, 1102, 1111, 1120, 0202, 0211, 0220.
///
/// # Safety
/// `model` must be a live handle and `probabilities` must point to
/// [`SPDC_FOURFOLD_PATTERNS`] writable doubles.
#[no_mangle]
pub unsafe extern "C" fn spdc_fourfold(
    model: *const SpdcModel,
    phi: f64,
    theta: f64,
    probabilities: *mut f64,
) -> SpdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if probabilities.is_null() {
            return Err(Failure::Null("probabilities"));
        }
        let dist = fourfold_distribution(RotationSpec::new(phi, theta), &m.src, &m.det)?;
        let values = dist.probabilities();
        std::slice::from_raw_parts_mut(probabilities, SPDC_FOURFOLD_PATTERNS)
            .copy_from_slice(&values);
        Ok(())
    })
}

/// Fisher information of the normalized four-fold patterns.
///
/// # Safety
/// `model` must be a live handle and `fisher` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_fourfold_fisher(
    model: *const SpdcModel,
    phi: f64,
    theta: f64,
    fisher: *mut f64,
) -> SpdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let family = TheoryFamily::fourfold(theta, &m.src, &m.det)?;
        *out(fisher, "fisher")? = fisher_information(&family, phi).value;
        Ok(())
    })
}

/// Shot-noise Fisher information of the model's source.
///
/// # Safety
/// `model` must be a live handle and `snl` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_snl(model: *const SpdcModel, snl: *mut f64) -> SpdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        *out(snl, "snl")? = snl_fisher(&m.src)?;
        Ok(())
    })
}

/// Heralded Fisher information per photon, gated on at least `k` detected
/// reference photons, maximized over the phase; the maximizer goes to `phi`
/// when it is not null.
///
/// # Safety
/// `value` must be writable; `phi` may be null.
#[no_mangle]
pub unsafe extern "C" fn spdc_herald_cell(
    tau: f64,
    eta: f64,
    k: u32,
    value: *mut f64,
    phi: *mut f64,
) -> SpdcStatus {
    guard(|| {
        let v = out(value, "value")?;
        let cell = conditional_fisher_per_photon(&HeraldSpec::new(k, eta, tau)?, None)?;
        *v = cell.value;
        if let Some(p) = phi.as_mut() {
            *p = cell.phi;
        }
        Ok(())
    })
}

/// Parameters recovered by [`spdc_calibrate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpdcCalibration {
    pub tau: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub pair_probability: f64,
    /// Non-zero when the pair probability sits at the top of the physical branch.
    pub at_branch_limit: u8,
    /// Model minus input rates: singles a, singles b, two-fold.
    pub residuals: [f64; 3],
}

/// Recover the gain and both efficiencies from phase-averaged rates.
///
/// # Safety
/// `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_calibrate(
    singles_a: f64,
    singles_b: f64,
    twofold: f64,
    d: u32,
    result: *mut SpdcCalibration,
) -> SpdcStatus {
    guard(|| {
        let slot = out(result, "result")?;
        let rates = RateSummary {
            singles_a,
            singles_b,
            twofold,
        };
        let res = calibrate(&rates, arity(d))?;
        let mut residuals = [0.0; 3];
        residuals.copy_from_slice(&res.residuals);
        *slot = SpdcCalibration {
            tau: res.tau,
            eta_a: res.eta_a,
            eta_b: res.eta_b,
            pair_probability: res.pair_probability,
            at_branch_limit: u8::from(res.at_branch_limit),
            residuals,
        };
        Ok(())
    })
}

/// Chance that `c` photons on `d` equal detectors fire exactly `r` of them.
///
/// # Safety
/// `weight` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_lossless_weight(
    d: u32,
    r: u32,
    c: u32,
    weight: *mut f64,
) -> SpdcStatus {
    guard(|| {
        *out(weight, "weight")? = lossless_weights(d, r, c)?;
        Ok(())
    })
}

/// Stirling number of the second kind `S(c, r)`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_stirling2(c: u32, r: u32, value: *mut u64) -> SpdcStatus {
    guard(|| {
        let slot = out(value, "value")?;
        *slot = stirling2(c, r)
            .and_then(|s| u64::try_from(s).ok())
            .ok_or_else(|| Failure::Overflow(format!("S({c}, {r}) exceeds 64 bits")))?;
        Ok(())
    })
}

/// Streaming coincidence counter over the default sixteen-channel map.
pub struct SpdcCounter {
    running: Option<CoincidenceCounter>,
    result: Option<CountResult>,
}

/// Create a counter. With `first_click` non-zero each window opens at the
/// first click outside the previous one; otherwise windows follow the pulse
/// clock given by `period_ps` and `offset_ps`.
///
/// # Safety
/// `out_counter` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_counter_new(
    window_ps: u64,
    period_ps: u64,
    offset_ps: u64,
    first_click: u8,
    out_counter: *mut *mut SpdcCounter,
) -> SpdcStatus {
    guard(|| {
        let slot = out(out_counter, "out_counter")?;
        let anchor = if first_click != 0 {
            WindowAnchor::FirstClick
        } else {
            WindowAnchor::PulseClock {
                period_ps,
                offset_ps,
            }
        };
        let config = CounterConfig {
            anchor,
            window_ps,
            pulses: None,
        };
        let counter = CoincidenceCounter::new(config, ChannelMap::default())?;
        *slot = Box::into_raw(Box::new(SpdcCounter {
            running: Some(counter),
            result: None,
        }));
        Ok(())
    })
}

/// Feed one click; times must not decrease.
///
/// # Safety
/// `counter` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_counter_push(
    counter: *mut SpdcCounter,
    channel: u8,
    time_ps: u64,
) -> SpdcStatus {
    guard(|| {
        let c = out(counter, "counter")?;
        let running = c
            .running
            .as_mut()
            .ok_or(Failure::State("counter already finished"))?;
        running.push(TimetagRecord::new(channel, time_ps)?)?;
        Ok(())
    })
}

/// Close the last window. Pushing afterwards fails; counts become readable.
///
/// # Safety
/// `counter` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_counter_finish(counter: *mut SpdcCounter) -> SpdcStatus {
    guard(|| {
        let c = out(counter, "counter")?;
        let running = c
            .running
            .take()
            .ok_or(Failure::State("counter already finished"))?;
        c.result = Some(running.finish());
        Ok(())
    })
}

unsafe fn finished<'a>(counter: *const SpdcCounter) -> Result<&'a CountResult, Failure> {
    handle(counter, "counter")?
        .result
        .as_ref()
        .ok_or(Failure::State("counter not finished"))
}

/// Windows whose click pattern reduces to `(a_h, a_v, b_h, b_v)`.
///
/// # Safety
/// `counter` must be a live, finished handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_counter_pattern_count(
    counter: *const SpdcCounter,
    a_h: u32,
    a_v: u32,
    b_h: u32,
    b_v: u32,
    count: *mut u64,
) -> SpdcStatus {
    guard(|| {
        let res = finished(counter)?;
        let r = DetectionPattern::new(a_h, a_v, b_h, b_v);
        *out(count, "count")? = res.pattern_counts().get(&r).copied().unwrap_or(0);
        Ok(())
    })
}

/// Window totals of a finished counter. Any out-pointer may be null.
///
/// # Safety
/// `counter` must be a live, finished handle; non-null pointers writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_counter_totals(
    counter: *const SpdcCounter,
    windows: *mut u64,
    records: *mut u64,
    duplicates: *mut u64,
    outside: *mut u64,
) -> SpdcStatus {
    guard(|| {
        let res = finished(counter)?;
        for (ptr, v) in [
            (windows, res.windows()),
            (records, res.records),
            (duplicates, res.duplicates),
            (outside, res.outside),
        ] {
            if let Some(slot) = ptr.as_mut() {
                *slot = v;
            }
        }
        Ok(())
    })
}

/// Release a counter; null is ignored.
///
/// # Safety
/// `counter` must come from [`spdc_counter_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spdc_counter_free(counter: *mut SpdcCounter) {
    if !counter.is_null() {
        drop(Box::from_raw(counter));
    }
}
