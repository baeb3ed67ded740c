//! C ABI over the detection engine.
//!
//! The engine is exposed as an opaque handle created from a flat row-major
//! feature buffer. Every function returns an [`OddsStatus`] code; output
//! values go through out-pointers. A thread-local message with the detail
//! of the last failure is available via [`odds_last_error_message`].
//!
//! Gamma at this boundary is a plain double: pass `INFINITY` to disable
//! memory augmentation (it maps onto the engine's explicit never-augment
//! sentinel rather than being compared as a float).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use oddstream::bank::MemoryBank;
use oddstream::detector::{
    Augmentation, DecisionRecord, DetectorConfig, Engine, Margin, Verdict,
};
use oddstream::error::Error;
use oddstream::geometry::FeatureVector;
use oddstream::scoring::Combinator;

/// Result code of every C-ABI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OddsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    EmptyInput = 4,
    NumericError = 5,
    InternalError = 6,
}

/// Neighbor-score combinator.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OddsCombinator {
    KAvg = 0,
    KTh = 1,
    KMedian = 2,
}

/// ID/OOD verdict.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OddsVerdict {
    Id = 0,
    Ood = 1,
}

/// Memory action taken for a processed sample.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OddsAugmentation {
    None = 0,
    AsId = 1,
    AsOod = 2,
}

/// Engine parameters. `lambda` must be <= 0; `gamma` must be >= 1 or
/// `INFINITY`; `kappa` must be >= 1.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct OddsConfig {
    pub k: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub combinator: OddsCombinator,
    pub normalize: bool,
    pub adapt: bool,
}

/// One decision. `index` counts samples seen by `odds_engine_process`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct OddsDecision {
    pub index: u64,
    pub score: f64,
    pub verdict: OddsVerdict,
    pub augmentation: OddsAugmentation,
    pub bank_size_before: usize,
}

/// Opaque engine handle.
pub struct OddsEngine {
    engine: Engine,
    stream_index: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', "?");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(error: &Error) -> OddsStatus {
    match error {
        Error::EmptyVector
        | Error::EmptyInput
        | Error::EmptyBank
        | Error::EmptyNeighbors
        | Error::EmptyScores
        | Error::EmptyDataset { .. } => OddsStatus::EmptyInput,
        Error::NonFinite { .. } | Error::ZeroVector { .. } => OddsStatus::NumericError,
        Error::DimensionMismatch { .. } => OddsStatus::DimensionMismatch,
        _ => OddsStatus::InvalidArgument,
    }
}

fn fail(error: Error) -> OddsStatus {
    let status = status_for(&error);
    set_last_error(&error.to_string());
    status
}

fn guard(status: impl FnOnce() -> OddsStatus) -> OddsStatus {
    match catch_unwind(AssertUnwindSafe(status)) {
        Ok(s) => s,
        Err(_) => {
            set_last_error("internal panic");
            OddsStatus::InternalError
        }
    }
}

fn margin_from(gamma: f64) -> Result<Margin, Error> {
    if gamma.is_infinite() && gamma > 0.0 {
        Ok(Margin::Infinite)
    } else if gamma.is_finite() && gamma >= 1.0 {
        Ok(Margin::Finite(gamma))
    } else {
        Err(Error::InvalidConfig {
            reason: format!("gamma must be >= 1 or +infinity, got {gamma}"),
        })
    }
}

fn detector_config(config: &OddsConfig) -> Result<DetectorConfig, Error> {
    Ok(DetectorConfig {
        k: config.k,
        lambda: config.lambda,
        gamma: margin_from(config.gamma)?,
        kappa: config.kappa,
        combinator: match config.combinator {
            OddsCombinator::KAvg => Combinator::KAvg,
            OddsCombinator::KTh => Combinator::KTh,
            OddsCombinator::KMedian => Combinator::KMedian,
        },
        normalize: config.normalize,
        adapt: config.adapt,
    })
}

/// Collects a flat row-major buffer into vectors, validating counts.
fn collect_features(
    features: *const f64,
    count: usize,
    dim: usize,
) -> Result<Vec<FeatureVector>, Error> {
    if dim == 0 {
        return Err(Error::EmptyVector);
    }
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    let total = count.checked_mul(dim).ok_or(Error::InvalidCount {
        reason: format!("count {count} * dim {dim} overflows"),
    })?;
    let slice = unsafe { std::slice::from_raw_parts(features, total) };
    slice
        .chunks_exact(dim)
        .map(|row| FeatureVector::new(row.to_vec()))
        .collect()
}

fn decision_out(record: &DecisionRecord, index: u64) -> OddsDecision {
    OddsDecision {
        index,
        score: record.score,
        verdict: match record.verdict {
            Verdict::Id => OddsVerdict::Id,
            Verdict::Ood => OddsVerdict::Ood,
        },
        augmentation: match record.augmentation {
            Augmentation::None => OddsAugmentation::None,
            Augmentation::AsId => OddsAugmentation::AsId,
            Augmentation::AsOod => OddsAugmentation::AsOod,
        },
        bank_size_before: record.bank_size_before,
    }
}

/// Creates an engine from `count` rows of `dim` doubles. On success writes
/// the handle to `out`; free it with [`odds_engine_free`].
///
/// # Safety
/// `features` must point to `count * dim` readable doubles and `config`
/// and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn odds_engine_new(
    features: *const f64,
    count: usize,
    dim: usize,
    config: *const OddsConfig,
    out: *mut *mut OddsEngine,
) -> OddsStatus {
    guard(|| {
        if features.is_null() || config.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let config = unsafe { &*config };
        let detector = match detector_config(config) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let vectors = match collect_features(features, count, dim) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let bank = match MemoryBank::init(vectors, detector.normalize) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        match Engine::new(bank, detector) {
            Ok(engine) => {
                let handle = Box::new(OddsEngine {
                    engine,
                    stream_index: 0,
                });
                unsafe { *out = Box::into_raw(handle) };
                OddsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases an engine handle. Passing NULL is a no-op.
///
/// # Safety
/// `engine` must be a handle returned by [`odds_engine_new`] that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn odds_engine_free(engine: *mut OddsEngine) {
    if !engine.is_null() {
        drop(unsafe { Box::from_raw(engine) });
    }
}

/// Scores `count` ID validation rows against the bank and installs the
/// threshold at `tpr_target`. Writes the threshold to `lambda_out` when it
/// is non-NULL.
///
/// # Safety
/// `engine` must be a live handle; `features` must point to `count * dim`
/// doubles where `dim` is the engine's dimension.
#[no_mangle]
pub unsafe extern "C" fn odds_engine_calibrate(
    engine: *mut OddsEngine,
    features: *const f64,
    count: usize,
    tpr_target: f64,
    lambda_out: *mut f64,
) -> OddsStatus {
    guard(|| {
        if engine.is_null() || features.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let handle = unsafe { &mut *engine };
        let dim = handle.engine.bank().dim();
        let vectors = match collect_features(features, count, dim) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        match handle.engine.calibrate(&vectors, tpr_target) {
            Ok(lambda) => {
                if !lambda_out.is_null() {
                    unsafe { *lambda_out = lambda };
                }
                OddsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Read-only decision for one sample; never mutates the bank and does not
/// advance the stream index.
///
/// # Safety
/// `engine` must be a live handle; `sample` must point to `dim` doubles;
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn odds_engine_decide(
    engine: *const OddsEngine,
    sample: *const f64,
    dim: usize,
    out: *mut OddsDecision,
) -> OddsStatus {
    guard(|| {
        if engine.is_null() || sample.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let handle = unsafe { &*engine };
        let values = unsafe { std::slice::from_raw_parts(sample, dim) };
        let vector = match FeatureVector::new(values.to_vec()) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        match handle.engine.decide(&vector) {
            Ok(record) => {
                unsafe { *out = decision_out(&record, 0) };
                OddsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Streams one sample: decide, then (when adaptation is enabled) apply the
/// margin-gated augmentation, then advance the stream index.
///
/// # Safety
/// Same contract as [`odds_engine_decide`], plus exclusive access to the
/// handle (a processed sample may mutate the bank).
#[no_mangle]
pub unsafe extern "C" fn odds_engine_process(
    engine: *mut OddsEngine,
    sample: *const f64,
    dim: usize,
    out: *mut OddsDecision,
) -> OddsStatus {
    guard(|| {
        if engine.is_null() || sample.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let handle = unsafe { &mut *engine };
        let values = unsafe { std::slice::from_raw_parts(sample, dim) };
        let vector = match FeatureVector::new(values.to_vec()) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let records = match handle.engine.process_stream(std::slice::from_ref(&vector)) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let index = handle.stream_index;
        handle.stream_index += 1;
        unsafe { *out = decision_out(&records[0], index) };
        OddsStatus::Ok
    })
}

/// Scores one sample without deciding or mutating.
///
/// # Safety
/// Same pointer contract as [`odds_engine_decide`].
#[no_mangle]
pub unsafe extern "C" fn odds_engine_score(
    engine: *const OddsEngine,
    sample: *const f64,
    dim: usize,
    score_out: *mut f64,
) -> OddsStatus {
    guard(|| {
        if engine.is_null() || sample.is_null() || score_out.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let handle = unsafe { &*engine };
        let values = unsafe { std::slice::from_raw_parts(sample, dim) };
        let vector = match FeatureVector::new(values.to_vec()) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        match handle.engine.score_sample(&vector) {
            Ok(score) => {
                unsafe { *score_out = score };
                OddsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Fraction of `count` ID validation rows still accepted by the current
/// (possibly augmented) bank under the original threshold.
///
/// # Safety
/// `engine` must be a live handle; `features` must point to `count * dim`
/// doubles where `dim` is the engine's dimension.
#[no_mangle]
pub unsafe extern "C" fn odds_engine_reevaluate_id(
    engine: *const OddsEngine,
    features: *const f64,
    count: usize,
    accuracy_out: *mut f64,
) -> OddsStatus {
    guard(|| {
        if engine.is_null() || features.is_null() || accuracy_out.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let handle = unsafe { &*engine };
        let dim = handle.engine.bank().dim();
        let vectors = match collect_features(features, count, dim) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        match handle.engine.reevaluate_id(&vectors) {
            Ok(acc) => {
                unsafe { *accuracy_out = acc };
                OddsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Current bank size (initial entries plus augmentations).
///
/// # Safety
/// `engine` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn odds_engine_bank_size(
    engine: *const OddsEngine,
    out: *mut usize,
) -> OddsStatus {
    guard(|| {
        if engine.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let handle = unsafe { &*engine };
        unsafe { *out = handle.engine.bank().len() };
        OddsStatus::Ok
    })
}

/// Current decision threshold.
///
/// # Safety
/// `engine` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn odds_engine_lambda(
    engine: *const OddsEngine,
    out: *mut f64,
) -> OddsStatus {
    guard(|| {
        if engine.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return OddsStatus::NullPointer;
        }
        let handle = unsafe { &*engine };
        unsafe { *out = handle.engine.config().lambda };
        OddsStatus::Ok
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn odds_status_message(status: OddsStatus) -> *const c_char {
    let message: &'static [u8] = match status {
        OddsStatus::Ok => b"ok\0",
        OddsStatus::NullPointer => b"null pointer argument\0",
        OddsStatus::InvalidArgument => b"invalid argument\0",
        OddsStatus::DimensionMismatch => b"dimension mismatch\0",
        OddsStatus::EmptyInput => b"empty input\0",
        OddsStatus::NumericError => b"numeric error (zero or non-finite vector)\0",
        OddsStatus::InternalError => b"internal error\0",
    };
    message.as_ptr().cast()
}

/// Detail of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn odds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(rows: &[[f64; 2]]) -> Vec<f64> {
        rows.iter().flatten().copied().collect()
    }

    fn base_config() -> OddsConfig {
        OddsConfig {
            k: 1,
            lambda: -1.0,
            gamma: 1.0,
            kappa: 5.0,
            combinator: OddsCombinator::KAvg,
            normalize: false,
            adapt: true,
        }
    }

    #[test]
    fn lifecycle_and_worked_example() {
        let bank = flat(&[[1.0, 1.0], [0.0, 0.0]]);
        let mut handle: *mut OddsEngine = std::ptr::null_mut();
        let status =
            unsafe { odds_engine_new(bank.as_ptr(), 2, 2, &base_config(), &mut handle) };
        assert_eq!(status, OddsStatus::Ok);

        let sample = [2.0, 2.0];
        let mut decision = OddsDecision {
            index: 0,
            score: 0.0,
            verdict: OddsVerdict::Id,
            augmentation: OddsAugmentation::None,
            bank_size_before: 0,
        };
        let status = unsafe { odds_engine_decide(handle, sample.as_ptr(), 2, &mut decision) };
        assert_eq!(status, OddsStatus::Ok);
        assert!((decision.score - (-std::f64::consts::SQRT_2)).abs() < 1e-9);
        assert_eq!(decision.verdict, OddsVerdict::Ood);

        // Processing inserts the sample as OOD (score < lambda * gamma).
        let status = unsafe { odds_engine_process(handle, sample.as_ptr(), 2, &mut decision) };
        assert_eq!(status, OddsStatus::Ok);
        assert_eq!(
            decision.augmentation,
            OddsAugmentation::AsOod
        );
        let mut size = 0usize;
        assert_eq!(
            unsafe { odds_engine_bank_size(handle, &mut size) },
            OddsStatus::Ok
        );
        assert_eq!(size, 3);

        unsafe { odds_engine_free(handle) };
    }

    #[test]
    fn null_and_dimension_errors() {
        let mut handle: *mut OddsEngine = std::ptr::null_mut();
        let status = unsafe {
            odds_engine_new(std::ptr::null(), 2, 2, &base_config(), &mut handle)
        };
        assert_eq!(status, OddsStatus::NullPointer);

        let bank = flat(&[[1.0, 1.0], [0.0, 0.0]]);
        let status =
            unsafe { odds_engine_new(bank.as_ptr(), 2, 2, &base_config(), &mut handle) };
        assert_eq!(status, OddsStatus::Ok);
        let sample = [1.0, 2.0, 3.0];
        let mut score = 0.0;
        let status = unsafe { odds_engine_score(handle, sample.as_ptr(), 3, &mut score) };
        assert_eq!(status, OddsStatus::DimensionMismatch);
        let msg = unsafe { std::ffi::CStr::from_ptr(odds_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("dimension"));
        unsafe { odds_engine_free(handle) };
    }

    #[test]
    fn invalid_config_rejected() {
        let bank = flat(&[[1.0, 1.0], [0.0, 0.0]]);
        let mut handle: *mut OddsEngine = std::ptr::null_mut();
        let mut config = base_config();
        config.gamma = 0.5;
        let status = unsafe { odds_engine_new(bank.as_ptr(), 2, 2, &config, &mut handle) };
        assert_eq!(status, OddsStatus::InvalidArgument);
        let mut config = base_config();
        config.lambda = 1.0;
        let status = unsafe { odds_engine_new(bank.as_ptr(), 2, 2, &config, &mut handle) };
        assert_eq!(status, OddsStatus::InvalidArgument);
    }

    #[test]
    fn infinite_gamma_never_augments() {
        let bank = flat(&[[1.0, 1.0], [0.0, 0.0]]);
        let mut handle: *mut OddsEngine = std::ptr::null_mut();
        let mut config = base_config();
        config.gamma = f64::INFINITY;
        let status = unsafe { odds_engine_new(bank.as_ptr(), 2, 2, &config, &mut handle) };
        assert_eq!(status, OddsStatus::Ok);
        let sample = [9.0, 9.0];
        let mut decision = OddsDecision {
            index: 0,
            score: 0.0,
            verdict: OddsVerdict::Id,
            augmentation: OddsAugmentation::None,
            bank_size_before: 0,
        };
        for expected_index in 0..3u64 {
            let status =
                unsafe { odds_engine_process(handle, sample.as_ptr(), 2, &mut decision) };
            assert_eq!(status, OddsStatus::Ok);
            assert_eq!(decision.index, expected_index);
            assert_eq!(
                decision.augmentation,
                OddsAugmentation::None
            );
        }
        let mut size = 0usize;
        unsafe { odds_engine_bank_size(handle, &mut size) };
        assert_eq!(size, 2);
        unsafe { odds_engine_free(handle) };
    }

    #[test]
    fn calibrate_and_reevaluate() {
        let bank: Vec<f64> = (0..200)
            .map(|i| [(i % 20) as f64 * 0.1, (i / 20) as f64 * 0.1])
            .flatten()
            .collect();
        let mut handle: *mut OddsEngine = std::ptr::null_mut();
        let mut config = base_config();
        config.k = 5;
        config.adapt = false;
        let status = unsafe { odds_engine_new(bank.as_ptr(), 100, 2, &config, &mut handle) };
        assert_eq!(status, OddsStatus::Ok);

        let mut lambda = 1.0;
        let status =
            unsafe { odds_engine_calibrate(handle, bank.as_ptr(), 100, 0.95, &mut lambda) };
        assert_eq!(status, OddsStatus::Ok);
        assert!(lambda <= 0.0);
        let mut stored = 0.0;
        unsafe { odds_engine_lambda(handle, &mut stored) };
        assert_eq!(stored, lambda);

        let mut acc = 0.0;
        let status =
            unsafe { odds_engine_reevaluate_id(handle, bank.as_ptr(), 100, &mut acc) };
        assert_eq!(status, OddsStatus::Ok);
        assert!(acc >= 0.95);
        unsafe { odds_engine_free(handle) };
    }
}
