//! C ABI over `bdris-est`.
//!
//! Configurations are opaque heap handles. Every fallible call returns a
//! status code (`BDRIS_OK` on success); the message of the last failure on the
//! calling thread is available from `bdris_last_error_message`. Complex
//! arrays are interleaved `re, im` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bdris_est::config::SystemConfig;
use bdris_est::error::Error;
use bdris_est::geometry::{upa_response, SpatialFrequencyPair, UpaShape};
use bdris_est::harness::{nmse, run_campaign, run_trial, CampaignSpec, Estimator, SweepAxis, TrialSeeds};
use bdris_est::linalg::{CMat, C64};
use bdris_est::selftest::run_selftest;

pub const BDRIS_OK: i32 = 0;
pub const BDRIS_ERR_CONFIG: i32 = 2;
pub const BDRIS_ERR_DIMENSION: i32 = 3;
pub const BDRIS_ERR_SINGULAR: i32 = 4;
pub const BDRIS_ERR_ZERO_COLUMN: i32 = 5;
pub const BDRIS_ERR_DEGENERATE: i32 = 6;
pub const BDRIS_ERR_BUDGET: i32 = 7;
pub const BDRIS_ERR_PARSE: i32 = 8;
pub const BDRIS_ERR_IO: i32 = 9;
pub const BDRIS_ERR_CSV: i32 = 10;
pub const BDRIS_ERR_NULL_POINTER: i32 = 20;
pub const BDRIS_ERR_INVALID_ARGUMENT: i32 = 21;
pub const BDRIS_ERR_PANIC: i32 = 22;

pub const BDRIS_ESTIMATOR_PROPOSED: u32 = 1;
pub const BDRIS_ESTIMATOR_DIRECT_OMP: u32 = 2;
pub const BDRIS_ESTIMATOR_SBL: u32 = 4;

/// Opaque system configuration.
pub struct BdrisConfig {
    inner: SystemConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(code: i32, msg: impl Into<String>) -> i32 {
    set_error(msg.into());
    code
}

fn from_error(e: Error) -> i32 {
    fail(e.code(), e.to_string())
}

/// Runs `f`, converting panics into `BDRIS_ERR_PANIC`.
fn guard(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => fail(BDRIS_ERR_PANIC, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, i32> {
    if p.is_null() {
        return Err(fail(BDRIS_ERR_NULL_POINTER, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(BDRIS_ERR_INVALID_ARGUMENT, format!("{what} is not UTF-8")))
}

fn estimators(mask: u32) -> Result<Vec<Estimator>, i32> {
    if mask == 0 || mask & !7 != 0 {
        return Err(fail(BDRIS_ERR_INVALID_ARGUMENT, format!("estimator mask {mask} is invalid")));
    }
    Ok([
        (BDRIS_ESTIMATOR_PROPOSED, Estimator::Proposed),
        (BDRIS_ESTIMATOR_DIRECT_OMP, Estimator::DirectOmp),
        (BDRIS_ESTIMATOR_SBL, Estimator::Sbl),
    ]
    .into_iter()
    .filter(|(bit, _)| mask & bit != 0)
    .map(|(_, e)| e)
    .collect())
}

fn slot(e: Estimator) -> usize {
    match e {
        Estimator::Proposed => 0,
        Estimator::DirectOmp => 1,
        Estimator::Sbl => 2,
    }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn bdris_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Full-size scenario: 8x8 BS, 6x6 RIS in four groups, five users.
#[no_mangle]
pub extern "C" fn bdris_config_full_scale() -> *mut BdrisConfig {
    Box::into_raw(Box::new(BdrisConfig { inner: SystemConfig::full_scale() }))
}

/// Small scenario: 4x4 BS, 4x4 RIS in four groups, three users.
#[no_mangle]
pub extern "C" fn bdris_config_desk() -> *mut BdrisConfig {
    Box::into_raw(Box::new(BdrisConfig { inner: SystemConfig::desk() }))
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bdris_config_from_toml(text: *const c_char, out: *mut *mut BdrisConfig) -> i32 {
    guard(|| {
        if out.is_null() {
            return fail(BDRIS_ERR_NULL_POINTER, "out is null");
        }
        let s = match str_arg(text, "text") {
            Ok(s) => s,
            Err(c) => return c,
        };
        match SystemConfig::from_toml_str(s) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(BdrisConfig { inner: c }));
                BDRIS_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bdris_config_load(path: *const c_char, out: *mut *mut BdrisConfig) -> i32 {
    guard(|| {
        if out.is_null() {
            return fail(BDRIS_ERR_NULL_POINTER, "out is null");
        }
        let p = match str_arg(path, "path") {
            Ok(s) => s,
            Err(c) => return c,
        };
        match SystemConfig::load(Path::new(p)) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(BdrisConfig { inner: c }));
                BDRIS_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a configuration; null is ignored.
///
/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdris_config_free(config: *mut BdrisConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn config_mut<'a>(config: *mut BdrisConfig) -> Result<&'a mut SystemConfig, i32> {
    config.as_mut().map(|c| &mut c.inner).ok_or_else(|| fail(BDRIS_ERR_NULL_POINTER, "config is null"))
}

unsafe fn config_ref<'a>(config: *const BdrisConfig) -> Result<&'a SystemConfig, i32> {
    config.as_ref().map(|c| &c.inner).ok_or_else(|| fail(BDRIS_ERR_NULL_POINTER, "config is null"))
}

/// Sets the SNR in dB; NaN selects noiseless observations.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdris_config_set_snr_db(config: *mut BdrisConfig, snr_db: f64) -> i32 {
    guard(|| match config_mut(config) {
        Ok(c) => {
            if snr_db.is_infinite() {
                return fail(BDRIS_ERR_INVALID_ARGUMENT, "SNR must be finite or NaN");
            }
            c.channel.snr_db = if snr_db.is_nan() { None } else { Some(snr_db) };
            BDRIS_OK
        }
        Err(code) => code,
    })
}

/// Snaps sampled angles to the estimator grids when `on_grid` is true.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdris_config_set_on_grid(config: *mut BdrisConfig, on_grid: bool) -> i32 {
    guard(|| match config_mut(config) {
        Ok(c) => {
            c.channel.on_grid = on_grid;
            BDRIS_OK
        }
        Err(code) => code,
    })
}

/// Sets the master seed.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdris_config_set_seed(config: *mut BdrisConfig, seed: u64) -> i32 {
    guard(|| match config_mut(config) {
        Ok(c) => {
            c.seed = seed;
            BDRIS_OK
        }
        Err(code) => code,
    })
}

/// Runs trial `trial` for the estimators in `mask` and writes three NMSE
/// values (proposed, direct OMP, SBL) to `nmse_out`; unselected entries are
/// NaN and a failed estimator reports 1.
///
/// # Safety
/// `config` must be a live handle and `nmse_out` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn bdris_run_trial(config: *const BdrisConfig, trial: u64, mask: u32, nmse_out: *mut f64) -> i32 {
    guard(|| {
        let c = match config_ref(config) {
            Ok(c) => c,
            Err(code) => return code,
        };
        if nmse_out.is_null() {
            return fail(BDRIS_ERR_NULL_POINTER, "nmse_out is null");
        }
        let list = match estimators(mask) {
            Ok(l) => l,
            Err(code) => return code,
        };
        match run_trial(c, &list, TrialSeeds::derive(c.seed, trial)) {
            Ok(r) => {
                let out = std::slice::from_raw_parts_mut(nmse_out, 3);
                out.fill(f64::NAN);
                for o in &r.outcomes {
                    out[slot(o.estimator)] = o.nmse;
                }
                BDRIS_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs an SNR sweep and writes the campaign CSV to `out_path`.
///
/// # Safety
/// `config` must be a live handle, `snr_db` must hold `count` doubles and
/// `out_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bdris_run_snr_campaign(
    config: *const BdrisConfig,
    snr_db: *const f64,
    count: usize,
    trials: usize,
    mask: u32,
    out_path: *const c_char,
) -> i32 {
    guard(|| {
        let c = match config_ref(config) {
            Ok(c) => c,
            Err(code) => return code,
        };
        if snr_db.is_null() || count == 0 {
            return fail(BDRIS_ERR_INVALID_ARGUMENT, "at least one SNR value is required");
        }
        let path = match str_arg(out_path, "out_path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        let list = match estimators(mask) {
            Ok(l) => l,
            Err(code) => return code,
        };
        let values = std::slice::from_raw_parts(snr_db, count).to_vec();
        let mut spec = CampaignSpec::new(c.clone(), SweepAxis::SnrDb(values), trials, list);
        spec.output = Some(path.into());
        match run_campaign(&spec) {
            Ok(_) => BDRIS_OK,
            Err(e) => from_error(e),
        }
    })
}

/// Runs the oracle suite and returns its CSV through `csv_out`; release it
/// with `bdris_string_free`. `passed` receives whether every check passed.
///
/// # Safety
/// `csv_out` and `passed` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bdris_selftest(seed: u64, csv_out: *mut *mut c_char, passed: *mut bool) -> i32 {
    guard(|| {
        if csv_out.is_null() || passed.is_null() {
            return fail(BDRIS_ERR_NULL_POINTER, "output pointer is null");
        }
        match run_selftest(seed) {
            Ok(r) => {
                *passed = r.all_passed();
                *csv_out = CString::new(r.to_csv()).unwrap_or_default().into_raw();
                BDRIS_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdris_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Writes the `horizontal·vertical` planar-array response at the given
/// spatial frequencies to `out` (interleaved complex).
///
/// # Safety
/// `out` must hold `2·horizontal·vertical` doubles.
#[no_mangle]
pub unsafe extern "C" fn bdris_upa_response(
    horizontal: usize,
    vertical: usize,
    spacing: f64,
    vertical_freq: f64,
    horizontal_freq: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return fail(BDRIS_ERR_NULL_POINTER, "out is null");
        }
        let shape = match UpaShape::new(horizontal, vertical, spacing) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let v = upa_response(&shape, SpatialFrequencyPair::new(vertical_freq, horizontal_freq));
        let dst = std::slice::from_raw_parts_mut(out, 2 * v.len());
        for (i, z) in v.iter().enumerate() {
            dst[2 * i] = z.re;
            dst[2 * i + 1] = z.im;
        }
        BDRIS_OK
    })
}

/// `‖estimate − truth‖² / ‖truth‖²` over `len` interleaved complex entries.
///
/// # Safety
/// `estimate` and `truth` must hold `2·len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bdris_nmse(estimate: *const f64, truth: *const f64, len: usize, out: *mut f64) -> i32 {
    guard(|| {
        if estimate.is_null() || truth.is_null() || out.is_null() {
            return fail(BDRIS_ERR_NULL_POINTER, "null array");
        }
        let to_mat = |p: *const f64| {
            let s = std::slice::from_raw_parts(p, 2 * len);
            CMat::from_iterator(len, 1, s.chunks_exact(2).map(|c| C64::new(c[0], c[1])))
        };
        match nmse(&[to_mat(estimate)], &[to_mat(truth)]) {
            Ok(v) => {
                *out = v;
                BDRIS_OK
            }
            Err(e) => from_error(e),
        }
    })
}
