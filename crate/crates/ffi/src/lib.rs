//! C ABI over `regionsel`.
//!
//! Every fallible call returns a [`RegionselStatus`] and writes its result
//! through an out-pointer. On failure, [`regionsel_last_error_message`] gives
//! a description for the calling thread. Handles are opaque and must be
//! released with the matching `_free` function; strings returned by the
//! library are released with [`regionsel_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use regionsel::error::Error;
use regionsel::estimators::point_estimate;
use regionsel::population::{
    generate_synthetic, load_pool_file, true_mean, RegionPool, SyntheticSpec,
};
use regionsel::samplers::{SampleDraw, Scheme};
use regionsel::subsampling::{
    generate_candidates, select_subsample, SelectionCriterion, SubsampleReport,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionselStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    Infeasible = 4,
    ConfigOutOfRange = 5,
    Degenerate = 6,
    Io = 7,
    Json = 8,
    Utf8 = 9,
    Panic = 10,
}

/// A region pool: per-region CPI under every configuration.
pub struct RegionselPool(RegionPool);

/// One sample of region indices.
pub struct RegionselDraw(SampleDraw);

/// Outcome of repeated subsampling.
pub struct RegionselReport(SubsampleReport);

/// Point estimate for one configuration. Fields that are undefined for the
/// sample (the spread of a single region) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RegionselEstimate {
    pub config: usize,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub level: f64,
    pub half_width: f64,
    pub relative_me: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RegionselStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => RegionselStatus::Parse,
            Error::InvalidInput(_) => RegionselStatus::InvalidInput,
            Error::Infeasible(_) => RegionselStatus::Infeasible,
            Error::ConfigOutOfRange { .. } => RegionselStatus::ConfigOutOfRange,
            Error::Degenerate(_) => RegionselStatus::Degenerate,
            Error::Json(_) => RegionselStatus::Json,
            _ if e.is_io() => RegionselStatus::Io,
            _ => RegionselStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(RegionselStatus::Json, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RegionselStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RegionselStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RegionselStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RegionselStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            RegionselStatus::Utf8,
            format!("`{what}` is not valid UTF-8"),
        )
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(RegionselStatus::Utf8, "string contains NUL".into()))
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn regionsel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn regionsel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV pool file (`region_id,<config labels...>` header).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_pool_load_csv(
    path: *const c_char,
    out: *mut *mut RegionselPool,
) -> RegionselStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let pool = load_pool_file(Path::new(path))?;
        put(out, Box::into_raw(Box::new(RegionselPool(pool))), "out")
    })
}

/// Builds a pool from a row-major `rows x cols` matrix of CPI values.
///
/// # Safety
/// `values` must point to `rows * cols` doubles; `app_label` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn regionsel_pool_from_values(
    app_label: *const c_char,
    values: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut RegionselPool,
) -> RegionselStatus {
    guard(|| {
        let label = if app_label.is_null() {
            "pool"
        } else {
            str_arg(app_label, "app_label")?
        };
        if values.is_null() {
            return Err(null("values"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| {
            Failure(
                RegionselStatus::InvalidInput,
                "rows * cols overflows".into(),
            )
        })?;
        let flat = std::slice::from_raw_parts(values, len);
        let matrix = flat.chunks(cols.max(1)).map(<[f64]>::to_vec).collect();
        let labels = (0..cols).map(|c| format!("config{c}")).collect();
        let pool = RegionPool::new(label, labels, matrix)?;
        put(out, Box::into_raw(Box::new(RegionselPool(pool))), "out")
    })
}

/// Generates a synthetic pool from a JSON spec.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_pool_generate(
    spec_json: *const c_char,
    seed: u64,
    out: *mut *mut RegionselPool,
) -> RegionselStatus {
    guard(|| {
        let spec: SyntheticSpec = serde_json::from_str(str_arg(spec_json, "spec_json")?)?;
        let pool = generate_synthetic(&spec, seed)?;
        put(out, Box::into_raw(Box::new(RegionselPool(pool))), "out")
    })
}

/// # Safety
/// `pool` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn regionsel_pool_free(pool: *mut RegionselPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

/// Number of regions; 0 for NULL.
///
/// # Safety
/// `pool` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regionsel_pool_region_count(pool: *const RegionselPool) -> usize {
    pool.as_ref().map_or(0, |p| p.0.region_count())
}

/// Number of configurations; 0 for NULL.
///
/// # Safety
/// `pool` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regionsel_pool_config_count(pool: *const RegionselPool) -> usize {
    pool.as_ref().map_or(0, |p| p.0.config_count())
}

/// # Safety
/// `pool` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_pool_true_mean(
    pool: *const RegionselPool,
    config: usize,
    out: *mut f64,
) -> RegionselStatus {
    guard(|| {
        let pool = ref_arg(pool, "pool")?;
        put(out, true_mean(&pool.0, config)?, "out")
    })
}

unsafe fn draw_with(
    pool: *const RegionselPool,
    scheme: Scheme,
    seed: u64,
    out: *mut *mut RegionselDraw,
) -> RegionselStatus {
    guard(|| {
        let pool = ref_arg(pool, "pool")?;
        let draw = scheme.draw(&pool.0, seed)?;
        put(out, Box::into_raw(Box::new(RegionselDraw(draw))), "out")
    })
}

/// Simple random sample of `n` distinct regions.
///
/// # Safety
/// `pool` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_draw_srs(
    pool: *const RegionselPool,
    n: usize,
    seed: u64,
    out: *mut *mut RegionselDraw,
) -> RegionselStatus {
    draw_with(pool, Scheme::Srs { n }, seed, out)
}

/// Ranked set sample: `cycles` cycles of `set_size` sets, ranked by `ranking_config`.
///
/// # Safety
/// `pool` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_draw_rss(
    pool: *const RegionselPool,
    cycles: usize,
    set_size: usize,
    ranking_config: usize,
    seed: u64,
    out: *mut *mut RegionselDraw,
) -> RegionselStatus {
    let scheme = Scheme::Rss {
        cycles,
        set_size,
        ranking_config,
    };
    draw_with(pool, scheme, seed, out)
}

/// # Safety
/// `draw` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regionsel_draw_len(draw: *const RegionselDraw) -> usize {
    draw.as_ref().map_or(0, |d| d.0.len())
}

/// Copies up to `capacity` region indices into `buf`; `written` receives the count.
///
/// # Safety
/// `buf` must have room for `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn regionsel_draw_indices(
    draw: *const RegionselDraw,
    buf: *mut usize,
    capacity: usize,
    written: *mut usize,
) -> RegionselStatus {
    guard(|| {
        let draw = ref_arg(draw, "draw")?;
        let idx = &draw.0.region_indices;
        let n = idx.len().min(capacity);
        if n > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(idx.as_ptr(), buf, n);
        }
        put(written, n, "written")
    })
}

/// JSON encoding of the draw; free with `regionsel_string_free`.
///
/// # Safety
/// `draw` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_draw_to_json(
    draw: *const RegionselDraw,
    out: *mut *mut c_char,
) -> RegionselStatus {
    guard(|| {
        let draw = ref_arg(draw, "draw")?;
        put(out, into_c_string(serde_json::to_string(&draw.0)?)?, "out")
    })
}

/// # Safety
/// `draw` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn regionsel_draw_free(draw: *mut RegionselDraw) {
    if !draw.is_null() {
        drop(Box::from_raw(draw));
    }
}

/// Mean and normal-approximation interval at `config` for a draw.
///
/// # Safety
/// `pool` and `draw` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_point_estimate(
    pool: *const RegionselPool,
    draw: *const RegionselDraw,
    config: usize,
    level: f64,
    out: *mut RegionselEstimate,
) -> RegionselStatus {
    guard(|| {
        let pool = ref_arg(pool, "pool")?;
        let draw = ref_arg(draw, "draw")?;
        let e = point_estimate(&pool.0, &draw.0, config, level)?;
        let value = RegionselEstimate {
            config: e.config,
            n: e.n,
            mean: e.mean,
            std: e.std.unwrap_or(f64::NAN),
            level: e.level,
            half_width: e.half_width.unwrap_or(f64::NAN),
            relative_me: e.relative_me.unwrap_or(f64::NAN),
        };
        put(out, value, "out")
    })
}

/// Repeated subsampling. `scheme_json` is e.g. `{"kind":"srs","n":30}`;
/// `criterion_json` is e.g. `{"criterion":"chebyshev_relative","training_configs":[0,1,2]}`.
///
/// # Safety
/// String arguments must be NUL-terminated; `pool` a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn regionsel_select_subsample(
    pool: *const RegionselPool,
    scheme_json: *const c_char,
    criterion_json: *const c_char,
    trials: usize,
    seed: u64,
    out: *mut *mut RegionselReport,
) -> RegionselStatus {
    guard(|| {
        let pool = ref_arg(pool, "pool")?;
        let scheme: Scheme = serde_json::from_str(str_arg(scheme_json, "scheme_json")?)?;
        let criterion: SelectionCriterion =
            serde_json::from_str(str_arg(criterion_json, "criterion_json")?)?;
        criterion.validate(pool.0.config_count())?;
        let set = generate_candidates(&pool.0, &scheme, trials, seed)?;
        let report = select_subsample(&pool.0, &set, &criterion)?;
        put(out, Box::into_raw(Box::new(RegionselReport(report))), "out")
    })
}

/// Index of the winning candidate; `usize::MAX` for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regionsel_report_winner_index(report: *const RegionselReport) -> usize {
    report.as_ref().map_or(usize::MAX, |r| r.0.winner_index)
}

/// JSON encoding of the report; free with `regionsel_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regionsel_report_to_json(
    report: *const RegionselReport,
    out: *mut *mut c_char,
) -> RegionselStatus {
    guard(|| {
        let report = ref_arg(report, "report")?;
        put(
            out,
            into_c_string(serde_json::to_string(&report.0)?)?,
            "out",
        )
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn regionsel_report_free(report: *mut RegionselReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
