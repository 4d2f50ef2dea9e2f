//! C interface to lcengine.
//!
//! Models and results are opaque handles created by `lce_*` functions and released with the
//! matching `*_free`. Every function returns an [`LceStatus`]; on failure the message is
//! available from [`lce_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use lcengine::cli::Mode;
use lcengine::dynamic::{run_dynamic, DcfTable};
use lcengine::econ::{self, CashFlowSeries, EconError, ProductionSeries};
use lcengine::engine::{run_matrix, run_monte_carlo, run_static, EngineError};
use lcengine::grid::Grid;
use lcengine::io::{self, ExportError, Format, LoadError, Payload, ResultSet, RunMetadata, UnitValueTable};
use lcengine::model::{validate_model, ProcessModel};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LceStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidModel = 5,
    InvalidArgument = 6,
    Numerical = 7,
    OutOfRange = 8,
    BufferTooSmall = 9,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LceFormat {
    Csv = 0,
    Json = 1,
}

/// A loaded model with its background database and optional characterization tables.
pub struct LceModel {
    model: ProcessModel,
    db: UnitValueTable,
    dcfs: Vec<DcfTable>,
}

/// Result of a run.
pub struct LceResult {
    set: ResultSet,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (LceStatus, String);

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, recording failures and turning panics into [`LceStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LceStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LceStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_owned());
            set_error(&format!("internal error: {msg}"));
            LceStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (LceStatus::NullArgument, format!("{what} is NULL"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LceStatus::InvalidUtf8, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn load_failure(e: LoadError) -> Failure {
    let status = match &e {
        LoadError::Io { .. } => LceStatus::Io,
        LoadError::Parse { .. } | LoadError::Schema { .. } => LceStatus::Parse,
        LoadError::Invalid { .. } => LceStatus::InvalidModel,
    };
    (status, e.to_string())
}

fn engine_failure(e: EngineError) -> Failure {
    (LceStatus::InvalidModel, e.to_string())
}

fn econ_failure(e: EconError) -> Failure {
    let status = match e {
        EconError::InvalidRate(_) | EconError::LengthMismatch { .. } | EconError::NegativeProduction => {
            LceStatus::InvalidArgument
        }
        _ => LceStatus::Numerical,
    };
    (status, e.to_string())
}

/// Loads a model and background database; `dcf_path` may be NULL.
///
/// # Safety
/// Path arguments must be NUL-terminated strings or NULL. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lce_model_load(
    model_path: *const c_char,
    db_path: *const c_char,
    dcf_path: *const c_char,
    out: *mut *mut LceModel,
) -> LceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let model = io::load_model(path_arg(model_path, "model_path")?).map_err(load_failure)?;
        let db = io::load_background_db(path_arg(db_path, "db_path")?).map_err(load_failure)?;
        let dcfs = if dcf_path.is_null() {
            Vec::new()
        } else {
            io::load_dcf_tables(path_arg(dcf_path, "dcf_path")?).map_err(load_failure)?
        };
        *out = Box::into_raw(Box::new(LceModel { model, db, dcfs }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`lce_model_load`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lce_model_free(model: *mut LceModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `Ok` when the model resolves against its database; otherwise `InvalidModel` with the
/// report as the error message. Warnings alone do not fail.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lce_validate(model: *const LceModel) -> LceStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let report = validate_model(&m.model, &m.db);
        if report.is_valid() {
            Ok(())
        } else {
            Err((LceStatus::InvalidModel, report.to_string()))
        }
    })
}

fn wrap(m: &LceModel, mode: Mode, seed: Option<u64>, payload: Payload) -> Result<LceResult, Failure> {
    let set = ResultSet {
        metadata: RunMetadata {
            mode,
            model_name: m.model.name.clone(),
            grid: m.model.grid.clone(),
            seed,
            config: None,
            input_hash: None,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        },
        payload,
        economics: None,
    };
    if let Some(loc) = set.first_non_finite() {
        return Err((LceStatus::Numerical, format!("non-finite result: {loc}")));
    }
    let names = set
        .payload
        .unit()
        .categories()
        .map(|c| CString::new(c).unwrap_or_default())
        .collect();
    Ok(LceResult { set, names })
}

unsafe fn run(
    model: *const LceModel,
    out: *mut *mut LceResult,
    f: impl FnOnce(&LceModel) -> Result<LceResult, Failure>,
) -> LceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let m = handle(model, "model")?;
        *out = Box::into_raw(Box::new(f(m)?));
        Ok(())
    })
}

/// Static calculation; models that vary over the grid use the grid calculator.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_run_static(model: *const LceModel, out: *mut *mut LceResult) -> LceStatus {
    run(model, out, |m| {
        let result = match run_static(&m.model, &m.db) {
            Err(EngineError::NotStatic(_)) => run_matrix(&m.model, &m.db),
            r => r,
        }
        .map_err(engine_failure)?;
        wrap(m, Mode::Static, None, Payload::Unit { result })
    })
}

/// Full scenario by time calculation.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_run_matrix(model: *const LceModel, out: *mut *mut LceResult) -> LceStatus {
    run(model, out, |m| {
        let result = run_matrix(&m.model, &m.db).map_err(engine_failure)?;
        wrap(m, Mode::Static, None, Payload::Unit { result })
    })
}

/// Monte Carlo with one result row per run.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_run_monte_carlo(
    model: *const LceModel,
    n_runs: usize,
    seed: u64,
    out: *mut *mut LceResult,
) -> LceStatus {
    run(model, out, |m| {
        let result = run_monte_carlo(&m.model, &m.db, n_runs, seed).map_err(|e| match e {
            EngineError::InvalidRuns => (LceStatus::InvalidArgument, e.to_string()),
            e => engine_failure(e),
        })?;
        wrap(m, Mode::Montecarlo, Some(seed), Payload::MonteCarlo { result })
    })
}

/// Dynamic characterization with the tables given at load time.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_run_dynamic(model: *const LceModel, out: *mut *mut LceResult) -> LceStatus {
    run(model, out, |m| {
        let unit = run_matrix(&m.model, &m.db).map_err(engine_failure)?;
        let dynamic =
            run_dynamic(&m.model, &m.db, &m.dcfs).map_err(|e| (LceStatus::InvalidModel, e.to_string()))?;
        wrap(m, Mode::Dynamic, None, Payload::Dynamic { unit, dynamic })
    })
}

/// # Safety
/// `result` must come from an `lce_run_*` function and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lce_result_free(result: *mut LceResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Scenario rows and time-step columns of the unit results (runs for Monte Carlo).
///
/// # Safety
/// `result` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_result_shape(
    result: *const LceResult,
    rows: *mut usize,
    cols: *mut usize,
) -> LceStatus {
    guard(|| {
        let r = handle(result, "result")?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows/cols"));
        }
        let shape = r.set.payload.unit().shape;
        *rows = shape.rows;
        *cols = shape.cols;
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_result_category_count(result: *const LceResult, count: *mut usize) -> LceStatus {
    guard(|| {
        let r = handle(result, "result")?;
        if count.is_null() {
            return Err(null("count"));
        }
        *count = r.names.len();
        Ok(())
    })
}

/// Name of category `index`, valid while the result lives. NULL when out of range.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lce_result_category_name(result: *const LceResult, index: usize) -> *const c_char {
    match result.as_ref().and_then(|r| r.names.get(index)) {
        Some(name) => name.as_ptr(),
        None => std::ptr::null(),
    }
}

unsafe fn copy_grid(g: &Grid, buf: *mut f64, len: usize) -> Result<(), Failure> {
    let data = g.as_slice();
    if len < data.len() {
        return Err((
            LceStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", data.len()),
        ));
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    Ok(())
}

/// Copies the unit impact of category `index`, row-major, into `buf` of `len` values.
///
/// # Safety
/// `result` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lce_result_impact(
    result: *const LceResult,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> LceStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let unit = r.set.payload.unit();
        let g = unit
            .impacts
            .get_index(index)
            .map(|(_, g)| g)
            .ok_or_else(|| (LceStatus::OutOfRange, format!("no category {index}")))?;
        copy_grid(g, buf, len)
    })
}

/// Copies the unit cost, row-major, into `buf` of `len` values.
///
/// # Safety
/// `result` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lce_result_cost(result: *const LceResult, buf: *mut f64, len: usize) -> LceStatus {
    guard(|| {
        let r = handle(result, "result")?;
        copy_grid(&r.set.payload.unit().cost, buf, len)
    })
}

/// Output periods of a dynamic result.
///
/// # Safety
/// `result` must be a live handle; `steps` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_result_dynamic_steps(result: *const LceResult, steps: *mut usize) -> LceStatus {
    guard(|| {
        let r = handle(result, "result")?;
        if steps.is_null() {
            return Err(null("steps"));
        }
        match &r.set.payload {
            Payload::Dynamic { dynamic, .. } => {
                *steps = dynamic.t_out;
                Ok(())
            }
            _ => Err((LceStatus::InvalidArgument, "not a dynamic result".into())),
        }
    })
}

/// Copies the dynamic impact of category `index` (rows x dynamic steps) into `buf`.
///
/// # Safety
/// `result` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lce_result_dynamic_impact(
    result: *const LceResult,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> LceStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let Payload::Dynamic { dynamic, .. } = &r.set.payload else {
            return Err((LceStatus::InvalidArgument, "not a dynamic result".into()));
        };
        let g = dynamic
            .impacts
            .get_index(index)
            .map(|(_, g)| g)
            .ok_or_else(|| (LceStatus::OutOfRange, format!("no category {index}")))?;
        copy_grid(g, buf, len)
    })
}

/// Writes the result to `path`.
///
/// # Safety
/// `result` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lce_result_export(
    result: *const LceResult,
    path: *const c_char,
    format: LceFormat,
) -> LceStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let path = path_arg(path, "path")?;
        let format = match format {
            LceFormat::Csv => Format::Csv,
            LceFormat::Json => Format::Json,
        };
        io::export_results(&r.set, format, path).map_err(|e| {
            let status = match e {
                ExportError::Io { .. } => LceStatus::Io,
                ExportError::NonFinite(_) => LceStatus::Numerical,
                ExportError::Serialize(_) => LceStatus::Io,
            };
            (status, e.to_string())
        })
    })
}

/// Net present value of `n` cash flows at `rate` per period.
///
/// # Safety
/// `values` must be valid for `n` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_npv(values: *const f64, n: usize, rate: f64, out: *mut f64) -> LceStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = econ::npv(&CashFlowSeries::new(v.to_vec(), rate)).map_err(econ_failure)?;
        Ok(())
    })
}

unsafe fn levelized(
    costs: *const f64,
    production: *const f64,
    n: usize,
    rate: f64,
    out: *mut f64,
    f: fn(&CashFlowSeries, &ProductionSeries) -> Result<f64, EconError>,
) -> LceStatus {
    guard(|| {
        let c = slice(costs, n, "costs")?;
        let q = slice(production, n, "production")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f(
            &CashFlowSeries::new(c.to_vec(), rate),
            &ProductionSeries::new(q.to_vec()),
        )
        .map_err(econ_failure)?;
        Ok(())
    })
}

/// Minimum selling price for `n` periods of costs and production.
///
/// # Safety
/// `costs` and `production` must be valid for `n` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_msp(
    costs: *const f64,
    production: *const f64,
    n: usize,
    rate: f64,
    out: *mut f64,
) -> LceStatus {
    levelized(costs, production, n, rate, out, econ::minimum_selling_price)
}

/// Levelized cost of energy for `n` periods of costs and delivered energy.
///
/// # Safety
/// `costs` and `energy` must be valid for `n` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lce_lcoe(
    costs: *const f64,
    energy: *const f64,
    n: usize,
    rate: f64,
    out: *mut f64,
) -> LceStatus {
    levelized(costs, energy, n, rate, out, econ::lcoe)
}

/// Message of the last failed call on this thread; empty after a success. Valid until the
/// next call on this thread.
#[no_mangle]
pub extern "C" fn lce_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn lce_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}
