//! C ABI over the monitoring and diagnosis parts of `cgstae`.
//!
//! Every function returns a [`CgstaeStatus`]. On failure the message is kept
//! per thread and can be read with [`cgstae_last_error`]. Matrices are
//! row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cgstae::diagnosis::{optimal_subgraph, truncate_graph, variable_contribution, SearchMode};
use cgstae::monitoring::MonitorModel;
use cgstae::numerics::{kde_control_limit, sym_normalize, KdeEstimate, Matrix};
use cgstae::CgstaeError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgstaeStatus {
    Ok = 0,
    NullPointer = 1,
    Argument = 2,
    Dimension = 3,
    Numeric = 4,
    State = 5,
    Io = 6,
    Parse = 7,
    Panic = 99,
}

/// Opaque handle to a calibrated monitor model.
pub struct CgstaeMonitor {
    model: MonitorModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &CgstaeError) -> CgstaeStatus {
    match err {
        CgstaeError::Dimension(_) | CgstaeError::Layout(_) => CgstaeStatus::Dimension,
        CgstaeError::Argument(_) | CgstaeError::Config(_) => CgstaeStatus::Argument,
        CgstaeError::Numeric(_) => CgstaeStatus::Numeric,
        CgstaeError::State(_) | CgstaeError::StageOrder { .. } => CgstaeStatus::State,
        CgstaeError::Io { .. } => CgstaeStatus::Io,
        CgstaeError::Parse { .. } | CgstaeError::Serde(_) => CgstaeStatus::Parse,
    }
}

enum Failure {
    Null(&'static str),
    Lib(CgstaeError),
}

impl From<CgstaeError> for Failure {
    fn from(e: CgstaeError) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CgstaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CgstaeStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CgstaeStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            CgstaeStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(())
    }
}

/// # Safety
/// `data` must be null or point to `rows * cols` readable doubles.
unsafe fn read_matrix(
    data: *const f64,
    rows: usize,
    cols: usize,
    what: &'static str,
) -> Result<Matrix, Failure> {
    non_null(data, what)?;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| CgstaeError::Dimension(format!("{what}: size overflow")))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(Matrix::from_vec(rows, cols, slice.to_vec())?)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn cgstae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a monitor model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgstae_monitor_load(
    path: *const c_char,
    out: *mut *mut CgstaeMonitor,
) -> CgstaeStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| CgstaeError::Argument("path is not UTF-8".into()))?;
        let model = MonitorModel::load(Path::new(p))?;
        *out = Box::into_raw(Box::new(CgstaeMonitor { model }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`cgstae_monitor_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cgstae_monitor_free(m: *mut CgstaeMonitor) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of variables and window length expected by the model.
///
/// # Safety
/// `m` must be a live handle; `n` and `w` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgstae_monitor_dims(
    m: *const CgstaeMonitor,
    n: *mut usize,
    w: *mut usize,
) -> CgstaeStatus {
    guard(|| {
        non_null(m, "monitor")?;
        non_null(n, "n")?;
        non_null(w, "w")?;
        let d = (*m).model.dims;
        *n = d.n;
        *w = d.w;
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgstae_monitor_limits(
    m: *const CgstaeMonitor,
    alpha_t2: *mut f64,
    alpha_spe: *mut f64,
) -> CgstaeStatus {
    guard(|| {
        non_null(m, "monitor")?;
        non_null(alpha_t2, "alpha_t2")?;
        non_null(alpha_spe, "alpha_spe")?;
        *alpha_t2 = (*m).model.alpha_t2;
        *alpha_spe = (*m).model.alpha_spe;
        Ok(())
    })
}

/// T², SPE and the alarm flag for one `w × n` window. With `raw != 0` the
/// stored normalizer is applied first.
///
/// # Safety
/// `window` must hold `w * n` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgstae_monitor_evaluate(
    m: *const CgstaeMonitor,
    window: *const f64,
    rows: usize,
    cols: usize,
    raw: i32,
    t2: *mut f64,
    spe: *mut f64,
    alarm: *mut i32,
) -> CgstaeStatus {
    guard(|| {
        non_null(m, "monitor")?;
        non_null(t2, "t2")?;
        non_null(spe, "spe")?;
        non_null(alarm, "alarm")?;
        let x = read_matrix(window, rows, cols, "window")?;
        let model = &(*m).model;
        let ev = if raw != 0 {
            model.evaluate_raw_window(&x)?
        } else {
            model.evaluate_window(&x)?
        };
        *t2 = ev.t2;
        *spe = ev.spe;
        *alarm = i32::from(model.is_fault(ev.t2, ev.spe));
        Ok(())
    })
}

/// Upper `1 − significance` quantile of a Gaussian KDE with Silverman
/// bandwidth.
///
/// # Safety
/// `samples` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgstae_kde_limit(
    samples: *const f64,
    len: usize,
    significance: f64,
    out: *mut f64,
) -> CgstaeStatus {
    guard(|| {
        non_null(samples, "samples")?;
        non_null(out, "out")?;
        let s = std::slice::from_raw_parts(samples, len).to_vec();
        *out = kde_control_limit(&KdeEstimate::new(s, significance)?)?;
        Ok(())
    })
}

/// `D^{-1/2}(A + I)D^{-1/2}` for an `n × n` adjacency.
///
/// # Safety
/// `a` and `out` must each hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cgstae_sym_normalize(
    a: *const f64,
    n: usize,
    out: *mut f64,
) -> CgstaeStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = sym_normalize(&read_matrix(a, n, n, "a")?)?;
        ptr::copy_nonoverlapping(p.as_slice().as_ptr(), out, n * n);
        Ok(())
    })
}

/// Per-variable squared reconstruction error summed over the window.
///
/// # Safety
/// `x` and `x_hat` must hold `rows * cols` doubles; `out` holds `cols`.
#[no_mangle]
pub unsafe extern "C" fn cgstae_variable_contribution(
    x: *const f64,
    x_hat: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> CgstaeStatus {
    guard(|| {
        non_null(out, "out")?;
        let vc = variable_contribution(
            &read_matrix(x, rows, cols, "x")?,
            &read_matrix(x_hat, rows, cols, "x_hat")?,
        )?;
        ptr::copy_nonoverlapping(vc.as_ptr(), out, cols);
        Ok(())
    })
}

/// Minimal connected subgraph of the δ-truncated graph covering the fault
/// variables. `in_subgraph` and `is_source` receive one 0/1 flag per node.
/// `mode`: 0 auto, 1 exact, 2 greedy.
///
/// # Safety
/// `a` holds `n * n` doubles, `fault` holds `k` indices, `in_subgraph` and
/// `is_source` hold `n` ints each, `normal_count` is writable.
#[no_mangle]
pub unsafe extern "C" fn cgstae_optimal_subgraph(
    a: *const f64,
    n: usize,
    delta: f64,
    fault: *const usize,
    k: usize,
    mode: i32,
    in_subgraph: *mut i32,
    is_source: *mut i32,
    normal_count: *mut usize,
) -> CgstaeStatus {
    guard(|| {
        non_null(fault, "fault")?;
        non_null(in_subgraph, "in_subgraph")?;
        non_null(is_source, "is_source")?;
        non_null(normal_count, "normal_count")?;
        let mode = match mode {
            0 => SearchMode::Auto,
            1 => SearchMode::Exact,
            2 => SearchMode::Greedy,
            other => return Err(CgstaeError::Argument(format!("unknown mode {other}")).into()),
        };
        let g = truncate_graph(&read_matrix(a, n, n, "a")?, delta)?;
        let fault = std::slice::from_raw_parts(fault, k);
        let sub = optimal_subgraph(&g, fault, mode)?;
        let flags = std::slice::from_raw_parts_mut(in_subgraph, n);
        let sources = std::slice::from_raw_parts_mut(is_source, n);
        flags.fill(0);
        sources.fill(0);
        for &v in &sub.nodes {
            flags[v] = 1;
        }
        for &v in &sub.sources {
            sources[v] = 1;
        }
        *normal_count = sub.normal_count;
        Ok(())
    })
}
