//! C ABI for `cram`.
//!
//! Matrices cross the boundary as row-major `double` arrays. Every function
//! returns a [`CramStatus`]; on failure a message is available from
//! [`cram_last_error`] on the same thread. Handles are opaque and must be
//! released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cram::linalg::soft_threshold_svd;
use cram::nalgebra::DMatrix;
use cram::{
    CramError, Dataset, ErrorFamily, FitConfig, FittedModel, Kernel, Penalty, SmootherSpec,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CramStatus {
    Ok = 0,
    NullPointer = 1,
    Input = 2,
    Contract = 3,
    Numeric = 4,
    Io = 5,
    Panic = 6,
}

pub const CRAM_KERNEL_GAUSSIAN: u32 = 0;
pub const CRAM_KERNEL_EPANECHNIKOV: u32 = 1;

/// Fitting options. `kernel` is one of the `CRAM_KERNEL_*` constants; a
/// nonpositive `bandwidth` selects the rule-of-thumb bandwidth for each
/// covariate.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CramFitOptions {
    pub kernel: u32,
    pub bandwidth: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub rank_tol: f64,
}

/// Opaque dataset handle.
pub struct CramDataset {
    inner: Dataset,
}

/// Opaque fitted-model handle.
pub struct CramModel {
    inner: FittedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &CramError) -> CramStatus {
    match e.family() {
        ErrorFamily::Input => CramStatus::Input,
        ErrorFamily::Contract => CramStatus::Contract,
        ErrorFamily::Numeric => CramStatus::Numeric,
        ErrorFamily::Io => CramStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Cram(CramError),
}

impl From<CramError> for Failure {
    fn from(e: CramError) -> Self {
        Failure::Cram(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CramStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CramStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CramStatus::NullPointer
        }
        Ok(Err(Failure::Cram(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CramStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn read_matrix(
    p: *const f64,
    rows: usize,
    cols: usize,
    what: &'static str,
) -> Result<DMatrix<f64>, Failure> {
    if rows * cols == 0 {
        return Ok(DMatrix::zeros(rows, cols));
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = std::slice::from_raw_parts(p, rows * cols);
    Ok(DMatrix::from_row_slice(rows, cols, s))
}

unsafe fn write_matrix(m: &DMatrix<f64>, out: *mut f64) {
    let (r, c) = m.shape();
    for i in 0..r {
        for j in 0..c {
            *out.add(i * c + j) = m[(i, j)];
        }
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cram_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default options: gaussian kernel, rule-of-thumb bandwidth, tol 1e-6,
/// 500 sweeps, rank tolerance 1e-6.
#[no_mangle]
pub extern "C" fn cram_fit_options_default() -> CramFitOptions {
    CramFitOptions {
        kernel: CRAM_KERNEL_GAUSSIAN,
        bandwidth: 0.0,
        tol: cram::config::DEFAULT_TOL,
        max_sweeps: cram::config::DEFAULT_MAX_SWEEPS,
        rank_tol: cram::linalg::DEFAULT_RANK_TOL,
    }
}

/// Copies `x` (n x p) and `y` (n x q) into a new raw dataset.
///
/// # Safety
/// `x` and `y` must point to `n*p` and `n*q` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cram_dataset_new(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    q: usize,
    out: *mut *mut CramDataset,
) -> CramStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let x = read_matrix(x, n, p, "x")?;
        let y = read_matrix(y, n, q, "y")?;
        put(
            out,
            CramDataset {
                inner: Dataset::new(x, y)?,
            },
        );
        Ok(())
    })
}

/// Writes a standardized copy of `data` to `out`.
///
/// # Safety
/// `data` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cram_dataset_standardize(
    data: *const CramDataset,
    out: *mut *mut CramDataset,
) -> CramStatus {
    guard(|| {
        let data = nonnull(data, "data")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        put(
            out,
            CramDataset {
                inner: cram::standardize(&data.inner)?,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cram_dataset_free(data: *mut CramDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

fn build_config(
    data: &Dataset,
    penalty: Penalty,
    opts: &CramFitOptions,
) -> Result<FitConfig, CramError> {
    let kernel = match opts.kernel {
        CRAM_KERNEL_GAUSSIAN => Kernel::Gaussian,
        CRAM_KERNEL_EPANECHNIKOV => Kernel::Epanechnikov,
        k => return Err(CramError::InvalidArgument(format!("unknown kernel id {k}"))),
    };
    let smoothers = (0..data.p())
        .map(|j| {
            let h = if opts.bandwidth > 0.0 {
                opts.bandwidth
            } else {
                SmootherSpec::default_for(&data.covariate(j))?.bandwidth
            };
            SmootherSpec::new(kernel, h)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut config = FitConfig::new(penalty, smoothers);
    config.tol = opts.tol;
    config.max_sweeps = opts.max_sweeps;
    config.rank_tol = opts.rank_tol;
    Ok(config)
}

unsafe fn fit_common(
    data: *const CramDataset,
    penalty: impl FnOnce() -> Result<Penalty, Failure>,
    options: *const CramFitOptions,
    out: *mut *mut CramModel,
) -> CramStatus {
    guard(|| {
        let data = &nonnull(data, "data")?.inner;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| cram_fit_options_default());
        let config = build_config(data, penalty()?, &opts)?;
        put(
            out,
            CramModel {
                inner: cram::fit(data, &config)?,
            },
        );
        Ok(())
    })
}

/// Fits the joint penalty with weight `lambda` on a standardized dataset.
/// `options` may be NULL for defaults.
///
/// # Safety
/// `data` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cram_fit_joint(
    data: *const CramDataset,
    lambda: f64,
    options: *const CramFitOptions,
    out: *mut *mut CramModel,
) -> CramStatus {
    fit_common(data, || Ok(Penalty::Joint { lambda }), options, out)
}

/// Fits the per-component penalty; `lambdas` holds one weight per covariate.
///
/// # Safety
/// `lambdas` must point to `p` doubles; otherwise as [`cram_fit_joint`].
#[no_mangle]
pub unsafe extern "C" fn cram_fit_per_component(
    data: *const CramDataset,
    lambdas: *const f64,
    p: usize,
    options: *const CramFitOptions,
    out: *mut *mut CramModel,
) -> CramStatus {
    fit_common(
        data,
        || {
            if p > 0 && lambdas.is_null() {
                return Err(Failure::Null("lambdas"));
            }
            let lambdas = if p == 0 {
                Vec::new()
            } else {
                std::slice::from_raw_parts(lambdas, p).to_vec()
            };
            Ok(Penalty::PerComponent { lambdas })
        },
        options,
        out,
    )
}

/// Predicts responses on the original scale for `n` raw covariate rows;
/// `out` receives `n*q` doubles.
///
/// # Safety
/// `x` must point to `n*p` doubles and `out` to room for `n*q`.
#[no_mangle]
pub unsafe extern "C" fn cram_model_predict(
    model: *const CramModel,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> CramStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.inner;
        let x = read_matrix(x, n, p, "x")?;
        let pred = model.predict_original(&x)?;
        if !pred.is_empty() && out.is_null() {
            return Err(Failure::Null("out"));
        }
        write_matrix(&pred, out);
        Ok(())
    })
}

/// # Safety
/// `model` must be live; `p` and `q` writable.
#[no_mangle]
pub unsafe extern "C" fn cram_model_dims(
    model: *const CramModel,
    p: *mut usize,
    q: *mut usize,
) -> CramStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.inner;
        if p.is_null() || q.is_null() {
            return Err(Failure::Null("p/q"));
        }
        *p = model.p();
        *q = model.q();
        Ok(())
    })
}

/// Rank of the fit: joint rank for the joint penalty, largest component
/// rank otherwise.
///
/// # Safety
/// `model` must be live; `rank` writable.
#[no_mangle]
pub unsafe extern "C" fn cram_model_rank(model: *const CramModel, rank: *mut usize) -> CramStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.inner;
        if rank.is_null() {
            return Err(Failure::Null("rank"));
        }
        *rank = model.rank();
        Ok(())
    })
}

/// Numerical rank of component `j` (0-based).
///
/// # Safety
/// `model` must be live; `rank` writable.
#[no_mangle]
pub unsafe extern "C" fn cram_model_component_rank(
    model: *const CramModel,
    j: usize,
    rank: *mut usize,
) -> CramStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.inner;
        if rank.is_null() {
            return Err(Failure::Null("rank"));
        }
        let ranks = &model.diagnostics.component_ranks;
        *rank = *ranks.get(j).ok_or_else(|| {
            CramError::InvalidArgument(format!(
                "component {j} out of range for p = {}",
                ranks.len()
            ))
        })?;
        Ok(())
    })
}

unsafe fn path_arg(path: *const c_char) -> Result<std::path::PathBuf, Failure> {
    if path.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| CramError::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(s.into())
}

/// # Safety
/// `model` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cram_model_save(
    model: *const CramModel,
    path: *const c_char,
) -> CramStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.inner;
        cram::save_model(model, &path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `path` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cram_model_load(
    path: *const c_char,
    out: *mut *mut CramModel,
) -> CramStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        put(
            out,
            CramModel {
                inner: cram::load_model(&path_arg(path)?)?,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cram_model_free(model: *mut CramModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Soft-thresholds the singular values of the n x q matrix `p` at level
/// `lambda` (normalized scale) and writes the n x q result to `out`.
///
/// # Safety
/// `p` must point to `n*q` doubles and `out` to room for `n*q`.
#[no_mangle]
pub unsafe extern "C" fn cram_soft_threshold(
    p: *const f64,
    n: usize,
    q: usize,
    lambda: f64,
    out: *mut f64,
) -> CramStatus {
    guard(|| {
        let m = read_matrix(p, n, q, "p")?;
        let r = soft_threshold_svd(&m, lambda)?;
        if !r.is_empty() && out.is_null() {
            return Err(Failure::Null("out"));
        }
        write_matrix(&r, out);
        Ok(())
    })
}
