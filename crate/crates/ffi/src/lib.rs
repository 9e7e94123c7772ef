//! C ABI for `tdals`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`, `*_read` or
//! `*_decompose` functions and released with the matching `*_free`. Every fallible
//! function returns a [`TdalsStatus`]; on failure the message is kept per thread and
//! can be read with [`tdals_last_error`]. Arrays are column-major with the first
//! index fastest.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdals::als::{AlsOptions, Init};
use tdals::baselines::{cp_arls_lev_from, tr_als_sampled_from};
use tdals::cp::{cp_als_es_from, cp_als_from, init_cp, CpEsConfig};
use tdals::leverage::SolveOptions;
use tdals::seed::derive_seed;
use tdals::tensor::{read_dt, write_dt, TensorModel};
use tdals::tr::{init_tr, tr_als_es_from, tr_als_from, TrEsConfig};
use tdals::{CpModel, DenseTensor, Error, TrModel};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdalsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    SizeLimit = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Least-squares solve used by a decomposition.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdalsMethod {
    /// Exact ALS.
    Exact = 0,
    /// Sketched leverage-score estimation with conditional sampling.
    Es = 1,
    /// Product-distribution leverage sampling.
    Product = 2,
}

/// Settings of a decomposition run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdalsOptions {
    pub max_iters: usize,
    /// Stop when the relative error changes by less than this over a sweep.
    pub tol: f64,
    pub seed: u64,
    /// Sketch dimension, used by `Es`.
    pub j1: usize,
    /// Sampled rows per solve, used by `Es` and `Product`.
    pub j2: usize,
    /// 0: Gaussian initialization, 1: randomized range finder.
    pub init: u32,
    /// Tikhonov weight of the sampled solves.
    pub ridge: f64,
}

/// Opaque dense tensor.
pub struct TdalsTensor(DenseTensor);

/// Opaque CP model.
pub struct TdalsCpModel(CpModel);

/// Opaque tensor-ring model.
pub struct TdalsTrModel(TrModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TdalsStatus {
    if e.is_numerical() {
        return TdalsStatus::Numerical;
    }
    match e {
        Error::Context { source, .. } => status_of(source),
        Error::Config(_) | Error::InvalidMode { .. } | Error::IndexOutOfRange { .. } => {
            TdalsStatus::InvalidArgument
        }
        Error::Shape(_) => TdalsStatus::Shape,
        Error::SizeLimit(_) => TdalsStatus::SizeLimit,
        Error::Format(_) => TdalsStatus::Format,
        Error::Io(_) | Error::Csv(_) => TdalsStatus::Io,
        _ => TdalsStatus::Numerical,
    }
}

fn fail(status: TdalsStatus, msg: impl Into<String>) -> TdalsStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), TdalsStatus>) -> TdalsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TdalsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(TdalsStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TdalsStatus>;
}

impl<T> OrStatus<T> for tdals::Result<T> {
    fn or_status(self) -> Result<T, TdalsStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, TdalsStatus> {
    p.as_ref().ok_or_else(|| fail(TdalsStatus::NullPointer, "null handle"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], TdalsStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TdalsStatus::NullPointer, "null array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, TdalsStatus> {
    if p.is_null() {
        return Err(fail(TdalsStatus::NullPointer, "null path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(TdalsStatus::InvalidArgument, "path is not UTF-8"))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), TdalsStatus> {
    if out.is_null() {
        return Err(fail(TdalsStatus::NullPointer, "null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), TdalsStatus> {
    if len < src.len() {
        return Err(fail(TdalsStatus::BufferTooSmall, format!("buffer holds {len} of {} values", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(fail(TdalsStatus::NullPointer, "null buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn tdals_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tdals_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default options: 50 sweeps, tolerance 1e-6, seed 0, J₁ = J₂ = 1000, Gaussian init.
#[no_mangle]
pub extern "C" fn tdals_options_default() -> TdalsOptions {
    let a = AlsOptions::default();
    TdalsOptions { max_iters: a.max_iters, tol: a.tol, seed: a.seed, j1: 1000, j2: 1000, init: 0, ridge: 0.0 }
}

/// Tensor from `order` dims and `∏dims` values.
///
/// # Safety
/// `dims` holds `order` values, `data` holds `∏dims` values, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_tensor_new(
    order: usize,
    dims: *const usize,
    data: *const f64,
    out: *mut *mut TdalsTensor,
) -> TdalsStatus {
    guard(|| {
        let dims = slice(dims, order)?.to_vec();
        let len = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| fail(TdalsStatus::SizeLimit, "entry count overflows"))?;
        let data = slice(data, len)?.to_vec();
        let t = DenseTensor::new(dims, data).or_status()?;
        write_out(out, TdalsTensor(t))
    })
}

/// Reads a `.dt` file.
///
/// # Safety
/// `file` is a NUL-terminated path, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_tensor_read(file: *const c_char, out: *mut *mut TdalsTensor) -> TdalsStatus {
    guard(|| {
        let t = read_dt(path(file)?).or_status()?;
        write_out(out, TdalsTensor(t))
    })
}

/// Writes a `.dt` file.
///
/// # Safety
/// `t` is a live handle and `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn tdals_tensor_write(t: *const TdalsTensor, file: *const c_char) -> TdalsStatus {
    guard(|| write_dt(path(file)?, &deref(t)?.0).or_status())
}

/// # Safety
/// `t` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdals_tensor_free(t: *mut TdalsTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Order of the tensor, 0 for a null handle.
///
/// # Safety
/// `t` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdals_tensor_order(t: *const TdalsTensor) -> usize {
    t.as_ref().map_or(0, |t| t.0.order())
}

/// Copies the dims into `out`, which holds `len` values.
///
/// # Safety
/// `t` is a live handle and `out` holds `len` values.
#[no_mangle]
pub unsafe extern "C" fn tdals_tensor_dims(t: *const TdalsTensor, out: *mut usize, len: usize) -> TdalsStatus {
    guard(|| {
        let dims = deref(t)?.0.dims();
        if len < dims.len() {
            return Err(fail(TdalsStatus::BufferTooSmall, "dims buffer too small"));
        }
        if out.is_null() {
            return Err(fail(TdalsStatus::NullPointer, "null buffer"));
        }
        ptr::copy_nonoverlapping(dims.as_ptr(), out, dims.len());
        Ok(())
    })
}

/// Copies the entries into `out`, which holds `len` values.
///
/// # Safety
/// `t` is a live handle and `out` holds `len` values.
#[no_mangle]
pub unsafe extern "C" fn tdals_tensor_data(t: *const TdalsTensor, out: *mut f64, len: usize) -> TdalsStatus {
    guard(|| copy_out(deref(t)?.0.data(), out, len))
}

unsafe fn options(opts: *const TdalsOptions) -> Result<(TdalsOptions, AlsOptions), TdalsStatus> {
    let o = if opts.is_null() { tdals_options_default() } else { *opts };
    let init = match o.init {
        0 => Init::Gaussian,
        1 => Init::RangeFinder,
        v => return Err(fail(TdalsStatus::InvalidArgument, format!("unknown init {v}"))),
    };
    let als = AlsOptions::default().with_iters(o.max_iters).with_tol(o.tol).with_seed(o.seed).with_init(init);
    Ok((o, als))
}

/// CP decomposition of rank `rank`. `opts` may be null for defaults; `rel_error` may be null.
///
/// # Safety
/// `x` is a live handle, `opts` and `rel_error` are null or valid, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_cp_decompose(
    x: *const TdalsTensor,
    rank: usize,
    method: TdalsMethod,
    opts: *const TdalsOptions,
    out: *mut *mut TdalsCpModel,
    rel_error: *mut f64,
) -> TdalsStatus {
    guard(|| {
        let x = &deref(x)?.0;
        let (o, als) = options(opts)?;
        let solve = SolveOptions { ridge: o.ridge };
        let init = init_cp(x, rank, als.init, derive_seed(als.seed, &[1])).or_status()?;
        let (m, _) = match method {
            TdalsMethod::Exact => cp_als_from(x, init, &als),
            TdalsMethod::Es => {
                let mut cfg = CpEsConfig::new(o.j1, o.j2).with_als(als);
                cfg.solve = solve;
                cp_als_es_from(x, init, &cfg)
            }
            TdalsMethod::Product => cp_arls_lev_from(x, init, o.j2, &als, &solve),
        }
        .or_status()?;
        if !rel_error.is_null() {
            *rel_error = m.rel_error(x).or_status()?;
        }
        write_out(out, TdalsCpModel(m))
    })
}

/// # Safety
/// `m` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdals_cp_free(m: *mut TdalsCpModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of factors, 0 for a null handle.
///
/// # Safety
/// `m` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdals_cp_order(m: *const TdalsCpModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.order())
}

/// Rank, 0 for a null handle.
///
/// # Safety
/// `m` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdals_cp_rank(m: *const TdalsCpModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.rank())
}

/// Copies factor `j` (`I_j × R`) into `out`, which holds `len` values.
///
/// # Safety
/// `m` is a live handle and `out` holds `len` values.
#[no_mangle]
pub unsafe extern "C" fn tdals_cp_factor(m: *const TdalsCpModel, j: usize, out: *mut f64, len: usize) -> TdalsStatus {
    guard(|| {
        let m = &deref(m)?.0;
        if j >= m.order() {
            return Err(fail(TdalsStatus::InvalidArgument, format!("factor {j} of {}", m.order())));
        }
        copy_out(m.factor(j).data(), out, len)
    })
}

/// Full tensor represented by the model.
///
/// # Safety
/// `m` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_cp_reconstruct(m: *const TdalsCpModel, out: *mut *mut TdalsTensor) -> TdalsStatus {
    guard(|| write_out(out, TdalsTensor(deref(m)?.0.reconstruct())))
}

/// Tensor-ring decomposition; `ranks[c]` is the trailing rank of core `c`.
///
/// # Safety
/// `x` is a live handle, `ranks` holds `num_ranks` values, `opts` and `rel_error` are
/// null or valid, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_tr_decompose(
    x: *const TdalsTensor,
    ranks: *const usize,
    num_ranks: usize,
    method: TdalsMethod,
    opts: *const TdalsOptions,
    out: *mut *mut TdalsTrModel,
    rel_error: *mut f64,
) -> TdalsStatus {
    guard(|| {
        let x = &deref(x)?.0;
        let ranks = slice(ranks, num_ranks)?;
        let (o, als) = options(opts)?;
        let solve = SolveOptions { ridge: o.ridge };
        let init = init_tr(x, ranks, als.init, derive_seed(als.seed, &[1])).or_status()?;
        let (m, _) = match method {
            TdalsMethod::Exact => tr_als_from(x, init, &als),
            TdalsMethod::Es => {
                let mut cfg = TrEsConfig::new(o.j1, o.j2).with_als(als);
                cfg.solve = solve;
                tr_als_es_from(x, init, &cfg)
            }
            TdalsMethod::Product => tr_als_sampled_from(x, init, o.j2, &als, &solve),
        }
        .or_status()?;
        if !rel_error.is_null() {
            *rel_error = m.rel_error(x).or_status()?;
        }
        write_out(out, TdalsTrModel(m))
    })
}

/// # Safety
/// `m` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdals_tr_free(m: *mut TdalsTrModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of cores, 0 for a null handle.
///
/// # Safety
/// `m` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdals_tr_order(m: *const TdalsTrModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.order())
}

/// Writes the shape `(R_{c−1}, I_c, R_c)` of core `c` into `out[0..3]`.
///
/// # Safety
/// `m` is a live handle and `out` holds 3 values.
#[no_mangle]
pub unsafe extern "C" fn tdals_tr_core_dims(m: *const TdalsTrModel, c: usize, out: *mut usize) -> TdalsStatus {
    guard(|| {
        let m = &deref(m)?.0;
        if c >= m.order() {
            return Err(fail(TdalsStatus::InvalidArgument, format!("core {c} of {}", m.order())));
        }
        if out.is_null() {
            return Err(fail(TdalsStatus::NullPointer, "null buffer"));
        }
        ptr::copy_nonoverlapping(m.core(c).dims().as_ptr(), out, 3);
        Ok(())
    })
}

/// Copies core `c` into `out`, which holds `len` values.
///
/// # Safety
/// `m` is a live handle and `out` holds `len` values.
#[no_mangle]
pub unsafe extern "C" fn tdals_tr_core(m: *const TdalsTrModel, c: usize, out: *mut f64, len: usize) -> TdalsStatus {
    guard(|| {
        let m = &deref(m)?.0;
        if c >= m.order() {
            return Err(fail(TdalsStatus::InvalidArgument, format!("core {c} of {}", m.order())));
        }
        copy_out(m.core(c).data(), out, len)
    })
}

/// Full tensor represented by the model.
///
/// # Safety
/// `m` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_tr_reconstruct(m: *const TdalsTrModel, out: *mut *mut TdalsTensor) -> TdalsStatus {
    guard(|| write_out(out, TdalsTensor(deref(m)?.0.reconstruct())))
}

/// Relative Frobenius error of `x` against the reconstruction of a CP model.
///
/// # Safety
/// `m` and `x` are live handles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_cp_rel_error(
    m: *const TdalsCpModel,
    x: *const TdalsTensor,
    out: *mut f64,
) -> TdalsStatus {
    guard(|| {
        let e = deref(m)?.0.rel_error(&deref(x)?.0).or_status()?;
        if out.is_null() {
            return Err(fail(TdalsStatus::NullPointer, "null output pointer"));
        }
        *out = e;
        Ok(())
    })
}

/// Relative Frobenius error of `x` against the reconstruction of a TR model.
///
/// # Safety
/// `m` and `x` are live handles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tdals_tr_rel_error(
    m: *const TdalsTrModel,
    x: *const TdalsTensor,
    out: *mut f64,
) -> TdalsStatus {
    guard(|| {
        let e = deref(m)?.0.rel_error(&deref(x)?.0).or_status()?;
        if out.is_null() {
            return Err(fail(TdalsStatus::NullPointer, "null output pointer"));
        }
        *out = e;
        Ok(())
    })
}
