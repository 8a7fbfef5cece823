//! C ABI over the `ctk` toolkit.
//!
//! Signals, design matrices and projection results cross the boundary as
//! opaque handles created and released by this library. Every fallible call
//! returns a [`CtkStatus`]; on failure the message is available from
//! [`ctk_last_error_message`] on the same thread. Strings returned by the
//! library are released with [`ctk_string_free`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctk::energy_ops::{apply_psi, differentiate, DerivativeMethod, OperatorIndex, Sign};
use ctk::matched_filter::{snr_subchannel, NoiseCovariance};
use ctk::projection::{build_basis, solve_projection, BasisSpec, DesignMatrix, ProjectionResult};
use ctk::signal_space::{detect_l0, energy, eval_family, Family};
use ctk::{Error, Grid, SampledSignal};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    NonFinite = 4,
    GridMismatch = 5,
    OrderTooHigh = 6,
    DelayOutOfSpan = 7,
    EmptyBasis = 8,
    DimensionMismatch = 9,
    DegenerateCovariance = 10,
    Io = 11,
    Format = 12,
    Panic = 99,
}

impl From<&Error> for CtkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGrid(_) => CtkStatus::InvalidGrid,
            Error::NonFinite => CtkStatus::NonFinite,
            Error::GridMismatch => CtkStatus::GridMismatch,
            Error::OrderTooHigh { .. } => CtkStatus::OrderTooHigh,
            Error::DelayOutOfSpan { .. } => CtkStatus::DelayOutOfSpan,
            Error::EmptyBasis => CtkStatus::EmptyBasis,
            Error::DimensionMismatch { .. } | Error::StencilTooWide { .. } => CtkStatus::DimensionMismatch,
            Error::DegenerateCovariance(_) => CtkStatus::DegenerateCovariance,
            Error::Io(_) => CtkStatus::Io,
            Error::Csv(_) | Error::Json(_) => CtkStatus::Format,
            _ => CtkStatus::InvalidArgument,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtkDerivativeKind {
    FiniteDifference = 0,
    Spectral = 1,
}

/// `accuracy` (2, 4, 6 or 8) applies to finite differences only.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtkDerivativeMethod {
    pub kind: CtkDerivativeKind,
    pub accuracy: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtkSign {
    Plus = 0,
    Minus = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtkFamilyKind {
    DampedExp = 0,
    PowerExp = 1,
    Constant = 2,
}

/// `param` is `tau` for damped exponentials, the degree `d` for power
/// exponentials and the value for constants.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtkFamily {
    pub kind: CtkFamilyKind,
    pub param: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtkGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

pub struct CtkSignal(SampledSignal);
pub struct CtkDesignMatrix(DesignMatrix);
pub struct CtkProjection(ProjectionResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CtkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CtkStatus::from(&e), e.to_string())
    }
}

type Ffi<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> Ffi<()>) -> CtkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CtkStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CtkStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CtkStatus::InvalidArgument, msg.into())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Ffi<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Ffi<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Ffi<()> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Ffi<()> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = value;
    Ok(())
}

unsafe fn path<'a>(p: *const c_char) -> Ffi<&'a str> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not valid UTF-8"))
}

fn method(m: CtkDerivativeMethod) -> DerivativeMethod {
    match m.kind {
        CtkDerivativeKind::Spectral => DerivativeMethod::Spectral,
        CtkDerivativeKind::FiniteDifference => DerivativeMethod::FiniteDifference { accuracy: m.accuracy as usize },
    }
}

fn family(f: CtkFamily) -> Ffi<Family> {
    let fam = match f.kind {
        CtkFamilyKind::DampedExp => Family::DampedExp { tau: f.param },
        CtkFamilyKind::PowerExp => {
            if !(f.param >= 1.0 && f.param.fract() == 0.0 && f.param <= u32::MAX as f64) {
                return Err(invalid(format!("power-exponential degree must be a positive integer (got {})", f.param)));
            }
            Family::PowerExp { d: f.param as u32 }
        }
        CtkFamilyKind::Constant => Family::Constant { value: f.param },
    };
    fam.validate()?;
    Ok(fam)
}

fn grid(g: CtkGrid) -> Ffi<Grid> {
    Ok(Grid::new(g.t0, g.dt, g.len)?)
}

fn json_string(value: &impl serde::Serialize) -> Ffi<*mut c_char> {
    let text = serde_json::to_string(value).map_err(Error::from)?;
    Ok(CString::new(text).map_err(|_| invalid("JSON contains NUL"))?.into_raw())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ctk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a signal from `len` samples. `im` may be NULL for a real signal.
///
/// # Safety
/// `re` (and `im` when non-NULL) must point to `len` readable doubles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_signal_new(
    t0: f64,
    dt: f64,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut CtkSignal,
) -> CtkStatus {
    guard(|| {
        let re = slice(re, len, "re")?;
        let samples: Vec<Complex64> = if im.is_null() {
            re.iter().map(|&x| Complex64::new(x, 0.0)).collect()
        } else {
            let im = slice(im, len, "im")?;
            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()
        };
        put(out, CtkSignal(SampledSignal::new(t0, dt, samples)?))
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ctk_signal_free(s: *mut CtkSignal) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `s` must be NULL or a live signal handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_signal_len(s: *const CtkSignal) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `s` must be a live signal handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_signal_grid(s: *const CtkSignal, out: *mut CtkGrid) -> CtkStatus {
    guard(|| {
        let g = borrow(s, "signal")?.0.grid();
        write(out, CtkGrid { t0: g.t0, dt: g.dt, len: g.len })
    })
}

/// Copies samples into caller buffers of length `len` (must equal the
/// signal length). `im` may be NULL.
///
/// # Safety
/// `re` (and `im` when non-NULL) must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ctk_signal_samples(s: *const CtkSignal, re: *mut f64, im: *mut f64, len: usize) -> CtkStatus {
    guard(|| {
        let s = &borrow(s, "signal")?.0;
        if len != s.len() {
            return Err(Error::DimensionMismatch { expected: s.len(), got: len }.into());
        }
        if re.is_null() {
            return Err(null("re"));
        }
        for (i, z) in s.samples().iter().enumerate() {
            *re.add(i) = z.re;
            if !im.is_null() {
                *im.add(i) = z.im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_signal_read_csv(path_: *const c_char, out: *mut *mut CtkSignal) -> CtkStatus {
    guard(|| {
        let file = std::fs::File::open(path(path_)?).map_err(Error::from)?;
        put(out, CtkSignal(SampledSignal::read_csv(file)?))
    })
}

/// # Safety
/// `s` must be a live signal handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctk_signal_write_csv(s: *const CtkSignal, path_: *const c_char) -> CtkStatus {
    guard(|| {
        let s = &borrow(s, "signal")?.0;
        let file = std::fs::File::create(path(path_)?).map_err(Error::from)?;
        Ok(s.write_csv(file)?)
    })
}

/// Samples `f^n` on the grid.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_eval_family(fam: CtkFamily, n: u32, g: CtkGrid, out: *mut *mut CtkSignal) -> CtkStatus {
    guard(|| put(out, CtkSignal(eval_family(&family(fam)?, n, &grid(g)?)?)))
}

/// # Safety
/// `s` must be a live signal handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_differentiate(
    s: *const CtkSignal,
    order: usize,
    m: CtkDerivativeMethod,
    out: *mut *mut CtkSignal,
) -> CtkStatus {
    guard(|| put(out, CtkSignal(differentiate(&borrow(s, "signal")?.0, order, method(m))?)))
}

/// Applies `Ψ_k^±`.
///
/// # Safety
/// `s` must be a live signal handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_apply_psi(
    s: *const CtkSignal,
    k: usize,
    sign: CtkSign,
    m: CtkDerivativeMethod,
    out: *mut *mut CtkSignal,
) -> CtkStatus {
    guard(|| {
        let sign = match sign {
            CtkSign::Plus => Sign::Plus,
            CtkSign::Minus => Sign::Minus,
        };
        let idx = OperatorIndex::new(k, sign)?;
        put(out, CtkSignal(apply_psi(&borrow(s, "signal")?.0, idx, method(m))?))
    })
}

/// Trapezoidal energy of `|s|²`.
///
/// # Safety
/// `s` must be a live signal handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_energy(s: *const CtkSignal, out: *mut f64) -> CtkStatus {
    guard(|| write(out, energy(&borrow(s, "signal")?.0)))
}

/// # Safety
/// `l0` and `saturated` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_detect_l0(
    fam: CtkFamily,
    n: u32,
    g: CtkGrid,
    epsilon_rel: f64,
    l0: *mut usize,
    saturated: *mut bool,
) -> CtkStatus {
    guard(|| {
        let b = detect_l0(&family(fam)?, n, &grid(g)?, epsilon_rel)?;
        write(l0, b.l0)?;
        write(saturated, b.saturated)
    })
}

/// Builds the basis `∂^k f^n(t - τ)` for `k <= k_max`, each `n` in `n_set`
/// and each delay.
///
/// # Safety
/// `n_set` must point to `n_len` values, `delays` to `delay_len` values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_build_basis(
    fam: CtkFamily,
    k_max: usize,
    n_set: *const u32,
    n_len: usize,
    delays: *const f64,
    delay_len: usize,
    g: CtkGrid,
    out: *mut *mut CtkDesignMatrix,
) -> CtkStatus {
    guard(|| {
        let spec = BasisSpec {
            family: family(fam)?,
            k_max,
            n_set: slice(n_set, n_len, "n_set")?.iter().copied().collect(),
            delays: slice(delays, delay_len, "delays")?.to_vec(),
        };
        put(out, CtkDesignMatrix(build_basis(&spec, &grid(g)?)?))
    })
}

/// # Safety
/// `a` must be NULL or a live design-matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_design_matrix_free(a: *mut CtkDesignMatrix) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Column count, or 0 for NULL.
///
/// # Safety
/// `a` must be NULL or a live design-matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_design_matrix_columns(a: *const CtkDesignMatrix) -> usize {
    a.as_ref().map_or(0, |a| a.0.column_count())
}

/// Least-squares fit of `r` on the basis.
///
/// # Safety
/// `r` and `a` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_solve_projection(
    r: *const CtkSignal,
    a: *const CtkDesignMatrix,
    rank_tol: f64,
    out: *mut *mut CtkProjection,
) -> CtkStatus {
    guard(|| {
        put(out, CtkProjection(solve_projection(&borrow(r, "signal")?.0, &borrow(a, "design matrix")?.0, rank_tol)?))
    })
}

/// # Safety
/// `p` must be NULL or a live projection handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_projection_free(p: *mut CtkProjection) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live projection handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_projection_summary(
    p: *const CtkProjection,
    residual: *mut f64,
    rank: *mut usize,
) -> CtkStatus {
    guard(|| {
        let p = &borrow(p, "projection")?.0;
        write(residual, p.residual)?;
        write(rank, p.numerical_rank)
    })
}

/// Coefficient of column `(k, n, tau)`. A column that is absent or was
/// dropped yields `InvalidArgument`.
///
/// # Safety
/// `p` must be a live projection handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_projection_beta(
    p: *const CtkProjection,
    k: usize,
    n: u32,
    tau: f64,
    re: *mut f64,
    im: *mut f64,
) -> CtkStatus {
    guard(|| {
        let beta = borrow(p, "projection")?
            .0
            .beta_of(k, n, tau)
            .ok_or_else(|| invalid(format!("no retained column (k={k}, n={n}, tau={tau})")))?;
        write(re, beta.re)?;
        write(im, beta.im)
    })
}

/// Projection result as JSON; free with [`ctk_string_free`].
///
/// # Safety
/// `p` must be a live projection handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_projection_to_json(p: *const CtkProjection, out: *mut *mut c_char) -> CtkStatus {
    guard(|| write(out, json_string(&borrow(p, "projection")?.0)?))
}

/// Per-subchannel SNR under `σ² I` as a JSON report; free with
/// [`ctk_string_free`].
///
/// # Safety
/// `n_set` must point to `n_len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_snr_subchannel_json(
    fam: CtkFamily,
    n_set: *const u32,
    n_len: usize,
    g: CtkGrid,
    sigma2: f64,
    out: *mut *mut c_char,
) -> CtkStatus {
    guard(|| {
        let ns: BTreeSet<u32> = slice(n_set, n_len, "n_set")?.iter().copied().collect();
        let grid = grid(g)?;
        let cov = NoiseCovariance::diagonal(sigma2, grid.len)?;
        write(out, json_string(&snr_subchannel(&family(fam)?, &ns, &grid, &cov)?)?)
    })
}
