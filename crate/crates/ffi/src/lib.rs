//! C ABI over `mimo_pjadmm`.
//!
//! Every entry point returns an [`MpjStatus`] code and never unwinds into the
//! caller. On failure a human-readable message is kept per thread and can be
//! fetched with [`mpj_last_error_message`]. Models are opaque handles created
//! by `mpj_model_new_*` and released with [`mpj_model_free`].
//!
//! Detection outputs use the stacked real layout: entry `k` is user `k`'s
//! in-phase part and entry `nt + k` its quadrature part, `2 * nt` in total.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mimo_pjadmm::nalgebra::{DMatrix, DVector};
use mimo_pjadmm::num_complex::Complex64;
use mimo_pjadmm::{
    complex_to_real, detect, mmse_detect, noise_variance_from_snr, time_units, ClampMode, ComplexSystemModel,
    Constellation, DetectionResult, Error, PjadmmConfig, RealSystemModel,
};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpjStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    Framing = 3,
    Parameter = 4,
    DegenerateColumn = 5,
    Singular = 6,
    Parse = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque detection instance: real-valued channel, received vector, noise
/// variance and constellation.
pub struct MpjModel {
    real: RealSystemModel,
    constellation: Constellation,
}

/// PJADMM parameters. Obtain defaults from [`mpj_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MpjConfig {
    pub rho: f64,
    pub tau: f64,
    /// Stop once |V(t) - V(t-1)| falls below this value.
    pub tolerance: f64,
    /// Iteration budget T, at least 1.
    pub max_iters: u32,
    /// Nonzero projects each x-block onto the constellation box.
    pub clamp_box: c_int,
}

/// Run summary filled in by the detection functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MpjDetectionInfo {
    pub iterations_used: u32,
    /// 1 when the tolerance test stopped the run.
    pub converged: c_int,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MpjStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension(_) => MpjStatus::Dimension,
            Error::Framing { .. } => MpjStatus::Framing,
            Error::Parameter { .. } => MpjStatus::Parameter,
            Error::DegenerateColumn { .. } => MpjStatus::DegenerateColumn,
            Error::Singular => MpjStatus::Singular,
            Error::Parse { .. } => MpjStatus::Parse,
            Error::Io(_) => MpjStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MpjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MpjStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            MpjStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MpjStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn dims(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| Failure(MpjStatus::Dimension, "dimensions overflow".into()))
}

fn store(out: *mut *mut MpjModel, model: MpjModel) {
    // SAFETY: checked non-null by the caller of this helper.
    unsafe { *out = Box::into_raw(Box::new(model)) };
}

/// Builds a model from complex data.
///
/// `h` holds `nr * nt` complex entries row-major with real and imaginary
/// parts interleaved (`2 * nr * nt` doubles); `y` holds `nr` interleaved
/// complex entries. `noise_var` is the complex noise variance σ_v².
/// `qam_order` is a square QAM order (4 for QPSK).
///
/// # Safety
/// `h`, `y` must point to the stated number of doubles; `out` must be valid
/// for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn mpj_model_new_complex(
    nr: usize,
    nt: usize,
    h: *const f64,
    y: *const f64,
    noise_var: f64,
    qam_order: u32,
    out: *mut *mut MpjModel,
) -> MpjStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h = slice(h, dims(nr, nt)?, "h")?;
        let y = slice(y, dims(nr, 1)?, "y")?;
        let constellation = Constellation::new(qam_order as usize)?;
        let channel = DMatrix::from_fn(nr, nt, |r, c| {
            let k = 2 * (r * nt + c);
            Complex64::new(h[k], h[k + 1])
        });
        let received = DVector::from_fn(nr, |k, _| Complex64::new(y[2 * k], y[2 * k + 1]));
        let real = complex_to_real(&ComplexSystemModel::observed(channel, received, noise_var)?)?;
        store(out, MpjModel { real, constellation });
        Ok(())
    })
}

/// Builds a model from real-valued data: `h` is `rows x cols` row-major,
/// `y` has `rows` entries, `noise_var` is per real dimension. `rows` and
/// `cols` are normally `2 * nr` and `2 * nt`.
///
/// # Safety
/// As for [`mpj_model_new_complex`].
#[no_mangle]
pub unsafe extern "C" fn mpj_model_new_real(
    rows: usize,
    cols: usize,
    h: *const f64,
    y: *const f64,
    noise_var: f64,
    qam_order: u32,
    out: *mut *mut MpjModel,
) -> MpjStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h = slice(h, dims(rows, cols)? / 2, "h")?;
        let y = slice(y, rows, "y")?;
        let constellation = Constellation::new(qam_order as usize)?;
        let real = RealSystemModel::new(
            DMatrix::from_row_slice(rows, cols, h),
            DVector::from_column_slice(y),
            noise_var,
        )?;
        store(out, MpjModel { real, constellation });
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `mpj_model_new_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mpj_model_free(model: *mut MpjModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Number of real unknowns (`2 * nt`), the length detection buffers need.
/// Returns 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpj_model_unknowns(model: *const MpjModel) -> usize {
    model.as_ref().map_or(0, |m| m.real.blocks())
}

/// Default parameters for an `nr x nt` complex system, with budget 50.
#[no_mangle]
pub extern "C" fn mpj_config_default(nr: usize, nt: usize) -> MpjConfig {
    let c = PjadmmConfig::for_shape(nr.max(1), nt.max(1));
    MpjConfig {
        rho: c.rho,
        tau: c.tau,
        tolerance: c.tolerance,
        max_iters: c.max_iters as u32,
        clamp_box: 0,
    }
}

unsafe fn write_result(
    r: &DetectionResult,
    x_soft: *mut f64,
    x_hard: *mut f64,
    len: usize,
    info: *mut MpjDetectionInfo,
) -> Result<(), Failure> {
    if len < r.x_soft.len() {
        return Err(Failure(
            MpjStatus::BufferTooSmall,
            format!("buffers hold {len} values, {} needed", r.x_soft.len()),
        ));
    }
    if !x_soft.is_null() {
        std::slice::from_raw_parts_mut(x_soft, r.x_soft.len()).copy_from_slice(&r.x_soft);
    }
    if !x_hard.is_null() {
        std::slice::from_raw_parts_mut(x_hard, r.x_hard.len()).copy_from_slice(&r.x_hard);
    }
    if let Some(info) = info.as_mut() {
        *info = MpjDetectionInfo {
            iterations_used: r.iterations_used as u32,
            converged: r.converged as c_int,
        };
    }
    Ok(())
}

/// Runs PJADMM. `x_soft` and `x_hard` may each be null; non-null buffers
/// must hold `len >= mpj_model_unknowns(model)` doubles. `info` may be null.
///
/// # Safety
/// Pointers must be null or valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mpj_detect_pjadmm(
    model: *const MpjModel,
    config: *const MpjConfig,
    x_soft: *mut f64,
    x_hard: *mut f64,
    len: usize,
    info: *mut MpjDetectionInfo,
) -> MpjStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let mut cfg = PjadmmConfig::for_shape(m.real.nr(), m.real.nt())
            .with_max_iters(c.max_iters as usize)
            .with_tolerance(c.tolerance);
        cfg.rho = c.rho;
        cfg.tau = c.tau;
        if c.clamp_box != 0 {
            cfg.clamp = ClampMode::Box(m.constellation.bound());
        }
        let r = detect(&m.real, &m.constellation, &cfg)?;
        write_result(&r, x_soft, x_hard, len, info)
    })
}

/// Runs exact MMSE with the model's noise variance. Buffers as for
/// [`mpj_detect_pjadmm`].
///
/// # Safety
/// Pointers must be null or valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mpj_detect_mmse(
    model: *const MpjModel,
    x_soft: *mut f64,
    x_hard: *mut f64,
    len: usize,
    info: *mut MpjDetectionInfo,
) -> MpjStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let r = mmse_detect(&m.real, &m.constellation, m.real.noise_var())?;
        write_result(&r, x_soft, x_hard, len, info)
    })
}

/// PJADMM time units per received vector, `4 nr + t (14 nr + 2 nt)`.
#[no_mangle]
pub extern "C" fn mpj_time_units(nr: u64, nt: u64, t_iters: u64) -> u64 {
    time_units(nr, nt, t_iters)
}

/// Complex noise variance σ_v² = nt / 10^(snr_db / 10).
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mpj_noise_variance_from_snr(snr_db: f64, nt: usize, out: *mut f64) -> MpjStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if nt == 0 || !snr_db.is_finite() {
            return Err(Failure(MpjStatus::Parameter, "nt must be >= 1 and snr_db finite".into()));
        }
        *out = noise_variance_from_snr(snr_db, nt);
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mpj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn mpj_status_str(status: c_int) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"dimension mismatch",
        3 => c"bit stream does not fill whole symbols",
        4 => c"invalid parameter",
        5 => c"channel column with zero energy",
        6 => c"singular system",
        7 => c"parse error",
        8 => c"i/o error",
        9 => c"output buffer too small",
        10 => c"internal panic",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Library version string.
#[no_mangle]
pub extern "C" fn mpj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
