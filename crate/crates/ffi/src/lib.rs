//! C ABI over `pcgeom`.
//!
//! Matrices cross the boundary as opaque `PcgMatrix` handles created by a
//! `pcg_matrix_*` constructor and released with `pcg_matrix_free`. Every
//! fallible call returns a `PcgStatus`; on failure the message is available
//! from `pcg_last_error_message` on the same thread until the next failing
//! call. Panics are caught and reported as `PCG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::ptr;

use pcgeom::distance::{DistanceError, DistanceMatrix, consistent_matrices_sharing_k, distance_matrix_of};
use pcgeom::format::{FormatError, matrix_from_json, matrix_to_json};
use pcgeom::group::{GroupDescriptor, GroupElement, GroupError};
use pcgeom::holonomy::{HolonomyError, Quadrature, roundtrip_residual};
use pcgeom::inconsistency::{InconsistencyError, matrix_ii_chain, matrix_ii_local, nearest_consistent, reduce};
use pcgeom::matrix::{MatrixError, PcMatrix, is_consistent, recover_weights};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Malformed = 3,
    Invalid = 4,
    UnsupportedGroup = 5,
    OutOfRange = 6,
    NotConsistent = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque matrix handle.
pub struct PcgMatrix {
    inner: PcMatrix,
}

struct Failure(PcgStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(PcgStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        let status = match &e {
            FormatError::Group(GroupError::Mismatch { .. }) => PcgStatus::UnsupportedGroup,
            e if e.is_syntax() => PcgStatus::Malformed,
            _ => PcgStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

impl From<MatrixError> for Failure {
    fn from(e: MatrixError) -> Self {
        let status = match &e {
            MatrixError::IndexOutOfRange { .. } => PcgStatus::OutOfRange,
            MatrixError::Group(GroupError::Mismatch { .. }) => PcgStatus::UnsupportedGroup,
            _ => PcgStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

impl From<InconsistencyError> for Failure {
    fn from(e: InconsistencyError) -> Self {
        let status = match &e {
            InconsistencyError::UnsupportedGroup { .. } => PcgStatus::UnsupportedGroup,
            _ => PcgStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

impl From<DistanceError> for Failure {
    fn from(e: DistanceError) -> Self {
        let status = match &e {
            DistanceError::NotPositiveReals(_) => PcgStatus::UnsupportedGroup,
            _ => PcgStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

impl From<HolonomyError> for Failure {
    fn from(e: HolonomyError) -> Self {
        let status = match &e {
            HolonomyError::NotConsistent(_) => PcgStatus::NotConsistent,
            _ => PcgStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            PcgStatus::Panic
        }
    }
}

unsafe fn matrix_ref<'a>(m: *const PcgMatrix) -> Result<&'a PcMatrix, Failure> {
    m.as_ref().map(|h| &h.inner).ok_or_else(|| Failure::null("matrix"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::null("output buffer"));
    }
    if len < needed {
        return Err(Failure(
            PcgStatus::BufferTooSmall,
            format!("buffer holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

fn new_handle(m: PcMatrix) -> *mut PcgMatrix {
    Box::into_raw(Box::new(PcgMatrix { inner: m }))
}

fn positive_real(g: &GroupElement) -> Result<f64, Failure> {
    g.as_positive_real().ok_or_else(|| {
        Failure(PcgStatus::UnsupportedGroup, "operation needs a positive_reals matrix".into())
    })
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn pcg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pcg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a JSON matrix document.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pcg_matrix_from_json(json: *const c_char, out: *mut *mut PcgMatrix) -> PcgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if json.is_null() {
            return Err(Failure::null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(PcgStatus::InvalidUtf8, e.to_string()))?;
        *out = new_handle(matrix_from_json(text, None)?);
        Ok(())
    })
}

/// Builds an `n`×`n` positive-reals matrix from its `n(n−1)/2` upper entries
/// in row order.
///
/// # Safety
/// `upper` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_matrix_positive_reals(
    n: usize,
    upper: *const f64,
    len: usize,
    out: *mut *mut PcgMatrix,
) -> PcgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let needed = n * n.saturating_sub(1) / 2;
        if len != needed {
            return Err(Failure(PcgStatus::Invalid, format!("{n}x{n} needs {needed} upper entries, got {len}")));
        }
        let values = if needed == 0 {
            &[][..]
        } else if upper.is_null() {
            return Err(Failure::null("upper"));
        } else {
            std::slice::from_raw_parts(upper, len)
        };
        let entries = values.iter().map(|&x| GroupElement::PositiveReal(x)).collect();
        *out = new_handle(PcMatrix::from_upper(GroupDescriptor::positive_reals(), n, entries)?);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcg_matrix_free(m: *mut PcgMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Matrix size, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcg_matrix_size(m: *const PcgMatrix) -> usize {
    m.as_ref().map_or(0, |h| h.inner.size())
}

/// JSON document of the matrix; release it with `pcg_string_free`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_matrix_to_json(m: *const PcgMatrix, out: *mut *mut c_char) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        let out = out_ref(out, "out")?;
        *out = CString::new(matrix_to_json(m)).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Entry `a_ij` of a positive-reals matrix.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_matrix_get(m: *const PcgMatrix, i: usize, j: usize, out: *mut f64) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        let out = out_ref(out, "out")?;
        *out = positive_real(&m.try_get(i, j)?)?;
        Ok(())
    })
}

/// Sets `a_ij` (and `a_ji` to its inverse) in a positive-reals matrix.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcg_matrix_set(m: *mut PcgMatrix, i: usize, j: usize, value: f64) -> PcgStatus {
    guard(|| {
        let h = m.as_mut().ok_or_else(|| Failure::null("matrix"))?;
        h.inner.set(i, j, GroupElement::PositiveReal(value))?;
        Ok(())
    })
}

/// Whether every triad closes within `tol`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_is_consistent(m: *const PcgMatrix, tol: f64, out: *mut bool) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        *out_ref(out, "out")? = is_consistent(m, tol);
        Ok(())
    })
}

/// Worst triad indicator and its indices; the triple is left untouched when
/// the matrix has fewer than three rows.
///
/// # Safety
/// `m` must be a live handle, `value` writable, `worst` null or three writable slots.
#[no_mangle]
pub unsafe extern "C" fn pcg_ii_local(m: *const PcgMatrix, value: *mut f64, worst: *mut usize) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        let value = out_ref(value, "value")?;
        let r = matrix_ii_local(m)?;
        *value = r.value;
        if let (Some(t), false) = (r.worst_triad, worst.is_null()) {
            std::slice::from_raw_parts_mut(worst, 3).copy_from_slice(&t);
        }
        Ok(())
    })
}

/// Indicator comparing each entry with its superdiagonal chain product.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_ii_chain(m: *const PcgMatrix, out: *mut f64) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        *out_ref(out, "out")? = matrix_ii_chain(m)?;
        Ok(())
    })
}

/// Weights `λ` with `λ_0 = 1` of a positive-reals matrix into `out[0..n]`.
///
/// # Safety
/// `m` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pcg_recover_weights(m: *const PcgMatrix, out: *mut f64, len: usize) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        let dst = slice_out(out, len, m.size())?;
        for (d, w) in dst.iter_mut().zip(&recover_weights(m).weights) {
            *d = positive_real(w)?;
        }
        Ok(())
    })
}

/// Least-squares consistent approximation as a new handle.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_nearest_consistent(m: *const PcgMatrix, out: *mut *mut PcgMatrix) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        let out = out_ref(out, "out")?;
        *out = new_handle(nearest_consistent(m)?.1);
        Ok(())
    })
}

/// Up to `steps` worst-triad reductions in place; writes the final indicator.
///
/// # Safety
/// `m` must be a live handle; `ii_after` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_reduce(m: *mut PcgMatrix, steps: usize, ii_after: *mut f64) -> PcgStatus {
    guard(|| {
        let h = m.as_mut().ok_or_else(|| Failure::null("matrix"))?;
        let (out, _) = reduce(&h.inner, steps)?;
        if let Some(v) = ii_after.as_mut() {
            *v = matrix_ii_local(&out)?.value;
        }
        h.inner = out;
        Ok(())
    })
}

/// Distance matrix `|ln a_ij|`, row-major into `out[0..n·n]`.
///
/// # Safety
/// `m` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pcg_distance_matrix(m: *const PcgMatrix, out: *mut f64, len: usize) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        let k = distance_matrix_of(m)?;
        let n = k.size();
        let dst = slice_out(out, len, n * n)?;
        for (d, v) in dst.iter_mut().zip(k.rows().into_iter().flatten()) {
            *d = v;
        }
        Ok(())
    })
}

/// Number of consistent matrices whose distance matrix is the row-major
/// `n`×`n` array `k`.
///
/// # Safety
/// `k` must point to `n·n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_count_consistent_sharing_k(k: *const f64, n: usize, out: *mut usize) -> PcgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if k.is_null() && n > 0 {
            return Err(Failure::null("k"));
        }
        let values = if n == 0 { &[][..] } else { std::slice::from_raw_parts(k, n * n) };
        let rows: Vec<Vec<f64>> = values.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let k = DistanceMatrix::from_rows(&rows)?;
        *out = consistent_matrices_sharing_k(&k)?.survivors.len();
        Ok(())
    })
}

/// Largest entry distance after the matrix → connection → matrix round trip;
/// `steps = 0` uses exact edge integrals, otherwise the midpoint rule.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_holonomy_roundtrip(m: *const PcgMatrix, steps: usize, out: *mut f64) -> PcgStatus {
    guard(|| {
        let m = matrix_ref(m)?;
        let out = out_ref(out, "out")?;
        let q = if steps == 0 { Quadrature::Exact } else { Quadrature::Midpoint(steps) };
        *out = roundtrip_residual(m, q)?;
        Ok(())
    })
}
