//! C ABI over `nsdvpr`.
//!
//! Objects are opaque handles created by `nsd_*_new`/`nsd_*_read`/builder
//! functions and released with the matching `nsd_*_free`. Every fallible call
//! returns an [`NsdStatus`]; on failure a description is available from
//! [`nsd_last_error_message`] on the same thread until the next failing call.
//! Panics never cross the boundary: they are reported as
//! [`NsdStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nsdvpr::io::{read_descriptors, write_descriptors};
use nsdvpr::matcher::{build_cost_matrix, CostMatrix};
use nsdvpr::seqsearch::{match_all, SearchParams};
use nsdvpr::{normalize_batch, DescriptorSet, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    NonFinite = 5,
    DimensionMismatch = 6,
    Empty = 7,
    Panic = 8,
}

/// Opaque set of equal-length `f32` descriptors.
pub struct NsdDescriptorSet(DescriptorSet);

/// Opaque query-by-reference cosine distance matrix.
pub struct NsdCostMatrix(CostMatrix);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsdSearchParams {
    /// Frames accumulated behind each query.
    pub seq_len: usize,
    /// Odd number of trajectory slopes.
    pub slope_count: usize,
    /// Half-width of the slope fan in radians, in `[0, pi/4)`.
    pub angle_halfwidth: f64,
    /// Uniqueness exclusion window in frames.
    pub uniqueness_window: usize,
}

/// One query's match. `best_reference` is -1 and the costs are NaN when no
/// trajectory fits; `uniqueness` is NaN when no competitor exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsdMatch {
    pub query_index: usize,
    pub best_reference: i64,
    pub seq_cost: f64,
    pub uniqueness: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NsdStatus {
    match e {
        Error::EmptySet => NsdStatus::Empty,
        Error::NonFinite { .. } => NsdStatus::NonFinite,
        Error::DimensionMismatch { .. } => NsdStatus::DimensionMismatch,
        Error::NotDescriptorFile | Error::CorruptDescriptorFile(_) | Error::Parse { .. } => {
            NsdStatus::Format
        }
        Error::Io { .. } => NsdStatus::Io,
        _ => NsdStatus::InvalidArgument,
    }
}

fn fail(status: NsdStatus, message: impl Into<String>) -> NsdStatus {
    set_last_error(message.into());
    status
}

/// Runs `f`, turning library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), NsdStatus>) -> NsdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsdStatus::Ok,
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(NsdStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lib<T>(r: nsdvpr::Result<T>) -> Result<T, NsdStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, NsdStatus> {
    p.as_ref()
        .ok_or_else(|| fail(NsdStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), NsdStatus> {
    if p.is_null() {
        Err(fail(NsdStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, NsdStatus> {
    if p.is_null() {
        return Err(fail(NsdStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NsdStatus::InvalidArgument, "path is not valid UTF-8"))
}

/// Message for the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nsd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `count * dim` row-major values into a new set.
#[no_mangle]
pub unsafe extern "C" fn nsd_set_new(
    values: *const f32,
    count: usize,
    dim: usize,
    out: *mut *mut NsdDescriptorSet,
) -> NsdStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let len = count
            .checked_mul(dim)
            .ok_or_else(|| fail(NsdStatus::InvalidArgument, "count * dim overflows"))?;
        let data = if len == 0 {
            Vec::new()
        } else {
            if values.is_null() {
                return Err(fail(NsdStatus::NullPointer, "values is null"));
            }
            std::slice::from_raw_parts(values, len).to_vec()
        };
        let set = lib(DescriptorSet::from_rows(dim, data))?;
        *out = Box::into_raw(Box::new(NsdDescriptorSet(set)));
        Ok(())
    })
}

/// Reads a descriptor file; composite files are returned as whole rows.
#[no_mangle]
pub unsafe extern "C" fn nsd_set_read(
    path: *const c_char,
    out: *mut *mut NsdDescriptorSet,
) -> NsdStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let set = lib(read_descriptors(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(NsdDescriptorSet(set)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nsd_set_write(
    set: *const NsdDescriptorSet,
    path: *const c_char,
) -> NsdStatus {
    guard(|| {
        let set = non_null(set, "set")?;
        lib(write_descriptors(path_arg(path)?, &set.0))
    })
}

/// Number of rows; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn nsd_set_count(set: *const NsdDescriptorSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.count())
}

/// Descriptor length; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn nsd_set_dim(set: *const NsdDescriptorSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies row `index` into `out`, which must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn nsd_set_copy_row(
    set: *const NsdDescriptorSet,
    index: usize,
    out: *mut f32,
    out_len: usize,
) -> NsdStatus {
    guard(|| {
        let set = &non_null(set, "set")?.0;
        out_ptr(out, "out")?;
        if index >= set.count() {
            return Err(fail(
                NsdStatus::InvalidArgument,
                format!("row {index} out of range for {} rows", set.count()),
            ));
        }
        if out_len < set.dim() {
            return Err(fail(
                NsdStatus::InvalidArgument,
                format!("buffer holds {out_len} values, row has {}", set.dim()),
            ));
        }
        std::slice::from_raw_parts_mut(out, set.dim()).copy_from_slice(set.row(index));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nsd_set_free(set: *mut NsdDescriptorSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Per-dimension standardization against the set's own statistics.
#[no_mangle]
pub unsafe extern "C" fn nsd_normalize_batch(
    set: *const NsdDescriptorSet,
    out: *mut *mut NsdDescriptorSet,
) -> NsdStatus {
    guard(|| {
        let set = non_null(set, "set")?;
        out_ptr(out, "out")?;
        let (normalized, _) = lib(normalize_batch(&set.0))?;
        *out = Box::into_raw(Box::new(NsdDescriptorSet(normalized)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nsd_cost_matrix_build(
    query: *const NsdDescriptorSet,
    reference: *const NsdDescriptorSet,
    out: *mut *mut NsdCostMatrix,
) -> NsdStatus {
    guard(|| {
        let q = non_null(query, "query")?;
        let r = non_null(reference, "reference")?;
        out_ptr(out, "out")?;
        let m = lib(build_cost_matrix(&q.0, &r.0))?;
        *out = Box::into_raw(Box::new(NsdCostMatrix(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nsd_cost_matrix_rows(matrix: *const NsdCostMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.rows())
}

#[no_mangle]
pub unsafe extern "C" fn nsd_cost_matrix_cols(matrix: *const NsdCostMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.cols())
}

#[no_mangle]
pub unsafe extern "C" fn nsd_cost_matrix_get(
    matrix: *const NsdCostMatrix,
    row: usize,
    col: usize,
    out: *mut f32,
) -> NsdStatus {
    guard(|| {
        let m = &non_null(matrix, "matrix")?.0;
        out_ptr(out, "out")?;
        if row >= m.rows() || col >= m.cols() {
            return Err(fail(
                NsdStatus::InvalidArgument,
                format!("({row}, {col}) outside {}x{} matrix", m.rows(), m.cols()),
            ));
        }
        *out = m.get(row, col);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nsd_cost_matrix_free(matrix: *mut NsdCostMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

#[no_mangle]
pub extern "C" fn nsd_search_params_default() -> NsdSearchParams {
    let p = SearchParams::default();
    NsdSearchParams {
        seq_len: p.seq_len,
        slope_count: p.slope_count,
        angle_halfwidth: p.angle_halfwidth,
        uniqueness_window: p.uniqueness_window,
    }
}

/// Sequence search for every query row. `out` must hold at least
/// `nsd_cost_matrix_rows(matrix)` entries.
#[no_mangle]
pub unsafe extern "C" fn nsd_match_all(
    matrix: *const NsdCostMatrix,
    params: *const NsdSearchParams,
    out: *mut NsdMatch,
    out_len: usize,
) -> NsdStatus {
    guard(|| {
        let m = &non_null(matrix, "matrix")?.0;
        let p = non_null(params, "params")?;
        out_ptr(out, "out")?;
        if out_len < m.rows() {
            return Err(fail(
                NsdStatus::InvalidArgument,
                format!(
                    "buffer holds {out_len} matches, matrix has {} rows",
                    m.rows()
                ),
            ));
        }
        let params = SearchParams {
            seq_len: p.seq_len,
            slope_count: p.slope_count,
            angle_halfwidth: p.angle_halfwidth,
            uniqueness_window: p.uniqueness_window,
        };
        lib(params.validate())?;
        let results = match_all(m, &params);
        let out = std::slice::from_raw_parts_mut(out, m.rows());
        for (slot, r) in out.iter_mut().zip(results) {
            *slot = NsdMatch {
                query_index: r.query_index,
                best_reference: r.best_reference.map_or(-1, |b| b as i64),
                seq_cost: r.seq_cost.unwrap_or(f64::NAN),
                uniqueness: r.uniqueness.unwrap_or(f64::NAN),
            };
        }
        Ok(())
    })
}
