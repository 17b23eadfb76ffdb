//! C ABI for the tensor geometry library: opaque handles, status codes,
//! and a header generated by cbindgen (see `include/tdf.h`).
//!
//! Ownership rules: every `*_create`/`*_read`/`*_hosvd`/`*_to_dense` call
//! that yields a handle transfers ownership to the caller, who must release
//! it with the matching `*_free`. Status codes are returned by value;
//! outputs are written through out-pointers only on `TDF_STATUS_OK`.

use std::ffi::{c_char, CStr};

use tdf_core::geometry::make_base;
use tdf_core::projection::{injective_norm, project_hilbert, InjectiveOptions};
use tdf_core::tensor::{read_tensor, write_tensor, AmbientNorm, DenseTensor, Shape};
use tdf_core::tucker::{
    alpha_rank, hosvd_truncate, read_tucker, to_tucker, tucker_to_dense, write_tucker, Rank,
    TuckerTensor, DEFAULT_RANK_TOL,
};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    IoError = 3,
    FormatError = 4,
    InvalidArgument = 5,
    SolverFailure = 6,
    RankDegeneracy = 7,
    InvariantViolated = 8,
}

/// Opaque dense tensor handle.
pub struct TdfTensor(DenseTensor);

/// Opaque Tucker representation handle.
pub struct TdfTucker(TuckerTensor);

/// Short static description of a status code.
#[no_mangle]
pub extern "C" fn tdf_status_message(status: TdfStatus) -> *const c_char {
    let message: &'static [u8] = match status {
        TdfStatus::Ok => b"ok\0",
        TdfStatus::NullPointer => b"null pointer argument\0",
        TdfStatus::InvalidUtf8 => b"path is not valid UTF-8\0",
        TdfStatus::IoError => b"I/O error\0",
        TdfStatus::FormatError => b"malformed input\0",
        TdfStatus::InvalidArgument => b"invalid argument\0",
        TdfStatus::SolverFailure => b"solver failure\0",
        TdfStatus::RankDegeneracy => b"rank degeneracy\0",
        TdfStatus::InvariantViolated => b"invariant violated\0",
    };
    message.as_ptr() as *const c_char
}

unsafe fn path_from<'a>(ptr: *const c_char) -> Result<&'a str, TdfStatus> {
    if ptr.is_null() {
        return Err(TdfStatus::NullPointer);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| TdfStatus::InvalidUtf8)
}

/// Build a dense tensor from raw parts (data row-major, last index fastest).
///
/// # Safety
/// `dims` must point to `ndims` readable `uintptr_t`s, `data` to `len`
/// readable doubles, and `out` must be a valid writable location.
#[no_mangle]
pub unsafe extern "C" fn tdf_tensor_create(
    dims: *const usize,
    ndims: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut TdfTensor,
) -> TdfStatus {
    if dims.is_null() || data.is_null() || out.is_null() {
        return TdfStatus::NullPointer;
    }
    let dims = std::slice::from_raw_parts(dims, ndims).to_vec();
    let data = std::slice::from_raw_parts(data, len).to_vec();
    let shape = match Shape::new(dims) {
        Ok(s) => s,
        Err(_) => return TdfStatus::InvalidArgument,
    };
    match DenseTensor::new(shape, data) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(TdfTensor(t)));
            TdfStatus::Ok
        }
        Err(_) => TdfStatus::InvalidArgument,
    }
}

/// Read a tensor from a JSON file (`{"dims": [...], "data": [...]}`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_tensor_read_json(
    path: *const c_char,
    out: *mut *mut TdfTensor,
) -> TdfStatus {
    if out.is_null() {
        return TdfStatus::NullPointer;
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match read_tensor(path) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(TdfTensor(t)));
            TdfStatus::Ok
        }
        Err(tdf_core::tensor::TensorError::Io(_)) => TdfStatus::IoError,
        Err(_) => TdfStatus::FormatError,
    }
}

/// Write a tensor as JSON.
///
/// # Safety
/// `t` must be a live handle from this library, `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tdf_tensor_write_json(
    t: *const TdfTensor,
    path: *const c_char,
) -> TdfStatus {
    if t.is_null() {
        return TdfStatus::NullPointer;
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match write_tensor(&(*t).0, path) {
        Ok(()) => TdfStatus::Ok,
        Err(_) => TdfStatus::IoError,
    }
}

/// Number of modes; 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdf_tensor_order(t: *const TdfTensor) -> usize {
    if t.is_null() {
        0
    } else {
        (*t).0.order()
    }
}

/// Size of one mode; 0 when out of range.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdf_tensor_dim(t: *const TdfTensor, mode: usize) -> usize {
    if t.is_null() || mode >= (*t).0.order() {
        0
    } else {
        (*t).0.shape().dim(mode)
    }
}

/// Copy the coefficients (row-major) into a caller buffer of length `len`,
/// which must equal the tensor volume.
///
/// # Safety
/// `t` must be a live handle and `buffer` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tdf_tensor_copy_data(
    t: *const TdfTensor,
    buffer: *mut f64,
    len: usize,
) -> TdfStatus {
    if t.is_null() || buffer.is_null() {
        return TdfStatus::NullPointer;
    }
    let data = (*t).0.data();
    if data.len() != len {
        return TdfStatus::InvalidArgument;
    }
    std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(data);
    TdfStatus::Ok
}

/// Release a tensor handle (null is a no-op).
///
/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdf_tensor_free(t: *mut TdfTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Rank of one matricization at the relative threshold `tol`
/// (pass a non-positive value for the default).
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_alpha_rank(
    t: *const TdfTensor,
    mode: usize,
    tol: f64,
    out: *mut usize,
) -> TdfStatus {
    if t.is_null() || out.is_null() {
        return TdfStatus::NullPointer;
    }
    let tol = if tol > 0.0 { tol } else { DEFAULT_RANK_TOL };
    match alpha_rank(&(*t).0, mode, tol) {
        Ok(r) => {
            *out = r;
            TdfStatus::Ok
        }
        Err(_) => TdfStatus::InvalidArgument,
    }
}

/// Higher-order SVD at the default tolerance.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_hosvd(t: *const TdfTensor, out: *mut *mut TdfTucker) -> TdfStatus {
    if t.is_null() || out.is_null() {
        return TdfStatus::NullPointer;
    }
    match to_tucker(&(*t).0, DEFAULT_RANK_TOL) {
        Ok(u) => {
            *out = Box::into_raw(Box::new(TdfTucker(u)));
            TdfStatus::Ok
        }
        Err(_) => TdfStatus::RankDegeneracy,
    }
}

/// Higher-order SVD truncated to the requested per-mode ranks.
///
/// # Safety
/// `t` must be a live handle, `ranks` point to `nranks` readable values,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_hosvd_truncate(
    t: *const TdfTensor,
    ranks: *const usize,
    nranks: usize,
    out: *mut *mut TdfTucker,
) -> TdfStatus {
    if t.is_null() || ranks.is_null() || out.is_null() {
        return TdfStatus::NullPointer;
    }
    let ranks = std::slice::from_raw_parts(ranks, nranks).to_vec();
    let rank = match Rank::new(ranks, (*t).0.shape()) {
        Ok(r) => r,
        Err(_) => return TdfStatus::InvalidArgument,
    };
    match hosvd_truncate(&(*t).0, &rank) {
        Ok((u, _)) => {
            *out = Box::into_raw(Box::new(TdfTucker(u)));
            TdfStatus::Ok
        }
        Err(_) => TdfStatus::RankDegeneracy,
    }
}

/// Read a Tucker representation from JSON.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_tucker_read_json(
    path: *const c_char,
    out: *mut *mut TdfTucker,
) -> TdfStatus {
    if out.is_null() {
        return TdfStatus::NullPointer;
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match read_tucker(path) {
        Ok(u) => {
            *out = Box::into_raw(Box::new(TdfTucker(u)));
            TdfStatus::Ok
        }
        Err(tdf_core::tucker::TuckerError::Io(_)) => TdfStatus::IoError,
        Err(_) => TdfStatus::FormatError,
    }
}

/// Write a Tucker representation as JSON.
///
/// # Safety
/// `u` must be a live handle, `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tdf_tucker_write_json(
    u: *const TdfTucker,
    path: *const c_char,
) -> TdfStatus {
    if u.is_null() {
        return TdfStatus::NullPointer;
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match write_tucker(&(*u).0, path) {
        Ok(()) => TdfStatus::Ok,
        Err(_) => TdfStatus::IoError,
    }
}

/// Rank of one mode of a Tucker handle; 0 when out of range.
///
/// # Safety
/// `u` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdf_tucker_rank(u: *const TdfTucker, mode: usize) -> usize {
    if u.is_null() || mode >= (*u).0.order() {
        0
    } else {
        (*u).0.core().shape().dim(mode)
    }
}

/// Expand a Tucker representation to a dense tensor handle.
///
/// # Safety
/// `u` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_tucker_to_dense(
    u: *const TdfTucker,
    out: *mut *mut TdfTensor,
) -> TdfStatus {
    if u.is_null() || out.is_null() {
        return TdfStatus::NullPointer;
    }
    match tucker_to_dense(&(*u).0) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(TdfTensor(t)));
            TdfStatus::Ok
        }
        Err(_) => TdfStatus::InvalidArgument,
    }
}

/// Release a Tucker handle (null is a no-op).
///
/// # Safety
/// `u` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdf_tucker_free(u: *mut TdfTucker) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

/// Entrywise l^p norm with unit weights.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_ambient_norm(
    t: *const TdfTensor,
    p: f64,
    out: *mut f64,
) -> TdfStatus {
    if t.is_null() || out.is_null() {
        return TdfStatus::NullPointer;
    }
    let tensor = &(*t).0;
    let nrm = match AmbientNorm::uniform(p, tensor.shape()) {
        Ok(n) => n,
        Err(_) => return TdfStatus::InvalidArgument,
    };
    match nrm.eval(tensor) {
        Ok(v) => {
            *out = v;
            TdfStatus::Ok
        }
        Err(_) => TdfStatus::InvalidArgument,
    }
}

/// Certified lower bound of the injective norm (unit weights); zero tensors
/// yield 0.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tdf_injective_norm_lb(
    t: *const TdfTensor,
    p: f64,
    restarts: usize,
    seed: u64,
    out: *mut f64,
) -> TdfStatus {
    if t.is_null() || out.is_null() {
        return TdfStatus::NullPointer;
    }
    let tensor = &(*t).0;
    if tensor.is_zero() {
        *out = 0.0;
        return TdfStatus::Ok;
    }
    let nrm = match AmbientNorm::uniform(p, tensor.shape()) {
        Ok(n) => n,
        Err(_) => return TdfStatus::InvalidArgument,
    };
    let opts = InjectiveOptions {
        restarts,
        seed,
        ..InjectiveOptions::default()
    };
    match injective_norm(tensor, &nrm, &opts) {
        Ok((lb, _)) => {
            *out = lb;
            TdfStatus::Ok
        }
        Err(_) => TdfStatus::SolverFailure,
    }
}

/// Orthogonal projection of `g` onto the tangent space at the base point
/// carried by `base`. Writes the embedded projection, the Euclidean
/// objective and the duality residual.
///
/// # Safety
/// `base` and `g` must be live handles; `out_projection` must be writable;
/// `out_objective` and `out_residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn tdf_project_hilbert(
    base: *const TdfTucker,
    g: *const TdfTensor,
    out_projection: *mut *mut TdfTensor,
    out_objective: *mut f64,
    out_residual: *mut f64,
) -> TdfStatus {
    if base.is_null() || g.is_null() || out_projection.is_null() {
        return TdfStatus::NullPointer;
    }
    let b = match make_base(&(*base).0) {
        Ok(b) => b,
        Err(_) => return TdfStatus::InvalidArgument,
    };
    match project_hilbert(&b, &(*g).0) {
        Ok(report) => {
            let embedded = match tdf_core::geometry::embed_tangent(&b, &report.tangent) {
                Ok(t) => t,
                Err(_) => return TdfStatus::SolverFailure,
            };
            if !out_objective.is_null() {
                *out_objective = report.objective;
            }
            if !out_residual.is_null() {
                *out_residual = report.duality_residual;
            }
            *out_projection = Box::into_raw(Box::new(TdfTensor(embedded)));
            TdfStatus::Ok
        }
        Err(tdf_core::projection::ProjectionError::Geometry(
            tdf_core::geometry::GeometryError::SingularCore { .. },
        )) => TdfStatus::RankDegeneracy,
        Err(_) => TdfStatus::SolverFailure,
    }
}
