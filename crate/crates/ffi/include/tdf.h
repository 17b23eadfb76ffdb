/* C interface for the tdf tensor geometry library. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum TdfStatus {
  TDF_STATUS_OK = 0,
  TDF_STATUS_NULL_POINTER = 1,
  TDF_STATUS_INVALID_UTF8 = 2,
  TDF_STATUS_IO_ERROR = 3,
  TDF_STATUS_FORMAT_ERROR = 4,
  TDF_STATUS_INVALID_ARGUMENT = 5,
  TDF_STATUS_SOLVER_FAILURE = 6,
  TDF_STATUS_RANK_DEGENERACY = 7,
  TDF_STATUS_INVARIANT_VIOLATED = 8,
} TdfStatus;

// Opaque dense tensor handle.
typedef struct TdfTensor TdfTensor;

// Opaque Tucker representation handle.
typedef struct TdfTucker TdfTucker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Short static description of a status code.
const char *tdf_status_message(enum TdfStatus status);

// Build a dense tensor from raw parts (data row-major, last index fastest).
//
// # Safety
// `dims` must point to `ndims` readable `uintptr_t`s, `data` to `len`
// readable doubles, and `out` must be a valid writable location.
enum TdfStatus tdf_tensor_create(const uintptr_t *dims,
                                 uintptr_t ndims,
                                 const double *data,
                                 uintptr_t len,
                                 struct TdfTensor **out);

// Read a tensor from a JSON file (`{"dims": [...], "data": [...]}`).
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum TdfStatus tdf_tensor_read_json(const char *path, struct TdfTensor **out);

// Write a tensor as JSON.
//
// # Safety
// `t` must be a live handle from this library, `path` NUL-terminated.
enum TdfStatus tdf_tensor_write_json(const struct TdfTensor *t, const char *path);

// Number of modes; 0 for a null handle.
//
// # Safety
// `t` must be null or a live handle.
uintptr_t tdf_tensor_order(const struct TdfTensor *t);

// Size of one mode; 0 when out of range.
//
// # Safety
// `t` must be null or a live handle.
uintptr_t tdf_tensor_dim(const struct TdfTensor *t, uintptr_t mode);

// Copy the coefficients (row-major) into a caller buffer of length `len`,
// which must equal the tensor volume.
//
// # Safety
// `t` must be a live handle and `buffer` point to `len` writable doubles.
enum TdfStatus tdf_tensor_copy_data(const struct TdfTensor *t, double *buffer, uintptr_t len);

// Release a tensor handle (null is a no-op).
//
// # Safety
// `t` must be null or a handle not yet freed.
void tdf_tensor_free(struct TdfTensor *t);

// Rank of one matricization at the relative threshold `tol`
// (pass a non-positive value for the default).
//
// # Safety
// `t` must be a live handle and `out` writable.
enum TdfStatus tdf_alpha_rank(const struct TdfTensor *t,
                              uintptr_t mode,
                              double tol,
                              uintptr_t *out);

// Higher-order SVD at the default tolerance.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum TdfStatus tdf_hosvd(const struct TdfTensor *t, struct TdfTucker **out);

// Higher-order SVD truncated to the requested per-mode ranks.
//
// # Safety
// `t` must be a live handle, `ranks` point to `nranks` readable values,
// `out` writable.
enum TdfStatus tdf_hosvd_truncate(const struct TdfTensor *t,
                                  const uintptr_t *ranks,
                                  uintptr_t nranks,
                                  struct TdfTucker **out);

// Read a Tucker representation from JSON.
//
// # Safety
// `path` must be NUL-terminated and `out` writable.
enum TdfStatus tdf_tucker_read_json(const char *path, struct TdfTucker **out);

// Write a Tucker representation as JSON.
//
// # Safety
// `u` must be a live handle, `path` NUL-terminated.
enum TdfStatus tdf_tucker_write_json(const struct TdfTucker *u, const char *path);

// Rank of one mode of a Tucker handle; 0 when out of range.
//
// # Safety
// `u` must be null or a live handle.
uintptr_t tdf_tucker_rank(const struct TdfTucker *u, uintptr_t mode);

// Expand a Tucker representation to a dense tensor handle.
//
// # Safety
// `u` must be a live handle and `out` writable.
enum TdfStatus tdf_tucker_to_dense(const struct TdfTucker *u, struct TdfTensor **out);

// Release a Tucker handle (null is a no-op).
//
// # Safety
// `u` must be null or a handle not yet freed.
void tdf_tucker_free(struct TdfTucker *u);

// Entrywise l^p norm with unit weights.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum TdfStatus tdf_ambient_norm(const struct TdfTensor *t, double p, double *out);

// Certified lower bound of the injective norm (unit weights); zero tensors
// yield 0.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum TdfStatus tdf_injective_norm_lb(const struct TdfTensor *t,
                                     double p,
                                     uintptr_t restarts,
                                     uint64_t seed,
                                     double *out);

// Orthogonal projection of `g` onto the tangent space at the base point
// carried by `base`. Writes the embedded projection, the Euclidean
// objective and the duality residual.
//
// # Safety
// `base` and `g` must be live handles; `out_projection` must be writable;
// `out_objective` and `out_residual` may be null.
enum TdfStatus tdf_project_hilbert(const struct TdfTucker *base,
                                   const struct TdfTensor *g,
                                   struct TdfTensor **out_projection,
                                   double *out_objective,
                                   double *out_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
