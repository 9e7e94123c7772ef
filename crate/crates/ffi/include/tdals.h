#ifndef TDALS_H
#define TDALS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum TdalsStatus {
  TDALS_STATUS_OK = 0,
  TDALS_STATUS_NULL_POINTER = 1,
  TDALS_STATUS_INVALID_ARGUMENT = 2,
  TDALS_STATUS_SHAPE = 3,
  TDALS_STATUS_NUMERICAL = 4,
  TDALS_STATUS_IO = 5,
  TDALS_STATUS_FORMAT = 6,
  TDALS_STATUS_SIZE_LIMIT = 7,
  TDALS_STATUS_BUFFER_TOO_SMALL = 8,
  TDALS_STATUS_PANIC = 9,
} TdalsStatus;

// Least-squares solve used by a decomposition.
typedef enum TdalsMethod {
  // Exact ALS.
  TDALS_METHOD_EXACT = 0,
  // Sketched leverage-score estimation with conditional sampling.
  TDALS_METHOD_ES = 1,
  // Product-distribution leverage sampling.
  TDALS_METHOD_PRODUCT = 2,
} TdalsMethod;

// Opaque CP model.
typedef struct TdalsCpModel TdalsCpModel;

// Opaque dense tensor.
typedef struct TdalsTensor TdalsTensor;

// Opaque tensor-ring model.
typedef struct TdalsTrModel TdalsTrModel;

// Settings of a decomposition run.
typedef struct TdalsOptions {
  size_t max_iters;
  // Stop when the relative error changes by less than this over a sweep.
  double tol;
  uint64_t seed;
  // Sketch dimension, used by `Es`.
  size_t j1;
  // Sampled rows per solve, used by `Es` and `Product`.
  size_t j2;
  // 0: Gaussian initialization, 1: randomized range finder.
  uint32_t init;
  // Tikhonov weight of the sampled solves.
  double ridge;
} TdalsOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next failing call.
const char *tdals_last_error(void);

// Library version as a static string.
const char *tdals_version(void);

// Default options: 50 sweeps, tolerance 1e-6, seed 0, J₁ = J₂ = 1000, Gaussian init.
struct TdalsOptions tdals_options_default(void);

// Tensor from `order` dims and `∏dims` values.
//
// # Safety
// `dims` holds `order` values, `data` holds `∏dims` values, `out` is writable.
enum TdalsStatus tdals_tensor_new(size_t order,
                                  const size_t *dims,
                                  const double *data,
                                  struct TdalsTensor **out);

// Reads a `.dt` file.
//
// # Safety
// `file` is a NUL-terminated path, `out` is writable.
enum TdalsStatus tdals_tensor_read(const char *file, struct TdalsTensor **out);

// Writes a `.dt` file.
//
// # Safety
// `t` is a live handle and `file` a NUL-terminated path.
enum TdalsStatus tdals_tensor_write(const struct TdalsTensor *t, const char *file);

// # Safety
// `t` is null or a handle not yet freed.
void tdals_tensor_free(struct TdalsTensor *t);

// Order of the tensor, 0 for a null handle.
//
// # Safety
// `t` is null or a live handle.
size_t tdals_tensor_order(const struct TdalsTensor *t);

// Copies the dims into `out`, which holds `len` values.
//
// # Safety
// `t` is a live handle and `out` holds `len` values.
enum TdalsStatus tdals_tensor_dims(const struct TdalsTensor *t, size_t *out, size_t len);

// Copies the entries into `out`, which holds `len` values.
//
// # Safety
// `t` is a live handle and `out` holds `len` values.
enum TdalsStatus tdals_tensor_data(const struct TdalsTensor *t, double *out, size_t len);

// CP decomposition of rank `rank`. `opts` may be null for defaults; `rel_error` may be null.
//
// # Safety
// `x` is a live handle, `opts` and `rel_error` are null or valid, `out` is writable.
enum TdalsStatus tdals_cp_decompose(const struct TdalsTensor *x,
                                    size_t rank,
                                    enum TdalsMethod method,
                                    const struct TdalsOptions *opts,
                                    struct TdalsCpModel **out,
                                    double *rel_error);

// # Safety
// `m` is null or a handle not yet freed.
void tdals_cp_free(struct TdalsCpModel *m);

// Number of factors, 0 for a null handle.
//
// # Safety
// `m` is null or a live handle.
size_t tdals_cp_order(const struct TdalsCpModel *m);

// Rank, 0 for a null handle.
//
// # Safety
// `m` is null or a live handle.
size_t tdals_cp_rank(const struct TdalsCpModel *m);

// Copies factor `j` (`I_j × R`) into `out`, which holds `len` values.
//
// # Safety
// `m` is a live handle and `out` holds `len` values.
enum TdalsStatus tdals_cp_factor(const struct TdalsCpModel *m, size_t j, double *out, size_t len);

// Full tensor represented by the model.
//
// # Safety
// `m` is a live handle and `out` is writable.
enum TdalsStatus tdals_cp_reconstruct(const struct TdalsCpModel *m, struct TdalsTensor **out);

// Tensor-ring decomposition; `ranks[c]` is the trailing rank of core `c`.
//
// # Safety
// `x` is a live handle, `ranks` holds `num_ranks` values, `opts` and `rel_error` are
// null or valid, `out` is writable.
enum TdalsStatus tdals_tr_decompose(const struct TdalsTensor *x,
                                    const size_t *ranks,
                                    size_t num_ranks,
                                    enum TdalsMethod method,
                                    const struct TdalsOptions *opts,
                                    struct TdalsTrModel **out,
                                    double *rel_error);

// # Safety
// `m` is null or a handle not yet freed.
void tdals_tr_free(struct TdalsTrModel *m);

// Number of cores, 0 for a null handle.
//
// # Safety
// `m` is null or a live handle.
size_t tdals_tr_order(const struct TdalsTrModel *m);

// Writes the shape `(R_{c−1}, I_c, R_c)` of core `c` into `out[0..3]`.
//
// # Safety
// `m` is a live handle and `out` holds 3 values.
enum TdalsStatus tdals_tr_core_dims(const struct TdalsTrModel *m, size_t c, size_t *out);

// Copies core `c` into `out`, which holds `len` values.
//
// # Safety
// `m` is a live handle and `out` holds `len` values.
enum TdalsStatus tdals_tr_core(const struct TdalsTrModel *m, size_t c, double *out, size_t len);

// Full tensor represented by the model.
//
// # Safety
// `m` is a live handle and `out` is writable.
enum TdalsStatus tdals_tr_reconstruct(const struct TdalsTrModel *m, struct TdalsTensor **out);

// Relative Frobenius error of `x` against the reconstruction of a CP model.
//
// # Safety
// `m` and `x` are live handles and `out` is writable.
enum TdalsStatus tdals_cp_rel_error(const struct TdalsCpModel *m,
                                    const struct TdalsTensor *x,
                                    double *out);

// Relative Frobenius error of `x` against the reconstruction of a TR model.
//
// # Safety
// `m` and `x` are live handles and `out` is writable.
enum TdalsStatus tdals_tr_rel_error(const struct TdalsTrModel *m,
                                    const struct TdalsTensor *x,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDALS_H */
