#ifndef MIMO_PJADMM_H
#define MIMO_PJADMM_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every function.
typedef enum MpjStatus {
  MPJ_STATUS_OK = 0,
  MPJ_STATUS_NULL_POINTER = 1,
  MPJ_STATUS_DIMENSION = 2,
  MPJ_STATUS_FRAMING = 3,
  MPJ_STATUS_PARAMETER = 4,
  MPJ_STATUS_DEGENERATE_COLUMN = 5,
  MPJ_STATUS_SINGULAR = 6,
  MPJ_STATUS_PARSE = 7,
  MPJ_STATUS_IO = 8,
  MPJ_STATUS_BUFFER_TOO_SMALL = 9,
  MPJ_STATUS_PANIC = 10,
} MpjStatus;

// Opaque detection instance: real-valued channel, received vector, noise
// variance and constellation.
typedef struct MpjModel MpjModel;

// PJADMM parameters. Obtain defaults from [`mpj_config_default`].
typedef struct MpjConfig {
  double rho;
  double tau;
  // Stop once |V(t) - V(t-1)| falls below this value.
  double tolerance;
  // Iteration budget T, at least 1.
  uint32_t max_iters;
  // Nonzero projects each x-block onto the constellation box.
  int clamp_box;
} MpjConfig;

// Run summary filled in by the detection functions.
typedef struct MpjDetectionInfo {
  uint32_t iterations_used;
  // 1 when the tolerance test stopped the run.
  int converged;
} MpjDetectionInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a model from complex data.
//
// `h` holds `nr * nt` complex entries row-major with real and imaginary
// parts interleaved (`2 * nr * nt` doubles); `y` holds `nr` interleaved
// complex entries. `noise_var` is the complex noise variance σ_v².
// `qam_order` is a square QAM order (4 for QPSK).
//
// # Safety
// `h`, `y` must point to the stated number of doubles; `out` must be valid
// for a pointer write.
enum MpjStatus mpj_model_new_complex(size_t nr,
                                     size_t nt,
                                     const double *h,
                                     const double *y,
                                     double noise_var,
                                     uint32_t qam_order,
                                     struct MpjModel **out);

// Builds a model from real-valued data: `h` is `rows x cols` row-major,
// `y` has `rows` entries, `noise_var` is per real dimension. `rows` and
// `cols` are normally `2 * nr` and `2 * nt`.
//
// # Safety
// As for [`mpj_model_new_complex`].
enum MpjStatus mpj_model_new_real(size_t rows,
                                  size_t cols,
                                  const double *h,
                                  const double *y,
                                  double noise_var,
                                  uint32_t qam_order,
                                  struct MpjModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from `mpj_model_new_*` and not be used afterwards.
void mpj_model_free(struct MpjModel *model);

// Number of real unknowns (`2 * nt`), the length detection buffers need.
// Returns 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t mpj_model_unknowns(const struct MpjModel *model);

// Default parameters for an `nr x nt` complex system, with budget 50.
struct MpjConfig mpj_config_default(size_t nr, size_t nt);

// Runs PJADMM. `x_soft` and `x_hard` may each be null; non-null buffers
// must hold `len >= mpj_model_unknowns(model)` doubles. `info` may be null.
//
// # Safety
// Pointers must be null or valid for the stated sizes.
enum MpjStatus mpj_detect_pjadmm(const struct MpjModel *model,
                                 const struct MpjConfig *config,
                                 double *x_soft,
                                 double *x_hard,
                                 size_t len,
                                 struct MpjDetectionInfo *info);

// Runs exact MMSE with the model's noise variance. Buffers as for
// [`mpj_detect_pjadmm`].
//
// # Safety
// Pointers must be null or valid for the stated sizes.
enum MpjStatus mpj_detect_mmse(const struct MpjModel *model,
                               double *x_soft,
                               double *x_hard,
                               size_t len,
                               struct MpjDetectionInfo *info);

// PJADMM time units per received vector, `4 nr + t (14 nr + 2 nt)`.
uint64_t mpj_time_units(uint64_t nr, uint64_t nt, uint64_t t_iters);

// Complex noise variance σ_v² = nt / 10^(snr_db / 10).
//
// # Safety
// `out` must be valid for a write.
enum MpjStatus mpj_noise_variance_from_snr(double snr_db, size_t nt, double *out);

// Message for the last failed call on this thread, or null after a
// successful call. Valid until the next call on the same thread.
const char *mpj_last_error_message(void);

// Static description of a status code.
const char *mpj_status_str(int status);

// Library version string.
const char *mpj_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIMO_PJADMM_H */
