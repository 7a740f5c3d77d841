#ifndef COMB_QMC_H
#define COMB_QMC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CombQmcRoute {
  COMB_QMC_ROUTE_ITERATIVE = 0,
  COMB_QMC_ROUTE_PRODUCT = 1,
  COMB_QMC_ROUTE_ORACLE = 2,
} CombQmcRoute;

typedef enum CombQmcStatus {
  COMB_QMC_STATUS_OK = 0,
  COMB_QMC_STATUS_NULL_ARGUMENT = 1,
  COMB_QMC_STATUS_INVALID_ARGUMENT = 2,
  COMB_QMC_STATUS_OUT_OF_RANGE = 3,
  COMB_QMC_STATUS_VOLUME_TOO_LARGE = 4,
  COMB_QMC_STATUS_NUMERICAL = 5,
  /**
   * Clustering rate is undefined because every defect vanishes.
   */
  COMB_QMC_STATUS_UNDEFINED = 6,
  COMB_QMC_STATUS_INTERNAL = 7,
} CombQmcStatus;

/**
 * Opaque model handle.
 */
typedef struct CombQmcModel CombQmcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a model for inverse temperature `beta` and coupling `j`.
 *
 * # Safety
 * `out` must be null or valid for writing one pointer.
 */
enum CombQmcStatus comb_qmc_model_new(double beta, double j, struct CombQmcModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from `comb_qmc_model_new` and not be used afterwards.
 */
void comb_qmc_model_free(struct CombQmcModel *model);

/**
 * `τ1, τ2, τ3` and the normalization `α = 1/τ1`.
 *
 * # Safety
 * `model` must be a live handle; out-pointers must be valid for writing.
 */
enum CombQmcStatus comb_qmc_model_coefficients(const struct CombQmcModel *model,
                                               double *tau1,
                                               double *tau2,
                                               double *tau3,
                                               double *alpha);

/**
 * Evaluates the disordered state on a JSON observable within the volume of
 * level `n`, by the chosen route.
 *
 * # Safety
 * `model` must be a live handle, `observable_json` a nul-terminated string,
 * and the out-pointers valid for writing.
 */
enum CombQmcStatus comb_qmc_evaluate(const struct CombQmcModel *model,
                                     const char *observable_json,
                                     size_t n,
                                     enum CombQmcRoute route,
                                     double *re,
                                     double *im);

/**
 * `φ(σz at (uk,ul) · σz at (vk,vl))` in the disordered state.
 *
 * # Safety
 * `model` must be a live handle; out-pointers must be valid for writing.
 */
enum CombQmcStatus comb_qmc_two_point_zz(const struct CombQmcModel *model,
                                         size_t uk,
                                         size_t ul,
                                         size_t vk,
                                         size_t vl,
                                         double *value);

/**
 * Fitted spine decay rate of the σz two-point defect over `d = 1..=d_max`.
 * Returns `UNDEFINED` (and writes NaN) when every defect vanishes.
 *
 * # Safety
 * `model` must be a live handle; `rate` must be valid for writing.
 */
enum CombQmcStatus comb_qmc_clustering_rate(const struct CombQmcModel *model,
                                            size_t d_max,
                                            double *rate);

/**
 * Message for the last failed call on this thread, or null. Owned by the
 * library; valid until the next call.
 */
const char *comb_qmc_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMB_QMC_H */
