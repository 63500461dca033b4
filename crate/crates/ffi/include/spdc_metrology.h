#ifndef SPDC_METROLOGY_H
#define SPDC_METROLOGY_H

/* Generated by cbindgen from the spdc-metrology-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of four-fold patterns written by [`spdc_fourfold`].
#define SPDC_FOURFOLD_PATTERNS 9

// Outcome of every call.
typedef enum SpdcStatus {
  SPDC_STATUS_OK = 0,
  SPDC_STATUS_NULL_POINTER = 1,
  SPDC_STATUS_DOMAIN = 2,
  SPDC_STATUS_UNSUPPORTED_REGIME = 3,
  SPDC_STATUS_FIT = 4,
  SPDC_STATUS_CALIBRATION = 5,
  SPDC_STATUS_NO_SOLUTION = 6,
  SPDC_STATUS_PARSE = 7,
  SPDC_STATUS_IO = 8,
  // The handle is in the wrong state for the call.
  SPDC_STATUS_STATE = 9,
  // A result does not fit the output type.
  SPDC_STATUS_OVERFLOW = 10,
  SPDC_STATUS_PANIC = 11,
} SpdcStatus;

// Streaming coincidence counter over the default sixteen-channel map.
typedef struct SpdcCounter SpdcCounter;

// Source and detector parameters.
typedef struct SpdcModel SpdcModel;

// Parameters recovered by [`spdc_calibrate`].
typedef struct SpdcCalibration {
  double tau;
  double eta_a;
  double eta_b;
  double pair_probability;
  // Non-zero when the pair probability sits at the top of the physical branch.
  uint8_t at_branch_limit;
  // Model minus input rates: singles a, singles b, two-fold.
  double residuals[3];
} SpdcCalibration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *spdc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *spdc_version(void);

// Create a model. `d = 0` selects photon-number-resolving detection;
// `eps` is the truncation tolerance on the pair-number tail.
//
// # Safety
// `out_model` must be a valid pointer to writable storage for one handle.
enum SpdcStatus spdc_model_new(double tau,
                               double eta_a,
                               double eta_b,
                               uint32_t d,
                               double eps,
                               struct SpdcModel **out_model);

// Release a model; null is ignored.
//
// # Safety
// `model` must come from [`spdc_model_new`] and not be used afterwards.
void spdc_model_free(struct SpdcModel *model);

// Pair-number cutoff the model sums to.
//
// # Safety
// `model` must be a live handle and `n_max` writable.
enum SpdcStatus spdc_model_n_max(const struct SpdcModel *model, uint32_t *n_max);

// Probability of the click pattern `(a_h, a_v, b_h, b_v)` at sensing phase
// `phi` and reference phase `theta`.
//
// # Safety
// `model` must be a live handle and `probability` writable.
enum SpdcStatus spdc_detection_probability(const struct SpdcModel *model,
                                           uint32_t a_h,
                                           uint32_t a_v,
                                           uint32_t b_h,
                                           uint32_t b_v,
                                           double phi,
                                           double theta,
                                           double *probability);

// The nine four-fold probabilities, normalized, in the order 2002, 2011,
// 2020, 1102, 1111, 1120, 0202, 0211, 0220.
//
// # Safety
// `model` must be a live handle and `probabilities` must point to
// [`SPDC_FOURFOLD_PATTERNS`] writable doubles.
enum SpdcStatus spdc_fourfold(const struct SpdcModel *model,
                              double phi,
                              double theta,
                              double *probabilities);

// Fisher information of the normalized four-fold patterns.
//
// # Safety
// `model` must be a live handle and `fisher` writable.
enum SpdcStatus spdc_fourfold_fisher(const struct SpdcModel *model,
                                     double phi,
                                     double theta,
                                     double *fisher);

// Shot-noise Fisher information of the model's source.
//
// # Safety
// `model` must be a live handle and `snl` writable.
enum SpdcStatus spdc_snl(const struct SpdcModel *model, double *snl);

// Heralded Fisher information per photon, gated on at least `k` detected
// reference photons, maximized over the phase; the maximizer goes to `phi`
// when it is not null.
//
// # Safety
// `value` must be writable; `phi` may be null.
enum SpdcStatus spdc_herald_cell(double tau, double eta, uint32_t k, double *value, double *phi);

// Recover the gain and both efficiencies from phase-averaged rates.
//
// # Safety
// `result` must be writable.
enum SpdcStatus spdc_calibrate(double singles_a,
                               double singles_b,
                               double twofold,
                               uint32_t d,
                               struct SpdcCalibration *result);

// Chance that `c` photons on `d` equal detectors fire exactly `r` of them.
//
// # Safety
// `weight` must be writable.
enum SpdcStatus spdc_lossless_weight(uint32_t d, uint32_t r, uint32_t c, double *weight);

// Stirling number of the second kind `S(c, r)`.
//
// # Safety
// `value` must be writable.
enum SpdcStatus spdc_stirling2(uint32_t c, uint32_t r, uint64_t *value);

// Create a counter. With `first_click` non-zero each window opens at the
// first click outside the previous one; otherwise windows follow the pulse
// clock given by `period_ps` and `offset_ps`.
//
// # Safety
// `out_counter` must be writable.
enum SpdcStatus spdc_counter_new(uint64_t window_ps,
                                 uint64_t period_ps,
                                 uint64_t offset_ps,
                                 uint8_t first_click,
                                 struct SpdcCounter **out_counter);

// Feed one click; times must not decrease.
//
// # Safety
// `counter` must be a live handle.
enum SpdcStatus spdc_counter_push(struct SpdcCounter *counter, uint8_t channel, uint64_t time_ps);

// Close the last window. Pushing afterwards fails; counts become readable.
//
// # Safety
// `counter` must be a live handle.
enum SpdcStatus spdc_counter_finish(struct SpdcCounter *counter);

// Windows whose click pattern reduces to `(a_h, a_v, b_h, b_v)`.
//
// # Safety
// `counter` must be a live, finished handle and `count` writable.
enum SpdcStatus spdc_counter_pattern_count(const struct SpdcCounter *counter,
                                           uint32_t a_h,
                                           uint32_t a_v,
                                           uint32_t b_h,
                                           uint32_t b_v,
                                           uint64_t *count);

// Window totals of a finished counter. Any out-pointer may be null.
//
// # Safety
// `counter` must be a live, finished handle; non-null pointers writable.
enum SpdcStatus spdc_counter_totals(const struct SpdcCounter *counter,
                                    uint64_t *windows,
                                    uint64_t *records,
                                    uint64_t *duplicates,
                                    uint64_t *outside);

// Release a counter; null is ignored.
//
// # Safety
// `counter` must come from [`spdc_counter_new`] and not be used afterwards.
void spdc_counter_free(struct SpdcCounter *counter);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPDC_METROLOGY_H */
