#ifndef MFORGE_H
#define MFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of the C interface.
typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_ARGUMENT = 1,
  MF_STATUS_INVALID_INPUT = 2,
  MF_STATUS_PARSE = 3,
  MF_STATUS_UNATTAINABLE = 4,
  MF_STATUS_CONSTRUCTION = 5,
  MF_STATUS_PANIC = 6,
} MfStatus;

// A sampled `L^q` spectrum `tau`.
typedef struct MfLq MfLq;

// A symbolic measure built from a schedule.
typedef struct MfMeasure MfMeasure;

// A construction schedule.
typedef struct MfSchedule MfSchedule;

// A multifractal spectrum `f`.
typedef struct MfSpectrum MfSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *mf_last_error(void);

// Releases a string returned by the library.
//
// # Safety
// `s` must be null or a string obtained from this library, released once.
void mf_string_free(char *s);

// Parses a spectrum from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum MfStatus mf_spectrum_from_json(const char *json, struct MfSpectrum **out_spec);

// The tent through `(a, 0)`, `(peak, value)` and `(b, 0)` in dimension `d`.
//
// # Safety
// `out` must be a valid pointer.
enum MfStatus mf_spectrum_tent(double a,
                               double peak,
                               double b,
                               double value,
                               uintptr_t d,
                               struct MfSpectrum **out_spec);

// `f(alpha)`, with `-inf` off the domain.
//
// # Safety
// `spec` must be a live handle and `value` a valid pointer.
enum MfStatus mf_spectrum_eval(const struct MfSpectrum *spec, double alpha, double *value);

// # Safety
// `spec` must be null or a live handle, released once.
void mf_spectrum_free(struct MfSpectrum *spec);

// `f^*` sampled on the `n` values of `q`.
//
// # Safety
// `spec` must be a live handle, `q` must hold `n` doubles and `out` must be valid.
enum MfStatus mf_lq_from_spectrum(const struct MfSpectrum *spec,
                                  const double *q,
                                  uintptr_t n,
                                  struct MfLq **out_lq);

// `tau(q)` by linear interpolation on the grid.
//
// # Safety
// `lq` must be a live handle and `value` a valid pointer.
enum MfStatus mf_lq_eval(const struct MfLq *lq, double q, double *value);

// # Safety
// `lq` must be null or a live handle, released once.
void mf_lq_free(struct MfLq *lq);

// Schedules rounds `1..=m_max` for `f` alone (`g` null) or for the pair
// `(f, g)`, around the fixed point `d_fix`, with a named preset.
//
// # Safety
// `f` must be a live handle, `g` null or a live handle, `preset` a
// NUL-terminated string and `out` a valid pointer.
enum MfStatus mf_schedule_build(const struct MfSpectrum *f,
                                const struct MfSpectrum *g,
                                double d_fix,
                                uintptr_t m_max,
                                const char *preset,
                                struct MfSchedule **out_schedule);

// The schedule as JSON, released with [`mf_string_free`].
//
// # Safety
// `schedule` must be a live handle and `out` a valid pointer.
enum MfStatus mf_schedule_to_json(const struct MfSchedule *schedule, char **out_json);

// Generation `N_m` of round `m`.
//
// # Safety
// `schedule` must be a live handle and `n` a valid pointer.
enum MfStatus mf_schedule_round_generation(const struct MfSchedule *schedule,
                                           uintptr_t m,
                                           uint64_t *n);

// # Safety
// `schedule` must be null or a live handle, released once.
void mf_schedule_free(struct MfSchedule *schedule);

// Builds the measure described by a schedule.
//
// # Safety
// `schedule` must be a live handle and `out` a valid pointer.
enum MfStatus mf_measure_build(const struct MfSchedule *schedule, struct MfMeasure **out_measure);

// Number of stages.
//
// # Safety
// `measure` must be a live handle and `count` a valid pointer.
enum MfStatus mf_measure_stage_count(const struct MfMeasure *measure, uintptr_t *count);

// Generation reached after stage `s`.
//
// # Safety
// `measure` must be a live handle and `n` a valid pointer.
enum MfStatus mf_measure_generation(const struct MfMeasure *measure, uintptr_t s, uint64_t *n);

// `log2` of the partition function `sum mu(I)^q` over the cubes of stage `s`.
//
// # Safety
// `measure` must be a live handle and `value` a valid pointer.
enum MfStatus mf_measure_log2_partition(const struct MfMeasure *measure,
                                        double q,
                                        uintptr_t s,
                                        double *value);

// # Safety
// `measure` must be null or a live handle, released once.
void mf_measure_free(struct MfMeasure *measure);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFORGE_H */
