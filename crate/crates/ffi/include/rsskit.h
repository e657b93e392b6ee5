#ifndef RSSKIT_H
#define RSSKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum RsskitStatus {
  RSSKIT_STATUS_OK = 0,
  RSSKIT_STATUS_INVALID_ARGUMENT = 1,
  RSSKIT_STATUS_INFEASIBLE = 2,
  RSSKIT_STATUS_NUMERIC_FAILURE = 3,
  RSSKIT_STATUS_BUDGET_EXCEEDED = 4,
  RSSKIT_STATUS_IO = 5,
  RSSKIT_STATUS_PARSE = 6,
  RSSKIT_STATUS_NULL_POINTER = 7,
  RSSKIT_STATUS_PANIC = 8,
} RsskitStatus;

typedef enum RsskitDistribution {
  RSSKIT_DISTRIBUTION_NORMAL = 0,
  RSSKIT_DISTRIBUTION_UNIFORM = 1,
  RSSKIT_DISTRIBUTION_EXPONENTIAL = 2,
  RSSKIT_DISTRIBUTION_BETA52 = 3,
} RsskitDistribution;

typedef enum RsskitDesign {
  RSSKIT_DESIGN_SRS = 0,
  RSSKIT_DESIGN_LEVEL0 = 1,
  RSSKIT_DESIGN_LEVEL1 = 2,
  RSSKIT_DESIGN_LEVEL2 = 3,
} RsskitDesign;

typedef enum RsskitMethod {
  // Closed form or exact recursion when available, Monte Carlo otherwise.
  RSSKIT_METHOD_AUTO = 0,
  RSSKIT_METHOD_CLOSED = 1,
  RSSKIT_METHOD_EXACT = 2,
  RSSKIT_METHOD_MONTE_CARLO = 3,
} RsskitMethod;

typedef enum RsskitRanking {
  RSSKIT_RANKING_PERFECT = 0,
  RSSKIT_RANKING_AUXILIARY = 1,
} RsskitRanking;

// An estimated distribution function.
typedef struct RsskitEdf RsskitEdf;

// A finite population sorted by the study variable.
typedef struct RsskitPopulation RsskitPopulation;

// A drawn or imported sample.
typedef struct RsskitSample RsskitSample;

// First- and second-order inclusion probabilities of one design.
typedef struct RsskitTable RsskitTable;

// Confidence interval for the population median.
typedef struct RsskitMedianCi {
  double median;
  double v_hat;
  double c1;
  double c2;
  double lower;
  double upper;
} RsskitMedianCi;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rsskit_version(void);

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length
// including the terminator, so a call with `len = 0` sizes the buffer.
//
// # Safety
// `buf` must be valid for `len` bytes or null with `len = 0`.
uintptr_t rsskit_last_error_message(char *buf, uintptr_t len);

// Quantile-grid population of size `n` from a reference distribution.
//
// # Safety
// `out` must be a valid pointer.
enum RsskitStatus rsskit_population_grid(uintptr_t n,
                                         enum RsskitDistribution dist,
                                         struct RsskitPopulation **out);

// Population from arbitrary study values (sorted internally).
//
// # Safety
// `values` must hold `len` doubles; `out` must be valid.
enum RsskitStatus rsskit_population_from_values(const double *values,
                                                uintptr_t len,
                                                struct RsskitPopulation **out);

// Copy of `pop` with an auxiliary ranking variable of correlation `rho`.
//
// # Safety
// `pop` and `out` must be valid.
enum RsskitStatus rsskit_population_with_auxiliary(const struct RsskitPopulation *pop,
                                                   double rho,
                                                   uint64_t seed,
                                                   struct RsskitPopulation **out);

// Number of units, or 0 for a null handle.
//
// # Safety
// `pop` must be valid or null.
uintptr_t rsskit_population_len(const struct RsskitPopulation *pop);

// Study value of the unit with rank `id` (1-based).
//
// # Safety
// `pop` and `out` must be valid.
enum RsskitStatus rsskit_population_value(const struct RsskitPopulation *pop,
                                          uintptr_t id,
                                          double *out);

// # Safety
// `pop` must come from this library and not be used afterwards.
void rsskit_population_free(struct RsskitPopulation *pop);

// Inclusion table for a balanced design (`m` cycles of ranks 1..k; for SRS
// the sample size is `k·m`).
//
// # Safety
// `out` must be valid.
enum RsskitStatus rsskit_inclusion_table(uintptr_t n_pop,
                                         enum RsskitDesign design,
                                         uintptr_t k,
                                         uintptr_t m,
                                         enum RsskitMethod method,
                                         uint64_t reps,
                                         uint64_t seed,
                                         struct RsskitTable **out);

// Population size covered by the table, or 0 for a null handle.
//
// # Safety
// `table` must be valid or null.
uintptr_t rsskit_table_population_size(const struct RsskitTable *table);

// π_i for population rank `i`.
//
// # Safety
// `table` and `out` must be valid.
enum RsskitStatus rsskit_table_first_order(const struct RsskitTable *table,
                                           uintptr_t i,
                                           double *out);

// π_ij for population ranks `i`, `j` (π_ii = π_i).
//
// # Safety
// `table` and `out` must be valid.
enum RsskitStatus rsskit_table_second_order(const struct RsskitTable *table,
                                            uintptr_t i,
                                            uintptr_t j,
                                            double *out);

// # Safety
// `table` must come from this library and not be used afterwards.
void rsskit_table_free(struct RsskitTable *table);

// Draws a balanced sample from `pop`.
//
// # Safety
// `pop` and `out` must be valid.
enum RsskitStatus rsskit_sample_draw(const struct RsskitPopulation *pop,
                                     enum RsskitDesign design,
                                     uintptr_t k,
                                     uintptr_t m,
                                     enum RsskitRanking ranking,
                                     uint64_t seed,
                                     struct RsskitSample **out);

// Sample from field measurements in set order. `ranks` gives each
// measured unit's population rank; pass null to use plug-in ranks from
// the values and `n_pop`.
//
// # Safety
// `values` (and `ranks` when non-null) must hold `len` elements; `out`
// must be valid.
enum RsskitStatus rsskit_sample_from_values(enum RsskitDesign design,
                                            uintptr_t k,
                                            uintptr_t m,
                                            uintptr_t n_pop,
                                            const double *values,
                                            const uintptr_t *ranks,
                                            uintptr_t len,
                                            struct RsskitSample **out);

// Number of measurements, or 0 for a null handle.
//
// # Safety
// `sample` must be valid or null.
uintptr_t rsskit_sample_len(const struct RsskitSample *sample);

// Copies the measured values (set order) into `buf`, which must hold
// `rsskit_sample_len` doubles.
//
// # Safety
// `sample` must be valid and `buf` writable for `len` doubles.
enum RsskitStatus rsskit_sample_values(const struct RsskitSample *sample,
                                       double *buf,
                                       uintptr_t len);

// # Safety
// `sample` must come from this library and not be used afterwards.
void rsskit_sample_free(struct RsskitSample *sample);

// Hájek estimate of the distribution function.
//
// # Safety
// All pointers must be valid.
enum RsskitStatus rsskit_edf_hajek(const struct RsskitSample *sample,
                                   const struct RsskitTable *table,
                                   struct RsskitEdf **out);

// F̂(x).
//
// # Safety
// `edf` and `out` must be valid.
enum RsskitStatus rsskit_edf_eval(const struct RsskitEdf *edf, double x, double *out);

// F̂⁻¹(p), by step inversion or linear interpolation.
//
// # Safety
// `edf` and `out` must be valid.
enum RsskitStatus rsskit_edf_quantile(const struct RsskitEdf *edf,
                                      double p,
                                      bool interpolate,
                                      double *out);

// # Safety
// `edf` must come from this library and not be used afterwards.
void rsskit_edf_free(struct RsskitEdf *edf);

// Sen-Yates-Grundy variance estimate of F̂(x); may be negative.
//
// # Safety
// All pointers must be valid.
enum RsskitStatus rsskit_variance_estimate(const struct RsskitSample *sample,
                                           const struct RsskitTable *table,
                                           double x,
                                           double *out);

// Design variance of F̂(x) for a known population.
//
// # Safety
// All pointers must be valid.
enum RsskitStatus rsskit_true_variance(const struct RsskitPopulation *pop,
                                       const struct RsskitTable *table,
                                       double x,
                                       double *out);

// Confidence interval for the median at level 1 − alpha.
//
// # Safety
// All pointers must be valid.
enum RsskitStatus rsskit_median_ci(const struct RsskitSample *sample,
                                   const struct RsskitTable *table,
                                   double alpha,
                                   bool interpolate,
                                   struct RsskitMedianCi *out);

// Loads an inclusion table written by `rsskit inclusion`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum RsskitStatus rsskit_table_read_json(const char *path, struct RsskitTable **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSSKIT_H */
