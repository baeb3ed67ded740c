#ifndef ODDSTREAM_H
#define ODDSTREAM_H

/* Generated by cbindgen from the oddstream-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Memory action taken for a processed sample.
typedef enum OddsAugmentation {
  ODDS_AUGMENTATION_NONE = 0,
  ODDS_AUGMENTATION_AS_ID = 1,
  ODDS_AUGMENTATION_AS_OOD = 2,
} OddsAugmentation;

// Neighbor-score combinator.
typedef enum OddsCombinator {
  ODDS_COMBINATOR_K_AVG = 0,
  ODDS_COMBINATOR_K_TH = 1,
  ODDS_COMBINATOR_K_MEDIAN = 2,
} OddsCombinator;

// Result code of every C-ABI call.
typedef enum OddsStatus {
  ODDS_STATUS_OK = 0,
  ODDS_STATUS_NULL_POINTER = 1,
  ODDS_STATUS_INVALID_ARGUMENT = 2,
  ODDS_STATUS_DIMENSION_MISMATCH = 3,
  ODDS_STATUS_EMPTY_INPUT = 4,
  ODDS_STATUS_NUMERIC_ERROR = 5,
  ODDS_STATUS_INTERNAL_ERROR = 6,
} OddsStatus;

// ID/OOD verdict.
typedef enum OddsVerdict {
  ODDS_VERDICT_ID = 0,
  ODDS_VERDICT_OOD = 1,
} OddsVerdict;

// Opaque engine handle.
typedef struct OddsEngine OddsEngine;

// Engine parameters. `lambda` must be <= 0; `gamma` must be >= 1 or
// `INFINITY`; `kappa` must be >= 1.
typedef struct OddsConfig {
  size_t k;
  double lambda;
  double gamma;
  double kappa;
  enum OddsCombinator combinator;
  bool normalize;
  bool adapt;
} OddsConfig;

// One decision. `index` counts samples seen by `odds_engine_process`.
typedef struct OddsDecision {
  uint64_t index;
  double score;
  enum OddsVerdict verdict;
  enum OddsAugmentation augmentation;
  size_t bank_size_before;
} OddsDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an engine from `count` rows of `dim` doubles. On success writes
// the handle to `out`; free it with [`odds_engine_free`].
//
// # Safety
// `features` must point to `count * dim` readable doubles and `config`
// and `out` must be valid pointers.
enum OddsStatus odds_engine_new(const double *features,
                                size_t count,
                                size_t dim,
                                const struct OddsConfig *config,
                                struct OddsEngine **out);

// Releases an engine handle. Passing NULL is a no-op.
//
// # Safety
// `engine` must be a handle returned by [`odds_engine_new`] that has not
// already been freed.
void odds_engine_free(struct OddsEngine *engine);

// Scores `count` ID validation rows against the bank and installs the
// threshold at `tpr_target`. Writes the threshold to `lambda_out` when it
// is non-NULL.
//
// # Safety
// `engine` must be a live handle; `features` must point to `count * dim`
// doubles where `dim` is the engine's dimension.
enum OddsStatus odds_engine_calibrate(struct OddsEngine *engine,
                                      const double *features,
                                      size_t count,
                                      double tpr_target,
                                      double *lambda_out);

// Read-only decision for one sample; never mutates the bank and does not
// advance the stream index.
//
// # Safety
// `engine` must be a live handle; `sample` must point to `dim` doubles;
// `out` must be valid.
enum OddsStatus odds_engine_decide(const struct OddsEngine *engine,
                                   const double *sample,
                                   size_t dim,
                                   struct OddsDecision *out);

// Streams one sample: decide, then (when adaptation is enabled) apply the
// margin-gated augmentation, then advance the stream index.
//
// # Safety
// Same contract as [`odds_engine_decide`], plus exclusive access to the
// handle (a processed sample may mutate the bank).
enum OddsStatus odds_engine_process(struct OddsEngine *engine,
                                    const double *sample,
                                    size_t dim,
                                    struct OddsDecision *out);

// Scores one sample without deciding or mutating.
//
// # Safety
// Same pointer contract as [`odds_engine_decide`].
enum OddsStatus odds_engine_score(const struct OddsEngine *engine,
                                  const double *sample,
                                  size_t dim,
                                  double *score_out);

// Fraction of `count` ID validation rows still accepted by the current
// (possibly augmented) bank under the original threshold.
//
// # Safety
// `engine` must be a live handle; `features` must point to `count * dim`
// doubles where `dim` is the engine's dimension.
enum OddsStatus odds_engine_reevaluate_id(const struct OddsEngine *engine,
                                          const double *features,
                                          size_t count,
                                          double *accuracy_out);

// Current bank size (initial entries plus augmentations).
//
// # Safety
// `engine` must be a live handle and `out` a valid pointer.
enum OddsStatus odds_engine_bank_size(const struct OddsEngine *engine, size_t *out);

// Current decision threshold.
//
// # Safety
// `engine` must be a live handle and `out` a valid pointer.
enum OddsStatus odds_engine_lambda(const struct OddsEngine *engine, double *out);

// Static description of a status code.
const char *odds_status_message(enum OddsStatus status);

// Detail of the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *odds_last_error_message(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ODDSTREAM_H */
