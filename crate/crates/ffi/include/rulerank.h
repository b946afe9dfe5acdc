#ifndef RULERANK_H
#define RULERANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RrStatus {
  RR_STATUS_OK = 0,
  RR_STATUS_NULL_POINTER = 1,
  RR_STATUS_INVALID_UTF8 = 2,
  RR_STATUS_PARSE = 3,
  RR_STATUS_VALIDATION = 4,
  RR_STATUS_CONFIG = 5,
  RR_STATUS_UNKNOWN_RULE = 6,
  RR_STATUS_DIMENSION_MISMATCH = 7,
  RR_STATUS_EMPTY_CANDIDATES = 8,
  RR_STATUS_MISSING_CANDIDATES = 9,
  RR_STATUS_IO = 10,
  // Any other core error; see the message.
  RR_STATUS_FAILED = 11,
  RR_STATUS_PANIC = 12,
} RrStatus;

typedef enum RrStrategy {
  RR_STRATEGY_LEXICOGRAPHIC = 0,
  RR_STRATEGY_SCALARIZED = 1,
  RR_STRATEGY_WEIGHTED_SUM = 2,
  RR_STRATEGY_CONFIDENCE_ONLY = 3,
} RrStrategy;

// Configuration and rulebook shared by calls.
typedef struct RrEngine RrEngine;

// A parsed scenario document with its candidate set.
typedef struct RrScenario RrScenario;

// Outcome of a selection.
typedef struct RrSelection {
  // Zero-based index into the candidate set.
  size_t selected;
  // True when the selected candidate still violates a safety rule.
  bool infeasible;
  // Safety, legal, road, comfort.
  double tier_scores[4];
} RrSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a success.
// Valid until the next call on the same thread.
const char *rr_last_error(void);

// Library version as a static NUL-terminated string.
const char *rr_version(void);

// Creates an engine from a JSON config string. Null selects the defaults.
//
// # Safety
// `config_json` must be null or a NUL-terminated string; `out` must be writable.
enum RrStatus rr_engine_new(const char *config_json, struct RrEngine **out);

// # Safety
// `engine` must be null or a handle from [`rr_engine_new`] not yet freed.
void rr_engine_free(struct RrEngine *engine);

// Parses a scenario document carrying candidates.
//
// # Safety
// `json` must point to `len` readable bytes; `out` must be writable.
enum RrStatus rr_scenario_load(const uint8_t *json, size_t len, struct RrScenario **out);

// # Safety
// `scenario` must be null or a handle from [`rr_scenario_load`] not yet freed.
void rr_scenario_free(struct RrScenario *scenario);

// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum RrStatus rr_scenario_candidate_count(const struct RrScenario *scenario, size_t *out);

// Evaluates the candidates under the activation-derived mask and selects
// one with `strategy`.
//
// # Safety
// `engine` and `scenario` must be live handles; `out` must be writable.
enum RrStatus rr_select(const struct RrEngine *engine,
                        const struct RrScenario *scenario,
                        enum RrStrategy strategy,
                        struct RrSelection *out);

// Full evaluation (severities, tier scores, activation trace) as JSON.
// Release the string with [`rr_string_free`].
//
// # Safety
// `engine` and `scenario` must be live handles; `out` must be writable.
enum RrStatus rr_evaluate_json(const struct RrEngine *engine,
                               const struct RrScenario *scenario,
                               char **out);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void rr_string_free(char *s);

// Runs the property suite; `all_passed` receives the verdict.
//
// # Safety
// `all_passed` must be writable.
enum RrStatus rr_verify(uint64_t seed, size_t instances, bool *all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RULERANK_H */
