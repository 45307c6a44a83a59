#ifndef LDS_BANDIT_H
#define LDS_BANDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LdsStatus {
  LDS_STATUS_OK = 0,
  LDS_STATUS_NULL_POINTER = 1,
  LDS_STATUS_INVALID_INPUT = 2,
  LDS_STATUS_NUMERICAL = 3,
  LDS_STATUS_NON_CONVERGENCE = 4,
  LDS_STATUS_INVALID_STATE = 5,
  LDS_STATUS_CONSTRUCTION = 6,
  LDS_STATUS_IO = 7,
  LDS_STATUS_SERIALIZATION = 8,
  LDS_STATUS_PLOT = 9,
  LDS_STATUS_BUFFER_TOO_SMALL = 10,
  LDS_STATUS_PANIC = 11,
} LdsStatus;

typedef struct LdsSbEtc LdsSbEtc;

typedef struct LdsSimulator LdsSimulator;

typedef struct LdsSystem LdsSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *lds_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lds_string_free(char *s);

/**
 * Parse a system from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LdsStatus lds_system_from_json(const char *json, struct LdsSystem **out);

/**
 * Build the trading system. `spec_json` may be null for the defaults.
 *
 * # Safety
 * `spec_json` must be null or a NUL-terminated string; `out` must be writable.
 */
enum LdsStatus lds_system_trading(const char *spec_json, struct LdsSystem **out);

/**
 * State, context and arm counts.
 *
 * # Safety
 * `system` must be a live handle; the outputs must be writable.
 */
enum LdsStatus lds_system_dims(const struct LdsSystem *system,
                               size_t *state_dim,
                               size_t *context_dim,
                               size_t *num_actions);

/**
 * Serialize to JSON; release the result with [`lds_string_free`].
 *
 * # Safety
 * `system` must be a live handle; `out` must be writable.
 */
enum LdsStatus lds_system_to_json(const struct LdsSystem *system, char **out);

/**
 * # Safety
 * `system` must be null or a handle not yet freed.
 */
void lds_system_free(struct LdsSystem *system);

/**
 * Start a trajectory on stream `(seed, run)`. The simulator keeps its own
 * reference to the system.
 *
 * # Safety
 * `system` must be a live handle; `out` must be writable.
 */
enum LdsStatus lds_simulator_new(const struct LdsSystem *system,
                                 uint64_t seed,
                                 uint64_t run,
                                 struct LdsSimulator **out);

/**
 * Play `arm` for one round. Writes the context (`context_len` must equal the
 * context dimension), the reward, and the round's instantaneous regret.
 *
 * # Safety
 * `sim` must be a live handle; `context` must have room for `context_len`
 * doubles; `reward` and `regret` must be writable or null.
 */
enum LdsStatus lds_simulator_step(struct LdsSimulator *sim,
                                  size_t arm,
                                  double *context,
                                  size_t context_len,
                                  double *reward,
                                  double *regret);

/**
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void lds_simulator_free(struct LdsSimulator *sim);

/**
 * # Safety
 * `out` must be writable.
 */
enum LdsStatus lds_sbetc_new(size_t k, size_t m, size_t s, double lambda, struct LdsSbEtc **out);

/**
 * # Safety
 * `policy` must be a live handle; `arm` must be writable.
 */
enum LdsStatus lds_sbetc_choose(const struct LdsSbEtc *policy, size_t *arm);

/**
 * # Safety
 * `policy` must be a live handle; `context` must point to `context_len`
 * doubles.
 */
enum LdsStatus lds_sbetc_update(struct LdsSbEtc *policy,
                                const double *context,
                                size_t context_len,
                                size_t arm,
                                double reward);

/**
 * Copy arm `arm`'s current estimate `Ĝ_a` (length `m·s + 1`) into `out`.
 *
 * # Safety
 * `policy` must be a live handle; `out` must have room for `len` doubles.
 */
enum LdsStatus lds_sbetc_estimate(const struct LdsSbEtc *policy,
                                  size_t arm,
                                  double *out,
                                  size_t len);

/**
 * # Safety
 * `policy` must be null or a handle not yet freed.
 */
void lds_sbetc_free(struct LdsSbEtc *policy);

/**
 * Run an experiment from a JSON config and return the aggregated curves as
 * JSON: `{"curves": [{"policy", "runs", "inst_mean", "inst_se",
 * "cum_mean"}], "checksums": [...]}`. Nothing is written to disk.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum LdsStatus lds_run_experiment_json(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LDS_BANDIT_H */
