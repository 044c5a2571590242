/* C ABI for the detcost detection-network cost analyzer. */

#ifndef DETCOST_H
#define DETCOST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible API call.
 */
typedef enum DetcostStatus {
  DETCOST_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DETCOST_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  DETCOST_STATUS_INVALID_UTF8 = 2,
  /**
   * A JSON document failed to parse.
   */
  DETCOST_STATUS_PARSE_ERROR = 3,
  /**
   * The configuration violates a model invariant.
   */
  DETCOST_STATUS_INVALID_CONFIG = 4,
  /**
   * Graph construction or costing failed.
   */
  DETCOST_STATUS_BUILD_ERROR = 5,
  /**
   * An internal invariant failed; report this as a bug.
   */
  DETCOST_STATUS_INTERNAL_ERROR = 6,
} DetcostStatus;

/**
 * Opaque handle for a validated model configuration.
 */
typedef struct DetcostConfig DetcostConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Looks up a built-in preset (`baseline-800`, `lw-v2-reg`, `lw-v3-reg`,
 * `lw-v3-both`, `lw-v3-both-pred`) and returns a new config handle.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum DetcostStatus detcost_config_preset(const char *name, struct DetcostConfig **out);

/**
 * Parses and validates a config JSON document into a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum DetcostStatus detcost_config_from_json(const char *json, struct DetcostConfig **out);

/**
 * Serializes a config handle back to JSON.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be a valid pointer.
 */
enum DetcostStatus detcost_config_to_json(const struct DetcostConfig *cfg, char **out);

/**
 * Applies a transform document (one JSON object or an array, applied left
 * to right) and returns the rewritten config as a new handle.
 *
 * # Safety
 * `cfg` must be a live handle; `transforms_json` must be NUL-terminated;
 * `out` must be a valid pointer.
 */
enum DetcostStatus detcost_config_apply_transforms(const struct DetcostConfig *cfg,
                                                   const char *transforms_json,
                                                   struct DetcostConfig **out);

/**
 * Releases a config handle. Null is ignored.
 *
 * # Safety
 * `cfg` must be null or a handle produced by this library, not yet freed.
 */
void detcost_config_free(struct DetcostConfig *cfg);

/**
 * Builds the network and returns the full cost report as JSON
 * (`per_node`, `per_block`, `totals`, `block_fractions`).
 *
 * # Safety
 * `cfg` must be a live handle; `out_json` must be a valid pointer.
 */
enum DetcostStatus detcost_profile_json(const struct DetcostConfig *cfg,
                                        bool include_elementwise,
                                        char **out_json);

/**
 * Like [`detcost_profile_json`] but returns the per-block CSV
 * (`block,branch,macs,params,fraction`).
 *
 * # Safety
 * `cfg` must be a live handle; `out_csv` must be a valid pointer.
 */
enum DetcostStatus detcost_profile_csv(const struct DetcostConfig *cfg, char **out_csv);

/**
 * Total multiply-accumulates and deduplicated parameters for a config.
 * Either output pointer may be null if that total is not wanted.
 *
 * # Safety
 * `cfg` must be a live handle; non-null outputs must be valid pointers.
 */
enum DetcostStatus detcost_totals(const struct DetcostConfig *cfg,
                                  uint64_t *out_macs,
                                  uint64_t *out_params);

/**
 * Sharing-aware relative parameter change from `before` to `after`.
 *
 * # Safety
 * Both handles must be live; `out` must be a valid pointer.
 */
enum DetcostStatus detcost_param_overhead(const struct DetcostConfig *before,
                                          const struct DetcostConfig *after,
                                          double *out);

/**
 * Renders the per-block MAC/parameter distribution as a standalone SVG.
 *
 * # Safety
 * `cfg` must be a live handle; `out_svg` must be a valid pointer.
 */
enum DetcostStatus detcost_distribution_svg(const struct DetcostConfig *cfg, char **out_svg);

/**
 * Returns a copy of the current thread's last error message, or null when
 * the previous call succeeded. Release with [`detcost_string_free`].
 */
char *detcost_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string produced by this library, not yet freed.
 */
void detcost_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DETCOST_H */
