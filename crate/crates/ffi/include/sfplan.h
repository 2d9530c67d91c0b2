#ifndef SFPLAN_H
#define SFPLAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Use the configuration's environment.
 */
#define SFPLAN_ENV_CONFIG 0

#define SFPLAN_ENV_OPEN_LOS 1

#define SFPLAN_ENV_SEMI_RURAL_LOS 2

#define SFPLAN_ENV_COASTAL_LOS 3

#define SFPLAN_ENV_OBSTRUCTED_LOS 4

typedef enum SfplanStatus {
  SFPLAN_STATUS_OK = 0,
  SFPLAN_STATUS_NULL_POINTER = 1,
  SFPLAN_STATUS_INVALID_ARGUMENT = 2,
  SFPLAN_STATUS_INVALID_CONFIG = 3,
  SFPLAN_STATUS_NO_FEASIBLE_SF = 4,
  SFPLAN_STATUS_IO = 5,
  SFPLAN_STATUS_PARSE = 6,
  SFPLAN_STATUS_PANIC = 7,
} SfplanStatus;

/**
 * Planner configuration.
 */
typedef struct SfplanConfig SfplanConfig;

/**
 * Result of [`sfplan_select`].
 */
typedef struct SfplanSelection SfplanSelection;

/**
 * One planning case. A negative `required_throughput` means none.
 */
typedef struct SfplanScenario {
  /**
   * m
   */
  double distance;
  /**
   * m/s
   */
  double speed;
  uint32_t payload_bytes;
  double packets_per_hour;
  /**
   * bits/s
   */
  double required_throughput;
  /**
   * One of the `SFPLAN_ENV_*` constants.
   */
  uint32_t environment;
} SfplanScenario;

typedef struct SfplanSimOutcome {
  uint8_t sf;
  uint64_t packets_sent;
  uint64_t packets_delivered;
  double pdr;
  /**
   * s
   */
  double airtime_used;
  uint64_t seed;
} SfplanSimOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default configuration. Never null.
 */
struct SfplanConfig *sfplan_config_new_default(void);

/**
 * Loads a TOML (or `.json`) configuration file.
 */
enum SfplanStatus sfplan_config_from_file(const char *path, struct SfplanConfig **out_config);

void sfplan_config_free(struct SfplanConfig *config);

/**
 * Packet duration in seconds.
 */
enum SfplanStatus sfplan_time_on_air(const struct SfplanConfig *config,
                                     uint8_t sf_value,
                                     uint32_t payload_bytes,
                                     double *out_seconds);

/**
 * Runs the selector. On success `*out_selection` owns a new handle.
 */
enum SfplanStatus sfplan_select(const struct SfplanConfig *config,
                                const struct SfplanScenario *scenario_in,
                                struct SfplanSelection **out_selection);

enum SfplanStatus sfplan_selection_chosen(const struct SfplanSelection *selection, uint8_t *out_sf);

/**
 * Total score of `sf`; `InvalidArgument` when `sf` was excluded.
 */
enum SfplanStatus sfplan_selection_score(const struct SfplanSelection *selection,
                                         uint8_t sf_value,
                                         double *out_score);

enum SfplanStatus sfplan_selection_is_excluded(const struct SfplanSelection *selection,
                                               uint8_t sf_value,
                                               bool *out_excluded);

/**
 * JSON form of the selection. Free with [`sfplan_string_free`].
 */
enum SfplanStatus sfplan_selection_to_json(const struct SfplanSelection *selection,
                                           char **out_json);

void sfplan_selection_free(struct SfplanSelection *selection);

void sfplan_string_free(char *s);

/**
 * Simulates `n_packets` at one SF along the scenario's default trace.
 */
enum SfplanStatus sfplan_simulate_link(const struct SfplanConfig *config,
                                       const struct SfplanScenario *scenario_in,
                                       uint8_t sf_value,
                                       uint64_t seed,
                                       uint32_t n_packets,
                                       struct SfplanSimOutcome *out_outcome);

/**
 * Simulates all six SFs. `out_outcomes` may be null or point to six
 * writable elements, SF7 first.
 */
enum SfplanStatus sfplan_brute_force_best_sf(const struct SfplanConfig *config,
                                             const struct SfplanScenario *scenario_in,
                                             uint64_t seed,
                                             uint32_t n_packets,
                                             uint8_t *out_best,
                                             struct SfplanSimOutcome *out_outcomes);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *sfplan_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *sfplan_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SFPLAN_H */
