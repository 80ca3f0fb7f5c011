#ifndef GAMESKILL_H
#define GAMESKILL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_ARGUMENT = 2,
  GS_STATUS_IO = 3,
  GS_STATUS_HEADER_MISMATCH = 4,
  GS_STATUS_INSUFFICIENT_COHORT = 5,
  GS_STATUS_ANALYSIS_FAILED = 6,
  GS_STATUS_CONFIG_INVALID = 7,
  GS_STATUS_PANIC = 8,
} GsStatus;

typedef enum GsGame {
  GS_GAME_POKER = 0,
  GS_GAME_RUMMY = 1,
} GsGame;

typedef enum GsVerdict {
  GS_VERDICT_SKILL_DOMINANT = 0,
  GS_VERDICT_CHANCE_DOMINANT = 1,
  GS_VERDICT_INCONCLUSIVE = 2,
} GsVerdict;

/**
 * A parsed log plus its ingest statistics.
 */
typedef struct GsDataset GsDataset;

/**
 * The result of one analysis.
 */
typedef struct GsReport GsReport;

typedef struct GsIngestStats {
  uint64_t rows_read;
  uint64_t rows_accepted;
  uint64_t rows_rejected;
} GsIngestStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next gameskill call on the same thread.
 */
const char *gs_last_error_message(void);

/**
 * Reads a CSV log file of `game` into a new dataset.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum GsStatus gs_dataset_load(enum GsGame game, const char *path, struct GsDataset **out);

/**
 * Parses an in-memory CSV log of `game` into a new dataset.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be valid.
 */
enum GsStatus gs_dataset_load_buffer(enum GsGame game,
                                     const uint8_t *data,
                                     size_t len,
                                     struct GsDataset **out);

/**
 * # Safety
 * `dataset` and `out` must be valid pointers.
 */
enum GsStatus gs_dataset_stats(const struct GsDataset *dataset, struct GsIngestStats *out);

/**
 * # Safety
 * `dataset` must be null or a pointer returned by a `gs_dataset_load*`
 * function that has not been freed yet.
 */
void gs_dataset_free(struct GsDataset *dataset);

/**
 * Runs the analysis. `config_json` may be null for defaults; otherwise
 * it is a JSON object whose missing keys keep their defaults.
 *
 * # Safety
 * `dataset` and `out` must be valid; `config_json` null or NUL-terminated.
 */
enum GsStatus gs_analyze(const struct GsDataset *dataset,
                         const char *config_json,
                         struct GsReport **out);

/**
 * # Safety
 * `report` and `out` must be valid pointers.
 */
enum GsStatus gs_report_verdict(const struct GsReport *report, enum GsVerdict *out);

/**
 * Persistence correlation r of the report.
 *
 * # Safety
 * `report` and `out` must be valid pointers.
 */
enum GsStatus gs_report_persistence_r(const struct GsReport *report, double *out);

/**
 * The report as the same JSON document the CLI writes to verdict.json.
 * Release the string with [`gs_string_free`].
 *
 * # Safety
 * `report` and `out` must be valid pointers.
 */
enum GsStatus gs_report_to_json(const struct GsReport *report, char **out);

/**
 * # Safety
 * `report` must be null or an unfreed pointer from [`gs_analyze`].
 */
void gs_report_free(struct GsReport *report);

/**
 * # Safety
 * `s` must be null or an unfreed string returned by this library.
 */
void gs_string_free(char *s);

/**
 * Standard normal quantile Φ⁻¹(p) for 0 < p < 1.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GsStatus gs_theoretical_quantile(double p, double *out);

/**
 * Pearson correlation of two arrays of length `n`.
 *
 * # Safety
 * `xs` and `ys` must each point to `n` readable doubles; `out` must be valid.
 */
enum GsStatus gs_pearson(const double *xs, const double *ys, size_t n, double *out);

/**
 * Runs the simulator and writes `<game>.csv` and `ground_truth.json` into
 * `out_dir`. `config_json` may be null for defaults.
 *
 * # Safety
 * `out_dir` must be NUL-terminated; `config_json` null or NUL-terminated.
 */
enum GsStatus gs_simulate_to_files(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMESKILL_H */
