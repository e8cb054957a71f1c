#ifndef REGIONSEL_H
#define REGIONSEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RegionselStatus {
  REGIONSEL_STATUS_OK = 0,
  REGIONSEL_STATUS_NULL_POINTER = 1,
  REGIONSEL_STATUS_INVALID_INPUT = 2,
  REGIONSEL_STATUS_PARSE = 3,
  REGIONSEL_STATUS_INFEASIBLE = 4,
  REGIONSEL_STATUS_CONFIG_OUT_OF_RANGE = 5,
  REGIONSEL_STATUS_DEGENERATE = 6,
  REGIONSEL_STATUS_IO = 7,
  REGIONSEL_STATUS_JSON = 8,
  REGIONSEL_STATUS_UTF8 = 9,
  REGIONSEL_STATUS_PANIC = 10,
} RegionselStatus;

/**
 * One sample of region indices.
 */
typedef struct RegionselDraw RegionselDraw;

/**
 * A region pool: per-region CPI under every configuration.
 */
typedef struct RegionselPool RegionselPool;

/**
 * Outcome of repeated subsampling.
 */
typedef struct RegionselReport RegionselReport;

/**
 * Point estimate for one configuration. Fields that are undefined for the
 * sample (the spread of a single region) are NaN.
 */
typedef struct RegionselEstimate {
  size_t config;
  size_t n;
  double mean;
  double std;
  double level;
  double half_width;
  double relative_me;
} RegionselEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *regionsel_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed at most once.
 */
void regionsel_string_free(char *s);

/**
 * Loads a CSV pool file (`region_id,<config labels...>` header).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RegionselStatus regionsel_pool_load_csv(const char *path, struct RegionselPool **out);

/**
 * Builds a pool from a row-major `rows x cols` matrix of CPI values.
 *
 * # Safety
 * `values` must point to `rows * cols` doubles; `app_label` may be NULL.
 */
enum RegionselStatus regionsel_pool_from_values(const char *app_label,
                                                const double *values,
                                                size_t rows,
                                                size_t cols,
                                                struct RegionselPool **out);

/**
 * Generates a synthetic pool from a JSON spec.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RegionselStatus regionsel_pool_generate(const char *spec_json,
                                             uint64_t seed,
                                             struct RegionselPool **out);

/**
 * # Safety
 * `pool` must be NULL or a handle from this library, freed at most once.
 */
void regionsel_pool_free(struct RegionselPool *pool);

/**
 * Number of regions; 0 for NULL.
 *
 * # Safety
 * `pool` must be NULL or a live handle.
 */
size_t regionsel_pool_region_count(const struct RegionselPool *pool);

/**
 * Number of configurations; 0 for NULL.
 *
 * # Safety
 * `pool` must be NULL or a live handle.
 */
size_t regionsel_pool_config_count(const struct RegionselPool *pool);

/**
 * # Safety
 * `pool` must be a live handle and `out` a valid pointer.
 */
enum RegionselStatus regionsel_pool_true_mean(const struct RegionselPool *pool,
                                              size_t config,
                                              double *out);

/**
 * Simple random sample of `n` distinct regions.
 *
 * # Safety
 * `pool` must be a live handle and `out` a valid pointer.
 */
enum RegionselStatus regionsel_draw_srs(const struct RegionselPool *pool,
                                        size_t n,
                                        uint64_t seed,
                                        struct RegionselDraw **out);

/**
 * Ranked set sample: `cycles` cycles of `set_size` sets, ranked by `ranking_config`.
 *
 * # Safety
 * `pool` must be a live handle and `out` a valid pointer.
 */
enum RegionselStatus regionsel_draw_rss(const struct RegionselPool *pool,
                                        size_t cycles,
                                        size_t set_size,
                                        size_t ranking_config,
                                        uint64_t seed,
                                        struct RegionselDraw **out);

/**
 * # Safety
 * `draw` must be NULL or a live handle.
 */
size_t regionsel_draw_len(const struct RegionselDraw *draw);

/**
 * Copies up to `capacity` region indices into `buf`; `written` receives the count.
 *
 * # Safety
 * `buf` must have room for `capacity` elements.
 */
enum RegionselStatus regionsel_draw_indices(const struct RegionselDraw *draw,
                                            size_t *buf,
                                            size_t capacity,
                                            size_t *written);

/**
 * JSON encoding of the draw; free with `regionsel_string_free`.
 *
 * # Safety
 * `draw` must be a live handle and `out` a valid pointer.
 */
enum RegionselStatus regionsel_draw_to_json(const struct RegionselDraw *draw, char **out);

/**
 * # Safety
 * `draw` must be NULL or a handle from this library, freed at most once.
 */
void regionsel_draw_free(struct RegionselDraw *draw);

/**
 * Mean and normal-approximation interval at `config` for a draw.
 *
 * # Safety
 * `pool` and `draw` must be live handles and `out` a valid pointer.
 */
enum RegionselStatus regionsel_point_estimate(const struct RegionselPool *pool,
                                              const struct RegionselDraw *draw,
                                              size_t config,
                                              double level,
                                              struct RegionselEstimate *out);

/**
 * Repeated subsampling. `scheme_json` is e.g. `{"kind":"srs","n":30}`;
 * `criterion_json` is e.g. `{"criterion":"chebyshev_relative","training_configs":[0,1,2]}`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `pool` a live handle; `out` valid.
 */
enum RegionselStatus regionsel_select_subsample(const struct RegionselPool *pool,
                                                const char *scheme_json,
                                                const char *criterion_json,
                                                size_t trials,
                                                uint64_t seed,
                                                struct RegionselReport **out);

/**
 * Index of the winning candidate; `usize::MAX` for NULL.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
size_t regionsel_report_winner_index(const struct RegionselReport *report);

/**
 * JSON encoding of the report; free with `regionsel_string_free`.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum RegionselStatus regionsel_report_to_json(const struct RegionselReport *report, char **out);

/**
 * # Safety
 * `report` must be NULL or a handle from this library, freed at most once.
 */
void regionsel_report_free(struct RegionselReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGIONSEL_H */
