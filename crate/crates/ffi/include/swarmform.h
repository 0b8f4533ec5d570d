#ifndef SWARMFORM_H
#define SWARMFORM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Polygon is degenerate, self-intersecting or yields no points.
   */
  SF_STATUS_GEOMETRY = 3,
  SF_STATUS_PARSE = 4,
  SF_STATUS_CONFIG = 5,
  /**
   * A mass or estimate left its domain (e.g. became non-positive).
   */
  SF_STATUS_DOMAIN = 6,
  SF_STATUS_UNKNOWN_ROBOT = 7,
  SF_STATUS_IO = 8,
  SF_STATUS_BUFFER_TOO_SMALL = 9,
  SF_STATUS_PANIC = 10,
} SfStatus;

/**
 * Sample-point set handle.
 */
typedef struct SfShape SfShape;

/**
 * Simulation handle.
 */
typedef struct SfSimulation SfSimulation;

/**
 * Evaluation metrics at one instant.
 */
typedef struct SfMetrics {
  double t;
  size_t n;
  bool provisional;
  double f;
  double f_max;
  double f_uni;
  double f_est;
  double e_est;
  double m_uni;
  double m_cover;
  bool connected;
  double min_distance;
} SfMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sf_last_error_message(void);

/**
 * Discretizes a simple polygon given as `vertex_count` interleaved `x, y` pairs.
 *
 * # Safety
 * `vertices` must point to `2 * vertex_count` doubles; `out` must be writable.
 */
enum SfStatus sf_shape_from_polygon(const double *vertices,
                                    size_t vertex_count,
                                    double spacing,
                                    struct SfShape **out);

/**
 * Builds a shape from `count` points of dimension `dim`, row-major.
 *
 * # Safety
 * `coords` must point to `count * dim` doubles; `out` must be writable.
 */
enum SfStatus sf_shape_from_points(const double *coords,
                                   size_t count,
                                   size_t dim,
                                   struct SfShape **out);

/**
 * Loads a sample-point file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SfStatus sf_shape_load(const char *path, struct SfShape **out);

/**
 * Number of sample points; 0 for a null handle.
 *
 * # Safety
 * `shape` must be null or a live handle.
 */
size_t sf_shape_len(const struct SfShape *shape);

/**
 * # Safety
 * `shape` must be null or a live handle.
 */
size_t sf_shape_dim(const struct SfShape *shape);

/**
 * Inter-point spacing `d_pts`; NaN for a null handle.
 *
 * # Safety
 * `shape` must be null or a live handle.
 */
double sf_shape_spacing(const struct SfShape *shape);

/**
 * Copies the sample points, row-major, into `out` (`len * dim` doubles).
 *
 * # Safety
 * `shape` must be a live handle; `out` must hold `capacity` doubles.
 */
enum SfStatus sf_shape_points(const struct SfShape *shape, double *out, size_t capacity);

/**
 * # Safety
 * `shape` must be null or a handle not yet freed.
 */
void sf_shape_free(struct SfShape *shape);

/**
 * Creates a simulation from a TOML config (null for defaults) and a shape.
 * The shape is copied; the handle may be freed afterwards.
 *
 * # Safety
 * `config_toml` must be null or NUL-terminated; `shape` a live handle; `out` writable.
 */
enum SfStatus sf_simulation_new(const char *config_toml,
                                const struct SfShape *shape,
                                struct SfSimulation **out);

/**
 * Advances `steps` control periods.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum SfStatus sf_simulation_step(struct SfSimulation *sim, size_t steps);

/**
 * Simulated time in seconds; NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double sf_simulation_time(const struct SfSimulation *sim);

/**
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t sf_simulation_robot_count(const struct SfSimulation *sim);

/**
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t sf_simulation_dim(const struct SfSimulation *sim);

/**
 * Copies robot positions, row-major (`robot_count * dim` doubles).
 *
 * # Safety
 * `sim` must be a live handle; `out` must hold `capacity` doubles.
 */
enum SfStatus sf_simulation_positions(const struct SfSimulation *sim, double *out, size_t capacity);

/**
 * Copies the stable robot ids (`robot_count` values).
 *
 * # Safety
 * `sim` must be a live handle; `out` must hold `capacity` values.
 */
enum SfStatus sf_simulation_ids(const struct SfSimulation *sim, uint64_t *out, size_t capacity);

/**
 * Evaluates the metrics at the current state.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum SfStatus sf_simulation_metrics(struct SfSimulation *sim, struct SfMetrics *out);

/**
 * Adds `count` robots at the given positions (row-major) and resets the estimator.
 *
 * # Safety
 * `sim` must be a live handle; `coords` must hold `count * dim` doubles.
 */
enum SfStatus sf_simulation_add_robots(struct SfSimulation *sim,
                                       const double *coords,
                                       size_t count);

/**
 * Removes robots by id and resets the estimator. Nothing changes on error.
 *
 * # Safety
 * `sim` must be a live handle; `ids` must hold `count` values.
 */
enum SfStatus sf_simulation_remove_robots(struct SfSimulation *sim,
                                          const uint64_t *ids,
                                          size_t count);

/**
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void sf_simulation_free(struct SfSimulation *sim);

/**
 * Selects a kernel bandwidth for `robots` robots on `shape` by
 * deterministic annealing with the default schedule.
 *
 * # Safety
 * `shape` must be a live handle; `beta_out` must be writable.
 */
enum SfStatus sf_anneal_beta(const struct SfShape *shape,
                             size_t robots,
                             double d_min,
                             uint64_t seed,
                             double *beta_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARMFORM_H */
