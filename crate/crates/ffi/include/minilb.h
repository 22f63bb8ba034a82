#ifndef MINILB_H
#define MINILB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Flow case selector for [`MlbConfig::case_kind`].
#define MLB_CASE_LDC 0

#define MLB_CASE_TGV 1

#define MLB_CASE_VKS 2

// Layout codes for [`MlbConfig::layout`].
#define MLB_LAYOUT_ROW 0

#define MLB_LAYOUT_COL 1

// Precision codes for [`MlbConfig::precision`]: single, double, mixed1
// (half storage, single compute), mixed2 (single storage, double compute).
#define MLB_PRECISION_SINGLE 0

#define MLB_PRECISION_DOUBLE 1

#define MLB_PRECISION_MIXED1 2

#define MLB_PRECISION_MIXED2 3

typedef enum MlbStatus {
  MLB_STATUS_OK = 0,
  MLB_STATUS_NULL_POINTER = 1,
  MLB_STATUS_INVALID_ARGUMENT = 2,
  MLB_STATUS_NUMERICAL = 3,
  MLB_STATUS_IO = 4,
  MLB_STATUS_CHECKPOINT = 5,
  MLB_STATUS_PANIC = 6,
} MlbStatus;

// Opaque simulation handle.
typedef struct MlbSim MlbSim;

// Simulation setup. `tile_x = tile_y = 0` selects the auto schedule.
// For the cylinder case the diameter is `ny / 8`. `threads = 0` uses the
// runtime default.
typedef struct MlbConfig {
  uint32_t case_kind;
  uint32_t nx;
  uint32_t ny;
  double reynolds;
  double u0;
  uint32_t precision;
  uint32_t layout;
  uint32_t tile_x;
  uint32_t tile_y;
  uint32_t threads;
} MlbConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code. Never null.
const char *mlb_status_string(enum MlbStatus status);

// Message of the last failed call on this thread, or null after a
// successful call. Valid until the next `mlb_*` call on the same thread.
const char *mlb_last_error_message(void);

// Fills `out` with the defaults: 128x128 cavity, Re 100, u0 0.1, single
// precision, column-major, auto schedule.
//
// # Safety
// `out` must be null or point to writable memory for one `MlbConfig`.
enum MlbStatus mlb_config_default(struct MlbConfig *out);

// Creates an initialized simulation at timestep 0.
//
// # Safety
// `config` must be null or point to a valid `MlbConfig`; `out` must be null
// or point to writable storage for one pointer. On success `*out` owns a
// handle that must be released with [`mlb_sim_free`].
enum MlbStatus mlb_sim_new(const struct MlbConfig *config, struct MlbSim **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `sim` must be null or a handle from this library not yet freed.
void mlb_sim_free(struct MlbSim *sim);

// Advances `steps` timesteps. Fails with `Numerical` if the populations
// stop being finite; the state is then left at the failing step.
//
// # Safety
// `sim` must be null or a live handle.
enum MlbStatus mlb_sim_step(struct MlbSim *sim, uint64_t steps);

// # Safety
// `sim` must be null or a live handle; `out` null or writable.
enum MlbStatus mlb_sim_timestep(const struct MlbSim *sim, uint64_t *out);

// # Safety
// `sim` must be null or a live handle; `nx` and `ny` null or writable.
enum MlbStatus mlb_sim_dims(const struct MlbSim *sim, uint32_t *nx, uint32_t *ny);

// Copies density and velocity into caller arrays of `len = nx * ny`
// doubles, indexed `y * nx + x`. Any of the three arrays may be null to
// skip it.
//
// # Safety
// `sim` must be null or a live handle; each non-null array must hold `len`
// writable doubles.
enum MlbStatus mlb_sim_macros(const struct MlbSim *sim,
                              double *rho,
                              double *ux,
                              double *uy,
                              size_t len);

// Sum of all populations over the grid.
//
// # Safety
// `sim` must be null or a live handle; `out` null or writable.
enum MlbStatus mlb_sim_total_mass(const struct MlbSim *sim, double *out);

// L2 velocity error against the analytic vortex. Only for handles created
// from a tgv configuration.
//
// # Safety
// `sim` must be null or a live handle; `out` null or writable.
enum MlbStatus mlb_sim_tgv_error(const struct MlbSim *sim, double *out);

// Writes a legacy VTK snapshot of the current state.
//
// # Safety
// `sim` must be null or a live handle; `path` null or a NUL-terminated string.
enum MlbStatus mlb_sim_write_vtk(const struct MlbSim *sim, const char *path);

// Serializes the full state to `path`.
//
// # Safety
// `sim` must be null or a live handle; `path` null or a NUL-terminated string.
enum MlbStatus mlb_sim_checkpoint(const struct MlbSim *sim, const char *path);

// Rebuilds a simulation from a checkpoint. The schedule and thread count
// are chosen here since they do not affect results.
//
// # Safety
// `path` must be null or a NUL-terminated string; `out` null or writable.
enum MlbStatus mlb_sim_restore(const char *path,
                               uint32_t tile_x,
                               uint32_t tile_y,
                               uint32_t threads,
                               struct MlbSim **out);

// Harmonic-mean portability over `n` efficiencies in (0, 1]. A NaN entry
// marks an unsupported platform and makes the result 0.
//
// # Safety
// `efficiencies` must point to `n` readable doubles; `out` null or writable.
enum MlbStatus mlb_pp_metric(const double *efficiencies, size_t n, double *out);

// `min(fr_peak, bw_peak * ai)`.
//
// # Safety
// `out` must be null or writable.
enum MlbStatus mlb_roofline_peak(double fr_peak, double bw_peak, double ai, double *out);

// `achieved / peak`; `inconsistent` is set when the ratio exceeds 1.
//
// # Safety
// `out` must be null or writable; `inconsistent` may be null.
enum MlbStatus mlb_roofline_efficiency(double achieved,
                                       double peak,
                                       double *out,
                                       bool *inconsistent);

// Million lattice updates per second.
//
// # Safety
// `out` must be null or writable.
enum MlbStatus mlb_mlups(uint32_t nx, uint32_t ny, uint64_t steps, double seconds, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINILB_H */
