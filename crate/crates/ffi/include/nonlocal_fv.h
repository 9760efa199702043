#ifndef NONLOCAL_FV_H
#define NONLOCAL_FV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call. The first four values match the command-line exit
// codes.
typedef enum NfvStatus {
  NFV_STATUS_OK = 0,
  // A stability, entropy or rate check failed. Results are still returned.
  NFV_STATUS_MONITOR_VIOLATION = 2,
  // Invalid configuration or arguments.
  NFV_STATUS_CONFIG = 3,
  // Non-finite state or mass reaching the boundary band.
  NFV_STATUS_NUMERICAL = 4,
  NFV_STATUS_NULL_POINTER = 10,
  // A string argument was not valid UTF-8.
  NFV_STATUS_INVALID_UTF8 = 11,
  // An output buffer is too small.
  NFV_STATUS_BUFFER_TOO_SMALL = 12,
  NFV_STATUS_IO = 13,
  NFV_STATUS_PANIC = 14,
} NfvStatus;

// Parsed run configuration.
typedef struct NfvConfig NfvConfig;

// A finished run: final state and step count.
typedef struct NfvRun NfvRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *nfv_last_error(void);

// Library version as a static NUL-terminated string.
const char *nfv_version(void);

// Parses a TOML configuration.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum NfvStatus nfv_config_from_toml(const char *toml, struct NfvConfig **out);

// Loads a built-in configuration (`paper-1d` or `paper-2d`).
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum NfvStatus nfv_config_preset(const char *name, struct NfvConfig **out);

// Sets the cell width of a configuration.
//
// # Safety
// `config` must come from this library and not be freed.
enum NfvStatus nfv_config_set_dx(struct NfvConfig *config, double dx);

// Sets the final time of a configuration.
//
// # Safety
// `config` must come from this library and not be freed.
enum NfvStatus nfv_config_set_final_time(struct NfvConfig *config, double t_final);

// # Safety
// `config` must come from this library or be null; it is invalid afterwards.
void nfv_config_free(struct NfvConfig *config);

// Marches the configuration to its final time and checks the enabled
// monitors. On `NFV_STATUS_MONITOR_VIOLATION` the run is still stored in
// `out`; on any other failure `out` is null.
//
// # Safety
// `config` must come from this library and `out` be a valid pointer.
enum NfvStatus nfv_run(const struct NfvConfig *config, struct NfvRun **out);

// # Safety
// `run` must come from this library or be null; it is invalid afterwards.
void nfv_run_free(struct NfvRun *run);

// Shape of a finished run: spatial dimension, number of components and
// cells per axis (`ny` is 1 in one dimension).
//
// # Safety
// `run` must come from this library; the out pointers must be valid.
enum NfvStatus nfv_run_shape(const struct NfvRun *run,
                             size_t *dimension,
                             size_t *components,
                             size_t *nx,
                             size_t *ny);

// Final time reached and number of steps taken.
//
// # Safety
// `run` must come from this library; the out pointers must be valid.
enum NfvStatus nfv_run_time(const struct NfvRun *run, double *t, size_t *steps);

// Copies the final cell values of `component` into `buf` (row-major with
// x fastest in two dimensions). `len` must be at least `nx * ny`.
//
// # Safety
// `run` must come from this library and `buf` hold `len` doubles.
enum NfvStatus nfv_run_copy_component(const struct NfvRun *run,
                                      size_t component,
                                      double *buf,
                                      size_t len);

// Grid-refinement study with `levels` table rows (`levels + 1` runs).
// Row `i` gets its cell width in `dx[i]`, error in `error[i]` and rate in
// `rate[i]` (NaN on the last row); each buffer must hold `levels` values.
// Returns `NFV_STATUS_MONITOR_VIOLATION` with the table filled when a rate
// misses the configured floor.
//
// # Safety
// `config` must come from this library and each buffer hold `levels`
// doubles.
enum NfvStatus nfv_converge(const struct NfvConfig *config,
                            size_t levels,
                            double *dx,
                            double *error,
                            double *rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONLOCAL_FV_H */
