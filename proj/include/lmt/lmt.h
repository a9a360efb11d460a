#ifndef LMT_LMT_H
#define LMT_LMT_H

/* C interface to the decentralized optimization simulator.
 *
 * Every function returns LMT_OK (0) or a negative error code. On failure
 * lmt_last_error() returns a message describing the most recent error on the
 * calling thread. Handles are opaque and must be released with their
 * matching destroy function; destroying NULL is a no-op. */

#include <stddef.h>

#if defined(_WIN32)
#  if defined(LMT_BUILDING_LIBRARY)
#    define LMT_API __declspec(dllexport)
#  else
#    define LMT_API __declspec(dllimport)
#  endif
#else
#  define LMT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum lmt_error_code {
  LMT_OK = 0,
  LMT_ERROR_INVALID_TOPOLOGY = -1,
  LMT_ERROR_VALIDATION = -2,
  LMT_ERROR_DOMAIN = -3,
  LMT_ERROR_DIMENSION = -4,
  LMT_ERROR_CONFIGURATION = -5,
  LMT_ERROR_PARSE = -6,
  LMT_ERROR_UNSUPPORTED_DATASET = -7,
  LMT_ERROR_PARAMETER = -8,
  LMT_ERROR_UNAVAILABLE_METRIC = -9,
  LMT_ERROR_IO = -10,
  LMT_ERROR_RUNTIME = -11,
  LMT_ERROR_NULL_POINTER = -20,
  LMT_ERROR_INVALID_HANDLE = -21,
  LMT_ERROR_INSUFFICIENT_BUFFER = -22,
  LMT_ERROR_OUT_OF_RANGE = -23,
  LMT_ERROR_UNKNOWN = -100
};

typedef struct lmt_mixing_struct* lmt_mixing_t;
typedef struct lmt_config_struct* lmt_config_t;
typedef struct lmt_result_struct* lmt_result_t;
typedef struct lmt_sweep_struct* lmt_sweep_t;

typedef struct {
  double lambda;
  double spectral_gap; /* 1 - lambda */
  double eta_w;
  double rho_w;
  double c0;
} lmt_spectra;

LMT_API const char* lmt_error_string(int code);
LMT_API const char* lmt_last_error(void);
/* Nonzero when the code denotes a problem with user input rather than a failed run. */
LMT_API int lmt_error_is_config(int code);

/* Mixing matrices */
LMT_API int lmt_mixing_ring(lmt_mixing_t* out, int n);
LMT_API int lmt_mixing_complete(lmt_mixing_t* out, int n);
/* Dense CSV, one row per line. */
LMT_API int lmt_mixing_load(lmt_mixing_t* out, const char* path);
LMT_API int lmt_mixing_save(lmt_mixing_t m, const char* path);
LMT_API int lmt_mixing_size(lmt_mixing_t m, int* n);
/* Row-major n*n copy of the weights; `len` is the buffer length in doubles. */
LMT_API int lmt_mixing_weights(lmt_mixing_t m, double* out, size_t len);
LMT_API int lmt_mixing_spectra(lmt_mixing_t m, lmt_spectra* out);
LMT_API int lmt_mixing_destroy(lmt_mixing_t m);

/* Experiment configuration */
LMT_API int lmt_config_load(lmt_config_t* out, const char* path);
/* base_dir may be NULL; relative data paths then stay relative to the working directory. */
LMT_API int lmt_config_parse(lmt_config_t* out, const char* text, const char* base_dir);
LMT_API int lmt_config_set(lmt_config_t cfg, const char* key, const char* value);
LMT_API int lmt_config_validate(lmt_config_t cfg);
/* Writes a NUL-terminated string; on LMT_ERROR_INSUFFICIENT_BUFFER *len holds the size needed. */
LMT_API int lmt_config_fingerprint(lmt_config_t cfg, char* out, size_t* len);
LMT_API int lmt_config_destroy(lmt_config_t cfg);

/* Running */
LMT_API int lmt_run(lmt_config_t cfg, lmt_result_t* out);
LMT_API int lmt_result_read_csv(lmt_result_t* out, const char* path);
LMT_API int lmt_result_write_csv(lmt_result_t r, const char* path);
LMT_API int lmt_result_rows(lmt_result_t r, size_t* rows);
/* Copies the per-round mean (stddev = 0) or standard deviation (stddev != 0) of a metric. */
LMT_API int lmt_result_column(lmt_result_t r, const char* metric, int stddev, double* out, size_t len);
/* Mean over the last ceil(10%) of rounds. */
LMT_API int lmt_result_final_window_mean(lmt_result_t r, const char* metric, double* out);
LMT_API int lmt_result_fingerprint(lmt_result_t r, char* out, size_t* len);
LMT_API int lmt_result_label(lmt_result_t r, char* out, size_t* len);
LMT_API int lmt_result_set_label(lmt_result_t r, const char* label);
LMT_API int lmt_result_destroy(lmt_result_t r);

/* Sweeps: axis is "Q", "n" or "method". */
LMT_API int lmt_sweep(lmt_config_t cfg, const char* axis, const char* const* values, size_t count, lmt_sweep_t* out);
LMT_API int lmt_sweep_size(lmt_sweep_t s, size_t* count);
/* *has_slope is set to 0 for non-Q sweeps. */
LMT_API int lmt_sweep_slope(lmt_sweep_t s, double* slope, int* has_slope);
/* Returns an independent copy of one point's table. */
LMT_API int lmt_sweep_point(lmt_sweep_t s, size_t index, lmt_result_t* out);
LMT_API int lmt_sweep_destroy(lmt_sweep_t s);

/* Static SVG with a log-scale y axis. */
LMT_API int lmt_plot(const lmt_result_t* tables, size_t count, const char* metric, const char* path);

LMT_API int lmt_q_star(double lambda, double sigma, int n, double epsilon, long* out);

#ifdef __cplusplus
}
#endif

#endif
