/* C interface to the ggan library. All objects are opaque handles; every
 * fallible call returns a ggan_status and leaves a message retrievable with
 * ggan_last_error() on the calling thread. */
#ifndef GGAN_C_H
#define GGAN_C_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(GGAN_BUILDING)
#define GGAN_API __attribute__((visibility("default")))
#else
#define GGAN_API
#endif

typedef enum ggan_status {
  GGAN_OK = 0,
  GGAN_ERR_INVALID_ARGUMENT = 1,
  GGAN_ERR_SHAPE = 2,
  GGAN_ERR_CONTRACT = 3,
  GGAN_ERR_PARSE = 4,
  GGAN_ERR_IO = 5,
  GGAN_ERR_NUMERIC = 6,
  GGAN_ERR_INTERNAL = 7
} ggan_status;

typedef struct ggan_config ggan_config;
typedef struct ggan_model ggan_model;

typedef struct ggan_metrics {
  double mmd2;
  double mmd_x1e4;
  int64_t dim;
  double prop0; /* fraction of zero generator parameters, in [0, 1] */
  int64_t effective_depth;
} ggan_metrics;

/* Progress messages from long-running calls. May be NULL. */
typedef void (*ggan_log_fn)(const char* message, void* user);

GGAN_API const char* ggan_version(void);
GGAN_API const char* ggan_last_error(void);
GGAN_API const char* ggan_status_name(ggan_status status);

/* Configuration */
GGAN_API ggan_status ggan_config_create(ggan_config** out);
GGAN_API ggan_status ggan_config_load(const char* path, ggan_config** out);
/* Applies `key = value` text on top of cfg. On error cfg is unchanged. */
GGAN_API ggan_status ggan_config_parse(ggan_config* cfg, const char* text);
GGAN_API ggan_status ggan_config_clone(const ggan_config* cfg, ggan_config** out);
GGAN_API void ggan_config_destroy(ggan_config* cfg);
GGAN_API ggan_status ggan_config_set(ggan_config* cfg, const char* key, const char* value);
/* String getters copy into buf (always NUL-terminated when cap > 0) and
 * report the full length including the terminator through *needed. */
GGAN_API ggan_status ggan_config_get(const ggan_config* cfg, const char* key, char* buf, size_t cap,
                                     size_t* needed);
GGAN_API ggan_status ggan_config_to_string(const ggan_config* cfg, char* buf, size_t cap,
                                           size_t* needed);
GGAN_API size_t ggan_config_key_count(void);
GGAN_API const char* ggan_config_key_name(size_t index);
GGAN_API const char* ggan_config_key_help(size_t index);

/* Workflows. Output files land under out_dir, which is created if needed. */
GGAN_API ggan_status ggan_train(const ggan_config* cfg, const char* out_dir, ggan_log_fn log,
                                void* user, ggan_model** out_model, ggan_metrics* out_metrics);
GGAN_API ggan_status ggan_experiment(const ggan_config* cfg, const char* out_dir, ggan_log_fn log,
                                     void* user);
GGAN_API ggan_status ggan_sweep(const ggan_config* cfg, const char* out_dir, ggan_log_fn log,
                                void* user);
GGAN_API ggan_status ggan_tune(const ggan_config* cfg, const char* out_dir, ggan_log_fn log,
                               void* user, double out_lambdas[3]);

/* Trained models */
GGAN_API ggan_status ggan_model_load(const char* path, ggan_model** out);
GGAN_API ggan_status ggan_model_save(const ggan_model* model, const char* path);
GGAN_API void ggan_model_destroy(ggan_model* model);
GGAN_API ggan_status ggan_model_info(const ggan_model* model, int64_t* input_dim,
                                     int64_t* output_dim, int64_t* depth, int64_t* width);
/* The configuration stored alongside the model. */
GGAN_API ggan_status ggan_model_config(const ggan_model* model, ggan_config** out);
/* Writes n samples row-major into out, which must hold n * output_dim doubles. */
GGAN_API ggan_status ggan_model_generate(const ggan_model* model, int64_t n, uint64_t seed,
                                         double* out);
GGAN_API ggan_status ggan_model_generate_csv(const ggan_model* model, int64_t n, uint64_t seed,
                                             const char* path);
/* Recomputes the metrics reported at save time. cfg may be NULL to use the
 * stored configuration. */
GGAN_API ggan_status ggan_model_evaluate(const ggan_model* model, const ggan_config* cfg,
                                         ggan_metrics* out);

/* Numerics on row-major sample matrices. */
GGAN_API ggan_status ggan_mmd2(const double* a, int64_t na, const double* b, int64_t nb, int64_t dim,
                               const double* bandwidths, size_t n_bandwidths, double* out);
GGAN_API ggan_status ggan_frechet(const double* mean1, const double* cov1, const double* mean2,
                                  const double* cov2, int64_t dim, double* out);

#ifdef __cplusplus
}
#endif

#endif
