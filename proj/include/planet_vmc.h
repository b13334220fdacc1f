/* Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef PLANET_VMC_H
#define PLANET_VMC_H

#include <stddef.h>

#if defined(PLANET_BUILDING_LIBRARY)
#define PLANET_API __attribute__((visibility("default")))
#else
#define PLANET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returns one; details via planet_last_error(). */
typedef enum {
  PLANET_OK = 0,
  PLANET_ERR_CONFIG = 1,           /* usage or configuration error */
  PLANET_ERR_NUMERICAL = 2,        /* numerical divergence */
  PLANET_ERR_INVALID_ARGUMENT = 3,
  PLANET_ERR_IO = 4,
  PLANET_ERR_VERSION = 5,          /* checkpoint from another format version */
  PLANET_ERR_UNSUPPORTED = 6,
  PLANET_ERR_INTERNAL = 7
} planet_status;

typedef struct planet_config planet_config;
typedef struct planet_model planet_model;

/* Message of the last failing call on this thread ("" when none). */
PLANET_API const char* planet_last_error(void);
PLANET_API const char* planet_version(void);
PLANET_API int planet_checkpoint_version(void);

/* 0 error, 1 warn, 2 info, 3 debug. A negative level re-reads PLANET_VMC_LOG. */
PLANET_API planet_status planet_set_log_level(int level);

/* Configuration handles. */
PLANET_API planet_status planet_config_default(planet_config** out);
PLANET_API planet_status planet_config_load(const char* path, planet_config** out);
PLANET_API planet_status planet_config_parse(const char* json, planet_config** out);
/* "section.key=value"; the value is JSON or a bare string. */
PLANET_API planet_status planet_config_set(planet_config* config, const char* assignment);
/* Returns a string to release with planet_string_free. */
PLANET_API planet_status planet_config_to_json(const planet_config* config, char** out);
/* Value at "section.key": strings unquoted, everything else as JSON text.
 * Release with planet_string_free. */
PLANET_API planet_status planet_config_get(const planet_config* config, const char* path,
                                           char** out);
PLANET_API planet_status planet_config_validate(const planet_config* config);
PLANET_API void planet_config_free(planet_config* config);
PLANET_API void planet_string_free(char* s);

/* Commands. Outputs go to the config's run.output_dir or the given paths. */
PLANET_API planet_status planet_train(const planet_config* config, const char* resume_checkpoint);
PLANET_API planet_status planet_pretrain(const planet_config* config);
/* grid_csv may be NULL (dataset grid); n_samples <= 0 keeps the stored setting. */
PLANET_API planet_status planet_eval_vmc(const char* checkpoint, const char* grid_csv,
                                         long long n_samples, const char* output_csv,
                                         size_t* n_records);
PLANET_API planet_status planet_eval_surrogate(const char* checkpoint, const char* grid_csv,
                                               const char* output_csv, size_t* n_records,
                                               double* seconds_per_point);
PLANET_API planet_status planet_eval_surrogate_geometries(const char* checkpoint,
                                                          const char* const* geometry_files,
                                                          size_t n_files, const char* output_csv,
                                                          double* seconds_per_point);
/* Scan box entries override the training domain for the named parameters.
 * argmin receives up to `capacity` values; *dim is the parameter count. */
PLANET_API planet_status planet_find_min(const char* checkpoint, const char* source,
                                         double resolution, const char* const* box_names,
                                         const double* box_lo, const double* box_hi,
                                         size_t n_box, long long vmc_samples,
                                         const char* output_csv, double* argmin,
                                         size_t capacity, size_t* dim, double* energy,
                                         size_t* n_tied);
PLANET_API planet_status planet_report(const char* run_dir, int* mae_available, double* mae,
                                       double* relative_mae);

/* Loaded checkpoints for in-process queries. */
PLANET_API planet_status planet_model_open(const char* checkpoint, planet_model** out);
PLANET_API void planet_model_free(planet_model* model);
PLANET_API planet_status planet_model_dim(const planet_model* model, size_t* dim);
PLANET_API planet_status planet_model_surrogate_energy(const planet_model* model,
                                                       const double* params, size_t n_params,
                                                       double* energy);
PLANET_API planet_status planet_model_vmc_energy(const planet_model* model, const double* params,
                                                 size_t n_params, long long n_samples,
                                                 unsigned long long tag, double* energy,
                                                 double* stderr_naive);

/* mean |(b_i - mean b) - (a_i - mean a)| */
PLANET_API planet_status planet_relative_mae(const double* a, const double* b, size_t n,
                                             double* out);

#ifdef __cplusplus
}
#endif

#endif /* PLANET_VMC_H */
