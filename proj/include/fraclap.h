#ifndef FRACLAP_H
#define FRACLAP_H

/* C interface to the fraclap experiment runner.
 *
 * A run handle wraps one validated experiment config. Options set on the
 * handle override the config; fraclap_run_execute computes everything and
 * only then writes the output directory, so a failed run leaves no files.
 * Every call returns a status code; on failure fraclap_last_error() holds
 * a message for the calling thread naming the module that failed. */

#include <stddef.h>
#include <stdint.h>

#if defined(FRACLAP_BUILDING)
#define FRACLAP_API __attribute__((visibility("default")))
#else
#define FRACLAP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fraclap_status {
  FRACLAP_OK = 0,
  FRACLAP_ERROR_INTERNAL = 1,
  FRACLAP_ERROR_CONFIG = 2,  /* unreadable or invalid config, bad option */
  FRACLAP_ERROR_NUMERIC = 3, /* solver failure, non-convergence, divergence */
  FRACLAP_ERROR_IO = 4,      /* output directory could not be written */
  FRACLAP_ERROR_ARGUMENT = 5 /* null handle or pointer */
} fraclap_status;

typedef struct fraclap_run fraclap_run;

/* Subcommand is one of elliptic-convergence, interior-control,
 * exterior-control, constrained, simultaneous; it must match the
 * config's experiment kind. */
FRACLAP_API fraclap_status fraclap_run_create(const char* subcommand, const char* config_path, fraclap_run** out);
FRACLAP_API fraclap_status fraclap_run_create_from_string(const char* subcommand, const char* config_json,
                                                          fraclap_run** out);
FRACLAP_API void fraclap_run_destroy(fraclap_run* run);

FRACLAP_API fraclap_status fraclap_run_set_seed(fraclap_run* run, uint64_t seed);
FRACLAP_API fraclap_status fraclap_run_set_output_dir(fraclap_run* run, const char* dir);
/* simultaneous only */
FRACLAP_API fraclap_status fraclap_run_set_sizes(fraclap_run* run, const uint64_t* sizes, size_t count);
FRACLAP_API fraclap_status fraclap_run_set_algorithm(fraclap_run* run, const char* name);
FRACLAP_API fraclap_status fraclap_run_set_adam_standard(fraclap_run* run, int enabled);
/* constrained only */
FRACLAP_API fraclap_status fraclap_run_set_horizon(fraclap_run* run, double T);
FRACLAP_API fraclap_status fraclap_run_set_min_time(fraclap_run* run, int enabled);

/* Computes and writes the outputs. */
FRACLAP_API fraclap_status fraclap_run_execute(fraclap_run* run);
/* Computes without touching the disk. */
FRACLAP_API fraclap_status fraclap_run_compute(fraclap_run* run);

/* Valid after a successful execute or compute, until the handle is destroyed. */
FRACLAP_API size_t fraclap_run_file_count(const fraclap_run* run);
FRACLAP_API const char* fraclap_run_file_name(const fraclap_run* run, size_t index);
FRACLAP_API const char* fraclap_run_file_content(const fraclap_run* run, size_t index);
FRACLAP_API const char* fraclap_run_summary_json(const fraclap_run* run);
/* Effective config after overrides, and its hash. */
FRACLAP_API const char* fraclap_run_config_json(const fraclap_run* run);
FRACLAP_API const char* fraclap_run_config_hash(const fraclap_run* run);
FRACLAP_API const char* fraclap_run_output_dir(const fraclap_run* run);

/* Writes the five bundled experiment configs into dir. */
FRACLAP_API fraclap_status fraclap_write_defaults(const char* dir);

FRACLAP_API const char* fraclap_last_error(void);
FRACLAP_API const char* fraclap_status_string(fraclap_status status);
FRACLAP_API const char* fraclap_build_id(void);

#ifdef __cplusplus
}
#endif

#endif /* FRACLAP_H */
