/* C interface to the skew-mitigation engine and experiment harness. */
#ifndef RESHAPE_RESHAPE_H
#define RESHAPE_RESHAPE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RESHAPE_API __declspec(dllexport)
#else
#define RESHAPE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum reshape_status {
    RESHAPE_OK = 0,
    RESHAPE_ERR_ARGUMENT = 1,   /* null handle, bad index, buffer too small */
    RESHAPE_ERR_CONFIG = 2,
    RESHAPE_ERR_ROUTING = 3,
    RESHAPE_ERR_PROTOCOL = 4,
    RESHAPE_ERR_DEADLOCK = 5,
    RESHAPE_ERR_STATE = 6,      /* invalid share or unsupported merge */
    RESHAPE_ERR_IO = 7,
    RESHAPE_ERR_INTERNAL = 8
} reshape_status;

typedef struct reshape_experiment reshape_experiment;

RESHAPE_API const char* reshape_version(void);
/* Message of the last failed call on this thread; empty if none. */
RESHAPE_API const char* reshape_last_error(void);
RESHAPE_API const char* reshape_status_name(reshape_status status);
/* "error", "info" or "debug"; NULL re-reads RESHAPE_LOG. */
RESHAPE_API reshape_status reshape_set_log_level(const char* level);

RESHAPE_API reshape_status reshape_experiment_load(const char* path, reshape_experiment** out);
RESHAPE_API reshape_status reshape_experiment_parse(const char* json_text, reshape_experiment** out);
RESHAPE_API void reshape_experiment_free(reshape_experiment* exp);

/* Overrides one field: strategy, tau, eta, workers, seed, out, mode, rate. */
RESHAPE_API reshape_status reshape_experiment_set(reshape_experiment* exp, const char* field, const char* value);

/* Runs the configured strategy. */
RESHAPE_API reshape_status reshape_experiment_run(reshape_experiment* exp);
/* Runs `baseline` and the configured strategy on the same input. */
RESHAPE_API reshape_status reshape_experiment_compare(reshape_experiment* exp, const char* baseline);
/* Writes metrics.csv, iterations.csv and summary.json for the last run. */
RESHAPE_API reshape_status reshape_experiment_write(const reshape_experiment* exp);

/* Results of the last run. */
RESHAPE_API reshape_status reshape_result_balancing_ratio(const reshape_experiment* exp, double* out);
RESHAPE_API reshape_status reshape_result_iterations(const reshape_experiment* exp, int* out);
/* RESHAPE_ERR_ARGUMENT unless the last call was a compare. */
RESHAPE_API reshape_status reshape_result_load_reduction(const reshape_experiment* exp, double* out);
RESHAPE_API reshape_status reshape_result_end_time(const reshape_experiment* exp, int64_t* out);
RESHAPE_API reshape_status reshape_result_workers(const reshape_experiment* exp, int32_t* out);
RESHAPE_API reshape_status reshape_result_received(const reshape_experiment* exp, int32_t worker, uint64_t* out);
/* Copies the summary JSON. `needed` receives the size including the NUL. */
RESHAPE_API reshape_status reshape_result_summary(const reshape_experiment* exp, char* buf, size_t len,
                                                  size_t* needed);
RESHAPE_API const char* reshape_experiment_output_dir(const reshape_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif
