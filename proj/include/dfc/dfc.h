/* C interface to the dynamic feature compression library. */
#ifndef DFC_DFC_H
#define DFC_DFC_H

#include <stddef.h>

#if defined(DFC_BUILDING_LIBRARY)
#define DFC_API __attribute__((visibility("default")))
#else
#define DFC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dfc_status {
  DFC_OK = 0,
  DFC_ERR_INVALID_ARGUMENT = 1,
  DFC_ERR_NOT_FOUND = 2,
  DFC_ERR_FORMAT = 3,
  DFC_ERR_INTERNAL = 4
} dfc_status;

typedef struct dfc_config dfc_config;

/* Message of the last failed call on this thread; "" if none. */
DFC_API const char* dfc_last_error(void);
DFC_API const char* dfc_version(void);

/* Run configuration. Keys are "section.key", e.g. "train.gamma". */
DFC_API dfc_status dfc_config_new(dfc_config** out);
DFC_API dfc_status dfc_config_load(const char* path, dfc_config** out);
DFC_API dfc_status dfc_config_parse(const char* text, dfc_config** out);
DFC_API void dfc_config_free(dfc_config* cfg);
DFC_API dfc_status dfc_config_set(dfc_config* cfg, const char* key, const char* value);
/* Copies the value with its terminator into buf when it fits; *needed gets
   the required size including the terminator. */
DFC_API dfc_status dfc_config_get(const dfc_config* cfg, const char* key, char* buf,
                                  size_t cap, size_t* needed);
DFC_API dfc_status dfc_config_validate(const dfc_config* cfg);
DFC_API dfc_status dfc_config_write(const dfc_config* cfg, const char* path);

/* One of collect-dataset, train-codec, train-robot, train-regressor,
   train-observer, evaluate, analyze. */
DFC_API dfc_status dfc_run(const dfc_config* cfg, const char* subcommand);
/* train-observer restricted to one level ('A', 'B', 'C'; 0 for all) and,
   when has_beta is nonzero, one beta. */
DFC_API dfc_status dfc_train_observer(const dfc_config* cfg, char level, int has_beta,
                                      double beta);

/* Low-level helpers. cfg may be NULL for defaults. */
DFC_API dfc_status dfc_env_step(const dfc_config* cfg, const double state[4], int action,
                                int steps_taken, double out_state[4], double* reward,
                                int* done);
DFC_API int dfc_update_aoi(int aoi, int transmitted);
DFC_API dfc_status dfc_pareto_dominates(const double* eta, const double* eta_prime, size_t n,
                                        int* out);
/* points is row-major n x dim; out_idx needs room for n entries. */
DFC_API dfc_status dfc_pareto_front(const double* points, size_t n, size_t dim,
                                    size_t* out_idx, size_t* out_count);
DFC_API dfc_status dfc_rmsd(const double* series, size_t n, double target, double* out);
DFC_API dfc_status dfc_perplexity(const double* counts, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
