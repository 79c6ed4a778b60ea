/* Copyright 2026 The rpp Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the rpp library. All functions are safe to call from C.
 * Errors are reported through rpp_status; the message of the most recent
 * failure on the calling thread is available from rpp_last_error().
 */
#ifndef RPP_RPP_H_
#define RPP_RPP_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(RPP_BUILDING_LIBRARY)
#define RPP_API __declspec(dllexport)
#else
#define RPP_API __declspec(dllimport)
#endif
#else
#define RPP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define RPP_ABI_VERSION 1u

typedef enum rpp_status {
  RPP_OK = 0,
  RPP_ERR_INVALID_ARGUMENT = 1,
  RPP_ERR_USAGE = 2,
  RPP_ERR_IO = 3,
  RPP_ERR_PARSE = 4,
  RPP_ERR_VALIDATION = 5,
  RPP_ERR_ENVIRONMENT = 6,
  RPP_ERR_RUNTIME = 7,
  RPP_ERR_BUFFER_TOO_SMALL = 8
} rpp_status;

typedef struct rpp_config rpp_config_t;
typedef struct rpp_bundle rpp_bundle_t;

/* Receives one log line (without trailing newline). */
typedef void (*rpp_log_fn)(const char* line, void* user_data);

RPP_API uint32_t rpp_abi_version(void);
RPP_API const char* rpp_status_string(rpp_status status);
/* Valid until the next failing call on this thread. Never NULL. */
RPP_API const char* rpp_last_error(void);

/* Configuration. File values apply under values given with rpp_config_set,
 * regardless of call order. */
RPP_API rpp_config_t* rpp_config_create(void);
RPP_API void rpp_config_destroy(rpp_config_t* config);
RPP_API rpp_status rpp_config_set(rpp_config_t* config, const char* key, const char* value);
RPP_API rpp_status rpp_config_load_file(rpp_config_t* config, const char* path);
/* Copies the resolved value, NUL-terminated. `needed` (optional) receives the
 * required size including the terminator. */
RPP_API rpp_status rpp_config_get(const rpp_config_t* config, const char* key, char* buffer,
                                  size_t capacity, size_t* needed);
RPP_API size_t rpp_config_key_count(void);
RPP_API const char* rpp_config_key_name(size_t index);

typedef struct rpp_metric_summary {
  /* Cutoffs 1, 5, 10. */
  double ndcg_mean[3];
  double ndcg_std[3];
  double mrr_mean[3];
  double mrr_std[3];
  double hit_mean[3];
  double hit_std[3];
  size_t n_users;
  size_t repeats;
  size_t failed_users;
} rpp_metric_summary;

/* Commands. `log` may be NULL. */
RPP_API rpp_status rpp_train(const rpp_config_t* config, rpp_log_fn log, void* user_data);
RPP_API rpp_status rpp_eval(const rpp_config_t* config, rpp_log_fn log, void* user_data,
                            rpp_metric_summary* summary);
RPP_API rpp_status rpp_simulate(const rpp_config_t* config, rpp_log_fn log, void* user_data);
/* `passed` is set to 1 when both maxima are below 1e-4. */
RPP_API rpp_status rpp_grad_check(const rpp_config_t* config, rpp_log_fn log, void* user_data,
                                  double* actor_max_rel_error, double* critic_max_rel_error,
                                  int* passed);

/* Metrics over `order` (candidate indices, best first). */
RPP_API rpp_status rpp_ndcg_at_k(const size_t* order, size_t n, size_t gt_pos, size_t k,
                                 double* out);
RPP_API rpp_status rpp_mrr_at_k(const size_t* order, size_t n, size_t gt_pos, size_t k,
                                double* out);
RPP_API rpp_status rpp_hit_at_k(const size_t* order, size_t n, size_t gt_pos, size_t k,
                                double* out);

/* Parses an LLM reply against `m` candidate titles into a full permutation
 * written to `order` (length m). `n_matched` is optional. */
RPP_API rpp_status rpp_parse_reply(const char* reply, const char* const* titles, size_t m,
                                   size_t* order, size_t* n_matched);

/* Trained agents loaded from a checkpoint file. */
RPP_API rpp_status rpp_bundle_load(const char* path, rpp_bundle_t** out);
RPP_API void rpp_bundle_destroy(rpp_bundle_t* bundle);
RPP_API size_t rpp_bundle_state_dim(const rpp_bundle_t* bundle);
/* Writes the argmax action of the four agents (role, history, reasoning, output). */
RPP_API rpp_status rpp_bundle_greedy_action(const rpp_bundle_t* bundle, const double* state,
                                            size_t dim, size_t action[4]);

#ifdef __cplusplus
}
#endif

#endif /* RPP_RPP_H_ */
