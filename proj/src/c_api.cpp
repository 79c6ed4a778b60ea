// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/rpp.h"

#include <cstring>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include "rpp/config.hpp"
#include "rpp/env.hpp"
#include "rpp/error.hpp"
#include "rpp/marl.hpp"
#include "rpp/metrics.hpp"
#include "rpp/runner.hpp"

struct rpp_config {
  rpp::ConfigMap file;
  rpp::ConfigMap overrides;
};

struct rpp_bundle {
  rpp::AgentBundle bundle;
};

namespace {

thread_local std::string g_last_error;

rpp_status to_status(rpp::ErrorKind kind) {
  switch (kind) {
    case rpp::ErrorKind::kInvalidArgument: return RPP_ERR_INVALID_ARGUMENT;
    case rpp::ErrorKind::kUsage: return RPP_ERR_USAGE;
    case rpp::ErrorKind::kIo: return RPP_ERR_IO;
    case rpp::ErrorKind::kParse: return RPP_ERR_PARSE;
    case rpp::ErrorKind::kValidation: return RPP_ERR_VALIDATION;
    case rpp::ErrorKind::kEnvironment: return RPP_ERR_ENVIRONMENT;
    case rpp::ErrorKind::kRuntime: return RPP_ERR_RUNTIME;
  }
  return RPP_ERR_RUNTIME;
}

template <typename Fn>
rpp_status guarded(Fn&& fn) {
  try {
    fn();
    return RPP_OK;
  } catch (const rpp::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RPP_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RPP_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return RPP_ERR_RUNTIME;
  }
}

rpp_status null_argument(const char* name) {
  g_last_error = std::string(name) + " must not be NULL";
  return RPP_ERR_INVALID_ARGUMENT;
}

rpp::RunConfig resolved(const rpp_config* c) { return rpp::resolve_config(c->file, c->overrides); }

// Forwards complete lines of a stream to the caller's callback.
class LineSink {
 public:
  LineSink(rpp_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineSink() { flush(); }
  std::ostream& stream() { return out_; }
  void flush() {
    if (!fn_) return;
    std::string text = out_.str();
    out_.str({});
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const std::string line = text.substr(pos, nl - pos);
      fn_(line.c_str(), user_);
      pos = nl + 1;
    }
  }

 private:
  rpp_log_fn fn_;
  void* user_;
  std::ostringstream out_;
};

template <double (*Metric)(std::span<const std::size_t>, std::size_t, std::size_t)>
rpp_status metric(const size_t* order, size_t n, size_t gt, size_t k, double* out) {
  if (!order) return null_argument("order");
  if (!out) return null_argument("out");
  return guarded([&] { *out = Metric(std::span<const std::size_t>(order, n), gt, k); });
}

}  // namespace

extern "C" {

RPP_API uint32_t rpp_abi_version(void) { return RPP_ABI_VERSION; }

RPP_API const char* rpp_status_string(rpp_status status) {
  switch (status) {
    case RPP_OK: return "ok";
    case RPP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case RPP_ERR_USAGE: return "usage error";
    case RPP_ERR_IO: return "i/o error";
    case RPP_ERR_PARSE: return "parse error";
    case RPP_ERR_VALIDATION: return "validation error";
    case RPP_ERR_ENVIRONMENT: return "environment error";
    case RPP_ERR_RUNTIME: return "runtime error";
    case RPP_ERR_BUFFER_TOO_SMALL: return "buffer too small";
  }
  return "unknown status";
}

RPP_API const char* rpp_last_error(void) { return g_last_error.c_str(); }

RPP_API rpp_config_t* rpp_config_create(void) {
  try {
    return new rpp_config();
  } catch (...) {
    g_last_error = "out of memory";
    return nullptr;
  }
}

RPP_API void rpp_config_destroy(rpp_config_t* config) { delete config; }

RPP_API rpp_status rpp_config_set(rpp_config_t* config, const char* key, const char* value) {
  if (!config) return null_argument("config");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  return guarded([&] {
    rpp::RunConfig probe;
    rpp::apply_setting(probe, key, value);  // rejects unknown keys and bad values early
    config->overrides[key] = value;
  });
}

RPP_API rpp_status rpp_config_load_file(rpp_config_t* config, const char* path) {
  if (!config) return null_argument("config");
  if (!path) return null_argument("path");
  return guarded([&] { config->file = rpp::load_config_file(path); });
}

RPP_API rpp_status rpp_config_get(const rpp_config_t* config, const char* key, char* buffer,
                                  size_t capacity, size_t* needed) {
  if (!config) return null_argument("config");
  if (!key) return null_argument("key");
  std::string value;
  const rpp_status st = guarded([&] { value = rpp::get_setting(resolved(config), key); });
  if (st != RPP_OK) return st;
  if (needed) *needed = value.size() + 1;
  if (!buffer || capacity < value.size() + 1) {
    g_last_error = "buffer too small for value of " + std::string(key);
    return RPP_ERR_BUFFER_TOO_SMALL;
  }
  std::memcpy(buffer, value.c_str(), value.size() + 1);
  return RPP_OK;
}

RPP_API size_t rpp_config_key_count(void) { return rpp::config_keys().size(); }

RPP_API const char* rpp_config_key_name(size_t index) {
  const auto& keys = rpp::config_keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

RPP_API rpp_status rpp_train(const rpp_config_t* config, rpp_log_fn log, void* user_data) {
  if (!config) return null_argument("config");
  LineSink sink(log, user_data);
  return guarded([&] { rpp::cmd_train(resolved(config), sink.stream()); });
}

RPP_API rpp_status rpp_eval(const rpp_config_t* config, rpp_log_fn log, void* user_data,
                            rpp_metric_summary* summary) {
  if (!config) return null_argument("config");
  LineSink sink(log, user_data);
  return guarded([&] {
    const rpp::MetricReport r = rpp::cmd_eval(resolved(config), sink.stream());
    if (!summary) return;
    for (int i = 0; i < 3; ++i) {
      summary->ndcg_mean[i] = r.ndcg[i].mean;
      summary->ndcg_std[i] = r.ndcg[i].std;
      summary->mrr_mean[i] = r.mrr[i].mean;
      summary->mrr_std[i] = r.mrr[i].std;
      summary->hit_mean[i] = r.hit[i].mean;
      summary->hit_std[i] = r.hit[i].std;
    }
    summary->n_users = r.n_users;
    summary->repeats = r.repeats;
    summary->failed_users = r.failed_users;
  });
}

RPP_API rpp_status rpp_simulate(const rpp_config_t* config, rpp_log_fn log, void* user_data) {
  if (!config) return null_argument("config");
  LineSink sink(log, user_data);
  return guarded([&] { rpp::cmd_simulate(resolved(config), sink.stream()); });
}

RPP_API rpp_status rpp_grad_check(const rpp_config_t* config, rpp_log_fn log, void* user_data,
                                  double* actor_max_rel_error, double* critic_max_rel_error,
                                  int* passed) {
  if (!config) return null_argument("config");
  LineSink sink(log, user_data);
  return guarded([&] {
    const auto s = rpp::cmd_grad_check(resolved(config), sink.stream());
    if (passed) *passed = s.passed() ? 1 : 0;
    if (actor_max_rel_error) *actor_max_rel_error = s.actor_max_rel_error;
    if (critic_max_rel_error) *critic_max_rel_error = s.critic_max_rel_error;
  });
}

RPP_API rpp_status rpp_ndcg_at_k(const size_t* order, size_t n, size_t gt_pos, size_t k,
                                 double* out) {
  return metric<&rpp::ndcg_at_k>(order, n, gt_pos, k, out);
}

RPP_API rpp_status rpp_mrr_at_k(const size_t* order, size_t n, size_t gt_pos, size_t k,
                                double* out) {
  return metric<&rpp::mrr_at_k>(order, n, gt_pos, k, out);
}

RPP_API rpp_status rpp_hit_at_k(const size_t* order, size_t n, size_t gt_pos, size_t k,
                                double* out) {
  return metric<&rpp::hit_at_k>(order, n, gt_pos, k, out);
}

RPP_API rpp_status rpp_parse_reply(const char* reply, const char* const* titles, size_t m,
                                   size_t* order, size_t* n_matched) {
  if (!reply) return null_argument("reply");
  if (!titles && m > 0) return null_argument("titles");
  if (!order && m > 0) return null_argument("order");
  return guarded([&] {
    std::vector<std::string> t;
    t.reserve(m);
    for (size_t i = 0; i < m; ++i) {
      if (!titles[i]) throw rpp::invalid_argument("titles[" + std::to_string(i) + "] is NULL");
      t.emplace_back(titles[i]);
    }
    const rpp::ParsedRanking parsed = rpp::parse_reply(reply, t);
    std::copy(parsed.order.begin(), parsed.order.end(), order);
    if (n_matched) *n_matched = parsed.n_matched;
  });
}

RPP_API rpp_status rpp_bundle_load(const char* path, rpp_bundle_t** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new rpp_bundle{rpp::load_checkpoint(path)}; });
}

RPP_API void rpp_bundle_destroy(rpp_bundle_t* bundle) { delete bundle; }

RPP_API size_t rpp_bundle_state_dim(const rpp_bundle_t* bundle) {
  return bundle ? bundle->bundle.state_dim : 0;
}

RPP_API rpp_status rpp_bundle_greedy_action(const rpp_bundle_t* bundle, const double* state,
                                            size_t dim, size_t action[4]) {
  if (!bundle) return null_argument("bundle");
  if (!state) return null_argument("state");
  if (!action) return null_argument("action");
  return guarded([&] {
    if (dim != bundle->bundle.state_dim) {
      throw rpp::invalid_argument("state has " + std::to_string(dim) + " entries, expected " +
                                  std::to_string(bundle->bundle.state_dim));
    }
    const rpp::JointAction a =
        bundle->bundle.greedy_action(std::span<const double>(state, dim));
    for (std::size_t i = 0; i < 4; ++i) action[i] = a.index[i];
  });
}

}  // extern "C"
