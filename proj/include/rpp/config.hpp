// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rpp {

struct RunConfig {
  // Data sources.
  std::string interactions;
  std::string user_embeddings;
  std::string item_embeddings;
  std::string population;
  std::string catalog;  // empty: built-in catalog
  char delimiter = '\t';
  double max_malformed_fraction = 0.10;
  std::size_t min_interactions = 5;
  std::size_t n_train = 200;
  std::size_t n_test = 100;

  // Prompting.
  std::string mode = "rpp";  // rpp | rpp+
  std::size_t candidates = 10;
  std::size_t l0 = 1;
  std::string refiner = "identity";  // identity | http
  std::string refine_endpoint;       // defaults to endpoint
  std::string refine_model;          // defaults to model
  std::string refine_instruction;    // empty: built-in instruction

  // Environment.
  std::string backend = "simulated";  // simulated | http
  std::string endpoint;
  std::string model;
  double temperature = 0.2;
  double timeout_s = 30.0;
  int max_retries = 3;
  double backoff_base_s = 1.0;
  double backoff_max_s = 30.0;
  std::size_t max_in_flight = 4;

  // State encoder.
  std::string text_encoder = "hash";  // hash | http
  std::string embedding_endpoint;
  std::string embedding_model;
  std::size_t text_dim = 256;
  std::size_t state_dim = 64;
  std::size_t gru_input_dim = 32;

  // Learning.
  std::uint64_t seed = 0;
  double gamma = 0.95;
  std::size_t patience = 7;
  std::size_t max_iters = 15;
  std::size_t epochs = 60;
  std::string update_mode = "episode";  // episode | step
  std::size_t hidden = 64;
  double lr_actor = 0.01;
  double lr_critic = 0.01;
  double grad_clip = 5.0;

  // Evaluation.
  std::size_t inference_iters = 3;
  std::size_t repeats = 5;
  std::size_t eval_threads = 1;
  std::size_t manual_history_length = 10;
  std::size_t enum_history_length = 10;
  std::string enum_budget = "full";  // "full" or a positive count
  std::string baseline;              // "", manual, enumeration
  std::string checkpoint;
  std::string format = "both";  // table | summary | both

  // Simulator.
  std::size_t sim_users = 300;
  std::size_t sim_items = 400;
  double sim_planted_fraction = 0.0;
  std::size_t sim_max_signal_window = 8;
  double sim_embedding_noise = 0.1;

  std::string out_dir = "rpp_out";
};

using ConfigMap = std::map<std::string, std::string>;

/// Every recognized key in canonical order.
const std::vector<std::string>& config_keys();
bool is_config_key(std::string_view key);

/// Sets one key from its text form; throws a usage error on an unknown key
/// or a value that does not parse or is out of range.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
std::string get_setting(const RunConfig& config, std::string_view key);

/// "key = value" lines; '#' starts a comment. Errors name the line.
ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::filesystem::path& path);

/// Defaults, then `file`, then `cli`; validates the result.
RunConfig resolve_config(const ConfigMap& file, const ConfigMap& cli);
void validate_config(const RunConfig& config);

/// Canonical snapshot; parse_config_text(dump_config(c)) reproduces c.
std::string dump_config(const RunConfig& config);

}  // namespace rpp
