// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>

#include "rpp/dataset.hpp"
#include "rpp/error.hpp"

namespace rpp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            std::string_view expected) {
  throw usage_error("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(expected) + ")");
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view v) {
  unsigned long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a non-negative integer");
  }
  return static_cast<T>(out);
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad_value(key, v, "a number");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
KeySpec unsigned_key(std::string name, T RunConfig::*field) {
  return {name,
          [name, field](RunConfig& c, std::string_view v) {
            c.*field = parse_unsigned<T>(name, v);
          },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeySpec double_key(std::string name, double RunConfig::*field) {
  return {name,
          [name, field](RunConfig& c, std::string_view v) { c.*field = parse_double(name, v); },
          [field](const RunConfig& c) { return format_double(c.*field); }};
}

KeySpec string_key(std::string name, std::string RunConfig::*field) {
  return {name, [field](RunConfig& c, std::string_view v) { c.*field = std::string(v); },
          [field](const RunConfig& c) { return c.*field; }};
}

KeySpec choice_key(std::string name, std::string RunConfig::*field,
                   std::vector<std::string> choices) {
  return {name,
          [name, field, choices](RunConfig& c, std::string_view v) {
            for (const auto& ch : choices) {
              if (ch == v) {
                c.*field = ch;
                return;
              }
            }
            std::string list;
            for (const auto& ch : choices) list += (list.empty() ? "" : " | ") + ch;
            bad_value(name, v, list);
          },
          [field](const RunConfig& c) { return c.*field; }};
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> s;
    s.push_back(string_key("interactions", &RunConfig::interactions));
    s.push_back(string_key("user_embeddings", &RunConfig::user_embeddings));
    s.push_back(string_key("item_embeddings", &RunConfig::item_embeddings));
    s.push_back(string_key("population", &RunConfig::population));
    s.push_back(string_key("catalog", &RunConfig::catalog));
    s.push_back({"delimiter",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "\\t" || v == "tab") {
                     c.delimiter = '\t';
                   } else if (v.size() == 1) {
                     c.delimiter = v[0];
                   } else {
                     bad_value("delimiter", v, "one character or \\t");
                   }
                 },
                 [](const RunConfig& c) {
                   return c.delimiter == '\t' ? std::string("\\t") : std::string(1, c.delimiter);
                 }});
    s.push_back(double_key("max_malformed_fraction", &RunConfig::max_malformed_fraction));
    s.push_back(unsigned_key("min_interactions", &RunConfig::min_interactions));
    s.push_back(unsigned_key("n_train", &RunConfig::n_train));
    s.push_back(unsigned_key("n_test", &RunConfig::n_test));
    s.push_back(choice_key("mode", &RunConfig::mode, {"rpp", "rpp+"}));
    s.push_back(unsigned_key("candidates", &RunConfig::candidates));
    s.push_back(unsigned_key("l0", &RunConfig::l0));
    s.push_back(choice_key("refiner", &RunConfig::refiner, {"identity", "http"}));
    s.push_back(string_key("refine_endpoint", &RunConfig::refine_endpoint));
    s.push_back(string_key("refine_model", &RunConfig::refine_model));
    s.push_back(string_key("refine_instruction", &RunConfig::refine_instruction));
    s.push_back(choice_key("backend", &RunConfig::backend, {"simulated", "http"}));
    s.push_back(string_key("endpoint", &RunConfig::endpoint));
    s.push_back(string_key("model", &RunConfig::model));
    s.push_back(double_key("temperature", &RunConfig::temperature));
    s.push_back(double_key("timeout_s", &RunConfig::timeout_s));
    s.push_back({"max_retries",
                 [](RunConfig& c, std::string_view v) {
                   c.max_retries = parse_unsigned<int>("max_retries", v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.max_retries); }});
    s.push_back(double_key("backoff_base_s", &RunConfig::backoff_base_s));
    s.push_back(double_key("backoff_max_s", &RunConfig::backoff_max_s));
    s.push_back(unsigned_key("max_in_flight", &RunConfig::max_in_flight));
    s.push_back(choice_key("text_encoder", &RunConfig::text_encoder, {"hash", "http"}));
    s.push_back(string_key("embedding_endpoint", &RunConfig::embedding_endpoint));
    s.push_back(string_key("embedding_model", &RunConfig::embedding_model));
    s.push_back(unsigned_key("text_dim", &RunConfig::text_dim));
    s.push_back(unsigned_key("state_dim", &RunConfig::state_dim));
    s.push_back(unsigned_key("gru_input_dim", &RunConfig::gru_input_dim));
    s.push_back(unsigned_key("seed", &RunConfig::seed));
    s.push_back(double_key("gamma", &RunConfig::gamma));
    s.push_back(unsigned_key("patience", &RunConfig::patience));
    s.push_back(unsigned_key("max_iters", &RunConfig::max_iters));
    s.push_back(unsigned_key("epochs", &RunConfig::epochs));
    s.push_back(choice_key("update_mode", &RunConfig::update_mode, {"episode", "step"}));
    s.push_back(unsigned_key("hidden", &RunConfig::hidden));
    s.push_back(double_key("lr_actor", &RunConfig::lr_actor));
    s.push_back(double_key("lr_critic", &RunConfig::lr_critic));
    s.push_back(double_key("grad_clip", &RunConfig::grad_clip));
    s.push_back(unsigned_key("inference_iters", &RunConfig::inference_iters));
    s.push_back(unsigned_key("repeats", &RunConfig::repeats));
    s.push_back(unsigned_key("eval_threads", &RunConfig::eval_threads));
    s.push_back(unsigned_key("manual_history_length", &RunConfig::manual_history_length));
    s.push_back(unsigned_key("enum_history_length", &RunConfig::enum_history_length));
    s.push_back({"enum_budget",
                 [](RunConfig& c, std::string_view v) {
                   if (v != "full") parse_unsigned<std::size_t>("enum_budget", v);
                   c.enum_budget = std::string(v);
                 },
                 [](const RunConfig& c) { return c.enum_budget; }});
    s.push_back(choice_key("baseline", &RunConfig::baseline, {"", "manual", "enumeration"}));
    s.push_back(string_key("checkpoint", &RunConfig::checkpoint));
    s.push_back(choice_key("format", &RunConfig::format, {"table", "summary", "both"}));
    s.push_back(unsigned_key("sim_users", &RunConfig::sim_users));
    s.push_back(unsigned_key("sim_items", &RunConfig::sim_items));
    s.push_back(double_key("sim_planted_fraction", &RunConfig::sim_planted_fraction));
    s.push_back(unsigned_key("sim_max_signal_window", &RunConfig::sim_max_signal_window));
    s.push_back(double_key("sim_embedding_noise", &RunConfig::sim_embedding_noise));
    s.push_back(string_key("out_dir", &RunConfig::out_dir));
    return s;
  }();
  return specs;
}

const KeySpec& find_spec(std::string_view key) {
  for (const auto& s : key_specs()) {
    if (s.name == key) return s;
  }
  throw usage_error("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : key_specs()) k.push_back(s.name);
    return k;
  }();
  return keys;
}

bool is_config_key(std::string_view key) {
  for (const auto& s : key_specs()) {
    if (s.name == key) return true;
  }
  return false;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  find_spec(key).set(config, value);
}

std::string get_setting(const RunConfig& config, std::string_view key) {
  return find_spec(key).get(config);
}

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    // A '#' begins a comment only at the start of a line so values may contain it.
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') {
      if (nl == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw usage_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!is_config_key(key)) {
      throw usage_error("config line " + std::to_string(line_no) + ": unknown key '" + key +
                        "'");
    }
    out[key] = value;
    if (nl == text.size()) break;
  }
  return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw usage_error("cannot read config file: " + std::string(e.what()));
  }
  return parse_config_text(text);
}

void validate_config(const RunConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw usage_error(msg);
  };
  require(c.candidates >= 1, "candidates must be >= 1");
  require(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma must lie in [0, 1]");
  require(c.patience >= 1 && c.patience <= c.max_iters,
          "patience must satisfy 1 <= patience <= max_iters");
  require(c.inference_iters >= 1, "inference_iters must be >= 1");
  require(c.repeats >= 1, "repeats must be >= 1");
  require(c.l0 >= 1, "l0 must be >= 1");
  require(c.state_dim >= 1 && c.hidden >= 1 && c.text_dim >= 1 && c.gru_input_dim >= 1,
          "network dimensions must be positive");
  require(c.lr_actor >= 0.0 && c.lr_critic >= 0.0, "learning rates must be >= 0");
  require(c.grad_clip > 0.0, "grad_clip must be positive");
  require(c.temperature >= 0.0, "temperature must be >= 0");
  require(c.max_malformed_fraction >= 0.0 && c.max_malformed_fraction <= 1.0,
          "max_malformed_fraction must lie in [0, 1]");
  require(c.sim_planted_fraction >= 0.0 && c.sim_planted_fraction <= 1.0,
          "sim_planted_fraction must lie in [0, 1]");
  require(c.timeout_s > 0.0, "timeout_s must be positive");
  require(c.eval_threads >= 1, "eval_threads must be >= 1");
}

RunConfig resolve_config(const ConfigMap& file, const ConfigMap& cli) {
  RunConfig c;
  for (const auto& [k, v] : file) apply_setting(c, k, v);
  for (const auto& [k, v] : cli) apply_setting(c, k, v);
  validate_config(c);
  return c;
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const auto& s : key_specs()) {
    out += s.name;
    out += " = ";
    out += s.get(config);
    out += '\n';
  }
  return out;
}

}  // namespace rpp
