// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <string>

#include "rpp/rpp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void print_line(const char* line, void*) { std::printf("%s\n", line); }

int exit_code(rpp_status st) {
  if (st == RPP_OK) return kExitOk;
  std::fprintf(stderr, "rpp: %s: %s\n", rpp_status_string(st), rpp_last_error());
  return st == RPP_ERR_USAGE ? kExitUsage : kExitRuntime;
}

std::string flag_name(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

struct CommandOptions {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_options(CLI::App* cmd, CommandOptions& opts) {
  cmd->add_option("--config", opts.config_file, "key = value configuration file");
  const std::size_t n = rpp_config_key_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string key = rpp_config_key_name(i);
    cmd->add_option(flag_name(key), opts.values[key], "override config key " + key);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforced prompt personalization: train, evaluate and simulate."};
  app.require_subcommand(1);

  const char* names[] = {"train", "eval", "simulate", "grad-check"};
  const char* help[] = {"train the four prompt agents", "evaluate a checkpoint or a baseline",
                        "write a simulated user population", "check network gradients"};
  std::map<std::string, CommandOptions> options;
  std::map<std::string, CLI::App*> commands;
  for (int i = 0; i < 4; ++i) {
    commands[names[i]] = app.add_subcommand(names[i], help[i]);
    add_config_options(commands[names[i]], options[names[i]]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::string name;
  for (const auto& [n, cmd] : commands) {
    if (cmd->parsed()) name = n;
  }
  CLI::App* cmd = commands[name];
  CommandOptions& opts = options[name];

  std::unique_ptr<rpp_config_t, decltype(&rpp_config_destroy)> config(rpp_config_create(),
                                                                      &rpp_config_destroy);
  if (!config) return exit_code(RPP_ERR_RUNTIME);
  if (!opts.config_file.empty()) {
    if (rpp_status st = rpp_config_load_file(config.get(), opts.config_file.c_str())) {
      return exit_code(st);
    }
  }
  for (const auto& [key, value] : opts.values) {
    if (cmd->count(flag_name(key)) == 0) continue;
    if (rpp_status st = rpp_config_set(config.get(), key.c_str(), value.c_str())) {
      return exit_code(st);
    }
  }

  if (name == "train") return exit_code(rpp_train(config.get(), print_line, nullptr));
  if (name == "eval") return exit_code(rpp_eval(config.get(), print_line, nullptr, nullptr));
  if (name == "simulate") return exit_code(rpp_simulate(config.get(), print_line, nullptr));

  int passed = 0;
  const rpp_status st =
      rpp_grad_check(config.get(), print_line, nullptr, nullptr, nullptr, &passed);
  if (st != RPP_OK) return exit_code(st);
  if (!passed) {
    std::fprintf(stderr, "rpp: gradient check exceeded tolerance 1e-4\n");
    return kExitRuntime;
  }
  return kExitOk;
}
