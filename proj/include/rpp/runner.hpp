// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpp/catalog.hpp"
#include "rpp/config.hpp"
#include "rpp/dataset.hpp"
#include "rpp/env.hpp"
#include "rpp/evaluation.hpp"
#include "rpp/marl.hpp"
#include "rpp/metrics.hpp"
#include "rpp/state.hpp"

namespace rpp {

/// Named sub-seeds of the master seed.
struct SeedPlan {
  std::uint64_t dataset = 0;
  std::uint64_t train_candidates = 0;
  std::uint64_t test_candidates = 0;
  std::uint64_t policy_init = 0;
  std::uint64_t sampling = 0;
  std::uint64_t simulator = 0;
  std::uint64_t encoder = 0;
  std::uint64_t eval = 0;
  std::uint64_t enumeration = 0;

  static SeedPlan from_master(std::uint64_t master);
};

/// Everything a run needs, assembled from a resolved configuration.
struct Workspace {
  RunConfig config;
  SeedPlan seeds;
  ActionCatalog catalog;
  SplitDataset data;
  std::shared_ptr<const EmbeddingTable> user_embeddings;
  std::shared_ptr<const EmbeddingTable> item_embeddings;
  std::shared_ptr<const TextEncoder> text;
  std::unique_ptr<StateEncoder> encoder;
  std::unique_ptr<Environment> env;
  std::shared_ptr<SentenceRefiner> refiner;
  std::unique_ptr<RefineBlock> refine;  // set in rpp+ mode
  std::vector<std::string> warnings;

  RolloutContext context() const;
  std::vector<const UserRecord*> train_users() const;
  std::vector<const UserRecord*> test_users() const;
  std::vector<UserInstance> train_instances() const;
};

/// Throws a usage error when no data source is configured.
std::unique_ptr<Workspace> build_workspace(const RunConfig& config);

/// Replaces the refiner used in rpp+ mode (tests inject failing stubs).
void set_refiner(Workspace& ws, std::shared_ptr<SentenceRefiner> refiner);

struct TrainResult {
  AgentBundle bundle;
  std::vector<EpochReport> epochs;
  RefineStats refine_stats;
  std::size_t aborted_episodes = 0;
};

TrainResult train(Workspace& ws);
AgentBundle fresh_bundle(const Workspace& ws);

MetricReport evaluate_bundle(Workspace& ws, const AgentBundle& bundle);
MetricReport evaluate_manual(Workspace& ws);
/// Runs the search on the train users, then evaluates the winner on test users.
MetricReport evaluate_enumeration(Workspace& ws, EnumerationResult* search = nullptr);

SimPopulation simulate_population(const RunConfig& config);

struct GradCheckSummary {
  double actor_max_rel_error = 0.0;
  double critic_max_rel_error = 0.0;
  std::size_t seeds = 0;

  bool passed(double tol = 1e-4) const {
    return actor_max_rel_error < tol && critic_max_rel_error < tol;
  }
};
GradCheckSummary grad_check_suite(std::uint64_t seed, std::size_t n_seeds = 20,
                                  double eps = 1e-5);

// Command entry points. Outputs go to config.out_dir; log lines to `log`.
void cmd_train(const RunConfig& config, std::ostream& log);
MetricReport cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_simulate(const RunConfig& config, std::ostream& log);
GradCheckSummary cmd_grad_check(const RunConfig& config, std::ostream& log);

}  // namespace rpp
