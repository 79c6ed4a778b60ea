// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rpp/catalog.hpp"
#include "rpp/core.hpp"
#include "rpp/marl.hpp"
#include "rpp/metrics.hpp"

namespace rpp {

/// One task-wise prompt applied to every user with a fixed history length.
struct FixedPrompt {
  JointAction action;
  std::size_t history_len = 10;
};

using PolicySource = std::variant<const AgentBundle*, FixedPrompt>;

struct EvalOptions {
  std::size_t repeats = 1;
  std::uint64_t seed = 0;           // backend noise; varies per repeat
  std::uint64_t candidate_seed = 0; // candidate sampling
  bool resample_candidates = false; // new candidate sets on every repeat
  std::size_t m = 10;
  std::size_t inference_iters = 3;
  std::size_t threads = 1;
  std::string label = "rpp";
};

/// Candidate sets for `users`, one per user, seeded per (repeat, user).
std::vector<UserInstance> make_instances(std::span<const UserRecord* const> users,
                                         const ItemCatalog& pool, std::size_t m,
                                         std::uint64_t seed, std::size_t repeat = 0);

MetricReport evaluate(const PolicySource& policy, std::span<const UserRecord* const> users,
                      const ItemCatalog& pool, const RolloutContext& ctx,
                      const EvalOptions& options);

FixedPrompt manual_baseline(const ActionCatalog& catalog, std::size_t history_len = 10);
AssembledPrompt manual_baseline_prompt(const ActionCatalog& catalog, const UserRecord& user,
                                       const CandidateSet& cands,
                                       std::size_t history_len = 10);

struct EnumerationOptions {
  std::size_t budget = std::numeric_limits<std::size_t>::max();  // default: full grid
  std::size_t history_len = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct EnumerationResult {
  FixedPrompt best;
  double best_score = 0.0;  // mean NDCG@10 on the search users
  std::vector<std::pair<JointAction, double>> scores;  // in evaluation order
};

/// Task-wise search over role x reasoning x output with the history action
/// fixed. Ties go to the lexicographically lowest action.
EnumerationResult enumeration_baseline(std::span<const UserInstance> users,
                                       const RolloutContext& ctx,
                                       const EnumerationOptions& options);

}  // namespace rpp
