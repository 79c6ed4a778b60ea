// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rpp/catalog.hpp"
#include "rpp/core.hpp"
#include "rpp/env.hpp"
#include "rpp/nn.hpp"
#include "rpp/state.hpp"

namespace rpp {

/// Actor and critic of one pattern agent. Agents share nothing but the state.
struct Agent {
  Mlp2 actor;   // state -> |A_k| logits
  Mlp2 critic;  // state -> value
};

struct AgentBundle {
  std::array<Agent, kNumPatterns> agents;
  SgdConfig sgd;
  std::size_t state_dim = 0;
  std::size_t hidden = 0;
  PatternSizes sizes{};
  std::uint64_t init_seed = 0;

  static AgentBundle create(std::size_t state_dim, std::size_t hidden,
                            const PatternSizes& sizes, std::uint64_t seed,
                            SgdConfig sgd = {});

  Agent& agent(PatternKind k) { return agents[pattern_index(k)]; }
  const Agent& agent(PatternKind k) const { return agents[pattern_index(k)]; }

  JointAction greedy_action(std::span<const double> state) const;
  bool same_parameters(const AgentBundle& other) const;
};

inline constexpr int kCheckpointVersion = 1;

std::string serialize_checkpoint(const AgentBundle& bundle);
/// When `expected` is given, action-space sizes must match it.
AgentBundle parse_checkpoint(std::string_view text, const PatternSizes* expected = nullptr);
void save_checkpoint(const AgentBundle& bundle, const std::filesystem::path& path);
AgentBundle load_checkpoint(const std::filesystem::path& path,
                            const PatternSizes* expected = nullptr);

struct StopRule {
  std::size_t patience = 7;
  std::size_t max_iters = 15;
};

struct StopDecision {
  bool stop = false;
  std::size_t best_index = 0;
};

/// Stops once the best NDCG@10 has not strictly improved for `patience`
/// iterations, or after `max_iters` iterations.
StopDecision early_stop(std::span<const double> ndcg_history, const StopRule& rule);

/// R_t = r_t + gamma * R_{t+1}, with R_T = bootstrap.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    double bootstrap);

enum class PromptMode { kRpp, kRppPlus };
enum class ActionSelection { kSample, kGreedy };
enum class UpdateMode { kEpisode, kStep };

struct UserInstance {
  const UserRecord* user = nullptr;
  CandidateSet cands;
};

struct RolloutContext {
  const ActionCatalog* catalog = nullptr;
  const StateEncoder* encoder = nullptr;
  Environment* env = nullptr;
  RefineBlock* refine = nullptr;  // non-null selects RPP+
};

struct EpisodeStep {
  std::size_t t = 0;
  StateVector state;
  JointAction action;
  std::array<double, kNumPatterns> prob{};
  std::array<double, kNumPatterns> value{};
  std::string prompt;
  std::size_t history_len = 0;
  std::vector<std::size_t> ranking;
  bool padded = false;
  double reward = 0.0;  // NDCG@M
  double ndcg10 = 0.0;
};

struct StepResult {
  EpisodeStep step;
  StateVector next_state;
  std::size_t history_len = 0;
};

/// One interaction: every agent picks its action from the shared state, the
/// prompt is assembled (refined under RPP+), the environment answers, and
/// the next state is encoded from prompt and ranking.
StepResult rollout_step(const AgentBundle& bundle, const StateVector& state,
                        const UserInstance& instance, const RolloutContext& ctx,
                        std::size_t l_prev, std::size_t t, ActionSelection selection,
                        Rng& policy_rng, Rng& env_rng);

struct TrainConfig {
  double gamma = 0.95;
  StopRule stop;
  UpdateMode update = UpdateMode::kEpisode;
  std::uint64_t seed = 0;
};

struct UpdateStats {
  double actor_loss = 0.0;   // mean over agents
  double critic_loss = 0.0;  // mean over agents
};

/// A2C update of every agent from one finished episode; one SGD step each.
UpdateStats update_from_episode(AgentBundle& bundle, std::span<const EpisodeStep> steps,
                                const StateVector& final_state, const TrainConfig& cfg);

struct EpochReport {
  std::size_t epoch = 0;
  std::size_t episodes = 0;
  std::size_t failures = 0;
  double mean_reward = 0.0;
  double mean_best_ndcg10 = 0.0;
  double mean_actor_loss = 0.0;
  double mean_critic_loss = 0.0;
  double mean_episode_length = 0.0;
  std::size_t env_calls = 0;
  std::size_t max_episode_env_calls = 0;
};

std::string epoch_report_header();
std::string format_epoch_report(const EpochReport& report);

EpochReport train_epoch(AgentBundle& bundle, std::span<const UserInstance> users,
                        const RolloutContext& ctx, const TrainConfig& cfg,
                        std::size_t epoch);

struct InferenceResult {
  std::vector<EpisodeStep> steps;
  std::size_t best_index = 0;
  bool interrupted = false;

  const EpisodeStep& best() const { return steps.at(best_index); }
  const std::string& final_prompt() const { return best().prompt; }
};

/// Greedy rollout for exactly `fixed_iters` steps; keeps the best NDCG@10
/// step (earliest on ties).
InferenceResult run_episode_inference(const AgentBundle& bundle,
                                      const UserInstance& instance,
                                      const RolloutContext& ctx, std::size_t fixed_iters,
                                      std::uint64_t env_seed);

}  // namespace rpp
