// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpp/catalog.hpp"
#include "rpp/core.hpp"
#include "rpp/dataset.hpp"
#include "rpp/http.hpp"
#include "rpp/random.hpp"

namespace rpp {

inline constexpr double kDefaultTemperature = 0.2;

/// Text completion backend; temperature is forwarded verbatim.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(std::string_view prompt, double temperature) = 0;
  virtual std::string name() const = 0;
};

/// Chat-completions endpoint: one user message per request.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint);

  std::string complete(std::string_view prompt, double temperature) override;
  std::string name() const override { return client_.endpoint().model; }

  static std::string request_body(std::string_view model, std::string_view prompt,
                                  double temperature);
  /// choices[0].message.content; throws an environment error otherwise.
  static std::string reply_content(std::string_view body);

  std::size_t retries() const noexcept { return client_.retries(); }

 private:
  HttpJsonClient client_;
};

/// Refiner backed by an LLM. Templates are sent with the refine instruction
/// and a note to keep the placeholders intact.
class LlmRefiner final : public SentenceRefiner {
 public:
  LlmRefiner(std::shared_ptr<LlmBackend> backend, double temperature);
  std::string refine(std::string_view instruction, std::string_view sentence) override;
  std::string model() const override { return backend_->name(); }

  static std::string request_text(std::string_view instruction, std::string_view sentence);

 private:
  std::shared_ptr<LlmBackend> backend_;
  double temperature_;
};

/// The RL environment: a prompt goes in, reply text comes out.
class Environment {
 public:
  virtual ~Environment() = default;

  std::string respond(const UserRecord& user, const CandidateSet& cands,
                      const AssembledPrompt& prompt, Rng& rng) {
    ++calls_;
    return do_respond(user, cands, prompt, rng);
  }

  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::string do_respond(const UserRecord& user, const CandidateSet& cands,
                                 const AssembledPrompt& prompt, Rng& rng) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

class LlmEnvironment final : public Environment {
 public:
  LlmEnvironment(std::shared_ptr<LlmBackend> backend, double temperature);

 protected:
  std::string do_respond(const UserRecord&, const CandidateSet&,
                         const AssembledPrompt& prompt, Rng&) override;

 private:
  std::shared_ptr<LlmBackend> backend_;
  double temperature_;
};

struct ParsedRanking {
  std::vector<std::size_t> order;  // candidate indices, always a full permutation
  std::size_t n_matched = 0;
  bool padded = false;
};

/// Line-oriented parse: optional "<n>." prefix stripped, titles matched
/// exactly (case-insensitive) then by containment, duplicates ignored,
/// truncated to M and padded with unmatched candidates in candidate order.
ParsedRanking parse_reply(std::string_view reply, std::span<const std::string> titles);
ParsedRanking parse_reply(std::string_view reply, const CandidateSet& cands);

/// "1. title\n2. title\n..." for the given candidate order.
std::string render_ranking(std::span<const std::size_t> order, const CandidateSet& cands);

/// Per-user oracle standing in for a hosted LLM.
struct SimUserSpec {
  UserId user = 0;
  JointAction preferred;       // history index unused
  std::vector<double> preference;  // indexed by ItemId
  std::size_t signal_window = 1;
  std::size_t swap_passes_per_miss = 2;
  double swap_prob = 0.5;
  std::size_t demotion_depth = 5;
  std::size_t base_swap_passes = 0;

  friend bool operator==(const SimUserSpec&, const SimUserSpec&) = default;
};

/// Sentence patterns (role, reasoning, output) of `action` equal to the
/// preferred ones.
std::size_t matched_sentence_patterns(const SimUserSpec& spec, const JointAction& action);

std::string simulate_reply(const SimUserSpec& spec, const AssembledPrompt& prompt,
                           const CandidateSet& cands, Rng& rng);

class SimulatedEnvironment final : public Environment {
 public:
  explicit SimulatedEnvironment(std::vector<SimUserSpec> specs);
  const SimUserSpec& spec(UserId user) const;

 protected:
  std::string do_respond(const UserRecord& user, const CandidateSet& cands,
                         const AssembledPrompt& prompt, Rng& rng) override;

 private:
  std::vector<SimUserSpec> specs_;  // indexed by UserId
};

struct SimPopulationConfig {
  std::size_t n_users = 300;
  std::size_t n_items = 400;
  std::uint64_t seed = 0;
  std::size_t history_min = 10;
  std::size_t history_max = 30;
  std::size_t max_signal_window = 8;
  /// Share of users whose sentence preferences equal one planted combination.
  double planted_fraction = 0.0;
  std::size_t latent_dim = 8;
  std::size_t embedding_dim = 32;
  double embedding_noise = 0.1;
};

struct SimPopulation {
  ItemCatalog catalog;
  std::vector<UserRecord> users;  // indexed by UserId
  std::vector<SimUserSpec> specs;
  EmbeddingTable user_embeddings;
  JointAction planted;

  friend bool operator==(const SimPopulation& a, const SimPopulation& b);
};

SimPopulation gen_sim_population(const SimPopulationConfig& config,
                                 const PatternSizes& sizes);

/// Specs for an ingested dataset: random preferences with the holdout on top.
std::vector<SimUserSpec> attach_sim_specs(const SplitDataset& split,
                                          const PatternSizes& sizes,
                                          std::uint64_t seed,
                                          std::size_t max_signal_window = 8);

std::string serialize_population(const SimPopulation& pop);
SimPopulation parse_population(std::string_view json_text);

}  // namespace rpp
