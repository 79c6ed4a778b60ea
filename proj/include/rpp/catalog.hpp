// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rpp/core.hpp"

namespace rpp {

inline constexpr std::string_view kHistoryPlaceholder = "<SeqH1>";
inline constexpr std::string_view kCandidatePlaceholder = "<SeqH2>";
inline constexpr std::string_view kDefaultRefineInstruction =
    "Please refine this sentence to effectively prompt LLMs for recommendations";

/// The four per-pattern action spaces. The history pattern varies only the
/// number of interactions shown; its sentence template is fixed.
struct ActionCatalog {
  std::vector<std::string> role_sentences;
  std::string history_template;
  std::vector<std::size_t> history_increments;
  std::vector<std::string> reasoning_sentences;
  std::vector<std::string> output_sentences;
  std::size_t initial_history_length = 1;
  /// Sentence choice of the fixed task-wise prompt; the history index is unused.
  JointAction manual_action{};

  PatternSizes sizes() const;
  std::size_t joint_space_size() const;

  /// Template for the chosen action of pattern k (history -> fixed template).
  const std::string& sentence(PatternKind k, std::size_t index) const;

  /// Throws unless every list is non-empty and placeholders appear only where
  /// declared: exactly one <SeqH1> in the history template, exactly one
  /// <SeqH2> in each reasoning sentence, none elsewhere.
  void validate() const;

  friend bool operator==(const ActionCatalog&, const ActionCatalog&) = default;
};

ActionCatalog default_action_catalog();
ActionCatalog parse_action_catalog(std::string_view json_text);
ActionCatalog load_action_catalog(const std::filesystem::path& path);
std::string dump_action_catalog(const ActionCatalog& catalog);

/// l most recent history titles, most recent first, quoted and comma-joined.
std::string render_history_list(const UserRecord& user, std::size_t l);
/// Candidates in presentation order, numbered from 1.
std::string render_candidate_list(const CandidateSet& cands);

std::string history_sentence(const ActionCatalog& catalog,
                             const UserRecord& user, std::size_t l);

/// min(l_prev + increment, history_len).
std::size_t apply_length_action(std::size_t l_prev, std::size_t increment,
                                std::size_t history_len);

/// Sentence templates in pattern order, before placeholder substitution.
struct PromptSentences {
  std::array<std::string, kNumPatterns> text;
};

PromptSentences select_sentences(const ActionCatalog& catalog,
                                 const JointAction& action);

struct AssembledPrompt {
  std::string text;
  std::size_t used_history_len = 0;
  JointAction action;
};

AssembledPrompt render_prompt(const PromptSentences& sentences,
                              const UserRecord& user, const CandidateSet& cands,
                              const JointAction& action, std::size_t l_t);

AssembledPrompt assemble(const ActionCatalog& catalog, const UserRecord& user,
                         const CandidateSet& cands, const JointAction& action,
                         std::size_t l_t);

/// Rewrites one sentence template. Implementations may throw to signal failure.
class SentenceRefiner {
 public:
  virtual ~SentenceRefiner() = default;
  virtual std::string refine(std::string_view instruction,
                             std::string_view sentence) = 0;
  virtual std::string model() const = 0;
};

class IdentityRefiner final : public SentenceRefiner {
 public:
  std::string refine(std::string_view, std::string_view sentence) override {
    return std::string(sentence);
  }
  std::string model() const override { return "identity"; }
};

struct RefineStats {
  std::size_t requests = 0;        // refiner invocations
  std::size_t cache_hits = 0;
  std::size_t failures = 0;        // refiner threw
  std::size_t placeholder_rejections = 0;  // reply dropped a placeholder
};

/// Refines selected templates with caching keyed by (sentence, model). On any
/// failure the original template is kept; nothing here throws past refine().
class RefineBlock {
 public:
  explicit RefineBlock(std::shared_ptr<SentenceRefiner> refiner,
                       std::string instruction = std::string(kDefaultRefineInstruction));

  std::string refine_sentence(const std::string& sentence);
  PromptSentences refine(const PromptSentences& sentences);

  RefineStats stats() const;
  std::vector<std::string> take_warnings();

 private:
  std::shared_ptr<SentenceRefiner> refiner_;
  std::string instruction_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> cache_;
  RefineStats stats_;
  std::vector<std::string> warnings_;
};

}  // namespace rpp
