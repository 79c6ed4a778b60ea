// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rpp/core.hpp"

namespace rpp {

struct RawInteraction {
  std::string user_key;
  std::string item_title;
  std::uint64_t timestamp = 0;

  friend bool operator==(const RawInteraction&, const RawInteraction&) = default;
};

struct InteractionFormat {
  char delimiter = '\t';
  /// Fraction of malformed rows above which loading fails.
  double max_malformed_fraction = 0.10;
};

struct LoadedInteractions {
  std::vector<RawInteraction> rows;  // file order
  std::size_t malformed = 0;
};

/// Columns: user, item title, timestamp, optional ignored extras.
LoadedInteractions load_interactions(const std::filesystem::path& path,
                                     const InteractionFormat& format = {});
LoadedInteractions parse_interactions(std::string_view text,
                                      const InteractionFormat& format = {});

struct SplitDataset {
  std::vector<UserRecord> users;  // indexed by UserId
  ItemCatalog item_catalog;
  std::unordered_map<std::string, UserId> user_index;
  std::vector<UserId> train_user_ids;
  std::vector<UserId> test_user_ids;

  const UserRecord& user(UserId id) const { return users.at(id); }
  std::optional<UserId> find_user(std::string_view key) const;
};

struct SplitOptions {
  std::uint64_t seed = 0;
  std::size_t n_train = 200;
  std::size_t n_test = 100;
  std::size_t min_interactions = 5;
};

/// Iterative k-core filter, chronological sort, leave-last-out holdout and a
/// seeded disjoint train/test draw.
SplitDataset build_split(const std::vector<RawInteraction>& raw,
                         const SplitOptions& options);

/// Canonical text form; equal inputs and seed give byte-identical output.
std::string serialize_split(const SplitDataset& split);

/// M-1 distractors drawn without replacement from the catalog minus the
/// user's own items; the holdout lands at a seeded uniform position.
CandidateSet sample_candidates(const UserRecord& user,
                               const ItemCatalog& pool, std::size_t m,
                               std::uint64_t seed);

enum class EmbeddingKind { kUser, kItem };

struct EmbeddingTable {
  std::size_t dim = 0;
  EmbeddingKind kind = EmbeddingKind::kUser;
  std::unordered_map<std::uint32_t, std::vector<double>> vectors;
  bool fallback_mode = false;
  std::size_t skipped_unknown = 0;
  std::vector<std::string> warnings;

  const std::vector<double>* lookup(std::uint32_t id) const {
    auto it = vectors.find(id);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

using KeyResolver = std::function<std::optional<std::uint32_t>(std::string_view)>;

/// File layout: "dim=<D>" header, then "key,v1,...,vD" rows. Unknown keys are
/// skipped with a warning. A missing file yields an empty fallback-mode table
/// when allow_fallback is set.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               EmbeddingKind kind, const KeyResolver& resolve,
                               bool allow_fallback = true);
EmbeddingTable parse_embeddings(std::string_view text, EmbeddingKind kind,
                                const KeyResolver& resolve);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rpp
