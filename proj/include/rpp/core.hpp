// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rpp {

using ItemId = std::uint32_t;
using UserId = std::uint32_t;

struct ItemRef {
  ItemId id = 0;
  std::string title;

  friend bool operator==(const ItemRef&, const ItemRef&) = default;
};

/// Bijective title <-> dense id mapping. Ids are assigned in first-seen order.
class ItemCatalog {
 public:
  /// Returns the existing id for a known title. Throws on empty titles and
  /// titles containing line breaks.
  ItemId intern(std::string_view title);

  std::optional<ItemId> find(std::string_view title) const;
  const std::string& title(ItemId id) const;
  ItemRef ref(ItemId id) const { return {id, title(id)}; }
  std::size_t size() const noexcept { return titles_.size(); }
  const std::vector<std::string>& titles() const noexcept { return titles_; }

 private:
  std::vector<std::string> titles_;
  std::unordered_map<std::string, ItemId> index_;
};

struct InternResult {
  ItemCatalog catalog;
  std::vector<ItemId> ids;  // one per input row
};

/// Interns a title column. Error messages name the offending row.
InternResult intern_catalog(std::span<const std::string> titles);

/// Throws unless the title is non-empty and free of '\n' / '\r'.
void check_title(std::string_view title);

struct UserRecord {
  UserId user_id = 0;
  std::string key;  // external identifier from the source file
  std::vector<ItemRef> history;  // oldest first
  ItemRef holdout;
};

struct CandidateSet {
  std::vector<ItemRef> items;
  std::size_t ground_truth_pos = 0;

  std::size_t size() const noexcept { return items.size(); }
};

enum class PatternKind : std::uint8_t {
  kRolePlaying = 0,
  kHistoryRecords = 1,
  kReasoningGuidance = 2,
  kOutputFormat = 3,
};

inline constexpr std::size_t kNumPatterns = 4;
inline constexpr std::array<PatternKind, kNumPatterns> kAllPatterns = {
    PatternKind::kRolePlaying, PatternKind::kHistoryRecords,
    PatternKind::kReasoningGuidance, PatternKind::kOutputFormat};

constexpr std::size_t pattern_index(PatternKind k) {
  return static_cast<std::size_t>(k);
}
/// 1-based order index k in {1..4}.
constexpr int pattern_order(PatternKind k) {
  return static_cast<int>(k) + 1;
}
std::string_view pattern_name(PatternKind k);
std::optional<PatternKind> pattern_from_name(std::string_view name);

using PatternSizes = std::array<std::size_t, kNumPatterns>;

/// One action index per pattern, stored in pattern order.
struct JointAction {
  std::array<std::size_t, kNumPatterns> index{};

  std::size_t operator[](PatternKind k) const { return index[pattern_index(k)]; }
  std::size_t& operator[](PatternKind k) { return index[pattern_index(k)]; }

  /// Builds from a pattern-keyed map; every pattern must be present.
  static JointAction from_map(const std::map<PatternKind, std::size_t>& m);

  /// "i,j,k,l" in pattern order.
  std::string to_string() const;
  static JointAction parse(std::string_view text);

  friend bool operator==(const JointAction&, const JointAction&) = default;
  friend auto operator<=>(const JointAction&, const JointAction&) = default;
};

/// Throws a validation error naming the first out-of-range pattern.
void validate_joint_action(const JointAction& a, const PatternSizes& sizes);

/// Map form: additionally rejects missing patterns.
void validate_joint_action(const std::map<PatternKind, std::size_t>& a,
                           const PatternSizes& sizes);

}  // namespace rpp
