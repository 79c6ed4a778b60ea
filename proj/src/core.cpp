// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/core.hpp"

#include <charconv>

#include "rpp/error.hpp"

namespace rpp {

void check_title(std::string_view title) {
  if (title.empty()) throw parse_error("empty title");
  if (title.find_first_of("\r\n") != std::string_view::npos) {
    throw parse_error("title contains a line break");
  }
}

ItemId ItemCatalog::intern(std::string_view title) {
  check_title(title);
  std::string key(title);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<ItemId>(titles_.size());
  titles_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<ItemId> ItemCatalog::find(std::string_view title) const {
  auto it = index_.find(std::string(title));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& ItemCatalog::title(ItemId id) const {
  if (id >= titles_.size()) {
    throw invalid_argument("unknown item id " + std::to_string(id));
  }
  return titles_[id];
}

InternResult intern_catalog(std::span<const std::string> titles) {
  if (titles.empty()) throw parse_error("empty catalog");
  InternResult out;
  out.ids.reserve(titles.size());
  for (std::size_t row = 0; row < titles.size(); ++row) {
    try {
      out.ids.push_back(out.catalog.intern(titles[row]));
    } catch (const Error& e) {
      throw parse_error("row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

std::string_view pattern_name(PatternKind k) {
  switch (k) {
    case PatternKind::kRolePlaying: return "role_playing";
    case PatternKind::kHistoryRecords: return "history_records";
    case PatternKind::kReasoningGuidance: return "reasoning_guidance";
    case PatternKind::kOutputFormat: return "output_format";
  }
  return "unknown";
}

std::optional<PatternKind> pattern_from_name(std::string_view name) {
  for (PatternKind k : kAllPatterns) {
    if (pattern_name(k) == name) return k;
  }
  return std::nullopt;
}

JointAction JointAction::from_map(const std::map<PatternKind, std::size_t>& m) {
  JointAction a;
  for (PatternKind k : kAllPatterns) {
    auto it = m.find(k);
    if (it == m.end()) {
      throw validation_error("joint action is missing pattern " +
                             std::string(pattern_name(k)));
    }
    a[k] = it->second;
  }
  return a;
}

std::string JointAction::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < kNumPatterns; ++i) {
    if (i) s += ',';
    s += std::to_string(index[i]);
  }
  return s;
}

JointAction JointAction::parse(std::string_view text) {
  JointAction a;
  std::size_t field = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (true) {
    if (field >= kNumPatterns) throw parse_error("joint action has too many fields");
    std::size_t v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || next == p) {
      throw parse_error("malformed joint action '" + std::string(text) + "'");
    }
    a.index[field++] = v;
    p = next;
    if (p == end) break;
    if (*p != ',') throw parse_error("malformed joint action '" + std::string(text) + "'");
    ++p;
  }
  if (field != kNumPatterns) throw parse_error("joint action needs 4 fields");
  return a;
}

void validate_joint_action(const JointAction& a, const PatternSizes& sizes) {
  for (PatternKind k : kAllPatterns) {
    const std::size_t n = sizes[pattern_index(k)];
    if (a[k] >= n) {
      throw validation_error("action index " + std::to_string(a[k]) +
                             " out of range for pattern " +
                             std::string(pattern_name(k)) + " (size " +
                             std::to_string(n) + ")");
    }
  }
}

void validate_joint_action(const std::map<PatternKind, std::size_t>& a,
                           const PatternSizes& sizes) {
  validate_joint_action(JointAction::from_map(a), sizes);
}

}  // namespace rpp
