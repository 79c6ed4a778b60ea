// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t start = 0;
  std::size_t lineno = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    std::string_view line = pos == std::string_view::npos
                                ? text.substr(start)
                                : text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++lineno;
    if (pos == std::string_view::npos) {
      if (!line.empty()) fn(line, lineno);
      break;
    }
    fn(line, lineno);
    start = pos + 1;
  }
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw io_error("short write to " + path.string());
}

LoadedInteractions parse_interactions(std::string_view text,
                                      const InteractionFormat& format) {
  LoadedInteractions out;
  std::size_t non_empty = 0;
  for_each_line(text, [&](std::string_view line, std::size_t) {
    if (trim(line).empty()) return;
    ++non_empty;
    auto fields = split_fields(line, format.delimiter);
    if (fields.size() < 3) {
      ++out.malformed;
      return;
    }
    std::string_view user = trim(fields[0]);
    std::string_view title = trim(fields[1]);
    std::string_view ts = trim(fields[2]);
    std::uint64_t t = 0;
    auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), t);
    if (user.empty() || title.empty() || ec != std::errc() ||
        p != ts.data() + ts.size()) {
      ++out.malformed;
      return;
    }
    out.rows.push_back({std::string(user), std::string(title), t});
  });
  if (out.rows.empty()) throw parse_error("no interactions");
  const double frac =
      static_cast<double>(out.malformed) / static_cast<double>(non_empty);
  if (frac > format.max_malformed_fraction) {
    throw parse_error(std::to_string(out.malformed) + " of " +
                      std::to_string(non_empty) +
                      " interaction rows are malformed");
  }
  return out;
}

LoadedInteractions load_interactions(const std::filesystem::path& path,
                                     const InteractionFormat& format) {
  return parse_interactions(read_file(path), format);
}

std::optional<UserId> SplitDataset::find_user(std::string_view key) const {
  auto it = user_index.find(std::string(key));
  if (it == user_index.end()) return std::nullopt;
  return it->second;
}

SplitDataset build_split(const std::vector<RawInteraction>& raw,
                         const SplitOptions& options) {
  std::vector<bool> alive(raw.size(), true);
  // Fixed-point k-core: dropping a user can push an item below threshold.
  while (true) {
    std::unordered_map<std::string_view, std::size_t> user_count, item_count;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (!alive[i]) continue;
      ++user_count[raw[i].user_key];
      ++item_count[raw[i].item_title];
    }
    bool changed = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (!alive[i]) continue;
      if (user_count[raw[i].user_key] < options.min_interactions ||
          item_count[raw[i].item_title] < options.min_interactions) {
        alive[i] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }

  SplitDataset split;
  std::vector<std::vector<std::size_t>> rows_of_user;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!alive[i]) continue;
    auto [it, inserted] = split.user_index.emplace(
        raw[i].user_key, static_cast<UserId>(rows_of_user.size()));
    if (inserted) rows_of_user.emplace_back();
    rows_of_user[it->second].push_back(i);
    try {
      split.item_catalog.intern(raw[i].item_title);
    } catch (const Error& e) {
      throw parse_error("interaction row " + std::to_string(i) + ": " + e.what());
    }
  }

  split.users.resize(rows_of_user.size());
  for (const auto& [key, uid] : split.user_index) split.users[uid].key = key;
  for (UserId uid = 0; uid < rows_of_user.size(); ++uid) {
    auto& rows = rows_of_user[uid];
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return raw[a].timestamp < raw[b].timestamp;
    });
    UserRecord& u = split.users[uid];
    u.user_id = uid;
    for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
      const auto id = *split.item_catalog.find(raw[rows[r]].item_title);
      u.history.push_back(split.item_catalog.ref(id));
    }
    const auto hid = *split.item_catalog.find(raw[rows.back()].item_title);
    u.holdout = split.item_catalog.ref(hid);
  }

  const std::size_t eligible = split.users.size();
  if (options.n_train + options.n_test > eligible) {
    throw validation_error("insufficient eligible users: need " +
                           std::to_string(options.n_train + options.n_test) +
                           ", have " + std::to_string(eligible));
  }
  std::vector<UserId> order(eligible);
  std::iota(order.begin(), order.end(), UserId{0});
  Rng rng(options.seed);
  rng.shuffle(order);
  split.train_user_ids.assign(order.begin(), order.begin() + options.n_train);
  split.test_user_ids.assign(order.begin() + options.n_train,
                             order.begin() + options.n_train + options.n_test);
  return split;
}

std::string serialize_split(const SplitDataset& split) {
  std::ostringstream out;
  out << "items " << split.item_catalog.size() << '\n';
  for (std::size_t i = 0; i < split.item_catalog.size(); ++i) {
    out << i << '\t' << split.item_catalog.titles()[i] << '\n';
  }
  out << "users " << split.users.size() << '\n';
  for (const auto& u : split.users) {
    out << u.user_id << '\t' << u.key << '\t' << u.holdout.id << '\t';
    for (std::size_t i = 0; i < u.history.size(); ++i) {
      if (i) out << ',';
      out << u.history[i].id;
    }
    out << '\n';
  }
  auto ids = [&](const char* name, const std::vector<UserId>& v) {
    out << name;
    for (UserId id : v) out << ' ' << id;
    out << '\n';
  };
  ids("train", split.train_user_ids);
  ids("test", split.test_user_ids);
  return out.str();
}

CandidateSet sample_candidates(const UserRecord& user, const ItemCatalog& pool,
                               std::size_t m, std::uint64_t seed) {
  if (m == 0) throw invalid_argument("candidate count must be positive");
  if (user.holdout.id >= pool.size()) {
    throw validation_error("holdout item is not in the catalog");
  }
  std::unordered_set<ItemId> excluded;
  excluded.insert(user.holdout.id);
  for (const auto& h : user.history) excluded.insert(h.id);

  std::vector<ItemId> candidates;
  candidates.reserve(pool.size());
  for (ItemId id = 0; id < pool.size(); ++id) {
    if (!excluded.contains(id)) candidates.push_back(id);
  }
  if (candidates.size() < m - 1 || pool.size() < m) {
    throw validation_error("candidate pool too small: " +
                           std::to_string(candidates.size()) +
                           " distractors available, need " + std::to_string(m - 1));
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first m-1 slots become the sample.
  for (std::size_t i = 0; i + 1 < m; ++i) {
    std::size_t j = i + rng.uniform_index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  CandidateSet set;
  set.ground_truth_pos = rng.uniform_index(m);
  set.items.reserve(m);
  std::size_t next = 0;
  for (std::size_t pos = 0; pos < m; ++pos) {
    if (pos == set.ground_truth_pos) {
      set.items.push_back(user.holdout);
    } else {
      set.items.push_back(pool.ref(candidates[next++]));
    }
  }
  return set;
}

EmbeddingTable parse_embeddings(std::string_view text, EmbeddingKind kind,
                                const KeyResolver& resolve) {
  EmbeddingTable table;
  table.kind = kind;
  bool have_header = false;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    line = trim(line);
    if (line.empty()) return;
    if (!have_header) {
      if (!line.starts_with("dim=")) {
        throw parse_error("embedding file must start with 'dim=<D>'");
      }
      std::string_view v = line.substr(4);
      std::size_t d = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
      if (ec != std::errc() || p != v.data() + v.size() || d == 0) {
        throw parse_error("invalid embedding dimension '" + std::string(v) + "'");
      }
      table.dim = d;
      have_header = true;
      return;
    }
    auto fields = split_fields(line, ',');
    if (fields.size() != table.dim + 1) {
      throw parse_error("embedding row " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size() - 1) + " values, expected " +
                        std::to_string(table.dim));
    }
    std::vector<double> vec(table.dim);
    for (std::size_t i = 0; i < table.dim; ++i) {
      std::string f(trim(fields[i + 1]));
      char* end = nullptr;
      vec[i] = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size() || !std::isfinite(vec[i])) {
        throw parse_error("embedding row " + std::to_string(lineno) +
                          ": bad value '" + f + "'");
      }
    }
    std::string_view key = trim(fields[0]);
    auto id = resolve(key);
    if (!id) {
      ++table.skipped_unknown;
      table.warnings.push_back("unknown embedding key '" + std::string(key) +
                               "' skipped");
      return;
    }
    table.vectors[*id] = std::move(vec);
  });
  if (!have_header) throw parse_error("embedding file is empty");
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               EmbeddingKind kind, const KeyResolver& resolve,
                               bool allow_fallback) {
  if (path.empty() || !std::filesystem::exists(path)) {
    if (!allow_fallback) throw io_error("embedding file not found: " + path.string());
    EmbeddingTable table;
    table.kind = kind;
    table.fallback_mode = true;
    return table;
  }
  return parse_embeddings(read_file(path), kind, resolve);
}

}  // namespace rpp
