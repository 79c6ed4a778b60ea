// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "rpp/dataset.hpp"
#include "rpp/error.hpp"
#include "rpp/random.hpp"

using namespace rpp;

namespace {

// Dense log: every user rates `per_user` of `n_items` items, so all items
// clear the 5-interaction bar comfortably.
std::vector<RawInteraction> dense_log(std::size_t n_users, std::size_t n_items,
                                      std::size_t per_user, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RawInteraction> rows;
  for (std::size_t u = 0; u < n_users; ++u) {
    std::vector<std::size_t> items(n_items);
    for (std::size_t i = 0; i < n_items; ++i) items[i] = i;
    rng.shuffle(items);
    for (std::size_t j = 0; j < per_user; ++j) {
      rows.push_back({"u" + std::to_string(u), "item " + std::to_string(items[j]),
                      rng.uniform_index(1000000)});
    }
  }
  return rows;
}

const std::string kTmp = (std::filesystem::temp_directory_path() / "rpp_test_dataset").string();

}  // namespace

TEST_CASE("interaction row parses") {
  const auto r = parse_interactions("u1\tThe Fly\t978300760\n");
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0] == RawInteraction{"u1", "The Fly", 978300760});
  CHECK(r.malformed == 0);
}

TEST_CASE("short rows are skipped and counted") {
  std::string text;
  for (int i = 0; i < 19; ++i) text += "u" + std::to_string(i) + "\tT\t" + std::to_string(i) + "\n";
  text += "u9\tonly two\n";
  const auto r = parse_interactions(text);
  CHECK(r.rows.size() == 19);
  CHECK(r.malformed == 1);
}

TEST_CASE("extra column is ignored") {
  const auto r = parse_interactions("u1\tA\t5\t4.5\n");
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].timestamp == 5);
}

TEST_CASE("empty input has no interactions") {
  CHECK_THROWS_WITH(parse_interactions(""), doctest::Contains("no interactions"));
}

TEST_CASE("too many malformed rows fail; threshold is configurable") {
  const std::string text = "u1\tA\t1\nbad\nu2\tB\t2\n";
  CHECK_THROWS_AS(parse_interactions(text), Error);
  InteractionFormat loose;
  loose.max_malformed_fraction = 0.5;
  CHECK(parse_interactions(text, loose).malformed == 1);
}

TEST_CASE("custom delimiter and unreadable file") {
  InteractionFormat csv;
  csv.delimiter = ',';
  CHECK(parse_interactions("u1,A,3\n", csv).rows.size() == 1);
  CHECK_THROWS_AS(load_interactions("/nonexistent/rpp/file.tsv"), Error);
}

TEST_CASE("users below five interactions are dropped") {
  auto rows = dense_log(12, 15, 12, 1);
  for (int j = 0; j < 4; ++j) rows.push_back({"short", "item " + std::to_string(j), 5u + j});
  SplitOptions opt;
  opt.n_train = 8;
  opt.n_test = 4;
  const auto split = build_split(rows, opt);
  CHECK_FALSE(split.find_user("short").has_value());
  CHECK(split.users.size() == 12);
  for (const auto& u : split.users) CHECK(u.history.size() + 1 >= 5);
}

TEST_CASE("five-core filtering reaches a fixed point") {
  // Item "rare" has five raters, but one of them has only five rows including
  // it while another item drop takes that user below the bar.
  std::vector<RawInteraction> rows = dense_log(10, 12, 10, 2);
  for (int u = 0; u < 4; ++u) rows.push_back({"u" + std::to_string(u), "rare", 1});
  // The fifth rater of "rare" has four other rows on items that are themselves rare.
  rows.push_back({"edge", "rare", 1});
  for (int j = 0; j < 4; ++j) rows.push_back({"edge", "solo " + std::to_string(j), 2u + j});
  SplitOptions opt;
  opt.n_train = 6;
  opt.n_test = 4;
  const auto split = build_split(rows, opt);
  // "edge" loses its solo items (one rater each), falls to one row and is removed;
  // "rare" then has four raters and is removed too.
  CHECK_FALSE(split.find_user("edge").has_value());
  CHECK_FALSE(split.item_catalog.find("rare").has_value());
}

TEST_CASE("history is chronological with the last interaction held out") {
  std::vector<RawInteraction> rows = dense_log(10, 10, 10, 3);
  // Give u0 a fixed set of timestamps for its first five items.
  std::vector<RawInteraction> mine;
  const std::uint64_t ts[] = {5, 3, 9, 1, 7};
  for (int j = 0; j < 5; ++j) mine.push_back({"z", "item " + std::to_string(j), ts[j]});
  rows.insert(rows.end(), mine.begin(), mine.end());
  SplitOptions opt;
  opt.n_train = 6;
  opt.n_test = 5;
  const auto split = build_split(rows, opt);
  const auto& z = split.user(*split.find_user("z"));
  std::vector<std::string> titles;
  for (const auto& h : z.history) titles.push_back(h.title);
  CHECK(titles == std::vector<std::string>{"item 3", "item 1", "item 0", "item 4"});
  CHECK(z.holdout.title == "item 2");
}

TEST_CASE("split is seeded, disjoint and sized") {
  const auto rows = dense_log(40, 50, 12, 4);
  SplitOptions opt;
  opt.seed = 99;
  opt.n_train = 20;
  opt.n_test = 10;
  const auto a = build_split(rows, opt);
  const auto b = build_split(rows, opt);
  CHECK(a.train_user_ids == b.train_user_ids);
  CHECK(a.test_user_ids == b.test_user_ids);
  CHECK(serialize_split(a) == serialize_split(b));
  CHECK(a.train_user_ids.size() == 20);
  CHECK(a.test_user_ids.size() == 10);
  std::set<UserId> train(a.train_user_ids.begin(), a.train_user_ids.end());
  for (UserId id : a.test_user_ids) CHECK(train.count(id) == 0);
  opt.seed = 100;
  CHECK(build_split(rows, opt).train_user_ids != a.train_user_ids);
  opt.n_train = 35;
  CHECK_THROWS_WITH(build_split(rows, opt), doctest::Contains("insufficient eligible users"));
}

TEST_CASE("candidates: M items, one ground truth, no history, seeded") {
  const auto rows = dense_log(30, 60, 20, 5);
  SplitOptions opt;
  opt.n_train = 10;
  opt.n_test = 5;
  const auto split = build_split(rows, opt);
  for (const auto& user : split.users) {
    const auto c = sample_candidates(user, split.item_catalog, 10, 17 + user.user_id);
    REQUIRE(c.size() == 10);
    CHECK(c.items[c.ground_truth_pos] == user.holdout);
    std::set<ItemId> ids;
    for (const auto& it : c.items) ids.insert(it.id);
    CHECK(ids.size() == 10);
    for (const auto& h : user.history) CHECK(ids.count(h.id) == 0);
    const auto again = sample_candidates(user, split.item_catalog, 10, 17 + user.user_id);
    CHECK(again.items == c.items);
    CHECK(again.ground_truth_pos == c.ground_truth_pos);
  }
}

TEST_CASE("ground-truth position is roughly uniform") {
  const auto rows = dense_log(30, 60, 20, 6);
  SplitOptions opt;
  opt.n_train = 5;
  opt.n_test = 5;
  const auto split = build_split(rows, opt);
  std::vector<int> counts(10, 0);
  for (std::uint64_t s = 0; s < 5000; ++s) {
    ++counts[sample_candidates(split.users[0], split.item_catalog, 10, s).ground_truth_pos];
  }
  for (int c : counts) CHECK(c > 400);
}

TEST_CASE("pool too small is an error") {
  UserRecord user;
  user.history = {{0, "a"}};
  user.holdout = {1, "b"};
  ItemCatalog pool;
  for (int i = 0; i < 9; ++i) pool.intern(i == 0 ? "a" : i == 1 ? "b" : "x" + std::to_string(i));
  CHECK_THROWS_WITH(sample_candidates(user, pool, 10, 1),
                    doctest::Contains("candidate pool too small"));
}

TEST_CASE("embedding rows parse and validate") {
  const KeyResolver resolve = [](std::string_view key) -> std::optional<std::uint32_t> {
    if (key == "u1") return 0;
    if (key == "u2") return 1;
    return std::nullopt;
  };
  const auto t = parse_embeddings("dim=4\nu1,0,0,0,1\n", EmbeddingKind::kUser, resolve);
  CHECK(t.dim == 4);
  REQUIRE(t.lookup(0) != nullptr);
  CHECK(*t.lookup(0) == std::vector<double>{0, 0, 0, 1});

  CHECK_THROWS_WITH(parse_embeddings("dim=4\nu1,0,0,0,1\nu2,1,2,3\n", EmbeddingKind::kUser,
                                     resolve),
                    doctest::Contains("row 3"));

  const auto skipped =
      parse_embeddings("dim=2\nghost,1,2\nu2,3,4\n", EmbeddingKind::kUser, resolve);
  CHECK(skipped.skipped_unknown == 1);
  CHECK(skipped.warnings.size() == 1);
  CHECK(skipped.lookup(1) != nullptr);

  const auto missing = load_embeddings("/nonexistent/emb.txt", EmbeddingKind::kItem, resolve);
  CHECK(missing.fallback_mode);
  CHECK(missing.vectors.empty());
  CHECK_THROWS(load_embeddings("/nonexistent/emb.txt", EmbeddingKind::kItem, resolve, false));
}

TEST_CASE("file round trip through load_interactions") {
  std::filesystem::create_directories(kTmp);
  const auto path = std::filesystem::path(kTmp) / "log.tsv";
  write_file(path, "u1\tA\t1\nu1\tB\t2\n");
  CHECK(load_interactions(path).rows.size() == 2);
}
