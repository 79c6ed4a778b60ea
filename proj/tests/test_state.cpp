// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>

#include "rpp/random.hpp"
#include "rpp/state.hpp"

using namespace rpp;

namespace {

double l2(const Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::vector<ItemRef> items(std::initializer_list<ItemId> ids) {
  std::vector<ItemRef> out;
  for (ItemId id : ids) out.push_back({id, "t" + std::to_string(id)});
  return out;
}

StateEncoder make_encoder(std::shared_ptr<const EmbeddingTable> users = nullptr,
                          std::shared_ptr<const EmbeddingTable> item_table = nullptr) {
  StateEncoderConfig cfg;
  cfg.seed = 42;
  return StateEncoder(cfg, std::make_shared<HashTextEncoder>(256), std::move(users),
                      std::move(item_table));
}

}  // namespace

TEST_CASE("hash encoder basics") {
  HashTextEncoder enc(256);
  const auto z = enc.encode("");
  CHECK(z.size() == 256);
  CHECK(l2(z) == 0.0);
  CHECK(enc.encode("rank these movies") == enc.encode("rank these movies"));
  CHECK(l2(enc.encode("rank these movies")) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(enc.encode("Rank THESE movies") == enc.encode("rank these movies"));
  CHECK(enc.encode("rank these movies") != enc.encode("rank those films"));
}

TEST_CASE("hash tokens lowercase and split on punctuation") {
  CHECK(hash_tokens("Hello, World! x2") == std::vector<std::string>{"hello", "world", "x2"});
  CHECK(hash_tokens("  ,,, ").empty());
}

TEST_CASE("hash encoder is finite and norm-bounded on random bytes") {
  HashTextEncoder enc(64);
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const std::size_t n = rng.uniform_index(40);
    for (std::size_t j = 0; j < n; ++j) s += static_cast<char>(rng.uniform_index(256));
    const auto v = enc.encode(s);
    CHECK(all_finite(v));
    CHECK(l2(v) <= 1.0 + 1e-12);
  }
}

TEST_CASE("projection is linear and seeded") {
  Projection p(5, 7, 3);
  Projection q(5, 7, 3);
  const Vector x = {1, -2, 0.5, 0, 3};
  CHECK(p.apply(x) == q.apply(x));
  const auto zero = p.apply(Vector(5, 0.0));
  for (double v : zero) CHECK(v == 0.0);
  Vector x2 = x;
  for (auto& v : x2) v *= 2;
  const auto a = p.apply(x);
  const auto b = p.apply(x2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(2 * a[i]));
}

TEST_CASE("GRU is order-sensitive and bounded") {
  GruEncoder gru(8, 16, 5);
  Rng rng(1);
  std::vector<Vector> seq(10, Vector(8));
  for (auto& v : seq) {
    for (auto& x : v) x = 3.0 * rng.normal();
  }
  const auto h = gru.run(seq);
  std::vector<Vector> rev(seq.rbegin(), seq.rend());
  const auto hr = gru.run(rev);
  double diff = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    CHECK(std::abs(h[i]) < 1.0);
    CHECK(std::abs(hr[i]) < 1.0);
    diff += std::abs(h[i] - hr[i]);
  }
  CHECK(diff > 0.0);
  CHECK(gru.run(seq) == h);
  GruEncoder same(8, 16, 5);
  CHECK(same.run(seq) == h);
}

TEST_CASE("initial state from embeddings") {
  auto table = std::make_shared<EmbeddingTable>();
  table->dim = 4;
  table->vectors[0] = {0, 0, 0, 0};
  Rng rng(2);
  for (UserId u = 1; u <= 200; ++u) {
    Vector v(4);
    for (auto& x : v) x = rng.normal();
    table->vectors[u] = v;
  }
  const auto enc = make_encoder(table);
  const auto s0 = enc.init_state(0);
  CHECK(s0.values.size() == 64);
  CHECK(s0.step == 0);
  for (double v : s0.values) CHECK(v == 0.0);
  CHECK(enc.init_state(5).values == enc.init_state(5).values);
  for (UserId u = 1; u <= 199; u += 2) {
    CHECK(enc.init_state(u).values != enc.init_state(u + 1).values);
  }
}

TEST_CASE("initial state fallback hashes the user id") {
  const auto enc = make_encoder();
  const auto a = enc.init_state(3);
  CHECK(a.values.size() == 64);
  CHECK(all_finite(a.values));
  CHECK(a.values == enc.init_state(3).values);
  CHECK(a.values != enc.init_state(4).values);
}

TEST_CASE("update state: additive structure and order sensitivity") {
  const auto enc = make_encoder();
  AssembledPrompt p1;
  p1.text = "You are a movie expert.";
  AssembledPrompt p2;
  p2.text = "You are good at recommending movies.";
  const auto r = items({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  const auto rr = items({10, 9, 8, 7, 6, 5, 4, 3, 2, 1});

  const auto s1 = enc.update_state(p1, r, 1);
  CHECK(s1.step == 1);
  CHECK(s1.values.size() == 64);
  CHECK(s1.values == enc.update_state(p1, r, 1).values);

  const auto s2 = enc.update_state(p2, r, 1);
  const auto e1 = enc.prompt_component(p1.text);
  const auto e2 = enc.prompt_component(p2.text);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(s1.values[i] - s2.values[i] == doctest::Approx(e1[i] - e2[i]).epsilon(1e-12));
  }

  const auto o = enc.ranking_component(r);
  const auto orev = enc.ranking_component(rr);
  double diff = 0;
  for (std::size_t i = 0; i < 64; ++i) diff += std::abs(o[i] - orev[i]);
  CHECK(diff > 0.0);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(s1.values[i] == doctest::Approx(e1[i] + o[i]).epsilon(1e-12));
  }
}

TEST_CASE("item embeddings feed the ranking component") {
  auto table = std::make_shared<EmbeddingTable>();
  table->dim = 3;
  table->kind = EmbeddingKind::kItem;
  for (ItemId i = 1; i <= 10; ++i) table->vectors[i] = {double(i), -1.0, 0.5};
  const auto with = make_encoder(nullptr, table);
  const auto without = make_encoder();
  const auto r = items({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(with.ranking_component(r) != without.ranking_component(r));
  CHECK(all_finite(with.ranking_component(r)));
}
