// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/state.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>

#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {
namespace {

constexpr std::uint64_t kSignBasis = 0x84222325cbf29ce4ULL;

void l2_normalize(Vector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> gaussian_matrix(std::size_t rows, std::size_t cols,
                                    double stddev, Rng& rng) {
  std::vector<double> m(rows * cols);
  for (double& x : m) x = stddev * rng.normal();
  return m;
}

// Modified Gram-Schmidt on a Gaussian matrix gives a random orthogonal one.
std::vector<double> orthogonal_matrix(std::size_t n, Rng& rng) {
  std::vector<double> m = gaussian_matrix(n, n, 1.0, rng);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &m[i * n];
    for (std::size_t j = 0; j < i; ++j) {
      const double* prev = &m[j * n];
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += row[c] * prev[c];
      for (std::size_t c = 0; c < n; ++c) row[c] -= dot * prev[c];
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < n; ++c) norm += row[c] * row[c];
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < n; ++c) row[c] /= norm;
  }
  return m;
}

void matvec_add(const std::vector<double>& m, std::size_t rows, std::size_t cols,
                std::span<const double> x, std::vector<double>& out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &m[r * cols];
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
}

}  // namespace

std::vector<std::string> hash_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

HashTextEncoder::HashTextEncoder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw invalid_argument("text encoder dimension must be positive");
}

Vector HashTextEncoder::encode(std::string_view text) const {
  Vector v(dim_, 0.0);
  for (const auto& tok : hash_tokens(text)) {
    const std::size_t bucket = fnv1a64(tok) % dim_;
    const double sign = (fnv1a64(tok, kSignBasis) >> 63) ? -1.0 : 1.0;
    v[bucket] += sign;
  }
  l2_normalize(v);
  return v;
}

HttpTextEncoder::HttpTextEncoder(HttpEndpoint endpoint, std::size_t dim)
    : client_(std::move(endpoint)), dim_(dim) {
  if (dim_ == 0) throw invalid_argument("text encoder dimension must be positive");
}

Vector HttpTextEncoder::encode(std::string_view text) const {
  nlohmann::json req = {{"input", std::string(text)}};
  const std::string body = client_.post(req.dump());
  Vector v;
  try {
    auto j = nlohmann::json::parse(body);
    v = j.at("embedding").get<Vector>();
  } catch (const nlohmann::json::exception& e) {
    throw environment_error(std::string("malformed embedding reply: ") + e.what());
  }
  if (v.size() != dim_) {
    throw environment_error("embedding endpoint returned dim " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(dim_));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw environment_error("embedding reply has non-finite values");
  }
  l2_normalize(v);
  return v;
}

Projection::Projection(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed)
    : in_dim_(in_dim), out_dim_(out_dim) {
  Rng rng(seed);
  weights_ = gaussian_matrix(in_dim, out_dim, 1.0 / std::sqrt(static_cast<double>(out_dim)), rng);
}

Vector Projection::apply(std::span<const double> x) const {
  if (x.size() != in_dim_) {
    throw invalid_argument("projection expects dim " + std::to_string(in_dim_) +
                           ", got " + std::to_string(x.size()));
  }
  Vector out(out_dim_, 0.0);
  for (std::size_t i = 0; i < in_dim_; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = &weights_[i * out_dim_];
    for (std::size_t j = 0; j < out_dim_; ++j) out[j] += xi * row[j];
  }
  return out;
}

GruEncoder::GruEncoder(std::size_t input_dim, std::size_t hidden_dim,
                       std::uint64_t seed)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) {
    throw invalid_argument("GRU dimensions must be positive");
  }
  Rng rng(seed);
  const double in_std = 1.0 / std::sqrt(static_cast<double>(input_dim));
  wz_ = gaussian_matrix(hidden_dim, input_dim, in_std, rng);
  wr_ = gaussian_matrix(hidden_dim, input_dim, in_std, rng);
  wh_ = gaussian_matrix(hidden_dim, input_dim, in_std, rng);
  uz_ = orthogonal_matrix(hidden_dim, rng);
  ur_ = orthogonal_matrix(hidden_dim, rng);
  uh_ = orthogonal_matrix(hidden_dim, rng);
  bz_.assign(hidden_dim, 0.0);
  br_.assign(hidden_dim, 0.0);
  bh_.assign(hidden_dim, 0.0);
}

Vector GruEncoder::run(std::span<const Vector> sequence) const {
  const std::size_t h = hidden_dim_;
  Vector state(h, 0.0), z(h), r(h), cand(h), gated(h);
  for (const Vector& x : sequence) {
    if (x.size() != input_dim_) throw invalid_argument("GRU input has wrong dimension");
    z = bz_;
    r = br_;
    cand = bh_;
    matvec_add(wz_, h, input_dim_, x, z);
    matvec_add(uz_, h, h, state, z);
    matvec_add(wr_, h, input_dim_, x, r);
    matvec_add(ur_, h, h, state, r);
    for (std::size_t i = 0; i < h; ++i) {
      z[i] = sigmoid(z[i]);
      gated[i] = sigmoid(r[i]) * state[i];
    }
    matvec_add(wh_, h, input_dim_, x, cand);
    matvec_add(uh_, h, h, gated, cand);
    for (std::size_t i = 0; i < h; ++i) {
      state[i] = (1.0 - z[i]) * state[i] + z[i] * std::tanh(cand[i]);
    }
  }
  return state;
}

StateEncoder::StateEncoder(StateEncoderConfig config,
                           std::shared_ptr<const TextEncoder> text,
                           std::shared_ptr<const EmbeddingTable> users,
                           std::shared_ptr<const EmbeddingTable> items)
    : config_(config),
      text_(std::move(text)),
      users_(std::move(users)),
      items_(std::move(items)),
      hasher_(text_ ? text_->dim() : 1),
      gru_(config.gru_input_dim, config.state_dim,
           derive_seed(config.seed, "gru")) {
  if (!text_) throw invalid_argument("state encoder needs a text encoder");
  if (config_.state_dim == 0) throw invalid_argument("state dimension must be positive");
  const std::size_t d_e = text_->dim();
  const std::size_t d_s = config_.state_dim;
  if (users_ && users_->dim > 0) {
    user_proj_ = Projection(users_->dim, d_s, derive_seed(config.seed, "user-proj"));
  }
  user_fallback_proj_ = Projection(d_e, d_s, derive_seed(config.seed, "user-fallback-proj"));
  prompt_proj_ = Projection(d_e, d_s, derive_seed(config.seed, "prompt-proj"));
  if (items_ && items_->dim > 0) {
    item_proj_ = Projection(items_->dim, config_.gru_input_dim,
                            derive_seed(config.seed, "item-proj"));
  }
  item_fallback_proj_ = Projection(d_e, config_.gru_input_dim,
                                   derive_seed(config.seed, "item-fallback-proj"));
}

StateVector StateEncoder::init_state(UserId user) const {
  StateVector s;
  s.step = 0;
  if (users_) {
    if (const auto* v = users_->lookup(user)) {
      s.values = user_proj_.apply(*v);
      return s;
    }
  }
  // Fallback vectors always come from the hash encoder, even when a remote
  // text encoder is configured.
  s.values = user_fallback_proj_.apply(hasher_.encode("user:" + std::to_string(user)));
  return s;
}

Vector StateEncoder::item_vector(ItemId id) const {
  if (items_) {
    if (const auto* v = items_->lookup(id)) return item_proj_.apply(*v);
  }
  return item_fallback_proj_.apply(hasher_.encode("item:" + std::to_string(id)));
}

Vector StateEncoder::prompt_component(std::string_view text) const {
  return prompt_proj_.apply(text_->encode(text));
}

Vector StateEncoder::ranking_component(std::span<const ItemRef> ranking) const {
  std::vector<Vector> seq;
  seq.reserve(ranking.size());
  for (const auto& item : ranking) seq.push_back(item_vector(item.id));
  return gru_.run(seq);
}

StateVector StateEncoder::update_state(const AssembledPrompt& prompt,
                                       std::span<const ItemRef> ranking,
                                       std::size_t t) const {
  StateVector s;
  s.step = t;
  s.values = prompt_component(prompt.text);
  const Vector e_o = ranking_component(ranking);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] += e_o[i];
  return s;
}

}  // namespace rpp
