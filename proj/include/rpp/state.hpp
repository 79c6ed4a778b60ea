// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

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

namespace rpp {

using Vector = std::vector<double>;

/// Frozen text encoder. Equal text must give equal vectors.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Vector encode(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
};

/// Signed feature hashing over lowercase word tokens, l2-normalized.
class HashTextEncoder final : public TextEncoder {
 public:
  explicit HashTextEncoder(std::size_t dim = 256);
  Vector encode(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "hash"; }

 private:
  std::size_t dim_;
};

/// Remote embedding endpoint: POST {"input": text} -> {"embedding": [...]}.
/// Replies are l2-normalized so the norm bound matches the hash encoder.
class HttpTextEncoder final : public TextEncoder {
 public:
  HttpTextEncoder(HttpEndpoint endpoint, std::size_t dim);
  Vector encode(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "http"; }

 private:
  mutable HttpJsonClient client_;
  std::size_t dim_;
};

std::vector<std::string> hash_tokens(std::string_view text);

/// Dense row-major linear map in_dim -> out_dim with entries ~ N(0, 1/out_dim).
class Projection {
 public:
  Projection() = default;
  Projection(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

  Vector apply(std::span<const double> x) const;
  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t out_dim() const noexcept { return out_dim_; }

 private:
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  std::vector<double> weights_;  // in_dim x out_dim
};

/// Frozen single-layer GRU. Recurrent matrices are orthogonal, input matrices
/// scaled normal, biases zero; h0 = 0.
class GruEncoder {
 public:
  GruEncoder(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

  Vector run(std::span<const Vector> sequence) const;
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }

 private:
  std::size_t input_dim_;
  std::size_t hidden_dim_;
  // hidden x input
  std::vector<double> wz_, wr_, wh_;
  // hidden x hidden
  std::vector<double> uz_, ur_, uh_;
  std::vector<double> bz_, br_, bh_;
};

struct StateVector {
  Vector values;
  std::size_t step = 0;
};

struct StateEncoderConfig {
  std::size_t state_dim = 64;
  std::size_t gru_input_dim = 32;
  std::uint64_t seed = 0;
};

/// Builds the shared observation: s0 from user features, s_t from the
/// current prompt text plus a GRU over the ranked item vectors.
class StateEncoder {
 public:
  StateEncoder(StateEncoderConfig config, std::shared_ptr<const TextEncoder> text,
               std::shared_ptr<const EmbeddingTable> users,
               std::shared_ptr<const EmbeddingTable> items);

  StateVector init_state(UserId user) const;
  StateVector update_state(const AssembledPrompt& prompt,
                           std::span<const ItemRef> ranking, std::size_t t) const;

  Vector prompt_component(std::string_view text) const;
  Vector ranking_component(std::span<const ItemRef> ranking) const;

  std::size_t state_dim() const noexcept { return config_.state_dim; }
  const TextEncoder& text_encoder() const noexcept { return *text_; }

 private:
  Vector item_vector(ItemId id) const;

  StateEncoderConfig config_;
  std::shared_ptr<const TextEncoder> text_;
  std::shared_ptr<const EmbeddingTable> users_;
  std::shared_ptr<const EmbeddingTable> items_;
  HashTextEncoder hasher_;
  Projection user_proj_;
  Projection user_fallback_proj_;
  Projection prompt_proj_;
  Projection item_proj_;
  Projection item_fallback_proj_;
  GruEncoder gru_;
};

}  // namespace rpp
