// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rpp/random.hpp"

namespace rpp {

using Vector = std::vector<double>;

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

namespace detail {
// Copies get a fresh identity so a tape recorded on one net cannot be
// replayed against a copy.
class NetIdentity {
 public:
  NetIdentity();
  NetIdentity(const NetIdentity&);
  NetIdentity& operator=(const NetIdentity&);
  NetIdentity(NetIdentity&&) noexcept = default;
  NetIdentity& operator=(NetIdentity&&) noexcept = default;

  std::uint64_t uid = 0;
  std::uint64_t version = 0;
};
}  // namespace detail

/// Two-layer fully connected net: relu(s W1 + b1) W2 + b2.
struct Mlp2 {
  Matrix w1;  // in x hidden
  Vector b1;
  Matrix w2;  // hidden x out
  Vector b2;
  detail::NetIdentity identity;

  std::size_t in_dim() const noexcept { return w1.rows; }
  std::size_t hidden_dim() const noexcept { return w1.cols; }
  std::size_t out_dim() const noexcept { return w2.cols; }
  std::size_t parameter_count() const noexcept {
    return w1.data.size() + b1.size() + w2.data.size() + b2.size();
  }

  /// He-scaled normal weights, zero biases.
  static Mlp2 init(std::size_t in, std::size_t hidden, std::size_t out,
                   std::uint64_t seed);
  static Mlp2 zeros(std::size_t in, std::size_t hidden, std::size_t out);

  /// Flat parameter view in the order W1, b1, W2, b2.
  double& parameter(std::size_t i);
  double parameter(std::size_t i) const;

  bool same_parameters(const Mlp2& other) const {
    return w1 == other.w1 && b1 == other.b1 && w2 == other.w2 && b2 == other.b2;
  }
};

struct Mlp2Grads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  static Mlp2Grads zeros_like(const Mlp2& net);
  double norm() const;
  void scale(double f);
  void add(const Mlp2Grads& other);
  double parameter(std::size_t i) const;
  double& parameter(std::size_t i);
  std::size_t size() const noexcept {
    return w1.data.size() + b1.size() + w2.data.size() + b2.size();
  }
};

/// Forward intermediates for one pass through one net.
struct GradTape {
  bool valid = false;
  std::uint64_t net_uid = 0;
  std::uint64_t net_version = 0;
  Vector input;
  Vector pre_hidden;
  Vector hidden;
  Vector output;  // logits, or the single value
  Vector probs;   // empty for value nets
};

struct PolicyOutput {
  Vector probs;
  GradTape tape;
};

struct ValueOutput {
  double value = 0.0;
  GradTape tape;
};

struct SgdConfig {
  double lr_actor = 0.01;
  double lr_critic = 0.01;
  double clip = 5.0;  // global-norm clip; <= 0 disables
};

Vector softmax(std::span<const double> logits);

PolicyOutput forward_policy(const Mlp2& net, std::span<const double> state);
ValueOutput forward_value(const Mlp2& net, std::span<const double> state);

/// Inverse-CDF on a single uniform draw.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);
/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> values);

/// Gradient of -log(probs[chosen]) * advantage, advantage held constant.
Mlp2Grads backward_policy(const Mlp2& net, const GradTape& tape,
                          std::size_t chosen, double advantage);
/// Gradient of 0.5 * (target - v)^2.
Mlp2Grads backward_value(const Mlp2& net, const GradTape& tape, double target);

/// params -= lr * clip(grads). Returns the pre-clip gradient norm.
double sgd_step(Mlp2& net, const Mlp2Grads& grads, double lr, double clip);

struct LossSpec {
  enum class Kind { kPolicy, kValue };
  Kind kind = Kind::kPolicy;
  Vector state;
  std::size_t chosen = 0;
  double advantage = 1.0;
  double target = 0.0;
};

double evaluate_loss(const Mlp2& net, const LossSpec& spec);
Mlp2Grads analytic_gradient(const Mlp2& net, const LossSpec& spec);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t n_parameters = 0;
};

/// Central differences against `analytic`; relative error uses
/// max(|a|, |n|, floor) as denominator.
GradCheckReport compare_gradients(const Mlp2& net, const LossSpec& spec,
                                  const Mlp2Grads& analytic, double eps,
                                  double floor = 1e-8);
GradCheckReport grad_check(const Mlp2& net, const LossSpec& spec, double eps,
                           double floor = 1e-8);

/// 17-significant-digit text form, exact for doubles.
void write_mlp(std::ostream& out, const Mlp2& net);
Mlp2 read_mlp(std::istream& in);

}  // namespace rpp
