// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rpp/error.hpp"
#include "rpp/nn.hpp"

using namespace rpp;

namespace {

Vector random_state(Rng& rng, std::size_t n) {
  Vector v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

Mlp2 random_net(std::size_t in, std::size_t h, std::size_t out, std::uint64_t seed) {
  Mlp2 net = Mlp2::init(in, h, out, seed);
  Rng rng(seed ^ 0x5eed);
  for (auto& b : net.b1) b = 0.1 * rng.normal();
  for (auto& b : net.b2) b = 0.1 * rng.normal();
  return net;
}

// Reference forward pass written out independently of the library kernel.
Vector reference_logits(const Mlp2& net, const Vector& s) {
  const std::size_t h = net.hidden_dim();
  const std::size_t out = net.out_dim();
  Vector hidden(h);
  for (std::size_t j = 0; j < h; ++j) {
    double z = net.b1[j];
    for (std::size_t i = 0; i < s.size(); ++i) z += s[i] * net.w1(i, j);
    hidden[j] = z > 0 ? z : 0;
  }
  Vector y(out);
  for (std::size_t k = 0; k < out; ++k) {
    double z = net.b2[k];
    for (std::size_t j = 0; j < h; ++j) z += hidden[j] * net.w2(j, k);
    y[k] = z;
  }
  return y;
}

double reference_policy_loss(const Mlp2& net, const Vector& s, std::size_t a, double adv) {
  const Vector y = reference_logits(net, s);
  const double m = *std::max_element(y.begin(), y.end());
  double z = 0;
  for (double v : y) z += std::exp(v - m);
  return -(y[a] - m - std::log(z)) * adv;
}

double reference_value_loss(const Mlp2& net, const Vector& s, double target) {
  const double v = reference_logits(net, s)[0];
  return 0.5 * (target - v) * (target - v);
}

template <typename Loss>
double max_rel_error_fd(Mlp2 net, const Mlp2Grads& g, Loss loss, double eps) {
  double worst = 0;
  for (std::size_t i = 0; i < net.parameter_count(); ++i) {
    const double orig = net.parameter(i);
    net.parameter(i) = orig + eps;
    const double up = loss(net);
    net.parameter(i) = orig - eps;
    const double down = loss(net);
    net.parameter(i) = orig;
    const double num = (up - down) / (2 * eps);
    const double a = g.parameter(i);
    const double denom = std::max({std::abs(a), std::abs(num), 1e-8});
    worst = std::max(worst, std::abs(a - num) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("softmax edge cases") {
  const Mlp2 zero = Mlp2::zeros(4, 6, 3);
  const auto p = forward_policy(zero, Vector(4, 0.3)).probs;
  for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(softmax(Vector{1.0, 2.0, 3.0}) == softmax(Vector{101.0, 102.0, 103.0}));
  CHECK(softmax(Vector{7.0}) == Vector{1.0});
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    Vector logits = random_state(rng, 6);
    for (auto& x : logits) x *= 30;
    const auto q = softmax(logits);
    double sum = 0;
    for (double x : q) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("forward matches a reference implementation") {
  Rng rng(8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mlp2 net = random_net(7, 11, 4, seed);
    const Vector s = random_state(rng, 7);
    const auto ref = softmax(reference_logits(net, s));
    const auto got = forward_policy(net, s).probs;
    for (std::size_t k = 0; k < 4; ++k) CHECK(got[k] == doctest::Approx(ref[k]).epsilon(1e-12));
    const Mlp2 critic = random_net(7, 11, 1, seed + 100);
    CHECK(forward_value(critic, s).value ==
          doctest::Approx(reference_logits(critic, s)[0]).epsilon(1e-12));
  }
}

TEST_CASE("value net basics") {
  const Mlp2 zero = Mlp2::zeros(3, 5, 1);
  CHECK(forward_value(zero, Vector{1, 2, 3}).value == 0.0);
  Mlp2 net = random_net(3, 5, 1, 2);
  const Vector s = {0.4, -1.0, 2.0};
  const double v1 = forward_value(net, s).value - net.b2[0];
  for (auto& w : net.w2.data) w *= 3;
  const double v3 = forward_value(net, s).value - net.b2[0];
  CHECK(v3 == doctest::Approx(3 * v1));
  CHECK_THROWS_AS(forward_value(random_net(3, 5, 2, 1), s), Error);
}

TEST_CASE("non-finite activation names the layer") {
  Mlp2 net = random_net(3, 4, 2, 1);
  net.w1(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH(forward_policy(net, Vector{1, 1, 1}), doctest::Contains("layer 1"));
  Mlp2 net2 = random_net(3, 4, 2, 1);
  for (auto& w : net2.w2.data) w = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(forward_policy(net2, Vector{1, 1, 1}), doctest::Contains("layer 2"));
}

TEST_CASE("categorical sampling") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_categorical(Vector{1, 0, 0}, rng) == 0);
  Rng a(7), b(7);
  const Vector p = {0.2, 0.3, 0.5};
  for (int i = 0; i < 100; ++i) CHECK(sample_categorical(p, a) == sample_categorical(p, b));
  Rng mc(12345);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) ones += static_cast<int>(sample_categorical(Vector{0.5, 0.5}, mc));
  CHECK(std::abs(ones / 1e5 - 0.5) < 0.01);
  CHECK_THROWS_AS(sample_categorical(Vector{std::nan(""), 0.5}, mc), Error);
  CHECK(argmax(Vector{0.2, 0.4, 0.4}) == 1);
}

TEST_CASE("policy gradient matches independent finite differences") {
  Rng rng(21);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mlp2 net = random_net(6, 9, 5, seed);
    const Vector s = random_state(rng, 6);
    const std::size_t a = rng.uniform_index(5);
    const double adv = rng.normal();
    const auto out = forward_policy(net, s);
    const auto g = backward_policy(net, out.tape, a, adv);
    const double err = max_rel_error_fd(
        net, g, [&](const Mlp2& n) { return reference_policy_loss(n, s, a, adv); }, 1e-5);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("value gradient matches independent finite differences") {
  Rng rng(22);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mlp2 net = random_net(6, 9, 1, seed);
    const Vector s = random_state(rng, 6);
    const double target = rng.normal();
    const auto out = forward_value(net, s);
    const auto g = backward_value(net, out.tape, target);
    const double err = max_rel_error_fd(
        net, g, [&](const Mlp2& n) { return reference_value_loss(n, s, target); }, 1e-5);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gradient scaling properties") {
  const Mlp2 net = random_net(4, 6, 3, 5);
  const Vector s = {0.1, -0.3, 1.2, 0.7};
  const auto out = forward_policy(net, s);
  const auto g0 = backward_policy(net, out.tape, 1, 0.0);
  CHECK(g0.norm() == 0.0);
  const auto g1 = backward_policy(net, out.tape, 1, 1.5);
  const auto g2 = backward_policy(net, out.tape, 1, 3.0);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g2.parameter(i) == doctest::Approx(2 * g1.parameter(i)));
  }

  const Mlp2 critic = random_net(4, 6, 1, 6);
  const auto v = forward_value(critic, s);
  CHECK(backward_value(critic, v.tape, v.value).norm() == 0.0);
  const auto above = backward_value(critic, v.tape, v.value + 1.0);
  const auto below = backward_value(critic, v.tape, v.value - 1.0);
  CHECK(above.b2[0] < 0.0);
  CHECK(below.b2[0] > 0.0);
}

TEST_CASE("tape misuse is rejected") {
  Mlp2 net = random_net(3, 4, 2, 1);
  GradTape empty;
  CHECK_THROWS_AS(backward_policy(net, empty, 0, 1.0), Error);
  const auto out = forward_policy(net, Vector{1, 2, 3});
  auto g = backward_policy(net, out.tape, 0, 1.0);
  sgd_step(net, g, 0.1, 5.0);
  CHECK_THROWS_WITH(backward_policy(net, out.tape, 0, 1.0), doctest::Contains("stale"));
  Mlp2 other = random_net(3, 4, 2, 1);
  const auto fresh = forward_policy(net, Vector{1, 2, 3});
  CHECK_THROWS_AS(backward_policy(other, fresh.tape, 0, 1.0), Error);
}

TEST_CASE("sgd step semantics") {
  Mlp2 net = random_net(3, 4, 2, 9);
  const Mlp2 before = net;
  sgd_step(net, Mlp2Grads::zeros_like(net), 0.5, 5.0);
  CHECK(net.same_parameters(before));

  const auto out = forward_policy(net, Vector{1, -1, 2});
  auto g = backward_policy(net, out.tape, 1, 2.0);
  sgd_step(net, g, 0.0, 5.0);
  CHECK(net.same_parameters(before));

  // Scale a gradient to norm 10; clip 5 must apply an update of norm 5 * lr.
  auto g10 = Mlp2Grads::zeros_like(net);
  for (std::size_t i = 0; i < g10.size(); ++i) g10.parameter(i) = 1.0;
  g10.scale(10.0 / g10.norm());
  Mlp2 clipped = before;
  const double reported = sgd_step(clipped, g10, 0.1, 5.0);
  CHECK(reported == doctest::Approx(10.0));
  double sq = 0;
  for (std::size_t i = 0; i < clipped.parameter_count(); ++i) {
    const double d = clipped.parameter(i) - before.parameter(i);
    sq += d * d;
  }
  CHECK(std::sqrt(sq) == doctest::Approx(0.5).epsilon(1e-9));

  CHECK_THROWS_AS(sgd_step(clipped, Mlp2Grads::zeros_like(random_net(3, 5, 2, 1)), 0.1, 5.0),
                  Error);
}

TEST_CASE("library grad check and mutation detection") {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mlp2 net = random_net(5, 8, 4, seed);
    LossSpec spec;
    spec.state = random_state(rng, 5);
    spec.chosen = seed % 4;
    spec.advantage = 1.0 + rng.uniform01();
    CHECK(grad_check(net, spec, 1e-5).max_rel_error < 1e-4);
    auto broken = analytic_gradient(net, spec);
    broken.parameter(rng.uniform_index(broken.size())) += 0.5;
    CHECK(compare_gradients(net, spec, broken, 1e-5).max_rel_error > 1e-2);
  }
  LossSpec v;
  v.kind = LossSpec::Kind::kValue;
  v.state = {0.0, 0.0, 0.0};
  v.target = 0.0;
  const auto r = grad_check(Mlp2::zeros(3, 4, 1), v, 1e-5);
  CHECK(std::isfinite(r.max_rel_error));
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("parameter text round trip is exact and commutes with sgd") {
  Mlp2 net = random_net(4, 5, 3, 77);
  std::stringstream ss;
  write_mlp(ss, net);
  Mlp2 back = read_mlp(ss);
  CHECK(back.same_parameters(net));

  const Vector s = {0.3, 0.1, -0.2, 0.9};
  auto step = [&](Mlp2& n) {
    const auto o = forward_policy(n, s);
    sgd_step(n, backward_policy(n, o.tape, 2, 0.7), 0.05, 5.0);
  };
  step(net);
  step(back);
  CHECK(back.same_parameters(net));

  std::stringstream bad("w1 2 2 1 2 3");
  CHECK_THROWS_AS(read_mlp(bad), Error);
}
