// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/nn.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "rpp/error.hpp"

namespace rpp {
namespace detail {
namespace {
std::atomic<std::uint64_t> g_next_uid{1};
}

NetIdentity::NetIdentity() : uid(g_next_uid++) {}
NetIdentity::NetIdentity(const NetIdentity&) : uid(g_next_uid++) {}
NetIdentity& NetIdentity::operator=(const NetIdentity&) {
  uid = g_next_uid++;
  version = 0;
  return *this;
}
}  // namespace detail

namespace {

void check_finite(std::span<const double> v, int layer) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw runtime_error("non-finite activation in layer " + std::to_string(layer));
    }
  }
}

GradTape forward(const Mlp2& net, std::span<const double> state) {
  if (state.size() != net.in_dim()) {
    throw invalid_argument("net expects input dim " + std::to_string(net.in_dim()) +
                           ", got " + std::to_string(state.size()));
  }
  check_finite(state, 0);
  GradTape tape;
  tape.input.assign(state.begin(), state.end());
  const std::size_t h = net.hidden_dim();
  const std::size_t o = net.out_dim();
  tape.pre_hidden = net.b1;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double si = state[i];
    if (si == 0.0) continue;
    const double* row = &net.w1.data[i * h];
    for (std::size_t j = 0; j < h; ++j) tape.pre_hidden[j] += si * row[j];
  }
  check_finite(tape.pre_hidden, 1);
  tape.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) tape.hidden[j] = std::max(0.0, tape.pre_hidden[j]);
  tape.output = net.b2;
  for (std::size_t j = 0; j < h; ++j) {
    const double aj = tape.hidden[j];
    if (aj == 0.0) continue;
    const double* row = &net.w2.data[j * o];
    for (std::size_t k = 0; k < o; ++k) tape.output[k] += aj * row[k];
  }
  check_finite(tape.output, 2);
  tape.valid = true;
  tape.net_uid = net.identity.uid;
  tape.net_version = net.identity.version;
  return tape;
}

void check_tape(const Mlp2& net, const GradTape& tape) {
  if (!tape.valid) throw runtime_error("backward called without a forward pass");
  if (tape.net_uid != net.identity.uid || tape.net_version != net.identity.version) {
    throw runtime_error("stale gradient tape: net changed since the forward pass");
  }
}

// Backprop a gradient on the output layer through both layers.
Mlp2Grads backward_from_output(const Mlp2& net, const GradTape& tape,
                               std::span<const double> d_out) {
  Mlp2Grads g = Mlp2Grads::zeros_like(net);
  const std::size_t h = net.hidden_dim();
  const std::size_t o = net.out_dim();
  for (std::size_t k = 0; k < o; ++k) g.b2[k] = d_out[k];
  Vector d_hidden(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double aj = tape.hidden[j];
    const double* w_row = &net.w2.data[j * o];
    double* g_row = &g.w2.data[j * o];
    double acc = 0.0;
    for (std::size_t k = 0; k < o; ++k) {
      g_row[k] = aj * d_out[k];
      acc += w_row[k] * d_out[k];
    }
    d_hidden[j] = tape.pre_hidden[j] > 0.0 ? acc : 0.0;
  }
  g.b1 = d_hidden;
  for (std::size_t i = 0; i < net.in_dim(); ++i) {
    const double si = tape.input[i];
    double* g_row = &g.w1.data[i * h];
    for (std::size_t j = 0; j < h; ++j) g_row[j] = si * d_hidden[j];
  }
  return g;
}

template <typename Params>
auto& flat_element(Params& p, std::size_t i) {
  if (i < p.w1.data.size()) return p.w1.data[i];
  i -= p.w1.data.size();
  if (i < p.b1.size()) return p.b1[i];
  i -= p.b1.size();
  if (i < p.w2.data.size()) return p.w2.data[i];
  i -= p.w2.data.size();
  if (i < p.b2.size()) return p.b2[i];
  throw invalid_argument("parameter index out of range");
}

void write_doubles(std::ostream& out, std::span<const double> values, std::size_t per_line) {
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, values[i],
                                 std::chars_format::general, 17);
    (void)ec;
    out.write(buf, p - buf);
    out << (((i + 1) % per_line == 0 || i + 1 == values.size()) ? '\n' : ' ');
  }
}

void read_doubles(std::istream& in, std::span<double> values) {
  std::string tok;
  for (double& v : values) {
    if (!(in >> tok)) throw parse_error("truncated parameter block");
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v)) {
      throw parse_error("bad parameter value '" + tok + "'");
    }
  }
}

void expect_word(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word) {
    throw parse_error("expected '" + word + "' in parameter block");
  }
}

std::size_t read_size(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw parse_error("truncated parameter block");
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw parse_error("bad size '" + tok + "'");
  }
  return v;
}

}  // namespace

Mlp2 Mlp2::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
  if (in == 0 || hidden == 0 || out == 0) {
    throw invalid_argument("net dimensions must be positive");
  }
  Mlp2 net;
  net.w1 = Matrix(in, hidden);
  net.b1.assign(hidden, 0.0);
  net.w2 = Matrix(hidden, out);
  net.b2.assign(out, 0.0);
  return net;
}

Mlp2 Mlp2::init(std::size_t in, std::size_t hidden, std::size_t out,
                std::uint64_t seed) {
  Mlp2 net = zeros(in, hidden, out);
  Rng rng(seed);
  const double s1 = std::sqrt(2.0 / static_cast<double>(in));
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
  for (double& w : net.w1.data) w = s1 * rng.normal();
  for (double& w : net.w2.data) w = s2 * rng.normal();
  return net;
}

double& Mlp2::parameter(std::size_t i) { return flat_element(*this, i); }
double Mlp2::parameter(std::size_t i) const { return flat_element(*this, i); }

Mlp2Grads Mlp2Grads::zeros_like(const Mlp2& net) {
  Mlp2Grads g;
  g.w1 = Matrix(net.w1.rows, net.w1.cols);
  g.b1.assign(net.b1.size(), 0.0);
  g.w2 = Matrix(net.w2.rows, net.w2.cols);
  g.b2.assign(net.b2.size(), 0.0);
  return g;
}

double Mlp2Grads::norm() const {
  double sq = 0.0;
  for (double x : w1.data) sq += x * x;
  for (double x : b1) sq += x * x;
  for (double x : w2.data) sq += x * x;
  for (double x : b2) sq += x * x;
  return std::sqrt(sq);
}

void Mlp2Grads::scale(double f) {
  for (double& x : w1.data) x *= f;
  for (double& x : b1) x *= f;
  for (double& x : w2.data) x *= f;
  for (double& x : b2) x *= f;
}

void Mlp2Grads::add(const Mlp2Grads& other) {
  if (other.size() != size()) throw invalid_argument("gradient shape mismatch");
  for (std::size_t i = 0; i < w1.data.size(); ++i) w1.data[i] += other.w1.data[i];
  for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += other.b1[i];
  for (std::size_t i = 0; i < w2.data.size(); ++i) w2.data[i] += other.w2.data[i];
  for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += other.b2[i];
}

double Mlp2Grads::parameter(std::size_t i) const { return flat_element(*this, i); }
double& Mlp2Grads::parameter(std::size_t i) { return flat_element(*this, i); }

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw invalid_argument("softmax of an empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : logits) mx = std::max(mx, x);
  Vector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

PolicyOutput forward_policy(const Mlp2& net, std::span<const double> state) {
  PolicyOutput out;
  out.tape = forward(net, state);
  out.tape.probs = softmax(out.tape.output);
  out.probs = out.tape.probs;
  return out;
}

ValueOutput forward_value(const Mlp2& net, std::span<const double> state) {
  if (net.out_dim() != 1) throw invalid_argument("value net must have one output");
  ValueOutput out;
  out.tape = forward(net, state);
  out.value = out.tape.output[0];
  return out;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw invalid_argument("empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw runtime_error("degenerate probabilities");
    total += p;
  }
  if (total <= 0.0) throw runtime_error("degenerate probabilities");
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    acc += probs[i];
    if (u < acc && probs[i] > 0.0) return i;
  }
  return last_positive;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw invalid_argument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Mlp2Grads backward_policy(const Mlp2& net, const GradTape& tape,
                          std::size_t chosen, double advantage) {
  check_tape(net, tape);
  if (tape.probs.size() != net.out_dim()) throw runtime_error("tape is not a policy tape");
  if (chosen >= net.out_dim()) throw invalid_argument("chosen action out of range");
  // d/dlogit_k [-log p_c] = p_k - [k == c]
  Vector d_out(net.out_dim());
  for (std::size_t k = 0; k < d_out.size(); ++k) {
    d_out[k] = advantage * (tape.probs[k] - (k == chosen ? 1.0 : 0.0));
  }
  return backward_from_output(net, tape, d_out);
}

Mlp2Grads backward_value(const Mlp2& net, const GradTape& tape, double target) {
  check_tape(net, tape);
  if (net.out_dim() != 1) throw invalid_argument("value net must have one output");
  const double d = tape.output[0] - target;
  return backward_from_output(net, tape, std::span<const double>(&d, 1));
}

double sgd_step(Mlp2& net, const Mlp2Grads& grads, double lr, double clip) {
  if (grads.w1.rows != net.w1.rows || grads.w1.cols != net.w1.cols ||
      grads.b1.size() != net.b1.size() || grads.w2.rows != net.w2.rows ||
      grads.w2.cols != net.w2.cols || grads.b2.size() != net.b2.size()) {
    throw invalid_argument("gradient shape does not match the net");
  }
  const double norm = grads.norm();
  double f = lr;
  if (clip > 0.0 && norm > clip) f *= clip / norm;
  if (f != 0.0) {
    for (std::size_t i = 0; i < net.w1.data.size(); ++i) net.w1.data[i] -= f * grads.w1.data[i];
    for (std::size_t i = 0; i < net.b1.size(); ++i) net.b1[i] -= f * grads.b1[i];
    for (std::size_t i = 0; i < net.w2.data.size(); ++i) net.w2.data[i] -= f * grads.w2.data[i];
    for (std::size_t i = 0; i < net.b2.size(); ++i) net.b2[i] -= f * grads.b2[i];
  }
  ++net.identity.version;
  return norm;
}

double evaluate_loss(const Mlp2& net, const LossSpec& spec) {
  if (spec.kind == LossSpec::Kind::kPolicy) {
    auto out = forward_policy(net, spec.state);
    return -std::log(out.probs.at(spec.chosen)) * spec.advantage;
  }
  auto out = forward_value(net, spec.state);
  const double d = spec.target - out.value;
  return 0.5 * d * d;
}

Mlp2Grads analytic_gradient(const Mlp2& net, const LossSpec& spec) {
  if (spec.kind == LossSpec::Kind::kPolicy) {
    auto out = forward_policy(net, spec.state);
    return backward_policy(net, out.tape, spec.chosen, spec.advantage);
  }
  auto out = forward_value(net, spec.state);
  return backward_value(net, out.tape, spec.target);
}

GradCheckReport compare_gradients(const Mlp2& net, const LossSpec& spec,
                                  const Mlp2Grads& analytic, double eps,
                                  double floor) {
  if (!(eps > 0.0)) throw invalid_argument("finite-difference step must be positive");
  if (analytic.size() != net.parameter_count()) {
    throw invalid_argument("gradient shape does not match the net");
  }
  Mlp2 probe = net;
  GradCheckReport report;
  report.n_parameters = net.parameter_count();
  for (std::size_t i = 0; i < report.n_parameters; ++i) {
    const double orig = probe.parameter(i);
    probe.parameter(i) = orig + eps;
    const double up = evaluate_loss(probe, spec);
    probe.parameter(i) = orig - eps;
    const double down = evaluate_loss(probe, spec);
    probe.parameter(i) = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.parameter(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_parameter = i;
    }
  }
  return report;
}

GradCheckReport grad_check(const Mlp2& net, const LossSpec& spec, double eps,
                           double floor) {
  return compare_gradients(net, spec, analytic_gradient(net, spec), eps, floor);
}

void write_mlp(std::ostream& out, const Mlp2& net) {
  out << "w1 " << net.w1.rows << ' ' << net.w1.cols << '\n';
  write_doubles(out, net.w1.data, std::max<std::size_t>(net.w1.cols, 1));
  out << "b1 " << net.b1.size() << '\n';
  write_doubles(out, net.b1, std::max<std::size_t>(net.b1.size(), 1));
  out << "w2 " << net.w2.rows << ' ' << net.w2.cols << '\n';
  write_doubles(out, net.w2.data, std::max<std::size_t>(net.w2.cols, 1));
  out << "b2 " << net.b2.size() << '\n';
  write_doubles(out, net.b2, std::max<std::size_t>(net.b2.size(), 1));
}

Mlp2 read_mlp(std::istream& in) {
  expect_word(in, "w1");
  const std::size_t in_dim = read_size(in);
  const std::size_t hidden = read_size(in);
  Matrix w1(in_dim, hidden);
  read_doubles(in, w1.data);
  expect_word(in, "b1");
  if (read_size(in) != hidden) throw parse_error("b1 size does not match w1");
  Vector b1(hidden);
  read_doubles(in, b1);
  expect_word(in, "w2");
  if (read_size(in) != hidden) throw parse_error("w2 rows do not match w1");
  const std::size_t out_dim = read_size(in);
  Matrix w2(hidden, out_dim);
  read_doubles(in, w2.data);
  expect_word(in, "b2");
  if (read_size(in) != out_dim) throw parse_error("b2 size does not match w2");
  Vector b2(out_dim);
  read_doubles(in, b2);
  Mlp2 net = Mlp2::zeros(in_dim, hidden, out_dim);
  net.w1 = std::move(w1);
  net.b1 = std::move(b1);
  net.w2 = std::move(w2);
  net.b2 = std::move(b2);
  return net;
}

}  // namespace rpp
