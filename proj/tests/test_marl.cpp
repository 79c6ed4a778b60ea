// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "rpp/dataset.hpp"
#include "rpp/marl.hpp"
#include "rpp/metrics.hpp"

using namespace rpp;
using rpp::testing::World;

namespace {

// Direct evaluation of the discounted sum with the bootstrap tail.
double direct_return(const std::vector<double>& r, std::size_t t, double gamma, double v) {
  double sum = 0, disc = 1;
  for (std::size_t j = t; j < r.size(); ++j) {
    sum += disc * r[j];
    disc *= gamma;
  }
  return sum + disc * v;
}

const std::filesystem::path kTmp = std::filesystem::temp_directory_path() / "rpp_test_marl";

}  // namespace

TEST_CASE("returns: worked examples") {
  CHECK(compute_returns(std::vector<double>{1.0}, 0.95, 0.0)[0] == 1.0);
  const auto r = compute_returns(std::vector<double>{0.5, 1.0}, 0.95, 0.2);
  CHECK(r[0] == doctest::Approx(direct_return({0.5, 1.0}, 0, 0.95, 0.2)).epsilon(1e-15));
  CHECK(r[0] == doctest::Approx(1.6305).epsilon(1e-12));
  const std::vector<double> rewards = {0.3, 0.9, 0.1};
  CHECK(compute_returns(rewards, 0.0, 5.0) == rewards);
  CHECK_THROWS_AS(compute_returns(std::vector<double>{}, 0.9, 0.0), Error);
}

TEST_CASE("returns satisfy the recursion on random sequences") {
  Rng rng(31);
  const double gammas[] = {0.0, 0.5, 0.95, 1.0};
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> r(1 + rng.uniform_index(15));
    for (auto& x : r) x = rng.uniform01();
    const double g = gammas[i % 4];
    const double v = rng.normal();
    const auto R = compute_returns(r, g, v);
    for (std::size_t t = 0; t < r.size(); ++t) {
      const double next = t + 1 < r.size() ? R[t + 1] : v;
      worst = std::max(worst, std::abs(R[t] - (r[t] + g * next)));
      CHECK(R[t] == doctest::Approx(direct_return(r, t, g, v)).epsilon(1e-12));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("early stop rules") {
  const StopRule rule;
  std::vector<double> h = {0.5};
  for (int i = 0; i < 6; ++i) {
    h.push_back(0.5 - 0.01 * i);
    CHECK_FALSE(early_stop(h, rule).stop);
  }
  h.push_back(0.4);
  const auto d = early_stop(h, rule);
  CHECK(h.size() == 8);
  CHECK(d.stop);
  CHECK(d.best_index == 0);

  std::vector<double> up;
  for (int i = 0; i < 15; ++i) {
    up.push_back(0.01 * i);
    CHECK(early_stop(up, rule).stop == (i == 14));
  }
  CHECK(early_stop(up, rule).best_index == 14);

  const auto tie = early_stop(std::vector<double>{0.3, 0.3}, rule);
  CHECK_FALSE(tie.stop);
  CHECK(tie.best_index == 0);
}

TEST_CASE("bundle shapes follow the catalog") {
  const auto c = default_action_catalog();
  const auto b = AgentBundle::create(64, 32, c.sizes(), 5);
  for (PatternKind k : kAllPatterns) {
    CHECK(b.agent(k).actor.out_dim() == c.sizes()[pattern_index(k)]);
    CHECK(b.agent(k).actor.in_dim() == 64);
    CHECK(b.agent(k).critic.out_dim() == 1);
  }
  CHECK(b.same_parameters(AgentBundle::create(64, 32, c.sizes(), 5)));
  CHECK_FALSE(b.same_parameters(AgentBundle::create(64, 32, c.sizes(), 6)));
}

TEST_CASE("checkpoint round trip and rejection") {
  std::filesystem::create_directories(kTmp);
  const auto c = default_action_catalog();
  const auto b = AgentBundle::create(16, 8, c.sizes(), 9);
  const auto path = kTmp / "ckpt.txt";
  save_checkpoint(b, path);
  const PatternSizes sizes = c.sizes();
  const auto back = load_checkpoint(path, &sizes);
  CHECK(back.same_parameters(b));
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(b));
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Vector s(16);
    for (auto& x : s) x = rng.normal();
    CHECK(back.greedy_action(s) == b.greedy_action(s));
  }

  const std::string text = serialize_checkpoint(b);
  CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), Error);
  std::string wrong_version = text;
  wrong_version.replace(0, std::string("rpp-checkpoint 1").size(), "rpp-checkpoint 2");
  CHECK_THROWS_WITH(parse_checkpoint(wrong_version), doctest::Contains("version"));

  PatternSizes other = sizes;
  other[pattern_index(PatternKind::kOutputFormat)] = 4;
  CHECK_THROWS_WITH(parse_checkpoint(text, &other), doctest::Contains("output_format"));
}

TEST_CASE("rollout step is deterministic and bounded") {
  World w;
  const auto bundle = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  const auto ctx = w.context();
  const auto& inst = w.instances[0];
  const auto s0 = w.encoder->init_state(inst.user->user_id);
  Rng p1(1), e1(2), p2(1), e2(2);
  const auto a = rollout_step(bundle, s0, inst, ctx, 1, 0, ActionSelection::kSample, p1, e1);
  const auto b = rollout_step(bundle, s0, inst, ctx, 1, 0, ActionSelection::kSample, p2, e2);
  CHECK(a.step.action == b.step.action);
  CHECK(a.step.prompt == b.step.prompt);
  CHECK(a.step.ranking == b.step.ranking);
  CHECK(a.step.reward == b.step.reward);
  CHECK(a.next_state.values == b.next_state.values);
  CHECK(a.next_state.step == 1);
  CHECK(a.step.reward >= 0.0);
  CHECK(a.step.reward <= 1.0);
  for (double p : a.step.prob) {
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
  }
  const std::size_t inc = w.catalog.history_increments[a.step.action[PatternKind::kHistoryRecords]];
  CHECK(a.history_len == std::min<std::size_t>(1 + inc, inst.user->history.size()));
}

TEST_CASE("ground truth ranked first gives reward one") {
  World w;
  rpp::testing::OracleEnvironment oracle;
  RolloutContext ctx = w.context();
  ctx.env = &oracle;
  const auto bundle = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  Rng p(1), e(1);
  const auto r = rollout_step(bundle, w.encoder->init_state(0), w.instances[0], ctx, 1, 0,
                              ActionSelection::kGreedy, p, e);
  CHECK(r.step.reward == 1.0);
  CHECK(r.step.ndcg10 == 1.0);
}

TEST_CASE("zero advantage leaves parameters unchanged") {
  AgentBundle b = AgentBundle::create(4, 6, PatternSizes{3, 4, 9, 5}, 1);
  for (auto& agent : b.agents) agent.critic = Mlp2::zeros(4, 6, 1);
  const AgentBundle before = b;
  std::vector<EpisodeStep> steps(3);
  Rng rng(3);
  for (auto& s : steps) {
    s.state.values = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    s.action.index = {1, 2, 3, 4};
    s.reward = 0.0;
  }
  StateVector final_state;
  final_state.values = {1, 1, 1, 1};
  update_from_episode(b, steps, final_state, TrainConfig{});
  CHECK(b.same_parameters(before));
}

TEST_CASE("bandit sanity: rewarded action dominates within 500 updates") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Mlp2 actor = Mlp2::init(4, 16, 2, seed);
    Mlp2 critic = Mlp2::init(4, 16, 1, seed + 100);
    const Vector s = {1.0, 0.5, -0.5, 0.25};
    Rng rng(seed);
    double p_good = 0;
    for (int u = 0; u < 500; ++u) {
      const auto pol = forward_policy(actor, s);
      const std::size_t a = sample_categorical(pol.probs, rng);
      const double reward = a == 0 ? 1.0 : 0.0;
      const auto val = forward_value(critic, s);
      const double ret = compute_returns(std::vector<double>{reward}, 0.95, 0.0)[0];
      sgd_step(actor, backward_policy(actor, pol.tape, a, ret - val.value), 0.1, 5.0);
      sgd_step(critic, backward_value(critic, val.tape, ret), 0.1, 5.0);
      p_good = forward_policy(actor, s).probs[0];
    }
    CHECK(p_good > 0.9);
  }
}

TEST_CASE("training epoch: bounded episodes, lr zero freezes parameters") {
  World w(12, 2);
  const auto ctx = w.context();
  SgdConfig frozen;
  frozen.lr_actor = 0.0;
  frozen.lr_critic = 0.0;
  AgentBundle b = AgentBundle::create(64, 16, w.catalog.sizes(), 4, frozen);
  const AgentBundle before = b;
  const auto report = train_epoch(b, w.instances, ctx, TrainConfig{}, 0);
  CHECK(b.same_parameters(before));
  CHECK(report.episodes == 12);
  CHECK(report.failures == 0);
  CHECK(report.max_episode_env_calls <= 15);
  CHECK(report.mean_episode_length >= 8.0);
  CHECK(report.env_calls == static_cast<std::size_t>(report.mean_episode_length * 12 + 0.5));

  AgentBundle moving = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  train_epoch(moving, w.instances, ctx, TrainConfig{}, 0);
  CHECK_FALSE(moving.same_parameters(before));
}

TEST_CASE("training is reproducible under a fixed seed") {
  World w(10, 3);
  const auto ctx = w.context();
  AgentBundle a = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  AgentBundle b = a;
  TrainConfig cfg;
  cfg.seed = 77;
  for (std::size_t e = 0; e < 2; ++e) {
    const auto ra = train_epoch(a, w.instances, ctx, cfg, e);
    const auto rb = train_epoch(b, w.instances, ctx, cfg, e);
    CHECK(format_epoch_report(ra) == format_epoch_report(rb));
  }
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
}

TEST_CASE("per-step update mode also trains") {
  World w(6, 4);
  AgentBundle b = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  const AgentBundle before = b;
  TrainConfig cfg;
  cfg.update = UpdateMode::kStep;
  const auto r = train_epoch(b, w.instances, w.context(), cfg, 0);
  CHECK(r.episodes == 6);
  CHECK_FALSE(b.same_parameters(before));
}

TEST_CASE("environment failures abort episodes; all failing is an error") {
  World w(5, 5);
  rpp::testing::BrokenEnvironment broken(0);
  RolloutContext ctx = w.context();
  ctx.env = &broken;
  AgentBundle b = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  CHECK_THROWS_AS(train_epoch(b, w.instances, ctx, TrainConfig{}, 0), Error);

  rpp::testing::BrokenEnvironment flaky(20);
  ctx.env = &flaky;
  const auto r = train_epoch(b, w.instances, ctx, TrainConfig{}, 0);
  CHECK(r.failures >= 1);
  CHECK(r.episodes >= 1);
  CHECK(r.episodes + r.failures == 5);
}

TEST_CASE("inference: loop bound, determinism, best step") {
  World w(8, 6);
  const auto bundle = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  const auto ctx = w.context();
  const std::size_t before = w.env->calls();
  for (const auto& inst : w.instances) run_episode_inference(bundle, inst, ctx, 1, 3);
  CHECK(w.env->calls() - before == w.instances.size());

  for (const auto& inst : w.instances) {
    const auto a = run_episode_inference(bundle, inst, ctx, 5, 11);
    const auto b = run_episode_inference(bundle, inst, ctx, 5, 11);
    REQUIRE(a.steps.size() == 5);
    CHECK(a.best_index == b.best_index);
    CHECK(a.final_prompt() == b.final_prompt());
    CHECK(a.best().ndcg10 >= a.steps[0].ndcg10);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
      CHECK(a.steps[i].ranking == b.steps[i].ranking);
      if (i < a.best_index) CHECK(a.steps[i].ndcg10 < a.best().ndcg10);
      CHECK(a.steps[i].ndcg10 <= a.best().ndcg10);
    }
  }
  CHECK_THROWS_AS(run_episode_inference(bundle, w.instances[0], ctx, 0, 1), Error);
}

TEST_CASE("inference keeps the best step when the backend fails midway") {
  World w(2, 7);
  rpp::testing::BrokenEnvironment flaky(2);
  RolloutContext ctx = w.context();
  ctx.env = &flaky;
  const auto bundle = AgentBundle::create(64, 16, w.catalog.sizes(), 4);
  const auto r = run_episode_inference(bundle, w.instances[0], ctx, 5, 1);
  CHECK(r.interrupted);
  CHECK(r.steps.size() == 2);
  CHECK_THROWS_AS(run_episode_inference(bundle, w.instances[1], ctx, 3, 1), Error);
}
