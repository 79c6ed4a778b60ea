// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "rpp/dataset.hpp"
#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written by index so the outcome is independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct UserOutcome {
  std::vector<std::size_t> order;
  std::size_t gt_pos = 0;
};

std::optional<UserOutcome> run_fixed(const FixedPrompt& fixed, const UserInstance& inst,
                                     const RolloutContext& ctx, std::uint64_t env_seed) {
  Rng env_rng(env_seed);
  const std::size_t l = std::min(fixed.history_len, inst.user->history.size());
  const AssembledPrompt prompt = assemble(*ctx.catalog, *inst.user, inst.cands, fixed.action, l);
  try {
    const std::string reply = ctx.env->respond(*inst.user, inst.cands, prompt, env_rng);
    return UserOutcome{parse_reply(reply, inst.cands).order, inst.cands.ground_truth_pos};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEnvironment) throw;
    return std::nullopt;
  }
}

std::optional<UserOutcome> run_policy(const AgentBundle& bundle, const UserInstance& inst,
                                      const RolloutContext& ctx, std::size_t iters,
                                      std::uint64_t env_seed) {
  try {
    const InferenceResult r = run_episode_inference(bundle, inst, ctx, iters, env_seed);
    return UserOutcome{r.best().ranking, inst.cands.ground_truth_pos};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEnvironment) throw;
    return std::nullopt;
  }
}

}  // namespace

std::vector<UserInstance> make_instances(std::span<const UserRecord* const> users,
                                         const ItemCatalog& pool, std::size_t m,
                                         std::uint64_t seed, std::size_t repeat) {
  std::vector<UserInstance> out;
  out.reserve(users.size());
  for (const UserRecord* u : users) {
    out.push_back({u, sample_candidates(*u, pool, m, derive_seed(seed, repeat, u->user_id))});
  }
  return out;
}

MetricReport evaluate(const PolicySource& policy, std::span<const UserRecord* const> users,
                      const ItemCatalog& pool, const RolloutContext& ctx,
                      const EvalOptions& options) {
  if (options.repeats < 1) throw invalid_argument("evaluation needs at least one repeat");
  if (users.empty()) throw invalid_argument("evaluation needs at least one user");
  if (options.m < 1) throw invalid_argument("candidate count must be positive");

  MetricReport report;
  report.label = options.label;
  report.n_users = users.size();
  report.repeats = options.repeats;
  report.single_run = options.repeats == 1;

  std::array<std::vector<double>, 3> ndcg_runs, mrr_runs, hit_runs;
  std::vector<UserInstance> instances;
  for (std::size_t rep = 0; rep < options.repeats; ++rep) {
    if (rep == 0 || options.resample_candidates) {
      instances = make_instances(users, pool, options.m, options.candidate_seed,
                                 options.resample_candidates ? rep : 0);
    }
    std::vector<std::optional<UserOutcome>> outcomes(instances.size());
    parallel_for(instances.size(), options.threads, [&](std::size_t i) {
      const std::uint64_t env_seed =
          derive_seed(options.seed, rep, instances[i].user->user_id);
      if (const auto* fixed = std::get_if<FixedPrompt>(&policy)) {
        outcomes[i] = run_fixed(*fixed, instances[i], ctx, env_seed);
      } else {
        outcomes[i] = run_policy(*std::get<const AgentBundle*>(policy), instances[i], ctx,
                                 options.inference_iters, env_seed);
      }
    });

    std::array<double, 3> ndcg{}, mrr{}, hit{};
    std::vector<double> per_user(instances.size(), std::numeric_limits<double>::quiet_NaN());
    std::size_t ok = 0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!outcomes[i]) {
        ++failed;
        continue;
      }
      ++ok;
      const auto& o = *outcomes[i];
      for (std::size_t c = 0; c < kReportCutoffs.size(); ++c) {
        const std::size_t k = std::min(kReportCutoffs[c], o.order.size());
        ndcg[c] += ndcg_at_k(o.order, o.gt_pos, k);
        mrr[c] += mrr_at_k(o.order, o.gt_pos, k);
        hit[c] += hit_at_k(o.order, o.gt_pos, k);
      }
      per_user[i] = ndcg_at_k(o.order, o.gt_pos, std::min<std::size_t>(10, o.order.size()));
    }
    if (ok == 0) throw environment_error("no user could be evaluated");
    report.failed_users = std::max(report.failed_users, failed);
    for (std::size_t c = 0; c < 3; ++c) {
      ndcg_runs[c].push_back(ndcg[c] / static_cast<double>(ok));
      mrr_runs[c].push_back(mrr[c] / static_cast<double>(ok));
      hit_runs[c].push_back(hit[c] / static_cast<double>(ok));
    }
    report.user_ndcg10.push_back(std::move(per_user));
  }
  for (std::size_t c = 0; c < 3; ++c) {
    report.ndcg[c] = mean_and_std(ndcg_runs[c]);
    report.mrr[c] = mean_and_std(mrr_runs[c]);
    report.hit[c] = mean_and_std(hit_runs[c]);
  }
  return report;
}

FixedPrompt manual_baseline(const ActionCatalog& catalog, std::size_t history_len) {
  return FixedPrompt{catalog.manual_action, history_len};
}

AssembledPrompt manual_baseline_prompt(const ActionCatalog& catalog, const UserRecord& user,
                                       const CandidateSet& cands, std::size_t history_len) {
  const std::size_t l = std::min(history_len, user.history.size());
  return assemble(catalog, user, cands, catalog.manual_action, l);
}

EnumerationResult enumeration_baseline(std::span<const UserInstance> users,
                                       const RolloutContext& ctx,
                                       const EnumerationOptions& options) {
  if (users.empty()) throw invalid_argument("enumeration needs at least one user");
  const ActionCatalog& catalog = *ctx.catalog;
  const PatternSizes sizes = catalog.sizes();
  std::vector<JointAction> grid;
  for (std::size_t r = 0; r < sizes[0]; ++r) {
    for (std::size_t g = 0; g < sizes[2]; ++g) {
      for (std::size_t o = 0; o < sizes[3]; ++o) {
        JointAction a;
        a.index = {r, 0, g, o};
        grid.push_back(a);
      }
    }
  }
  if (options.budget < 1) throw invalid_argument("enumeration budget must be >= 1");
  const std::size_t budget = options.budget;
  if (budget < grid.size()) {
    Rng rng(derive_seed(options.seed, "enumeration-subset"));
    std::vector<std::size_t> idx(grid.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(budget);
    std::sort(idx.begin(), idx.end());
    std::vector<JointAction> subset;
    for (std::size_t i : idx) subset.push_back(grid[i]);
    grid = std::move(subset);
  }

  EnumerationResult result;
  result.best_score = -std::numeric_limits<double>::infinity();
  std::vector<std::optional<double>> per_user(users.size());
  for (const JointAction& action : grid) {
    const FixedPrompt fixed{action, options.history_len};
    parallel_for(users.size(), options.threads, [&](std::size_t i) {
      // Common random numbers: each user sees the same backend noise for every action.
      const auto o = run_fixed(fixed, users[i], ctx,
                               derive_seed(options.seed, 0, users[i].user->user_id));
      per_user[i] = o ? std::optional<double>(ndcg_at_k(
                            o->order, o->gt_pos, std::min<std::size_t>(10, o->order.size())))
                      : std::nullopt;
    });
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& v : per_user) {
      if (v) {
        sum += *v;
        ++ok;
      }
    }
    const double score = ok ? sum / static_cast<double>(ok)
                            : -std::numeric_limits<double>::infinity();
    result.scores.emplace_back(action, score);
    if (score > result.best_score) {
      result.best_score = score;
      result.best = fixed;
    }
  }
  if (!std::isfinite(result.best_score)) {
    throw environment_error("enumeration could not score any prompt");
  }
  return result;
}

}  // namespace rpp
