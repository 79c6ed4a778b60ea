// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/marl.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "rpp/dataset.hpp"
#include "rpp/error.hpp"
#include "rpp/metrics.hpp"

namespace rpp {

AgentBundle AgentBundle::create(std::size_t state_dim, std::size_t hidden,
                                const PatternSizes& sizes, std::uint64_t seed,
                                SgdConfig sgd) {
  AgentBundle b;
  b.sgd = sgd;
  b.state_dim = state_dim;
  b.hidden = hidden;
  b.sizes = sizes;
  b.init_seed = seed;
  for (PatternKind k : kAllPatterns) {
    const std::string name(pattern_name(k));
    b.agent(k).actor = Mlp2::init(state_dim, hidden, sizes[pattern_index(k)],
                                  derive_seed(seed, "actor/" + name));
    b.agent(k).critic =
        Mlp2::init(state_dim, hidden, 1, derive_seed(seed, "critic/" + name));
  }
  return b;
}

JointAction AgentBundle::greedy_action(std::span<const double> state) const {
  JointAction a;
  for (PatternKind k : kAllPatterns) {
    a[k] = argmax(forward_policy(agent(k).actor, state).probs);
  }
  return a;
}

bool AgentBundle::same_parameters(const AgentBundle& other) const {
  for (std::size_t i = 0; i < kNumPatterns; ++i) {
    if (!agents[i].actor.same_parameters(other.agents[i].actor) ||
        !agents[i].critic.same_parameters(other.agents[i].critic)) {
      return false;
    }
  }
  return true;
}

std::string serialize_checkpoint(const AgentBundle& b) {
  std::ostringstream out;
  char buf[64];
  auto exact = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "rpp-checkpoint " << kCheckpointVersion << '\n';
  out << "state_dim " << b.state_dim << '\n';
  out << "hidden " << b.hidden << '\n';
  out << "sizes";
  for (std::size_t s : b.sizes) out << ' ' << s;
  out << '\n';
  out << "init_seed " << b.init_seed << '\n';
  out << "lr_actor " << exact(b.sgd.lr_actor) << '\n';
  out << "lr_critic " << exact(b.sgd.lr_critic) << '\n';
  out << "clip " << exact(b.sgd.clip) << '\n';
  for (PatternKind k : kAllPatterns) {
    out << "agent " << pattern_name(k) << " actor\n";
    write_mlp(out, b.agent(k).actor);
    out << "agent " << pattern_name(k) << " critic\n";
    write_mlp(out, b.agent(k).critic);
  }
  out << "end\n";
  return out.str();
}

AgentBundle parse_checkpoint(std::string_view text, const PatternSizes* expected) {
  std::istringstream in{std::string(text)};
  std::string word;
  auto expect = [&](const std::string& w) {
    if (!(in >> word) || word != w) {
      throw parse_error("corrupt checkpoint: expected '" + w + "'");
    }
  };
  auto read_u64 = [&]() {
    std::uint64_t v = 0;
    if (!(in >> v)) throw parse_error("corrupt checkpoint: expected an integer");
    return v;
  };
  auto read_double = [&]() {
    if (!(in >> word)) throw parse_error("corrupt checkpoint: truncated header");
    char* end = nullptr;
    double v = std::strtod(word.c_str(), &end);
    if (end != word.c_str() + word.size()) throw parse_error("corrupt checkpoint: bad number");
    return v;
  };

  expect("rpp-checkpoint");
  const auto version = read_u64();
  if (version != static_cast<std::uint64_t>(kCheckpointVersion)) {
    throw validation_error("checkpoint version " + std::to_string(version) +
                           " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
  }
  AgentBundle b;
  expect("state_dim");
  b.state_dim = read_u64();
  expect("hidden");
  b.hidden = read_u64();
  expect("sizes");
  for (auto& s : b.sizes) s = read_u64();
  expect("init_seed");
  b.init_seed = read_u64();
  expect("lr_actor");
  b.sgd.lr_actor = read_double();
  expect("lr_critic");
  b.sgd.lr_critic = read_double();
  expect("clip");
  b.sgd.clip = read_double();

  if (expected) {
    for (PatternKind k : kAllPatterns) {
      const std::size_t i = pattern_index(k);
      if (b.sizes[i] != (*expected)[i]) {
        throw validation_error("checkpoint shape mismatch for pattern " +
                               std::string(pattern_name(k)) + ": checkpoint has " +
                               std::to_string(b.sizes[i]) + " actions, catalog has " +
                               std::to_string((*expected)[i]));
      }
    }
  }
  for (PatternKind k : kAllPatterns) {
    for (const char* role : {"actor", "critic"}) {
      expect("agent");
      expect(std::string(pattern_name(k)));
      expect(role);
      Mlp2 net = read_mlp(in);
      const std::size_t want_out =
          std::string_view(role) == "actor" ? b.sizes[pattern_index(k)] : 1;
      if (net.in_dim() != b.state_dim || net.hidden_dim() != b.hidden ||
          net.out_dim() != want_out) {
        throw validation_error("checkpoint shape mismatch for pattern " +
                               std::string(pattern_name(k)) + " " + role);
      }
      if (std::string_view(role) == "actor") {
        b.agent(k).actor = std::move(net);
      } else {
        b.agent(k).critic = std::move(net);
      }
    }
  }
  expect("end");
  return b;
}

void save_checkpoint(const AgentBundle& bundle, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(bundle));
}

AgentBundle load_checkpoint(const std::filesystem::path& path, const PatternSizes* expected) {
  return parse_checkpoint(read_file(path), expected);
}

StopDecision early_stop(std::span<const double> history, const StopRule& rule) {
  StopDecision d;
  if (history.empty()) return d;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] > history[d.best_index]) d.best_index = i;
  }
  const std::size_t current = history.size() - 1;
  d.stop = (current - d.best_index) >= rule.patience || history.size() >= rule.max_iters;
  return d;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    double bootstrap) {
  if (rewards.empty()) throw invalid_argument("cannot compute returns of an empty episode");
  if (gamma < 0.0 || gamma > 1.0) throw invalid_argument("discount must lie in [0, 1]");
  std::vector<double> returns(rewards.size());
  double next = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    next = rewards[i] + gamma * next;
    returns[i] = next;
  }
  return returns;
}

StepResult rollout_step(const AgentBundle& bundle, const StateVector& state,
                        const UserInstance& instance, const RolloutContext& ctx,
                        std::size_t l_prev, std::size_t t, ActionSelection selection,
                        Rng& policy_rng, Rng& env_rng) {
  const UserRecord& user = *instance.user;
  const CandidateSet& cands = instance.cands;
  StepResult out;
  EpisodeStep& step = out.step;
  step.t = t;
  step.state = state;
  for (PatternKind k : kAllPatterns) {
    const Agent& agent = bundle.agent(k);
    const auto policy = forward_policy(agent.actor, state.values);
    const std::size_t a = selection == ActionSelection::kGreedy
                              ? argmax(policy.probs)
                              : sample_categorical(policy.probs, policy_rng);
    step.action[k] = a;
    step.prob[pattern_index(k)] = policy.probs[a];
    step.value[pattern_index(k)] = forward_value(agent.critic, state.values).value;
  }

  const std::size_t increment =
      ctx.catalog->history_increments.at(step.action[PatternKind::kHistoryRecords]);
  out.history_len = apply_length_action(l_prev, increment, user.history.size());

  PromptSentences sentences = select_sentences(*ctx.catalog, step.action);
  if (ctx.refine) sentences = ctx.refine->refine(sentences);
  const AssembledPrompt prompt =
      render_prompt(sentences, user, cands, step.action, out.history_len);
  step.prompt = prompt.text;
  step.history_len = prompt.used_history_len;

  const std::string reply = ctx.env->respond(user, cands, prompt, env_rng);
  const ParsedRanking parsed = parse_reply(reply, cands);
  step.ranking = parsed.order;
  step.padded = parsed.padded;
  const std::size_t m = cands.size();
  step.reward = ndcg_at_k(parsed.order, cands.ground_truth_pos, m);
  step.ndcg10 = ndcg_at_k(parsed.order, cands.ground_truth_pos, std::min<std::size_t>(10, m));

  std::vector<ItemRef> ranked;
  ranked.reserve(m);
  for (std::size_t idx : parsed.order) ranked.push_back(cands.items[idx]);
  out.next_state = ctx.encoder->update_state(prompt, ranked, t + 1);
  return out;
}

UpdateStats update_from_episode(AgentBundle& bundle, std::span<const EpisodeStep> steps,
                                const StateVector& final_state, const TrainConfig& cfg) {
  if (steps.empty()) throw invalid_argument("cannot update from an empty episode");
  std::vector<double> rewards;
  rewards.reserve(steps.size());
  for (const auto& s : steps) rewards.push_back(s.reward);
  const double inv_n = 1.0 / static_cast<double>(steps.size());

  UpdateStats stats;
  for (PatternKind k : kAllPatterns) {
    Agent& agent = bundle.agent(k);
    const double bootstrap = forward_value(agent.critic, final_state.values).value;
    const auto returns = compute_returns(rewards, cfg.gamma, bootstrap);
    Mlp2Grads actor_grad = Mlp2Grads::zeros_like(agent.actor);
    Mlp2Grads critic_grad = Mlp2Grads::zeros_like(agent.critic);
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const auto& s = steps[t].state.values;
      const auto policy = forward_policy(agent.actor, s);
      const auto value = forward_value(agent.critic, s);
      const double advantage = returns[t] - value.value;
      const std::size_t chosen = steps[t].action[k];
      actor_grad.add(backward_policy(agent.actor, policy.tape, chosen, advantage));
      critic_grad.add(backward_value(agent.critic, value.tape, returns[t]));
      actor_loss += -std::log(policy.probs[chosen]) * advantage;
      critic_loss += 0.5 * advantage * advantage;
    }
    actor_grad.scale(inv_n);
    critic_grad.scale(inv_n);
    sgd_step(agent.actor, actor_grad, bundle.sgd.lr_actor, bundle.sgd.clip);
    sgd_step(agent.critic, critic_grad, bundle.sgd.lr_critic, bundle.sgd.clip);
    stats.actor_loss += actor_loss * inv_n / kNumPatterns;
    stats.critic_loss += critic_loss * inv_n / kNumPatterns;
  }
  return stats;
}

namespace {

// One-step TD update after a single transition.
UpdateStats update_from_step(AgentBundle& bundle, const EpisodeStep& step,
                             const StateVector& next_state, const TrainConfig& cfg) {
  UpdateStats stats;
  for (PatternKind k : kAllPatterns) {
    Agent& agent = bundle.agent(k);
    const double bootstrap = forward_value(agent.critic, next_state.values).value;
    const double target = step.reward + cfg.gamma * bootstrap;
    const auto policy = forward_policy(agent.actor, step.state.values);
    const auto value = forward_value(agent.critic, step.state.values);
    const double advantage = target - value.value;
    const std::size_t chosen = step.action[k];
    sgd_step(agent.actor, backward_policy(agent.actor, policy.tape, chosen, advantage),
             bundle.sgd.lr_actor, bundle.sgd.clip);
    sgd_step(agent.critic, backward_value(agent.critic, value.tape, target),
             bundle.sgd.lr_critic, bundle.sgd.clip);
    stats.actor_loss += -std::log(policy.probs[chosen]) * advantage / kNumPatterns;
    stats.critic_loss += 0.5 * advantage * advantage / kNumPatterns;
  }
  return stats;
}

}  // namespace

std::string epoch_report_header() {
  return "epoch\tmean_reward\tmean_actor_loss\tmean_critic_loss\tfailures\t"
         "episodes\tmean_best_ndcg10\tmean_episode_length\tenv_calls\t"
         "max_episode_env_calls\n";
}

std::string format_epoch_report(const EpochReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\t%zu\t%zu\t%.6f\t%.3f\t%zu\t%zu\n",
                r.epoch, r.mean_reward, r.mean_actor_loss, r.mean_critic_loss, r.failures,
                r.episodes, r.mean_best_ndcg10, r.mean_episode_length, r.env_calls,
                r.max_episode_env_calls);
  return buf;
}

EpochReport train_epoch(AgentBundle& bundle, std::span<const UserInstance> users,
                        const RolloutContext& ctx, const TrainConfig& cfg,
                        std::size_t epoch) {
  if (users.empty()) throw invalid_argument("training needs at least one user");
  EpochReport report;
  report.epoch = epoch;
  double reward_sum = 0.0;
  std::size_t reward_count = 0;
  double best_sum = 0.0;
  double actor_sum = 0.0;
  double critic_sum = 0.0;
  std::size_t updates = 0;
  std::size_t steps_total = 0;

  for (const UserInstance& inst : users) {
    const UserId uid = inst.user->user_id;
    Rng policy_rng(derive_seed(derive_seed(cfg.seed, "sampling"), epoch, uid));
    Rng env_rng(derive_seed(derive_seed(cfg.seed, "env"), epoch, uid));
    const std::size_t calls_before = ctx.env->calls();

    std::vector<EpisodeStep> steps;
    std::vector<double> ndcg_history;
    StateVector state = ctx.encoder->init_state(uid);
    std::size_t l_prev = ctx.catalog->initial_history_length;
    bool aborted = false;
    try {
      for (std::size_t t = 0;; ++t) {
        StepResult r = rollout_step(bundle, state, inst, ctx, l_prev, t,
                                    ActionSelection::kSample, policy_rng, env_rng);
        if (cfg.update == UpdateMode::kStep) {
          const auto u = update_from_step(bundle, r.step, r.next_state, cfg);
          actor_sum += u.actor_loss;
          critic_sum += u.critic_loss;
          ++updates;
        }
        ndcg_history.push_back(r.step.ndcg10);
        steps.push_back(std::move(r.step));
        state = std::move(r.next_state);
        l_prev = r.history_len;
        if (early_stop(ndcg_history, cfg.stop).stop) break;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kEnvironment) throw;
      aborted = true;
    }
    const std::size_t calls = ctx.env->calls() - calls_before;
    report.env_calls += calls;
    report.max_episode_env_calls = std::max(report.max_episode_env_calls, calls);
    if (aborted) {
      ++report.failures;
      continue;
    }
    ++report.episodes;
    steps_total += steps.size();
    for (const auto& s : steps) reward_sum += s.reward;
    reward_count += steps.size();
    best_sum += ndcg_history[early_stop(ndcg_history, cfg.stop).best_index];
    if (cfg.update == UpdateMode::kEpisode) {
      const auto u = update_from_episode(bundle, steps, state, cfg);
      actor_sum += u.actor_loss;
      critic_sum += u.critic_loss;
      ++updates;
    }
  }
  if (report.episodes == 0) {
    throw environment_error("every training episode failed in epoch " + std::to_string(epoch));
  }
  report.mean_reward = reward_sum / static_cast<double>(reward_count);
  report.mean_best_ndcg10 = best_sum / static_cast<double>(report.episodes);
  report.mean_episode_length =
      static_cast<double>(steps_total) / static_cast<double>(report.episodes);
  if (updates > 0) {
    report.mean_actor_loss = actor_sum / static_cast<double>(updates);
    report.mean_critic_loss = critic_sum / static_cast<double>(updates);
  }
  return report;
}

InferenceResult run_episode_inference(const AgentBundle& bundle, const UserInstance& instance,
                                      const RolloutContext& ctx, std::size_t fixed_iters,
                                      std::uint64_t env_seed) {
  if (fixed_iters < 1) throw invalid_argument("inference needs at least one iteration");
  InferenceResult out;
  Rng policy_rng(0);  // unused under greedy selection
  Rng env_rng(env_seed);
  StateVector state = ctx.encoder->init_state(instance.user->user_id);
  std::size_t l_prev = ctx.catalog->initial_history_length;
  for (std::size_t t = 0; t < fixed_iters; ++t) {
    StepResult r;
    try {
      r = rollout_step(bundle, state, instance, ctx, l_prev, t, ActionSelection::kGreedy,
                       policy_rng, env_rng);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kEnvironment || out.steps.empty()) throw;
      out.interrupted = true;
      break;
    }
    if (out.steps.empty() || r.step.ndcg10 > out.steps[out.best_index].ndcg10) {
      out.best_index = out.steps.size();
    }
    out.steps.push_back(std::move(r.step));
    state = std::move(r.next_state);
    l_prev = r.history_len;
  }
  return out;
}

}  // namespace rpp
