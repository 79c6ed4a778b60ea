// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/env.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rpp/error.hpp"

namespace rpp {
namespace {

using nlohmann::json;

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim_ws(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view strip_order_number(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
    return trim_ws(line.substr(i + 1));
  }
  return line;
}

std::string_view strip_quotes(std::string_view s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return trim_ws(s.substr(1, s.size() - 2));
  }
  return s;
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint) : client_(std::move(endpoint)) {}

std::string HttpChatBackend::request_body(std::string_view model,
                                          std::string_view prompt,
                                          double temperature) {
  json body = {{"model", std::string(model)},
               {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
               {"temperature", temperature}};
  return body.dump();
}

std::string HttpChatBackend::reply_content(std::string_view body) {
  try {
    auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw environment_error(std::string("malformed chat-completions reply: ") + e.what());
  }
}

std::string HttpChatBackend::complete(std::string_view prompt, double temperature) {
  return reply_content(
      client_.post(request_body(client_.endpoint().model, prompt, temperature)));
}

LlmRefiner::LlmRefiner(std::shared_ptr<LlmBackend> backend, double temperature)
    : backend_(std::move(backend)), temperature_(temperature) {
  if (!backend_) throw invalid_argument("refiner needs a backend");
}

std::string LlmRefiner::request_text(std::string_view instruction,
                                     std::string_view sentence) {
  std::string text(instruction);
  text += ": \"";
  text += sentence;
  text += '"';
  std::vector<std::string_view> markers;
  if (sentence.find(kHistoryPlaceholder) != std::string_view::npos) {
    markers.push_back(kHistoryPlaceholder);
  }
  if (sentence.find(kCandidatePlaceholder) != std::string_view::npos) {
    markers.push_back(kCandidatePlaceholder);
  }
  if (!markers.empty()) {
    text += "\nKeep the marker";
    if (markers.size() > 1) text += 's';
    for (std::size_t i = 0; i < markers.size(); ++i) {
      text += i ? " and " : " ";
      text += markers[i];
    }
    text += " exactly as written.";
  }
  text += "\nReply with the refined sentence only.";
  return text;
}

std::string LlmRefiner::refine(std::string_view instruction, std::string_view sentence) {
  std::string reply = backend_->complete(request_text(instruction, sentence), temperature_);
  return std::string(strip_quotes(trim_ws(reply)));
}

LlmEnvironment::LlmEnvironment(std::shared_ptr<LlmBackend> backend, double temperature)
    : backend_(std::move(backend)), temperature_(temperature) {
  if (!backend_) throw invalid_argument("environment needs a backend");
}

std::string LlmEnvironment::do_respond(const UserRecord&, const CandidateSet&,
                                       const AssembledPrompt& prompt, Rng&) {
  return backend_->complete(prompt.text, temperature_);
}

ParsedRanking parse_reply(std::string_view reply, std::span<const std::string> titles) {
  const std::size_t m = titles.size();
  std::vector<std::string> lowered;
  lowered.reserve(m);
  for (const auto& t : titles) lowered.push_back(lower_ascii(t));

  ParsedRanking out;
  std::vector<bool> used(m, false);
  std::size_t start = 0;
  while (start <= reply.size() && out.order.size() < m) {
    std::size_t end = reply.find('\n', start);
    if (end == std::string_view::npos) end = reply.size();
    std::string_view line = strip_order_number(trim_ws(reply.substr(start, end - start)));
    line = strip_quotes(line);
    start = end + 1;
    if (line.empty()) continue;
    const std::string text = lower_ascii(line);

    std::size_t match = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (lowered[i] == text) {
        match = i;
        break;
      }
    }
    if (match == m) {
      // Longest contained title wins so "Alien" does not shadow "Aliens".
      for (std::size_t i = 0; i < m; ++i) {
        if (lowered[i].empty() || text.find(lowered[i]) == std::string::npos) continue;
        if (match == m || lowered[i].size() > lowered[match].size()) match = i;
      }
    }
    if (match == m || used[match]) continue;
    used[match] = true;
    out.order.push_back(match);
  }
  out.n_matched = out.order.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (!used[i]) out.order.push_back(i);
  }
  out.padded = out.n_matched < m;
  return out;
}

ParsedRanking parse_reply(std::string_view reply, const CandidateSet& cands) {
  std::vector<std::string> titles;
  titles.reserve(cands.items.size());
  for (const auto& item : cands.items) titles.push_back(item.title);
  return parse_reply(reply, titles);
}

std::string render_ranking(std::span<const std::size_t> order, const CandidateSet& cands) {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out += std::to_string(i + 1);
    out += ". ";
    out += cands.items.at(order[i]).title;
    out += '\n';
  }
  return out;
}

std::size_t matched_sentence_patterns(const SimUserSpec& spec, const JointAction& action) {
  std::size_t m = 0;
  for (PatternKind k : {PatternKind::kRolePlaying, PatternKind::kReasoningGuidance,
                        PatternKind::kOutputFormat}) {
    if (action[k] == spec.preferred[k]) ++m;
  }
  return m;
}

std::string simulate_reply(const SimUserSpec& spec, const AssembledPrompt& prompt,
                           const CandidateSet& cands, Rng& rng) {
  const std::size_t m = cands.items.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto score = [&](std::size_t i) {
    const ItemId id = cands.items[i].id;
    return id < spec.preference.size() ? spec.preference[id] : 0.0;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });

  const std::size_t misses = 3 - matched_sentence_patterns(spec, prompt.action);
  const std::size_t passes = spec.base_swap_passes + misses * spec.swap_passes_per_miss;
  for (std::size_t p = 0; p < passes; ++p) {
    for (std::size_t j = 0; j + 1 < m; ++j) {
      if (rng.uniform01() < spec.swap_prob) std::swap(order[j], order[j + 1]);
    }
  }

  const double window = static_cast<double>(std::max<std::size_t>(spec.signal_window, 1));
  const double coverage =
      std::min(1.0, static_cast<double>(prompt.used_history_len) / window);
  const auto demotion = static_cast<std::size_t>(
      std::floor((1.0 - coverage) * static_cast<double>(spec.demotion_depth)));
  if (demotion > 0 && m > 0) {
    auto it = std::find(order.begin(), order.end(), cands.ground_truth_pos);
    if (it != order.end()) {
      const auto pos = static_cast<std::size_t>(it - order.begin());
      const std::size_t target = std::min(m - 1, pos + demotion);
      std::rotate(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos) + 1,
                  order.begin() + static_cast<std::ptrdiff_t>(target) + 1);
    }
  }
  return render_ranking(order, cands);
}

SimulatedEnvironment::SimulatedEnvironment(std::vector<SimUserSpec> specs)
    : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].user != i) throw invalid_argument("simulator specs must be indexed by user id");
    if (specs_[i].signal_window < 1) throw validation_error("signal window must be >= 1");
  }
}

const SimUserSpec& SimulatedEnvironment::spec(UserId user) const {
  if (user >= specs_.size()) {
    throw environment_error("no simulated spec for user " + std::to_string(user));
  }
  return specs_[user];
}

std::string SimulatedEnvironment::do_respond(const UserRecord& user,
                                             const CandidateSet& cands,
                                             const AssembledPrompt& prompt, Rng& rng) {
  return simulate_reply(spec(user.user_id), prompt, cands, rng);
}

bool operator==(const SimPopulation& a, const SimPopulation& b) {
  if (a.catalog.titles() != b.catalog.titles() || a.specs != b.specs ||
      a.planted != b.planted || a.users.size() != b.users.size() ||
      a.user_embeddings.dim != b.user_embeddings.dim ||
      a.user_embeddings.vectors != b.user_embeddings.vectors) {
    return false;
  }
  for (std::size_t i = 0; i < a.users.size(); ++i) {
    const auto& x = a.users[i];
    const auto& y = b.users[i];
    if (x.user_id != y.user_id || x.key != y.key || x.history != y.history ||
        !(x.holdout == y.holdout)) {
      return false;
    }
  }
  return true;
}

SimPopulation gen_sim_population(const SimPopulationConfig& config,
                                 const PatternSizes& sizes) {
  if (config.n_users == 0) throw invalid_argument("population needs at least one user");
  if (config.history_min < 4 || config.history_max < config.history_min) {
    throw invalid_argument("history length range must satisfy 4 <= min <= max");
  }
  if (config.n_items < config.history_max + 11) {
    throw invalid_argument("catalog too small for the requested history lengths");
  }
  if (config.max_signal_window < 1) throw invalid_argument("signal window must be >= 1");
  for (std::size_t s : sizes) {
    if (s == 0) throw invalid_argument("every pattern needs at least one action");
  }

  SimPopulation pop;
  char buf[48];
  for (std::size_t i = 0; i < config.n_items; ++i) {
    std::snprintf(buf, sizeof buf, "Sim Film %05zu", i + 1);
    pop.catalog.intern(buf);
  }

  Rng item_rng(derive_seed(config.seed, "sim-items"));
  std::vector<double> item_latent(config.n_items * config.latent_dim);
  for (double& x : item_latent) x = item_rng.normal();

  Rng code_rng(derive_seed(config.seed, "sim-codes"));
  const std::size_t dim = config.embedding_dim;
  const double code_std = 1.0 / std::sqrt(static_cast<double>(dim));
  auto make_codes = [&](std::size_t n) {
    std::vector<std::vector<double>> codes(n, std::vector<double>(dim));
    for (auto& c : codes) {
      for (double& x : c) x = code_std * code_rng.normal();
    }
    return codes;
  };
  const auto role_codes = make_codes(sizes[0]);
  const auto reasoning_codes = make_codes(sizes[2]);
  const auto output_codes = make_codes(sizes[3]);
  const auto window_codes = make_codes(config.max_signal_window);

  Rng plant_rng(derive_seed(config.seed, "sim-planted"));
  pop.planted[PatternKind::kRolePlaying] = plant_rng.uniform_index(sizes[0]);
  pop.planted[PatternKind::kHistoryRecords] = 0;
  pop.planted[PatternKind::kReasoningGuidance] = plant_rng.uniform_index(sizes[2]);
  pop.planted[PatternKind::kOutputFormat] = plant_rng.uniform_index(sizes[3]);

  pop.user_embeddings.dim = dim;
  pop.user_embeddings.kind = EmbeddingKind::kUser;
  Rng rng(derive_seed(config.seed, "sim-users"));
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const auto uid = static_cast<UserId>(u);
    SimUserSpec spec;
    spec.user = uid;
    if (rng.uniform01() < config.planted_fraction) {
      spec.preferred = pop.planted;
    } else {
      spec.preferred[PatternKind::kRolePlaying] = rng.uniform_index(sizes[0]);
      spec.preferred[PatternKind::kReasoningGuidance] = rng.uniform_index(sizes[2]);
      spec.preferred[PatternKind::kOutputFormat] = rng.uniform_index(sizes[3]);
    }
    spec.signal_window = 1 + rng.uniform_index(config.max_signal_window);

    std::vector<double> user_latent(config.latent_dim);
    for (double& x : user_latent) x = rng.normal();
    spec.preference.resize(config.n_items);
    for (std::size_t i = 0; i < config.n_items; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < config.latent_dim; ++d) {
        s += user_latent[d] * item_latent[i * config.latent_dim + d];
      }
      spec.preference[i] = s;
    }

    // Gumbel-top-k draws a history skewed toward preferred items.
    const std::size_t len =
        config.history_min + rng.uniform_index(config.history_max - config.history_min + 1);
    std::vector<std::pair<double, ItemId>> keyed(config.n_items);
    for (std::size_t i = 0; i < config.n_items; ++i) {
      double uu = rng.uniform01();
      while (uu <= 0.0) uu = rng.uniform01();
      keyed[i] = {spec.preference[i] - std::log(-std::log(uu)), static_cast<ItemId>(i)};
    }
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(len),
                      keyed.end(), [](const auto& a, const auto& b) {
                        return a.first > b.first || (a.first == b.first && a.second < b.second);
                      });
    UserRecord rec;
    rec.user_id = uid;
    std::snprintf(buf, sizeof buf, "sim_user_%05zu", u + 1);
    rec.key = buf;
    std::vector<bool> in_history(config.n_items, false);
    for (std::size_t i = 0; i < len; ++i) {
      rec.history.push_back(pop.catalog.ref(keyed[i].second));
      in_history[keyed[i].second] = true;
    }
    rng.shuffle(rec.history);
    ItemId best = 0;
    bool have = false;
    for (std::size_t i = 0; i < config.n_items; ++i) {
      if (in_history[i]) continue;
      if (!have || spec.preference[i] > spec.preference[best]) {
        best = static_cast<ItemId>(i);
        have = true;
      }
    }
    rec.holdout = pop.catalog.ref(best);

    std::vector<double> emb(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) {
      emb[d] = role_codes[spec.preferred[PatternKind::kRolePlaying]][d] +
               reasoning_codes[spec.preferred[PatternKind::kReasoningGuidance]][d] +
               output_codes[spec.preferred[PatternKind::kOutputFormat]][d] +
               window_codes[spec.signal_window - 1][d] +
               config.embedding_noise * code_std * rng.normal();
    }
    pop.user_embeddings.vectors[uid] = std::move(emb);
    pop.users.push_back(std::move(rec));
    pop.specs.push_back(std::move(spec));
  }
  return pop;
}

std::vector<SimUserSpec> attach_sim_specs(const SplitDataset& split,
                                          const PatternSizes& sizes,
                                          std::uint64_t seed,
                                          std::size_t max_signal_window) {
  Rng rng(derive_seed(seed, "sim-attach"));
  std::vector<SimUserSpec> specs;
  specs.reserve(split.users.size());
  for (const auto& user : split.users) {
    SimUserSpec spec;
    spec.user = user.user_id;
    spec.preferred[PatternKind::kRolePlaying] = rng.uniform_index(sizes[0]);
    spec.preferred[PatternKind::kReasoningGuidance] = rng.uniform_index(sizes[2]);
    spec.preferred[PatternKind::kOutputFormat] = rng.uniform_index(sizes[3]);
    spec.signal_window = 1 + rng.uniform_index(std::max<std::size_t>(max_signal_window, 1));
    spec.preference.resize(split.item_catalog.size());
    double mx = 0.0;
    for (double& p : spec.preference) {
      p = rng.normal();
      mx = std::max(mx, p);
    }
    spec.preference[user.holdout.id] = mx + 1.0;
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::string serialize_population(const SimPopulation& pop) {
  json j;
  j["format"] = "rpp-sim-population";
  j["version"] = 1;
  j["items"] = pop.catalog.titles();
  j["planted"] = pop.planted.to_string();
  json users = json::array();
  for (std::size_t i = 0; i < pop.users.size(); ++i) {
    const auto& u = pop.users[i];
    const auto& s = pop.specs.at(i);
    std::vector<ItemId> hist;
    for (const auto& h : u.history) hist.push_back(h.id);
    const auto* emb = pop.user_embeddings.lookup(u.user_id);
    users.push_back({{"key", u.key},
                     {"history", hist},
                     {"holdout", u.holdout.id},
                     {"preferred", s.preferred.to_string()},
                     {"signal_window", s.signal_window},
                     {"swap_passes_per_miss", s.swap_passes_per_miss},
                     {"swap_prob", s.swap_prob},
                     {"demotion_depth", s.demotion_depth},
                     {"base_swap_passes", s.base_swap_passes},
                     {"preference", s.preference},
                     {"embedding", emb ? *emb : std::vector<double>{}}});
  }
  j["embedding_dim"] = pop.user_embeddings.dim;
  j["users"] = std::move(users);
  return j.dump() + "\n";
}

SimPopulation parse_population(std::string_view json_text) {
  SimPopulation pop;
  try {
    auto j = json::parse(json_text);
    if (j.value("format", std::string()) != "rpp-sim-population") {
      throw parse_error("not a simulated population file");
    }
    if (j.at("version").get<int>() != 1) throw parse_error("unsupported population version");
    for (const auto& t : j.at("items")) pop.catalog.intern(t.get<std::string>());
    pop.planted = JointAction::parse(j.at("planted").get<std::string>());
    pop.user_embeddings.dim = j.at("embedding_dim").get<std::size_t>();
    pop.user_embeddings.kind = EmbeddingKind::kUser;
    const auto& users = j.at("users");
    for (std::size_t i = 0; i < users.size(); ++i) {
      const auto& ju = users[i];
      UserRecord u;
      u.user_id = static_cast<UserId>(i);
      u.key = ju.at("key").get<std::string>();
      for (auto id : ju.at("history").get<std::vector<ItemId>>()) {
        u.history.push_back(pop.catalog.ref(id));
      }
      u.holdout = pop.catalog.ref(ju.at("holdout").get<ItemId>());
      SimUserSpec s;
      s.user = u.user_id;
      s.preferred = JointAction::parse(ju.at("preferred").get<std::string>());
      s.signal_window = ju.at("signal_window").get<std::size_t>();
      s.swap_passes_per_miss = ju.at("swap_passes_per_miss").get<std::size_t>();
      s.swap_prob = ju.at("swap_prob").get<double>();
      s.demotion_depth = ju.at("demotion_depth").get<std::size_t>();
      s.base_swap_passes = ju.at("base_swap_passes").get<std::size_t>();
      s.preference = ju.at("preference").get<std::vector<double>>();
      auto emb = ju.at("embedding").get<std::vector<double>>();
      if (!emb.empty()) {
        if (emb.size() != pop.user_embeddings.dim) {
          throw parse_error("user " + u.key + " embedding has wrong dimension");
        }
        pop.user_embeddings.vectors[u.user_id] = std::move(emb);
      }
      if (s.preference.size() != pop.catalog.size()) {
        throw parse_error("user " + u.key + " preference vector has wrong length");
      }
      pop.users.push_back(std::move(u));
      pop.specs.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed population file: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kParse) throw;
    throw parse_error(std::string("malformed population file: ") + e.what());
  }
  return pop;
}

}  // namespace rpp
