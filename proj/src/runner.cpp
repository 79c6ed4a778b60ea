// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/runner.hpp"

#include <cstdlib>
#include <filesystem>
#include <limits>
#include <ostream>

#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {

namespace fs = std::filesystem;

SeedPlan SeedPlan::from_master(std::uint64_t master) {
  SeedPlan s;
  s.dataset = derive_seed(master, "dataset");
  s.train_candidates = derive_seed(master, "candidates/train");
  s.test_candidates = derive_seed(master, "candidates/test");
  s.policy_init = derive_seed(master, "policy-init");
  s.sampling = derive_seed(master, "sampling");
  s.simulator = derive_seed(master, "simulator");
  s.encoder = derive_seed(master, "encoder");
  s.eval = derive_seed(master, "eval");
  s.enumeration = derive_seed(master, "enumeration");
  return s;
}

RolloutContext Workspace::context() const {
  RolloutContext ctx;
  ctx.catalog = &catalog;
  ctx.encoder = encoder.get();
  ctx.env = env.get();
  ctx.refine = refine.get();
  return ctx;
}

std::vector<const UserRecord*> Workspace::train_users() const {
  std::vector<const UserRecord*> out;
  for (UserId id : data.train_user_ids) out.push_back(&data.user(id));
  return out;
}

std::vector<const UserRecord*> Workspace::test_users() const {
  std::vector<const UserRecord*> out;
  for (UserId id : data.test_user_ids) out.push_back(&data.user(id));
  return out;
}

std::vector<UserInstance> Workspace::train_instances() const {
  const auto users = train_users();
  return make_instances(users, data.item_catalog, config.candidates, seeds.train_candidates);
}

namespace {

HttpEndpoint endpoint_from(const RunConfig& c, const std::string& url, const std::string& model) {
  HttpEndpoint ep;
  ep.url = url;
  ep.model = model;
  if (const char* key = std::getenv("LLM_API_KEY")) ep.api_key = key;
  ep.timeout_s = c.timeout_s;
  ep.max_retries = c.max_retries;
  ep.backoff_base_s = c.backoff_base_s;
  ep.backoff_max_s = c.backoff_max_s;
  ep.max_in_flight = c.max_in_flight;
  return ep;
}

// Population users arrive without a split; draw a seeded disjoint one.
SplitDataset split_population(SimPopulation& pop, const RunConfig& c, std::uint64_t seed) {
  SplitDataset d;
  d.users = std::move(pop.users);
  d.item_catalog = std::move(pop.catalog);
  for (const auto& u : d.users) d.user_index.emplace(u.key, u.user_id);
  if (c.n_train + c.n_test > d.users.size()) {
    throw validation_error("population has " + std::to_string(d.users.size()) +
                           " users; n_train + n_test = " +
                           std::to_string(c.n_train + c.n_test));
  }
  std::vector<UserId> ids(d.users.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<UserId>(i);
  Rng rng(derive_seed(seed, "population-split"));
  rng.shuffle(ids);
  d.train_user_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(c.n_train));
  d.test_user_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(c.n_train),
                         ids.begin() + static_cast<std::ptrdiff_t>(c.n_train + c.n_test));
  return d;
}

std::shared_ptr<const EmbeddingTable> load_table(const std::string& path, EmbeddingKind kind,
                                                 const KeyResolver& resolve,
                                                 std::vector<std::string>& warnings) {
  auto table = std::make_shared<EmbeddingTable>(load_embeddings(path, kind, resolve, true));
  for (const auto& w : table->warnings) warnings.push_back(w);
  return table;
}

}  // namespace

std::unique_ptr<Workspace> build_workspace(const RunConfig& config) {
  validate_config(config);
  auto ws = std::make_unique<Workspace>();
  ws->config = config;
  ws->seeds = SeedPlan::from_master(config.seed);
  const RunConfig& c = ws->config;

  ws->catalog = c.catalog.empty() ? default_action_catalog() : load_action_catalog(c.catalog);
  ws->catalog.initial_history_length = c.l0;
  ws->catalog.validate();
  const PatternSizes sizes = ws->catalog.sizes();

  std::vector<SimUserSpec> specs;
  if (!c.population.empty()) {
    SimPopulation pop = parse_population(read_file(c.population));
    for (PatternKind k : {PatternKind::kRolePlaying, PatternKind::kReasoningGuidance,
                          PatternKind::kOutputFormat}) {
      for (const auto& s : pop.specs) {
        if (s.preferred[k] >= sizes[pattern_index(k)]) {
          throw validation_error("population preferences exceed the catalog's " +
                                 std::string(pattern_name(k)) + " actions");
        }
      }
    }
    specs = std::move(pop.specs);
    if (pop.user_embeddings.dim > 0) {
      ws->user_embeddings = std::make_shared<EmbeddingTable>(std::move(pop.user_embeddings));
    }
    ws->data = split_population(pop, c, ws->seeds.dataset);
  } else if (!c.interactions.empty()) {
    InteractionFormat fmt;
    fmt.delimiter = c.delimiter;
    fmt.max_malformed_fraction = c.max_malformed_fraction;
    const LoadedInteractions loaded = load_interactions(c.interactions, fmt);
    if (loaded.malformed > 0) {
      ws->warnings.push_back("skipped " + std::to_string(loaded.malformed) +
                             " malformed interaction rows");
    }
    SplitOptions so;
    so.seed = ws->seeds.dataset;
    so.n_train = c.n_train;
    so.n_test = c.n_test;
    so.min_interactions = c.min_interactions;
    ws->data = build_split(loaded.rows, so);
    if (c.backend == "simulated") {
      specs = attach_sim_specs(ws->data, sizes, ws->seeds.simulator, c.sim_max_signal_window);
    }
  } else {
    throw usage_error("no data source: pass --interactions or --population");
  }

  const SplitDataset& data = ws->data;
  if (!c.user_embeddings.empty()) {
    ws->user_embeddings = load_table(
        c.user_embeddings, EmbeddingKind::kUser,
        [&data](std::string_view key) { return data.find_user(key); }, ws->warnings);
  }
  if (!c.item_embeddings.empty()) {
    ws->item_embeddings = load_table(
        c.item_embeddings, EmbeddingKind::kItem,
        [&data](std::string_view key) { return data.item_catalog.find(key); }, ws->warnings);
  }

  if (c.text_encoder == "http") {
    if (c.embedding_endpoint.empty()) {
      throw usage_error("text_encoder=http needs embedding_endpoint");
    }
    ws->text = std::make_shared<HttpTextEncoder>(
        endpoint_from(c, c.embedding_endpoint, c.embedding_model), c.text_dim);
  } else {
    ws->text = std::make_shared<HashTextEncoder>(c.text_dim);
  }
  StateEncoderConfig ec;
  ec.state_dim = c.state_dim;
  ec.gru_input_dim = c.gru_input_dim;
  ec.seed = ws->seeds.encoder;
  ws->encoder = std::make_unique<StateEncoder>(ec, ws->text, ws->user_embeddings,
                                               ws->item_embeddings);

  if (c.backend == "http") {
    if (c.endpoint.empty()) throw usage_error("backend=http needs an endpoint");
    ws->env = std::make_unique<LlmEnvironment>(
        std::make_shared<HttpChatBackend>(endpoint_from(c, c.endpoint, c.model)),
        c.temperature);
  } else {
    ws->env = std::make_unique<SimulatedEnvironment>(std::move(specs));
  }

  if (c.mode == "rpp+") {
    if (c.refiner == "http") {
      const std::string url = c.refine_endpoint.empty() ? c.endpoint : c.refine_endpoint;
      if (url.empty()) throw usage_error("refiner=http needs refine_endpoint or endpoint");
      const std::string model = c.refine_model.empty() ? c.model : c.refine_model;
      ws->refiner = std::make_shared<LlmRefiner>(
          std::make_shared<HttpChatBackend>(endpoint_from(c, url, model)), c.temperature);
    } else {
      ws->refiner = std::make_shared<IdentityRefiner>();
    }
    set_refiner(*ws, ws->refiner);
  }
  return ws;
}

void set_refiner(Workspace& ws, std::shared_ptr<SentenceRefiner> refiner) {
  ws.refiner = std::move(refiner);
  ws.refine = std::make_unique<RefineBlock>(
      ws.refiner, ws.config.refine_instruction.empty()
                      ? std::string(kDefaultRefineInstruction)
                      : ws.config.refine_instruction);
}

AgentBundle fresh_bundle(const Workspace& ws) {
  SgdConfig sgd;
  sgd.lr_actor = ws.config.lr_actor;
  sgd.lr_critic = ws.config.lr_critic;
  sgd.clip = ws.config.grad_clip;
  return AgentBundle::create(ws.config.state_dim, ws.config.hidden, ws.catalog.sizes(),
                             ws.seeds.policy_init, sgd);
}

TrainResult train(Workspace& ws) {
  TrainResult out;
  out.bundle = fresh_bundle(ws);
  const auto instances = ws.train_instances();
  TrainConfig tc;
  tc.gamma = ws.config.gamma;
  tc.stop = {ws.config.patience, ws.config.max_iters};
  tc.update = ws.config.update_mode == "step" ? UpdateMode::kStep : UpdateMode::kEpisode;
  tc.seed = ws.seeds.sampling;
  const RolloutContext ctx = ws.context();
  for (std::size_t e = 0; e < ws.config.epochs; ++e) {
    out.epochs.push_back(train_epoch(out.bundle, instances, ctx, tc, e));
    out.aborted_episodes += out.epochs.back().failures;
  }
  if (ws.refine) out.refine_stats = ws.refine->stats();
  return out;
}

namespace {

EvalOptions eval_options(const Workspace& ws, std::string label) {
  EvalOptions o;
  o.repeats = ws.config.repeats;
  o.seed = ws.seeds.eval;
  o.candidate_seed = ws.seeds.test_candidates;
  o.m = ws.config.candidates;
  o.inference_iters = ws.config.inference_iters;
  o.threads = ws.config.eval_threads;
  o.label = std::move(label);
  return o;
}

}  // namespace

MetricReport evaluate_bundle(Workspace& ws, const AgentBundle& bundle) {
  const auto users = ws.test_users();
  return evaluate(PolicySource(&bundle), users, ws.data.item_catalog, ws.context(),
                  eval_options(ws, ws.config.mode));
}

MetricReport evaluate_manual(Workspace& ws) {
  const auto users = ws.test_users();
  RolloutContext ctx = ws.context();
  ctx.refine = nullptr;
  return evaluate(PolicySource(manual_baseline(ws.catalog, ws.config.manual_history_length)),
                  users, ws.data.item_catalog, ctx, eval_options(ws, "manual"));
}

MetricReport evaluate_enumeration(Workspace& ws, EnumerationResult* search) {
  RolloutContext ctx = ws.context();
  ctx.refine = nullptr;
  EnumerationOptions eo;
  eo.budget = ws.config.enum_budget == "full"
                  ? std::numeric_limits<std::size_t>::max()
                  : static_cast<std::size_t>(std::stoull(ws.config.enum_budget));
  eo.history_len = ws.config.enum_history_length;
  eo.seed = ws.seeds.enumeration;
  eo.threads = ws.config.eval_threads;
  const auto instances = ws.train_instances();
  EnumerationResult found = enumeration_baseline(instances, ctx, eo);
  const auto users = ws.test_users();
  MetricReport report = evaluate(PolicySource(found.best), users, ws.data.item_catalog, ctx,
                                 eval_options(ws, "enumeration"));
  if (search) *search = std::move(found);
  return report;
}

SimPopulation simulate_population(const RunConfig& config) {
  if (config.sim_users < 1) throw usage_error("sim_users must be >= 1");
  const ActionCatalog catalog =
      config.catalog.empty() ? default_action_catalog() : load_action_catalog(config.catalog);
  SimPopulationConfig pc;
  pc.n_users = config.sim_users;
  pc.n_items = config.sim_items;
  pc.seed = SeedPlan::from_master(config.seed).simulator;
  pc.max_signal_window = config.sim_max_signal_window;
  pc.planted_fraction = config.sim_planted_fraction;
  pc.embedding_noise = config.sim_embedding_noise;
  return gen_sim_population(pc, catalog.sizes());
}

GradCheckSummary grad_check_suite(std::uint64_t seed, std::size_t n_seeds, double eps) {
  GradCheckSummary out;
  out.seeds = n_seeds;
  constexpr std::size_t kIn = 8, kHidden = 16, kOut = 5;
  for (std::size_t i = 0; i < n_seeds; ++i) {
    Rng rng(derive_seed(derive_seed(seed, "grad-check"), i, 0));
    Mlp2 actor = Mlp2::init(kIn, kHidden, kOut, rng.next_u64());
    Mlp2 critic = Mlp2::init(kIn, kHidden, 1, rng.next_u64());
    for (Mlp2* net : {&actor, &critic}) {
      for (auto& b : net->b1) b = 0.1 * rng.normal();
      for (auto& b : net->b2) b = 0.1 * rng.normal();
    }
    LossSpec policy;
    policy.kind = LossSpec::Kind::kPolicy;
    policy.state.resize(kIn);
    for (auto& x : policy.state) x = rng.normal();
    policy.chosen = rng.uniform_index(kOut);
    policy.advantage = rng.normal();
    LossSpec value = policy;
    value.kind = LossSpec::Kind::kValue;
    value.target = rng.normal();
    out.actor_max_rel_error =
        std::max(out.actor_max_rel_error, grad_check(actor, policy, eps).max_rel_error);
    out.critic_max_rel_error =
        std::max(out.critic_max_rel_error, grad_check(critic, value, eps).max_rel_error);
  }
  return out;
}

namespace {

fs::path prepare_out_dir(const RunConfig& config) {
  const fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "resolved_config.txt", dump_config(config));
  return dir;
}

void flush_warnings(Workspace& ws, std::ostream& log) {
  for (const auto& w : ws.warnings) log << "warning: " << w << '\n';
  ws.warnings.clear();
  if (ws.refine) {
    for (const auto& w : ws.refine->take_warnings()) log << "warning: " << w << '\n';
  }
}

}  // namespace

void cmd_train(const RunConfig& config, std::ostream& log) {
  auto ws = build_workspace(config);
  const fs::path dir = prepare_out_dir(ws->config);
  flush_warnings(*ws, log);
  TrainResult result = train(*ws);
  std::string report = epoch_report_header();
  for (const auto& e : result.epochs) {
    report += format_epoch_report(e);
    log << "epoch " << e.epoch << ": mean_reward " << e.mean_reward << ", failures "
        << e.failures << '\n';
  }
  write_file(dir / "epoch_report.tsv", report);
  const fs::path ckpt = config.checkpoint.empty() ? dir / "checkpoint.txt" : fs::path(config.checkpoint);
  save_checkpoint(result.bundle, ckpt);
  if (ws->refine) {
    const RefineStats s = result.refine_stats;
    write_file(dir / "refine_stats.txt",
               "requests\t" + std::to_string(s.requests) + "\ncache_hits\t" +
                   std::to_string(s.cache_hits) + "\nfailures\t" +
                   std::to_string(s.failures) + "\nplaceholder_rejections\t" +
                   std::to_string(s.placeholder_rejections) + '\n');
  }
  flush_warnings(*ws, log);
  log << "checkpoint written to " << ckpt.string() << '\n';
}

MetricReport cmd_eval(const RunConfig& config, std::ostream& log) {
  auto ws = build_workspace(config);
  const fs::path dir = prepare_out_dir(ws->config);
  flush_warnings(*ws, log);
  MetricReport report;
  if (config.baseline == "manual") {
    report = evaluate_manual(*ws);
  } else if (config.baseline == "enumeration") {
    EnumerationResult search;
    report = evaluate_enumeration(*ws, &search);
    std::string table = "action\tmean_ndcg10\n";
    char buf[64];
    for (const auto& [action, score] : search.scores) {
      std::snprintf(buf, sizeof buf, "%.6f", score);
      table += action.to_string() + '\t' + buf + '\n';
    }
    write_file(dir / "enumeration.tsv", table);
    log << "enumeration selected " << search.best.action.to_string() << '\n';
  } else {
    if (config.checkpoint.empty()) {
      throw usage_error("eval needs --checkpoint or --baseline manual|enumeration");
    }
    const PatternSizes sizes = ws->catalog.sizes();
    const AgentBundle bundle = load_checkpoint(config.checkpoint, &sizes);
    if (bundle.state_dim != config.state_dim) {
      throw validation_error("checkpoint state_dim " + std::to_string(bundle.state_dim) +
                             " differs from configured state_dim " +
                             std::to_string(config.state_dim));
    }
    report = evaluate_bundle(*ws, bundle);
  }
  if (config.format != "summary") write_file(dir / "metrics.tsv", format_report_table(report));
  if (config.format != "table") {
    write_file(dir / "metrics_summary.txt", format_report_summary(report));
  }
  flush_warnings(*ws, log);
  log << format_report_summary(report);
  return report;
}

void cmd_simulate(const RunConfig& config, std::ostream& log) {
  const SimPopulation pop = simulate_population(config);
  const fs::path dir = prepare_out_dir(config);
  const fs::path out = config.population.empty() ? dir / "population.json"
                                                 : fs::path(config.population);
  write_file(out, serialize_population(pop));
  log << "population of " << pop.users.size() << " users written to " << out.string() << '\n';
}

GradCheckSummary cmd_grad_check(const RunConfig& config, std::ostream& log) {
  const GradCheckSummary s = grad_check_suite(config.seed);
  char buf[160];
  std::snprintf(buf, sizeof buf, "actor max relative error %.3e\ncritic max relative error %.3e\n",
                s.actor_max_rel_error, s.critic_max_rel_error);
  log << buf;
  return s;
}

}  // namespace rpp
