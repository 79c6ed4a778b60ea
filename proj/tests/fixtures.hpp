// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include "rpp/catalog.hpp"
#include "rpp/env.hpp"
#include "rpp/error.hpp"
#include "rpp/evaluation.hpp"
#include "rpp/marl.hpp"
#include "rpp/state.hpp"

namespace rpp::testing {

// Small simulated world: population, encoder and environment wired together.
struct World {
  ActionCatalog catalog = default_action_catalog();
  SimPopulation pop;
  std::shared_ptr<EmbeddingTable> user_table;
  std::unique_ptr<StateEncoder> encoder;
  std::unique_ptr<Environment> env;
  std::vector<UserInstance> instances;

  explicit World(std::size_t n_users = 20, std::uint64_t seed = 1, double planted = 0.0) {
    SimPopulationConfig pc;
    pc.n_users = n_users;
    pc.n_items = 120;
    pc.seed = seed;
    pc.planted_fraction = planted;
    pop = gen_sim_population(pc, catalog.sizes());
    user_table = std::make_shared<EmbeddingTable>(pop.user_embeddings);
    StateEncoderConfig ec;
    ec.seed = seed + 7;
    encoder = std::make_unique<StateEncoder>(ec, std::make_shared<HashTextEncoder>(256),
                                             user_table, nullptr);
    env = std::make_unique<SimulatedEnvironment>(pop.specs);
    std::vector<const UserRecord*> users;
    for (const auto& u : pop.users) users.push_back(&u);
    instances = make_instances(users, pop.catalog, 10, seed + 3);
  }

  RolloutContext context(RefineBlock* refine = nullptr) const {
    return RolloutContext{&catalog, encoder.get(), env.get(), refine};
  }

  std::vector<const UserRecord*> users() const {
    std::vector<const UserRecord*> out;
    for (const auto& u : pop.users) out.push_back(&u);
    return out;
  }
};

// Always ranks the ground truth first.
class OracleEnvironment final : public Environment {
 protected:
  std::string do_respond(const UserRecord&, const CandidateSet& cands, const AssembledPrompt&,
                         Rng&) override {
    std::vector<std::size_t> order = {cands.ground_truth_pos};
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (i != cands.ground_truth_pos) order.push_back(i);
    }
    return render_ranking(order, cands);
  }
};

// Fails every call after the first `ok_calls`.
class BrokenEnvironment final : public Environment {
 public:
  explicit BrokenEnvironment(std::size_t ok_calls) : ok_calls_(ok_calls) {}

 protected:
  std::string do_respond(const UserRecord&, const CandidateSet& cands, const AssembledPrompt&,
                         Rng&) override {
    if (served_++ >= ok_calls_) throw environment_error("backend unavailable");
    std::vector<std::size_t> order(cands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return render_ranking(order, cands);
  }

 private:
  std::size_t ok_calls_;
  std::size_t served_ = 0;
};

// Policy that puts (almost) all mass on one joint action.
inline AgentBundle point_mass_bundle(const ActionCatalog& catalog, std::size_t state_dim,
                                     const JointAction& action) {
  AgentBundle b = AgentBundle::create(state_dim, 8, catalog.sizes(), 3);
  for (PatternKind k : kAllPatterns) {
    Mlp2& actor = b.agent(k).actor;
    for (auto& w : actor.w2.data) w = 0.0;
    for (std::size_t i = 0; i < actor.b2.size(); ++i) actor.b2[i] = i == action[k] ? 60.0 : 0.0;
  }
  return b;
}

}  // namespace rpp::testing
