#include "telesim/study/plan.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "telesim/common/error.hpp"
#include "telesim/common/hash.hpp"
#include "telesim/common/rng.hpp"

namespace telesim::study {

namespace {

// Fisher-Yates with unbiased bounded draws.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::vector<const Assignment*> StudyPlan::for_actor(const std::string& actor) const {
  std::vector<const Assignment*> out;
  for (const auto& a : assignments)
    if (a.actor == actor) out.push_back(&a);
  std::sort(out.begin(), out.end(), [](const Assignment* x, const Assignment* y) {
    return std::tie(x->scenario, x->order_index) < std::tie(y->scenario, y->order_index);
  });
  return out;
}

StudyPlan make_plan(std::uint64_t seed, const std::vector<std::string>& scenarios,
                    const std::vector<std::string>& actors, const ReplicationSpec& replication,
                    const std::vector<Arm>& arms) {
  auto infeasible = [](const std::string& why) {
    return Error(ErrorCode::InfeasibleReplication, "infeasible study plan: " + why);
  };
  if (scenarios.empty()) throw infeasible("no scenarios");
  if (actors.empty()) throw infeasible("no actors");
  if (arms.empty()) throw infeasible("no arms");
  if (std::set<std::string>(scenarios.begin(), scenarios.end()).size() != scenarios.size())
    throw infeasible("duplicate scenario id");
  if (std::set<std::string>(actors.begin(), actors.end()).size() != actors.size())
    throw infeasible("duplicate actor id");
  if (std::set<Arm>(arms.begin(), arms.end()).size() != arms.size()) throw infeasible("duplicate arm");

  StudyPlan plan;
  plan.seed = seed;
  plan.arms = arms;
  for (std::size_t i = 0; i < scenarios.size(); ++i) plan.primary[scenarios[i]] = actors[i % actors.size()];

  std::set<std::string> actor_set(actors.begin(), actors.end());
  if (!replication.pairs.empty()) {
    if (replication.count != 0 && replication.count != static_cast<int>(replication.pairs.size()))
      throw infeasible("replication count disagrees with the explicit pairs");
    for (const auto& [sc, pair] : replication.pairs) {
      if (!plan.primary.count(sc)) throw infeasible("replicated scenario '" + sc + "' is not in the roster");
      if (!actor_set.count(pair.first) || !actor_set.count(pair.second))
        throw infeasible("replication of '" + sc + "' names an unknown actor");
      if (pair.first == pair.second) throw infeasible("replication of '" + sc + "' repeats one actor");
      plan.primary[sc] = pair.first;
      plan.replication[sc] = pair;
    }
  } else if (replication.count != 0) {
    if (replication.count < 0) throw infeasible("negative replication count");
    if (static_cast<std::size_t>(replication.count) > scenarios.size())
      throw infeasible("more replicated scenarios than scenarios");
    if (actors.size() < 2) throw infeasible("replication needs at least two actors");
    Rng rng(derive_seed(seed, fnv1a64("replication")));
    std::vector<std::size_t> idx(scenarios.size());
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx, rng);
    for (int k = 0; k < replication.count; ++k) {
      auto i = idx[static_cast<std::size_t>(k)];
      const auto& first = actors[i % actors.size()];
      const auto& second = actors[(i + 1) % actors.size()];
      plan.replication[scenarios[i]] = {first, second};
    }
  }

  // Enactments: (actor, scenario) blocks, each permuting the arms.
  std::vector<std::pair<std::string, std::string>> blocks;
  for (const auto& sc : scenarios) {
    if (auto it = plan.replication.find(sc); it != plan.replication.end()) {
      blocks.emplace_back(it->second.first, sc);
      blocks.emplace_back(it->second.second, sc);
    } else {
      blocks.emplace_back(plan.primary.at(sc), sc);
    }
  }
  for (const auto& [actor, sc] : blocks) {
    Rng rng(derive_seed(seed, fnv1a64(actor + '\x1f' + sc)));
    auto order = arms;
    shuffle(order, rng);
    for (std::size_t k = 0; k < order.size(); ++k)
      plan.assignments.push_back({actor, sc, order[k], static_cast<int>(k)});
  }
  return plan;
}

std::vector<std::string> check_plan(const StudyPlan& plan) {
  std::vector<std::string> v;
  std::map<std::pair<std::string, std::string>, std::vector<const Assignment*>> blocks;
  for (const auto& a : plan.assignments) blocks[{a.actor, a.scenario}].push_back(&a);
  std::set<Arm> arm_set(plan.arms.begin(), plan.arms.end());
  for (const auto& [key, list] : blocks) {
    std::string where = key.first + "/" + key.second;
    std::set<Arm> seen;
    std::set<int> orders;
    for (const auto* a : list) {
      if (!arm_set.count(a->arm)) v.push_back(where + ": unknown arm");
      if (!seen.insert(a->arm).second) v.push_back(where + ": arm repeated");
      orders.insert(a->order_index);
    }
    if (seen.size() != arm_set.size()) v.push_back(where + ": not every arm present");
    std::set<int> expect;
    for (int i = 0; i < static_cast<int>(plan.arms.size()); ++i) expect.insert(i);
    if (orders != expect || list.size() != plan.arms.size()) v.push_back(where + ": order indices are not a permutation");
  }
  std::map<std::string, std::set<std::string>> actors_of;
  for (const auto& [key, list] : blocks) actors_of[key.second].insert(key.first);
  for (const auto& [sc, actors] : actors_of) {
    bool replicated = plan.replication.count(sc) > 0;
    if (replicated) {
      const auto& [a, b] = plan.replication.at(sc);
      if (actors != std::set<std::string>{a, b} || a == b) v.push_back(sc + ": replication structure broken");
    } else if (actors.size() != 1) {
      v.push_back(sc + ": unreplicated scenario has " + std::to_string(actors.size()) + " actors");
    }
  }
  return v;
}

std::string encounter_id(const Assignment& a) {
  return a.scenario + "." + a.actor + "." + std::string(to_string(a.arm));
}

Json to_json(const StudyPlan& plan) {
  Json arms = Json::array();
  for (auto a : plan.arms) arms.push_back(to_string(a));
  Json list = Json::array();
  for (const auto& a : plan.assignments)
    list.push_back({{"actor", a.actor}, {"scenario", a.scenario}, {"arm", to_string(a.arm)},
                    {"order_index", a.order_index}, {"encounter_id", encounter_id(a)}});
  Json rep = Json::object();
  for (const auto& [sc, p] : plan.replication) rep[sc] = Json::array({p.first, p.second});
  return {{"seed", plan.seed}, {"arms", arms}, {"primary", plan.primary},
          {"replication", rep}, {"assignments", list}};
}

StudyPlan plan_from_json(const Json& j) {
  try {
    StudyPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("arms")) plan.arms.push_back(arm_from_string(a.get<std::string>()));
    plan.primary = j.value("primary", std::map<std::string, std::string>{});
    auto replication = j.value("replication", Json::object());
    for (const auto& [sc, p] : replication.items())
      plan.replication[sc] = {p.at(0).get<std::string>(), p.at(1).get<std::string>()};
    for (const auto& a : j.at("assignments"))
      plan.assignments.push_back({a.at("actor").get<std::string>(), a.at("scenario").get<std::string>(),
                                  arm_from_string(a.at("arm").get<std::string>()),
                                  a.at("order_index").get<int>()});
    return plan;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("study plan: ") + e.what());
  }
}

}  // namespace telesim::study
