#include "vortex/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vortex/errors.hpp"

namespace vortex {

using nlohmann::json;

std::string FeatureClass::describe() const {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += labels[i].first + "=" + labels[i].second;
  }
  return out;
}

int Trajectory::total_pulls() const {
  int n = 0;
  for (const auto& rec : records) n += static_cast<int>(rec.actions.size());
  return n;
}

namespace {

constexpr double kRowSumTol = 1e-9;

const char* kRowKeys[2][2] = {{"s0_a0", "s0_a1"}, {"s1_a0", "s1_a1"}};

double require_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SpecError("expected a number at " + where);
  return j.get<double>();
}

TransitionKernel parse_kernel(const json& jt, int type_id) {
  TransitionKernel k;
  if (!jt.contains("transitions"))
    throw SpecError("type " + std::to_string(type_id) + " has no transitions");
  const json& tr = jt.at("transitions");
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      const char* key = kRowKeys[s][a];
      if (!tr.contains(key))
        throw SpecError("type " + std::to_string(type_id) +
                        " missing transition row " + key);
      const json& row = tr.at(key);
      if (!row.is_array() || row.size() != 2)
        throw SpecError("transition row " + std::string(key) + " of type " +
                        std::to_string(type_id) + " must be [p(s'=0), p(s'=1)]");
      for (int s2 = 0; s2 < 2; ++s2) {
        double p = require_number(row[s2], std::string(key));
        if (!(p >= 0.0 && p <= 1.0))
          throw SpecError("probability out of [0,1] in row " + std::string(key) +
                          " of type " + std::to_string(type_id));
        k.p[s][a][s2] = p;
      }
      double sum = k.row_sum(s, a);
      if (std::fabs(sum - 1.0) > kRowSumTol) {
        std::ostringstream oss;
        oss << "transition row sums to " << sum << " (type " << type_id
            << ", state " << s << ", action " << a << ")";
        throw SpecError(oss.str());
      }
    }
  }
  return k;
}

}  // namespace

Environment load_environment(const std::string& spec_text) {
  json doc;
  try {
    doc = json::parse(spec_text);
  } catch (const json::parse_error& e) {
    throw SpecError(std::string("environment spec is not valid JSON: ") + e.what());
  }

  Environment env;
  try {
    env.name = doc.value("name", "unnamed");
    env.N = doc.at("N").get<int>();
    env.B = doc.at("B").get<int>();
    env.T = doc.at("T").get<int>();
  } catch (const json::exception& e) {
    throw SpecError(std::string("environment spec missing N/B/T: ") + e.what());
  }
  if (env.N < 1) throw SpecError("N must be >= 1");
  if (env.B < 1 || env.B > env.N)
    throw SpecError("budget B must satisfy 1 <= B <= N (got B=" +
                    std::to_string(env.B) + ", N=" + std::to_string(env.N) + ")");
  if (env.T < 1) throw SpecError("horizon T must be >= 1");

  if (!doc.contains("features") || !doc["features"].is_array() ||
      doc["features"].empty())
    throw SpecError("environment spec needs a non-empty features array");
  for (const auto& jf : doc["features"]) {
    FeatureDim dim;
    dim.name = jf.at("name").get<std::string>();
    for (const auto& lvl : jf.at("levels")) dim.levels.push_back(lvl.get<std::string>());
    if (dim.levels.empty())
      throw SpecError("feature " + dim.name + " has no levels");
    env.features.push_back(std::move(dim));
  }

  if (!doc.contains("types") || !doc["types"].is_array() || doc["types"].empty())
    throw SpecError("environment spec needs a non-empty types array");

  int next_id = 0;
  int total = 0;
  std::vector<std::string> seen_labels;
  for (const auto& jt : doc["types"]) {
    ArmType t;
    int id = jt.at("id").get<int>();
    if (id != next_id)
      throw SpecError("type ids must be contiguous from 0 (expected " +
                      std::to_string(next_id) + ", got " + std::to_string(id) + ")");
    t.feature_class.id = id;

    const json& jfeat = jt.at("features");
    for (const auto& dim : env.features) {
      if (!jfeat.contains(dim.name))
        throw SpecError("type " + std::to_string(id) + " missing feature " + dim.name);
      std::string level = jfeat.at(dim.name).get<std::string>();
      if (std::find(dim.levels.begin(), dim.levels.end(), level) == dim.levels.end())
        throw SpecError("type " + std::to_string(id) + " has unknown level '" +
                        level + "' for feature " + dim.name);
      t.feature_class.labels.emplace_back(dim.name, level);
    }
    std::string label = t.feature_class.describe();
    if (std::find(seen_labels.begin(), seen_labels.end(), label) != seen_labels.end())
      throw SpecError("duplicate feature combination: " + label);
    seen_labels.push_back(label);

    t.count = jt.at("count").get<int>();
    if (t.count < 1) throw SpecError("type " + std::to_string(id) + " count must be >= 1");

    const json& jr = jt.at("base_reward");
    for (int s = 0; s < 2; ++s) {
      std::string key = std::to_string(s);
      if (!jr.contains(key))
        throw SpecError("type " + std::to_string(id) + " base_reward missing state " + key);
      double r = require_number(jr.at(key), "base_reward of type " + std::to_string(id));
      if (!std::isfinite(r))
        throw SpecError("non-finite base reward for type " + std::to_string(id));
      t.base_reward[s] = r;
    }

    t.kernel = parse_kernel(jt, id);

    t.initial_state = jt.value("initial_state", 0);
    if (t.initial_state != 0 && t.initial_state != 1)
      throw SpecError("initial_state of type " + std::to_string(id) + " must be 0 or 1");

    total += t.count;
    env.types.push_back(std::move(t));
    ++next_id;
  }
  if (total != env.N)
    throw SpecError("type counts sum to " + std::to_string(total) +
                    " but N=" + std::to_string(env.N));

  env.arm_type_of.reserve(env.N);
  for (std::size_t z = 0; z < env.types.size(); ++z)
    env.arm_type_of.insert(env.arm_type_of.end(), env.types[z].count, static_cast<int>(z));

  return env;
}

Environment load_environment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open environment spec: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_environment(ss.str());
}

PopulationState initial_population(const Environment& env) {
  PopulationState pop;
  pop.states.reserve(env.N);
  for (int i = 0; i < env.N; ++i)
    pop.states.push_back(static_cast<std::uint8_t>(env.type_of_arm(i).initial_state));
  pop.round = 0;
  return pop;
}

std::pair<PopulationState, std::vector<double>> step(
    const Environment& env, const PopulationState& pop,
    const std::vector<int>& actions, const RandomStream& stream) {
  if (static_cast<int>(pop.states.size()) != env.N)
    throw Error("population size does not match environment");
  if (pop.round >= env.T) throw Error("round " + std::to_string(pop.round) +
                                      " is past the horizon T=" + std::to_string(env.T));
  if (static_cast<int>(actions.size()) > env.B)
    throw Error("action set of size " + std::to_string(actions.size()) +
                " exceeds budget B=" + std::to_string(env.B));

  std::vector<std::uint8_t> acted(env.N, 0);
  for (int arm : actions) {
    if (arm < 0 || arm >= env.N)
      throw Error("invalid arm index " + std::to_string(arm));
    if (acted[arm]) throw Error("duplicate arm index " + std::to_string(arm));
    acted[arm] = 1;
  }

  PopulationState next;
  next.states.resize(env.N);
  next.round = pop.round + 1;
  std::vector<double> rewards(env.N);
  for (int i = 0; i < env.N; ++i) {
    const ArmType& t = env.type_of_arm(i);
    int s = pop.states[i];
    int a = acted[i];
    rewards[i] = t.base_reward[s];
    double p1 = t.kernel.p[s][a][1];
    double u = stream.uniform(static_cast<std::uint64_t>(i),
                              static_cast<std::uint64_t>(pop.round));
    next.states[i] = u < p1 ? 1 : 0;
  }
  return {std::move(next), std::move(rewards)};
}

Trajectory rollout(const Environment& env, const Policy& policy, int rounds,
                   const RandomStream& stream) {
  if (rounds < 1 || rounds > env.T)
    throw Error("rollout length must be in [1, T]");
  Trajectory traj;
  traj.records.reserve(rounds);
  PopulationState pop = initial_population(env);
  for (int t = 0; t < rounds; ++t) {
    std::vector<int> actions = policy(pop);
    std::sort(actions.begin(), actions.end());
    Trajectory::Record rec;
    rec.actions = actions;
    rec.states_before = pop.states;
    auto [next, rewards] = step(env, pop, actions, stream);
    rec.base_rewards = std::move(rewards);
    traj.records.push_back(std::move(rec));
    pop = std::move(next);
  }
  return traj;
}

}  // namespace vortex
