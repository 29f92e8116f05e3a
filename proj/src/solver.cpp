#include "vortex/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vortex/errors.hpp"

namespace vortex {

namespace {

void check_shaping(const Environment& env, const ShapingReward& shaping) {
  if (shaping.size() != env.num_classes())
    throw Error("shaping defines " + std::to_string(shaping.size()) +
                " classes; environment has " + std::to_string(env.num_classes()));
  for (double v : shaping.bonus)
    if (!std::isfinite(v)) throw Error("non-finite shaping value");
}

// Passive-continuation value: future rounds assume a = 0.
std::array<double, 2> passive_values(const ArmType& t, int h,
                                     const std::array<double, 2>& next) {
  std::array<double, 2> v{};
  for (int s = 0; s < 2; ++s)
    v[s] = t.base_reward[s] + t.kernel.p[s][0][0] * next[0] +
           t.kernel.p[s][0][1] * next[1];
  (void)h;
  return v;
}

// Q(act) - Q(passive) in drift form: the base reward cancels and rows sum
// to one, so the gap reduces to (p_act - p_passive)(up | s) times the
// continuation spread, plus the bonus. Mathematically equal gaps come out
// bitwise equal this way, which keeps tie-breaks stable under uniform
// shaping shifts.
double advantage(const ArmType& t, double bonus, int s,
                 const std::array<double, 2>& next) {
  double drift = t.kernel.p[s][1][1] - t.kernel.p[s][0][1];
  return drift * (next[1] - next[0]) + bonus;
}

// Q(act) - Q(passive) at (s, h) when the passive reward carries subsidy m
// and continuation takes the better action under the same subsidy.
double subsidized_gap(const ArmType& t, double bonus, int s, int h, double m) {
  std::array<double, 2> v{0.0, 0.0};
  double gap = 0.0;
  for (int hh = 1; hh <= h; ++hh) {
    std::array<double, 2> nv{};
    for (int ss = 0; ss < 2; ++ss) {
      double q0 = t.base_reward[ss] + m + t.kernel.p[ss][0][0] * v[0] +
                  t.kernel.p[ss][0][1] * v[1];
      double q1 = t.base_reward[ss] + bonus + t.kernel.p[ss][1][0] * v[0] +
                  t.kernel.p[ss][1][1] * v[1];
      nv[ss] = std::max(q0, q1);
      if (hh == h && ss == s) gap = q1 - q0;
    }
    v = nv;
  }
  return gap;
}

double whittle_index(const ArmType& t, double bonus, int s, int h) {
  double reach = std::max({std::fabs(t.base_reward[0]), std::fabs(t.base_reward[1]),
                           1.0}) + std::fabs(bonus);
  double lo = -(reach * (h + 1));
  double hi = reach * (h + 1);
  for (int it = 0; it < 64; ++it) {
    double mid = 0.5 * (lo + hi);
    if (subsidized_gap(t, bonus, s, h, mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ShapedRewardTable ShapedRewardTable::build(const Environment& env,
                                           const ShapingReward& shaping) {
  check_shaping(env, shaping);
  ShapedRewardTable table;
  table.r.resize(env.types.size());
  for (std::size_t z = 0; z < env.types.size(); ++z)
    for (int s = 0; s < 2; ++s) {
      table.r[z][s][0] = env.types[z].base_reward[s];
      table.r[z][s][1] = env.types[z].base_reward[s] + shaping[static_cast<int>(z)];
    }
  return table;
}

IndexTable compute_indices(const Environment& env, const ShapingReward& shaping,
                           int horizon, IndexKind kind) {
  check_shaping(env, shaping);
  if (horizon < 1) throw Error("index horizon must be >= 1");

  IndexTable table;
  table.num_types = env.num_classes();
  table.horizon = horizon;
  table.v.assign(static_cast<std::size_t>(table.num_types) * 2 * (horizon + 1), 0.0);

  for (int z = 0; z < table.num_types; ++z) {
    const ArmType& t = env.types[z];
    double bonus = shaping[z];
    if (kind == IndexKind::kAdvantage) {
      std::array<double, 2> v{0.0, 0.0};
      for (int h = 1; h <= horizon; ++h) {
        for (int s = 0; s < 2; ++s) table.at(z, s, h) = advantage(t, bonus, s, v);
        v = passive_values(t, h, v);
      }
    } else {
      for (int h = 1; h <= horizon; ++h)
        for (int s = 0; s < 2; ++s) table.at(z, s, h) = whittle_index(t, bonus, s, h);
    }
  }
  return table;
}

ActionSelection select_actions(const IndexTable& indices, const Environment& env,
                               const PopulationState& pop, int budget,
                               bool act_only_positive) {
  int h = indices.horizon - pop.round;
  if (h < 1) throw Error("no remaining horizon at round " + std::to_string(pop.round));
  if (static_cast<int>(pop.states.size()) != env.N)
    throw Error("population size does not match environment");

  std::vector<int> order(env.N);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> prio(env.N);
  for (int i = 0; i < env.N; ++i)
    prio[i] = indices.at(env.class_of_arm(i), pop.states[i], h);

  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (prio[a] != prio[b]) return prio[a] > prio[b];
    return a < b;  // deterministic tie-break
  });

  ActionSelection sel;
  sel.round = pop.round;
  int take = std::min(budget, env.N);
  for (int i = 0; i < take; ++i) {
    if (act_only_positive && prio[order[i]] <= 0.0) break;
    sel.acted.push_back(order[i]);
  }
  std::sort(sel.acted.begin(), sel.acted.end());
  return sel;
}

Policy solve_policy(const Environment& env, const ShapingReward& shaping,
                    SolverOptions opts) {
  IndexTable table = compute_indices(env, shaping, env.T, opts.index);
  int budget = env.B;
  bool positive_only = opts.act_only_positive;
  return [table = std::move(table), &env, budget,
          positive_only](const PopulationState& pop) {
    return select_actions(table, env, pop, budget, positive_only).acted;
  };
}

SubsetSpace SubsetSpace::make(int num_arms, int budget, bool exactly_b) {
  SubsetSpace space;
  int take = std::min(budget, num_arms);
  for (int mask = 0; mask < (1 << num_arms); ++mask) {
    int sz = __builtin_popcount(static_cast<unsigned>(mask));
    bool ok = exactly_b ? sz == take : sz <= take;
    if (!ok) continue;
    std::vector<int> set;
    for (int i = 0; i < num_arms; ++i)
      if (mask & (1 << i)) set.push_back(i);
    space.sets.push_back(set);
  }
  std::sort(space.sets.begin(), space.sets.end());
  for (std::size_t i = 0; i < space.sets.size(); ++i)
    space.id_of[space.sets[i]] = static_cast<int>(i);
  return space;
}

int encode_joint_state(const std::vector<std::uint8_t>& states) {
  int code = 0;
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i]) code |= 1 << i;
  return code;
}

std::vector<std::uint8_t> decode_joint_state(int code, int num_arms) {
  std::vector<std::uint8_t> states(num_arms);
  for (int i = 0; i < num_arms; ++i)
    states[i] = static_cast<std::uint8_t>((code >> i) & 1);
  return states;
}

namespace {

// P(next joint state | joint state, action subset), enumerated recursively
// over arms as a dense vector of size 2^N.
void joint_transition(const Environment& env, int js,
                      const std::vector<std::uint8_t>& acted,
                      std::vector<double>& out) {
  std::fill(out.begin(), out.end(), 0.0);
  int n = env.N;
  // iterate all next states; probability is a product over arms
  for (int njs = 0; njs < (1 << n); ++njs) {
    double p = 1.0;
    for (int i = 0; i < n && p > 0.0; ++i) {
      int s = (js >> i) & 1;
      int s2 = (njs >> i) & 1;
      p *= env.type_of_arm(i).kernel.p[s][acted[i]][s2];
    }
    out[njs] = p;
  }
}

double immediate_reward(const Environment& env, const ShapedRewardTable& table,
                        int js, const std::vector<int>& set,
                        std::vector<std::uint8_t>& acted_buf) {
  std::fill(acted_buf.begin(), acted_buf.end(), 0);
  for (int arm : set) acted_buf[arm] = 1;
  double r = 0.0;
  for (int i = 0; i < env.N; ++i)
    r += table.at(env.class_of_arm(i), (js >> i) & 1, acted_buf[i]);
  return r;
}

}  // namespace

BruteForceResult brute_force_optimal(const Environment& env,
                                     const ShapingReward& shaping,
                                     bool exactly_b) {
  if (env.N > 4 || env.B > 2 || env.T > 4)
    throw Error("instance exceeds brute-force bounds (N<=4, B<=2, T<=4)");
  check_shaping(env, shaping);

  BruteForceResult res;
  res.space = SubsetSpace::make(env.N, env.B, exactly_b);
  ShapedRewardTable table = ShapedRewardTable::build(env, shaping);

  int num_states = 1 << env.N;
  std::vector<double> value(num_states, 0.0), next_value(num_states, 0.0);
  std::vector<double> trans(num_states);
  std::vector<std::uint8_t> acted(env.N);
  res.best.assign(env.T, std::vector<int>(num_states, 0));

  for (int t = env.T - 1; t >= 0; --t) {
    next_value = value;
    for (int js = 0; js < num_states; ++js) {
      double best_v = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (std::size_t a = 0; a < res.space.sets.size(); ++a) {
        const auto& set = res.space.sets[a];
        double v = immediate_reward(env, table, js, set, acted);
        joint_transition(env, js, acted, trans);  // acted still holds the set
        for (int njs = 0; njs < num_states; ++njs)
          if (trans[njs] > 0.0) v += trans[njs] * next_value[njs];
        if (v > best_v) {
          best_v = v;
          best_a = static_cast<int>(a);
        }
      }
      value[js] = best_v;
      res.best[t][js] = best_a;
    }
  }

  res.value = value[encode_joint_state(initial_population(env).states)];
  return res;
}

ExactEval exact_policy_value(const Environment& env, const ShapingReward& shaping,
                             const SubsetSpace& space, const JointPolicy& policy) {
  if (env.N > 12) throw Error("exact evaluation limited to N <= 12");
  check_shaping(env, shaping);
  ShapedRewardTable table = ShapedRewardTable::build(env, shaping);

  int num_states = 1 << env.N;
  std::vector<double> dist(num_states, 0.0), next_dist(num_states);
  std::vector<double> trans(num_states);
  std::vector<std::uint8_t> acted(env.N);
  dist[encode_joint_state(initial_population(env).states)] = 1.0;

  ExactEval eval;
  eval.expected_pulls.assign(env.num_classes(), 0.0);

  for (int t = 0; t < env.T; ++t) {
    std::fill(next_dist.begin(), next_dist.end(), 0.0);
    for (int js = 0; js < num_states; ++js) {
      double p = dist[js];
      if (p <= 0.0) continue;
      const auto& set = space.sets[policy(js, t)];
      eval.shaped_return += p * immediate_reward(env, table, js, set, acted);
      for (int i = 0; i < env.N; ++i)
        eval.base_return += p * env.type_of_arm(i).base_reward[(js >> i) & 1];
      for (int arm : set)
        eval.expected_pulls[env.class_of_arm(arm)] += p;
      joint_transition(env, js, acted, trans);
      for (int njs = 0; njs < num_states; ++njs)
        if (trans[njs] > 0.0) next_dist[njs] += p * trans[njs];
    }
    dist.swap(next_dist);
  }
  return eval;
}

JointPolicy index_joint_policy(const Environment& env, const IndexTable& indices,
                               const SubsetSpace& space, bool act_only_positive) {
  return [&env, &indices, &space, act_only_positive](int js, int t) {
    PopulationState pop;
    pop.states = decode_joint_state(js, env.N);
    pop.round = t;
    ActionSelection sel =
        select_actions(indices, env, pop, env.B, act_only_positive);
    auto it = space.id_of.find(sel.acted);
    if (it == space.id_of.end())
      throw Error("index policy chose a set outside the subset space");
    return it->second;
  };
}

}  // namespace vortex
