#pragma once

#include <functional>
#include <map>
#include <vector>

#include "vortex/env.hpp"
#include "vortex/shaping.hpp"

namespace vortex {

// base_reward(s) + a * shaping(class of type); shaping touches acted arms only.
struct ShapedRewardTable {
  std::vector<std::array<std::array<double, 2>, 2>> r;  // [type][state][action]

  static ShapedRewardTable build(const Environment& env,
                                 const ShapingReward& shaping);
  double at(int type, int s, int a) const { return r[type][s][a]; }
};

// Priority index per (type, state, remaining horizon h), h in 1..T.
struct IndexTable {
  int num_types = 0;
  int horizon = 0;
  std::vector<double> v;

  double at(int type, int s, int h) const {
    return v[(static_cast<std::size_t>(type) * 2 + s) * (horizon + 1) + h];
  }
  double& at(int type, int s, int h) {
    return v[(static_cast<std::size_t>(type) * 2 + s) * (horizon + 1) + h];
  }
};

enum class IndexKind {
  kAdvantage,  // Q(s, act) - Q(s, passive) under passive-continuation DP
  kWhittle,    // subsidy making act/passive indifferent, by binary search
};

struct SolverOptions {
  IndexKind index = IndexKind::kAdvantage;
  bool act_only_positive = false;  // <=B semantics: skip non-positive indices
};

// Per-type finite-horizon DP over shaped rewards.
IndexTable compute_indices(const Environment& env, const ShapingReward& shaping,
                           int horizon, IndexKind kind = IndexKind::kAdvantage);

struct ActionSelection {
  std::vector<int> acted;  // sorted arm ids
  int round = 0;
};

// Acts on the min(B,N) arms with highest index at their current
// (state, remaining horizon); ties broken by lowest arm index.
ActionSelection select_actions(const IndexTable& indices, const Environment& env,
                               const PopulationState& pop, int budget,
                               bool act_only_positive = false);

// Closed-loop index policy for the full environment horizon. The
// environment must outlive the returned policy.
Policy solve_policy(const Environment& env, const ShapingReward& shaping,
                    SolverOptions opts = {});

// ---- exact machinery for tiny instances (joint-state DP) ----

struct SubsetSpace {
  std::vector<std::vector<int>> sets;       // lexicographic
  std::map<std::vector<int>, int> id_of;

  static SubsetSpace make(int num_arms, int budget, bool exactly_b = true);
};

struct BruteForceResult {
  double value = 0.0;                  // optimal expected cumulative shaped reward
  SubsetSpace space;
  std::vector<std::vector<int>> best;  // [t][joint state] -> subset id
};

// Exact DP over the 2^N joint state space enumerating feasible action
// subsets per round. Guarded to N <= 4, B <= 2, T <= 4.
BruteForceResult brute_force_optimal(const Environment& env,
                                     const ShapingReward& shaping,
                                     bool exactly_b = true);

// Deterministic joint-state policy: (joint state, round) -> subset id.
using JointPolicy = std::function<int(int, int)>;

struct ExactEval {
  double shaped_return = 0.0;
  double base_return = 0.0;
  std::vector<double> expected_pulls;  // per class
};

// Exact expected returns and pull counts of a joint-state policy.
ExactEval exact_policy_value(const Environment& env, const ShapingReward& shaping,
                             const SubsetSpace& space, const JointPolicy& policy);

// Adapts the index policy to the joint-state view for exact evaluation.
JointPolicy index_joint_policy(const Environment& env, const IndexTable& indices,
                               const SubsetSpace& space,
                               bool act_only_positive = false);

int encode_joint_state(const std::vector<std::uint8_t>& states);
std::vector<std::uint8_t> decode_joint_state(int code, int num_arms);

}  // namespace vortex
