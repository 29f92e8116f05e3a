#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vortex/rng.hpp"

namespace vortex {

// One combination of feature levels, e.g. income=Low, education=High, age=Young.
struct FeatureClass {
  int id = 0;
  std::vector<std::pair<std::string, std::string>> labels;  // (dimension, level)

  std::string describe() const;
};

// p[s][a][s'] for a 2-state controlled chain. Rows must sum to 1.
struct TransitionKernel {
  std::array<std::array<std::array<double, 2>, 2>, 2> p{};

  double row_sum(int s, int a) const { return p[s][a][0] + p[s][a][1]; }
};

struct ArmType {
  FeatureClass feature_class;
  TransitionKernel kernel;
  std::array<double, 2> base_reward{};
  int count = 0;
  int initial_state = 0;
};

struct FeatureDim {
  std::string name;
  std::vector<std::string> levels;
};

struct Environment {
  std::string name;
  int N = 0;  // population size
  int B = 0;  // per-round action budget
  int T = 0;  // horizon in rounds
  std::vector<FeatureDim> features;
  std::vector<ArmType> types;
  std::vector<int> arm_type_of;  // arm index -> type index

  int num_classes() const { return static_cast<int>(types.size()); }
  int class_of_arm(int arm) const { return arm_type_of[arm]; }
  const ArmType& type_of_arm(int arm) const { return types[arm_type_of[arm]]; }
};

struct PopulationState {
  std::vector<std::uint8_t> states;  // length N, entries in {0,1}
  int round = 0;                     // 0..T
};

struct Trajectory {
  struct Record {
    std::vector<int> actions;                 // sorted acted arm ids
    std::vector<std::uint8_t> states_before;  // pre-transition states
    std::vector<double> base_rewards;         // realized base reward per arm
  };
  std::vector<Record> records;

  int total_pulls() const;
};

// Closed-loop per-round action selector.
using Policy = std::function<std::vector<int>(const PopulationState&)>;

// Parses and validates an environment spec document. Fails (SpecError)
// rather than renormalizing: any transition row off by more than 1e-9 is
// reported with its (type, state, action) coordinates.
Environment load_environment(const std::string& spec_text);
Environment load_environment_file(const std::string& path);

PopulationState initial_population(const Environment& env);

// One round: every arm samples its kernel row (state, acted?); the reward
// vector reads the pre-transition state. Returns the advanced population
// and per-arm realized base rewards.
std::pair<PopulationState, std::vector<double>> step(
    const Environment& env, const PopulationState& pop,
    const std::vector<int>& actions, const RandomStream& stream);

// Runs `rounds` steps from the initial population. Deterministic in
// (env, policy, stream seed).
Trajectory rollout(const Environment& env, const Policy& policy, int rounds,
                   const RandomStream& stream);

}  // namespace vortex
