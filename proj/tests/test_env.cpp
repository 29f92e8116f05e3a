#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "vortex/env.hpp"
#include "vortex/errors.hpp"

using namespace vortex;
using namespace vortex_test;

TEST_CASE("bundled armman spec loads with the documented parameters") {
  Environment env = load_environment_file(armman_path());
  CHECK(env.N == 800);
  CHECK(env.B == 400);
  CHECK(env.T == 50);
  CHECK(env.num_classes() == 8);
  for (const auto& t : env.types) {
    CHECK(t.base_reward[0] == doctest::Approx(0.2));
    CHECK(t.base_reward[1] == doctest::Approx(0.8));
    CHECK(t.count == 100);
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        CHECK(std::fabs(t.kernel.row_sum(s, a) - 1.0) < 1e-12);
  }
  CHECK(env.arm_type_of.size() == 800);
  CHECK(env.class_of_arm(0) == 0);
  CHECK(env.class_of_arm(799) == 7);
}

TEST_CASE("bundled conservation spec loads with the documented parameters") {
  Environment env = load_environment_file(conservation_path());
  CHECK(env.N == 400);
  CHECK(env.B == 100);
  CHECK(env.T == 52);
  CHECK(env.num_classes() == 4);
  for (const auto& t : env.types) {
    CHECK(t.base_reward[0] == doctest::Approx(0.1));
    CHECK(t.base_reward[1] == doctest::Approx(0.9));
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        CHECK(std::fabs(t.kernel.row_sum(s, a) - 1.0) < 1e-12);
  }
}

TEST_CASE("a transition row off by more than the tolerance names its coordinates") {
  TinyEnvSpec spec;
  spec.p1 = {{0.1, 0.65, 0.5, 0.95}, {0.1, 0.75, 0.4, 0.95}};
  std::string text = tiny_env_json(spec);
  // corrupt type 1's s0_a1 row: [0.25, 0.75] -> [0.15, 0.75]
  auto pos = text.find("\"s0_a1\":[0.25,0.75]");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("\"s0_a1\":[0.25,0.75]").size(),
               "\"s0_a1\":[0.15,0.75]");
  try {
    load_environment(text);
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    std::string what = e.what();
    CHECK(what.find("0.9") != std::string::npos);
    CHECK(what.find("type 1") != std::string::npos);
    CHECK(what.find("state 0") != std::string::npos);
    CHECK(what.find("action 1") != std::string::npos);
  }
}

TEST_CASE("loader rejects budgets above the population") {
  TinyEnvSpec spec;
  spec.p1 = {deterministic_uplift(), deterministic_uplift()};
  std::string text = tiny_env_json(spec);
  auto pos = text.find("\"B\":1");
  text.replace(pos, 5, "\"B\":9");
  CHECK_THROWS_AS(load_environment(text), SpecError);
}

TEST_CASE("initial states default to 0 and honor per-type overrides") {
  TinyEnvSpec spec;
  spec.p1 = {deterministic_uplift(), deterministic_uplift()};
  Environment env = load_environment(tiny_env_json(spec));
  PopulationState pop = initial_population(env);
  CHECK(pop.states == std::vector<std::uint8_t>{0, 0});

  spec.initial_state = 1;
  Environment env1 = load_environment(tiny_env_json(spec));
  CHECK(initial_population(env1).states == std::vector<std::uint8_t>{1, 1});
}

TEST_CASE("a deterministic kernel moves an acted arm to state 1") {
  TinyEnvSpec spec;
  spec.p1 = {deterministic_uplift(), deterministic_uplift()};
  Environment env = load_environment(tiny_env_json(spec));
  PopulationState pop = initial_population(env);
  auto [next, rewards] = step(env, pop, {0}, RandomStream{7});
  CHECK(next.states[0] == 1);
  CHECK(next.states[1] == 0);
  CHECK(next.round == 1);
}

TEST_CASE("rewards read the pre-transition state") {
  TinyEnvSpec spec;
  spec.p1 = {deterministic_uplift(), deterministic_uplift()};
  std::string text = tiny_env_json(spec);
  // second type starts engaged
  auto pos = text.rfind("\"initial_state\":0");
  text.replace(pos, std::string("\"initial_state\":0").size(), "\"initial_state\":1");
  Environment env = load_environment(text);
  PopulationState pop = initial_population(env);
  REQUIRE(pop.states == std::vector<std::uint8_t>{0, 1});
  auto [next, rewards] = step(env, pop, {0}, RandomStream{7});
  CHECK(rewards == std::vector<double>{0.2, 0.8});
}

TEST_CASE("step validates the action set") {
  TinyEnvSpec spec;
  spec.p1 = {deterministic_uplift(), deterministic_uplift()};
  Environment env = load_environment(tiny_env_json(spec));
  PopulationState pop = initial_population(env);
  CHECK_THROWS_AS(step(env, pop, {0, 1}, RandomStream{1}), Error);  // B=1
  CHECK_THROWS_AS(step(env, pop, {5}, RandomStream{1}), Error);
}

TEST_CASE("acted transition frequencies match the kernel within 0.01") {
  Environment env = load_environment_file(armman_path());
  // paper type 2 is id 1: calling from state 0 succeeds with 0.750
  const ArmType& t = env.types[1];
  RandomStream stream{12345};
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = stream.uniform(static_cast<std::uint64_t>(i), 0);
    if (u < t.kernel.p[0][1][1]) ++hits;
  }
  CHECK(std::fabs(static_cast<double>(hits) / n - 0.750) < 0.01);
}

TEST_CASE("rollout is deterministic in the seed and sensitive to it") {
  TinyEnvSpec spec;
  spec.num_types = 2;
  spec.arms_per_type = 2;
  spec.B = 2;
  spec.T = 6;
  spec.p1 = {{0.3, 0.7, 0.4, 0.9}, {0.2, 0.6, 0.5, 0.8}};
  Environment env = load_environment(tiny_env_json(spec));

  Policy first_two = [](const PopulationState&) { return std::vector<int>{0, 1}; };
  Trajectory a = rollout(env, first_two, env.T, RandomStream{42});
  Trajectory b = rollout(env, first_two, env.T, RandomStream{42});
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    CHECK(a.records[t].actions == b.records[t].actions);
    CHECK(a.records[t].states_before == b.records[t].states_before);
    CHECK(a.records[t].base_rewards == b.records[t].base_rewards);
  }

  Trajectory c = rollout(env, first_two, env.T, RandomStream{43});
  bool any_diff = false;
  for (std::size_t t = 0; t < a.records.size(); ++t)
    if (a.records[t].states_before != c.records[t].states_before) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("rollout records one entry per round with the requested actions") {
  TinyEnvSpec spec;
  spec.T = 1;
  spec.p1 = {deterministic_uplift(), deterministic_uplift()};
  Environment env = load_environment(tiny_env_json(spec));
  Trajectory traj = rollout(
      env, [](const PopulationState&) { return std::vector<int>{0}; }, 1,
      RandomStream{0});
  REQUIRE(traj.records.size() == 1);
  CHECK(traj.records[0].actions == std::vector<int>{0});
  CHECK(traj.total_pulls() == 1);
}
