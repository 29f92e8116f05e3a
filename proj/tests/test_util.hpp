#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "vortex/env.hpp"

namespace vortex_test {

// Minimal spec text: one feature dimension "group", one arm per type, all
// types sharing base rewards and a kernel given as four rows
// {s0_a0, s0_a1, s1_a0, s1_a1} of P(s'=1).
struct TinyEnvSpec {
  int num_types = 2;
  int arms_per_type = 1;
  int B = 1;
  int T = 2;
  double base0 = 0.2;
  double base1 = 0.8;
  // P(s'=1) per row, one entry per type
  std::vector<std::array<double, 4>> p1;  // [type] -> {s0a0, s0a1, s1a0, s1a1}
  int initial_state = 0;
};

inline std::string tiny_env_json(const TinyEnvSpec& spec) {
  std::ostringstream out;
  int n = spec.num_types * spec.arms_per_type;
  out << "{\"name\":\"tiny\",\"N\":" << n << ",\"B\":" << spec.B
      << ",\"T\":" << spec.T << ",\"features\":[{\"name\":\"group\",\"levels\":[";
  for (int z = 0; z < spec.num_types; ++z)
    out << (z ? "," : "") << "\"g" << z << "\"";
  out << "]}],\"types\":[";
  for (int z = 0; z < spec.num_types; ++z) {
    const auto& p = spec.p1.at(z);
    if (z) out << ",";
    out << "{\"id\":" << z << ",\"features\":{\"group\":\"g" << z
        << "\"},\"count\":" << spec.arms_per_type
        << ",\"base_reward\":{\"0\":" << spec.base0 << ",\"1\":" << spec.base1
        << "},\"transitions\":{"
        << "\"s0_a0\":[" << 1 - p[0] << "," << p[0] << "],"
        << "\"s0_a1\":[" << 1 - p[1] << "," << p[1] << "],"
        << "\"s1_a0\":[" << 1 - p[2] << "," << p[2] << "],"
        << "\"s1_a1\":[" << 1 - p[3] << "," << p[3] << "]},"
        << "\"initial_state\":" << spec.initial_state << "}";
  }
  out << "]}";
  return out.str();
}

// Deterministic chain: acting sends an arm to state 1, resting to state 0.
inline std::array<double, 4> deterministic_uplift() { return {0.0, 1.0, 0.0, 1.0}; }

inline std::string armman_path() {
  return std::string(VORTEX_DATA_DIR) + "/armman.json";
}

inline std::string conservation_path() {
  return std::string(VORTEX_DATA_DIR) + "/conservation.json";
}

}  // namespace vortex_test
