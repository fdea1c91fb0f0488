#pragma once

// Frozen calibration constants shared by the unit and acceptance tests.

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gwising/pruned_law.hpp"

namespace gwising::fixtures {

struct FrozenLaw {
  std::string name;
  OffspringPmf pmf;
  double q;
  PhaseConstants constants;
};

inline std::vector<FrozenLaw> load_phase_constants() {
  std::ifstream in(GWISING_FIXTURE_DIR "/phase_constants.json");
  if (!in) throw std::runtime_error("missing phase_constants.json fixture");
  auto doc = nlohmann::json::parse(in);
  std::vector<FrozenLaw> out;
  for (const auto& e : doc.at("laws")) {
    PhaseConstants c{e.at("c_generating"), e.at("c_mu"), e.at("c4"), e.at("c5"),
                     e.at("c6"),           e.at("c7"),   e.at("c8"), e.at("v_bound")};
    out.push_back({e.at("name"), OffspringPmf::from_json(e.at("pmf")), e.at("q"), c});
  }
  return out;
}

}  // namespace gwising::fixtures
