// Prints the frozen phase-transition constants used by the acceptance suite.
#include <cmath>
#include <iostream>

#include <json.hpp>

#include "gwising/pruned_law.hpp"

int main() {
  using namespace gwising;
  const double p = std::ldexp(1.0, -15);
  const int n = 30;
  nlohmann::json out;
  out["schema"] = 1;
  out["p"] = p;
  out["n"] = n;
  out["margin"] = kCalibrationMargin;
  out["laws"] = nlohmann::json::array();
  for (const auto& [name, pmf] :
       {std::pair{"dirac2", OffspringPmf::dirac(2)},
        std::pair{"one_or_three", OffspringPmf({{1, 0.5}, {3, 0.5}})}}) {
    for (double q : {1.5, 2.0}) {
      auto c = calibrate_phase_constants(pmf, q, p, n, kCalibrationMargin);
      out["laws"].push_back({{"name", name},
                             {"pmf", pmf.to_json()},
                             {"q", q},
                             {"c_generating", c.c_generating},
                             {"c_mu", c.c_mu},
                             {"c4", c.c4},
                             {"c5", c.c5},
                             {"c6", c.c6},
                             {"c7", c.c7},
                             {"c8", c.c8},
                             {"v_bound", c.v_bound}});
    }
  }
  std::cout << out.dump(2) << "\n";
}
