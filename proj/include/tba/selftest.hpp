#pragma once

// Quick property suites against the brute-force references, for `tba selftest`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tba/assignment.hpp"
#include "tba/confidence_model.hpp"
#include "tba/hungarian.hpp"
#include "tba/rng.hpp"
#include "tba/testing/generators.hpp"
#include "tba/testing/oracles.hpp"

namespace tba {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline std::vector<SelftestResult> run_selftest(std::uint64_t seed = 0) {
  std::vector<SelftestResult> out;
  const Rng root(seed);

  {
    Rng rng = root.derive("hungarian");
    int bad = 0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      const auto rows = 1 + rng.uniform_int(6);
      const auto cols = 1 + rng.uniform_int(6);
      const auto m = testing::random_grid_matrix(rng, rows, cols, 4);
      const auto pairs = hungarian(m);
      if (pairs.size() != std::min(rows, cols) || matching_cost(m, pairs) != testing::brute_force_min_cost(m)) ++bad;
    }
    out.push_back({"hungarian_vs_brute_force", bad == 0, std::to_string(n - bad) + "/" + std::to_string(n)});
  }

  {
    Rng rng = root.derive("stage2");
    const CostParams cp;
    int bad = 0;
    int improved = 0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      const auto inst = testing::random_assignment_instance(rng);
      const auto base = baseline_assign(inst.tracks, inst.proposals, inst.frame, cp);
      const auto sca = second_chance_assign(inst.tracks, inst.proposals, inst.frame, cp);
      const double ref_base = testing::brute_force_stage2_cost(inst.tracks, inst.proposals, inst.frame, cp, false);
      const double ref_sca = testing::brute_force_stage2_cost(inst.tracks, inst.proposals, inst.frame, cp, true);
      if (std::abs(base.total_second_stage_cost - ref_base) > 1e-9 ||
          std::abs(sca.total_second_stage_cost - ref_sca) > 1e-9 ||
          sca.total_second_stage_cost > base.total_second_stage_cost) {
        ++bad;
      }
      improved += sca.total_second_stage_cost < base.total_second_stage_cost ? 1 : 0;
    }
    out.push_back({"second_chance_dominance", bad == 0 && improved > 0,
                   std::to_string(n - bad) + "/" + std::to_string(n) + ", " + std::to_string(improved) +
                       " strict improvements"});
  }

  {
    Rng rng = root.derive("gradient");
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const auto model = testing::random_model(rng);
      const auto batch = testing::random_batch(rng, 16);
      const auto g = bce_gradient(model, batch);
      const auto fd = testing::numeric_gradient(model, batch);
      for (std::size_t k = 0; k <= kNumFeatures; ++k) {
        const double a = k < kNumFeatures ? g.weights[k] : g.bias;
        worst = std::max(worst, std::abs(a - fd[k]) / std::max(1e-8, std::max(std::abs(a), std::abs(fd[k]))));
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max relative error %.3g", worst);
    out.push_back({"bce_gradient_vs_finite_differences", worst < 1e-5, buf});
  }
  return out;
}

}  // namespace tba
