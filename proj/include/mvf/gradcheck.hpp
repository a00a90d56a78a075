#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mvf {

/// Central finite-difference verification of analytic gradients.
struct GradCheckReport {
  struct Group {
    std::string name;
    double max_rel_error = 0.0;
    long checked = 0;
  };
  std::vector<Group> groups;
  double tolerance = 0.0;
  bool passed = true;

  double worst() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_error);
    return m;
  }
};

/// Focal loss gradient vs. central differences (eps 1e-6, tol 1e-5).
GradCheckReport gradcheck_loss(uint64_t seed = 11);

/// Fusion block, both aggregation kinds x all four skip-flag combinations
/// (eps 1e-4, tol 1e-3). Checks parameter and input gradients.
GradCheckReport gradcheck_fusion(uint64_t seed = 11);

/// Width-reduced two-view networks covering the coarse/fuse/fine chain,
/// checked against finite differences over every weight (eps 1e-4, tol 1e-3).
GradCheckReport gradcheck_end_to_end_toy(uint64_t seed = 11);

}  // namespace mvf
