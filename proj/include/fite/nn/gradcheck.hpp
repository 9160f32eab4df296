#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fite/nn/module.hpp"

namespace fite {
namespace nn {

struct GradcheckReport {
  struct SegmentResult {
    std::string name;
    double max_rel_error = 0;
    long entries_checked = 0;
  };
  std::vector<SegmentResult> segments;
  double input_max_rel_error = 0;
  double max_rel_error = 0;
  double tolerance = 0;

  bool passed() const { return max_rel_error <= tolerance; }
};

// Central finite differences against the module's analytic backward. The loss
// is a fixed random linear functional of the outputs. Inputs are resampled
// while any leaky-unit preactivation sits within 10h of its kink. Checks a
// deterministic subset of entries per parameter segment (always including the
// largest-magnitude gradient) plus a few input entries.
GradcheckReport gradcheck(Module& module,
                          const std::function<MatXR(Rng&)>& input_sampler, double tolerance,
                          uint64_t seed, long entries_per_segment = 16, double h = 1e-4);

}  // namespace nn
}  // namespace fite
