#pragma once

#include <vector>

#include "fite/nn/module.hpp"
#include "fite/types.hpp"

namespace fite {
namespace nn {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  VecX m, v;
  long t = 0;

  void init(long n) {
    m = VecX::Zero(n);
    v = VecX::Zero(n);
    t = 0;
  }
};

// Adaptive-moment update with bias correction, in place. Throws TrainingError
// on non-finite gradients.
void adam_step(double* params, const double* grads, long n, AdamState& state,
               const AdamParams& hyper);

// Optimizer over a module's parameter segments (one state per segment).
class AdamOptimizer {
 public:
  AdamOptimizer(Module& module, const AdamParams& hyper);
  AdamOptimizer(std::vector<ParamSegment> segments, const AdamParams& hyper);

  void step();  // applies segment gradients, then leaves them in place

 private:
  std::vector<ParamSegment> segments_;
  std::vector<AdamState> states_;
  AdamParams hyper_;
};

}  // namespace nn
}  // namespace fite
