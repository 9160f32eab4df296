#include "fite/nn/adam.hpp"

#include <cmath>

#include "fite/errors.hpp"

namespace fite {
namespace nn {

void adam_step(double* params, const double* grads, long n, AdamState& state,
               const AdamParams& hyper) {
  if (state.m.size() != n) state.init(n);
  state.t += 1;
  double bc1 = 1.0 - std::pow(hyper.beta1, double(state.t));
  double bc2 = 1.0 - std::pow(hyper.beta2, double(state.t));
  for (long i = 0; i < n; ++i) {
    double g = grads[i];
    if (!std::isfinite(g)) throw TrainingError("adam: non-finite gradient", state.t);
    state.m[i] = hyper.beta1 * state.m[i] + (1 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1 - hyper.beta2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

AdamOptimizer::AdamOptimizer(Module& module, const AdamParams& hyper)
    : AdamOptimizer(module.segments(), hyper) {}

AdamOptimizer::AdamOptimizer(std::vector<ParamSegment> segments, const AdamParams& hyper)
    : segments_(std::move(segments)), hyper_(hyper) {
  states_.resize(segments_.size());
  for (size_t i = 0; i < segments_.size(); ++i) states_[i].init(segments_[i].size);
}

void AdamOptimizer::step() {
  for (size_t i = 0; i < segments_.size(); ++i)
    adam_step(segments_[i].values, segments_[i].grads, segments_[i].size, states_[i], hyper_);
}

}  // namespace nn
}  // namespace fite
