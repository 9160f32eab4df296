#include "fite/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fite/errors.hpp"

namespace fite {
namespace nn {

namespace {

double rel_error(double a, double n) {
  double scale = std::max({std::abs(a), std::abs(n), 1e-3});
  return std::abs(a - n) / scale;
}

}  // namespace

GradcheckReport gradcheck(Module& module, const std::function<MatXR(Rng&)>& input_sampler,
                          double tolerance, uint64_t seed, long entries_per_segment, double h) {
  Rng rng(seed);

  // sample input clear of activation kinks
  MatXR x;
  for (int attempt = 0; attempt < 64; ++attempt) {
    x = input_sampler(rng);
    module.forward(x);
    if (module.kink_margin() > 10 * h) break;
    if (attempt == 63)
      throw InvalidInputError("gradcheck: could not sample inputs clear of activation kinks");
  }

  MatXR y0 = module.forward(x);
  MatXR cot(y0.rows(), y0.cols());
  for (long i = 0; i < cot.rows(); ++i)
    for (long j = 0; j < cot.cols(); ++j) cot(i, j) = rng.uniform(-1, 1);

  auto loss_of = [&](const MatXR& y) { return (y.cwiseProduct(cot)).sum(); };

  module.zero_grad();
  module.forward(x);
  MatXR dx = module.backward(cot);

  GradcheckReport report;
  report.tolerance = tolerance;

  auto segs = module.segments();
  for (auto& seg : segs) {
    GradcheckReport::SegmentResult res;
    res.name = seg.name;

    // entry list: the largest-|grad| entry plus a deterministic random subset
    std::vector<long> entries;
    long max_idx = 0;
    for (long i = 1; i < seg.size; ++i)
      if (std::abs(seg.grads[i]) > std::abs(seg.grads[max_idx])) max_idx = i;
    entries.push_back(max_idx);
    for (long k = 0; k < entries_per_segment - 1 && long(entries.size()) < seg.size; ++k)
      entries.push_back(long(rng.below(uint64_t(seg.size))));
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());

    for (long idx : entries) {
      double saved = seg.values[idx];
      seg.values[idx] = saved + h;
      double lp = loss_of(module.forward(x));
      seg.values[idx] = saved - h;
      double lm = loss_of(module.forward(x));
      seg.values[idx] = saved;
      double numeric = (lp - lm) / (2 * h);
      res.max_rel_error = std::max(res.max_rel_error, rel_error(seg.grads[idx], numeric));
      res.entries_checked++;
    }
    report.max_rel_error = std::max(report.max_rel_error, res.max_rel_error);
    report.segments.push_back(res);
  }

  // input cotangents on a few entries
  long n_in = x.size();
  for (long k = 0; k < std::min<long>(8, n_in); ++k) {
    long idx = long(rng.below(uint64_t(n_in)));
    long r = idx / x.cols(), c = idx % x.cols();
    MatXR xp = x, xm = x;
    xp(r, c) += h;
    xm(r, c) -= h;
    double numeric = (loss_of(module.forward(xp)) - loss_of(module.forward(xm))) / (2 * h);
    report.input_max_rel_error =
        std::max(report.input_max_rel_error, rel_error(dx(r, c), numeric));
  }
  report.max_rel_error = std::max(report.max_rel_error, report.input_max_rel_error);

  // leave the module's stored forward consistent with x
  module.forward(x);
  return report;
}

}  // namespace nn
}  // namespace fite
