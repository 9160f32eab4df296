#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "fite/types.hpp"

namespace fite {
namespace nn {

struct ParamSegment {
  std::string name;
  double* values = nullptr;
  double* grads = nullptr;
  long size = 0;
};

// Trainable function with explicit reverse-mode derivatives. Rows of the
// forward/backward matrices are batch items; each module fixes its own
// flattened per-row layout. forward() is pure given parameters; backward()
// consumes the intermediates of the immediately preceding forward and
// accumulates parameter gradients.
class Module {
 public:
  virtual ~Module() = default;

  virtual long input_dim() const = 0;
  virtual long output_dim() const = 0;

  virtual MatXR forward(const MatXR& x) = 0;
  virtual MatXR backward(const MatXR& dy) = 0;

  virtual void collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) = 0;

  // Smallest |preactivation| of any non-smooth unit in the last forward;
  // finite-difference probes need to stay clear of these kinks.
  virtual double kink_margin() const { return std::numeric_limits<double>::infinity(); }

  std::vector<ParamSegment> segments() {
    std::vector<ParamSegment> out;
    collect_segments("", out);
    return out;
  }
  long param_count() {
    long n = 0;
    for (const auto& s : segments()) n += s.size;
    return n;
  }
  void zero_grad() {
    for (auto& s : segments())
      for (long i = 0; i < s.size; ++i) s.grads[i] = 0;
  }
  void zero_params() {
    for (auto& s : segments())
      for (long i = 0; i < s.size; ++i) s.values[i] = 0;
  }
  uint64_t param_hash() {
    uint64_t h = 1469598103934665603ULL;
    for (auto& s : segments()) h = fnv1a(s.values, s.size * sizeof(double), h);
    return h;
  }
};

class Dense : public Module {
 public:
  Dense(long in, long out, uint64_t seed);

  long input_dim() const override { return in_; }
  long output_dim() const override { return out_; }
  MatXR forward(const MatXR& x) override;
  MatXR backward(const MatXR& dy) override;
  void collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) override;

 private:
  long in_, out_;
  VecX params_, grads_;  // [W row-major (out x in), b]
  MatXR last_input_;
  bool has_forward_ = false;
};

enum class Activation { LeakyRelu, Softplus, Sigmoid };

class ActivationLayer : public Module {
 public:
  ActivationLayer(Activation kind, long dim, double leaky_slope = 0.2);

  long input_dim() const override { return dim_; }
  long output_dim() const override { return dim_; }
  MatXR forward(const MatXR& x) override;
  MatXR backward(const MatXR& dy) override;
  void collect_segments(const std::string&, std::vector<ParamSegment>&) override {}
  double kink_margin() const override;

 private:
  Activation kind_;
  long dim_;
  double slope_;
  MatXR last_input_;
  bool has_forward_ = false;
};

class Sequential : public Module {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Module> m) { layers_.push_back(std::move(m)); }

  long input_dim() const override { return layers_.front()->input_dim(); }
  long output_dim() const override { return layers_.back()->output_dim(); }
  MatXR forward(const MatXR& x) override;
  MatXR backward(const MatXR& dy) override;
  void collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) override;
  double kink_margin() const override;

  size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Module>> layers_;
};

// Dense stack: total_layers dense layers of the given width with activations
// between them (none after the last).
std::unique_ptr<Sequential> make_mlp(long in, long width, int total_layers, long out,
                                     Activation act, uint64_t seed, double leaky_slope = 0.2);

}  // namespace nn
}  // namespace fite
