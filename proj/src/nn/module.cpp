#include "fite/nn/module.hpp"

#include <cmath>

#include "fite/errors.hpp"

namespace fite {
namespace nn {

namespace {

using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

Dense::Dense(long in, long out, uint64_t seed) : in_(in), out_(out) {
  params_.resize(in_ * out_ + out_);
  grads_ = VecX::Zero(params_.size());
  Rng rng(seed);
  double bound = 1.0 / std::sqrt(double(in_));
  for (long i = 0; i < in_ * out_; ++i) params_[i] = rng.uniform(-bound, bound);
  for (long i = 0; i < out_; ++i) params_[in_ * out_ + i] = 0;
}

MatXR Dense::forward(const MatXR& x) {
  if (x.cols() != in_) throw DimensionError("dense: input width mismatch");
  last_input_ = x;
  has_forward_ = true;
  ConstRowMajorMap w(params_.data(), out_, in_);
  MatXR y = x * w.transpose();
  y.rowwise() += params_.segment(in_ * out_, out_).transpose();
  return y;
}

MatXR Dense::backward(const MatXR& dy) {
  if (!has_forward_) throw StateError("dense: backward without forward");
  if (dy.cols() != out_ || dy.rows() != last_input_.rows())
    throw DimensionError("dense: cotangent shape mismatch");
  ConstRowMajorMap w(params_.data(), out_, in_);
  RowMajorMap dw(grads_.data(), out_, in_);
  dw += dy.transpose() * last_input_;
  grads_.segment(in_ * out_, out_) += dy.colwise().sum().transpose();
  return dy * w;
}

void Dense::collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) {
  out.push_back({prefix + "weight", params_.data(), grads_.data(), in_ * out_});
  out.push_back({prefix + "bias", params_.data() + in_ * out_, grads_.data() + in_ * out_, out_});
}

ActivationLayer::ActivationLayer(Activation kind, long dim, double leaky_slope)
    : kind_(kind), dim_(dim), slope_(leaky_slope) {}

MatXR ActivationLayer::forward(const MatXR& x) {
  if (x.cols() != dim_) throw DimensionError("activation: input width mismatch");
  last_input_ = x;
  has_forward_ = true;
  switch (kind_) {
    case Activation::LeakyRelu:
      return x.unaryExpr([s = slope_](double v) { return v > 0 ? v : s * v; });
    case Activation::Softplus:
      return x.unaryExpr([](double v) {
        return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
      });
    case Activation::Sigmoid:
      return x.unaryExpr([](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      });
  }
  return x;
}

MatXR ActivationLayer::backward(const MatXR& dy) {
  if (!has_forward_) throw StateError("activation: backward without forward");
  switch (kind_) {
    case Activation::LeakyRelu:
      return dy.cwiseProduct(last_input_.unaryExpr(
          [s = slope_](double v) { return v > 0 ? 1.0 : s; }));
    case Activation::Softplus:
      return dy.cwiseProduct(last_input_.unaryExpr([](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      }));
    case Activation::Sigmoid:
      return dy.cwiseProduct(last_input_.unaryExpr([](double v) {
        double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        return s * (1.0 - s);
      }));
  }
  return dy;
}

double ActivationLayer::kink_margin() const {
  if (kind_ != Activation::LeakyRelu || !has_forward_)
    return std::numeric_limits<double>::infinity();
  return last_input_.cwiseAbs().minCoeff();
}

MatXR Sequential::forward(const MatXR& x) {
  MatXR cur = x;
  for (auto& layer : layers_) cur = layer->forward(cur);
  return cur;
}

MatXR Sequential::backward(const MatXR& dy) {
  MatXR cur = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_segments(prefix + "layer" + std::to_string(i) + "/", out);
}

double Sequential::kink_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& layer : layers_) m = std::min(m, layer->kink_margin());
  return m;
}

std::unique_ptr<Sequential> make_mlp(long in, long width, int total_layers, long out,
                                     Activation act, uint64_t seed, double leaky_slope) {
  auto seq = std::make_unique<Sequential>();
  long cur = in;
  for (int i = 0; i < total_layers; ++i) {
    bool last = i + 1 == total_layers;
    long next = last ? out : width;
    seq->add(std::make_unique<Dense>(cur, next, hash_combine(seed, uint64_t(i))));
    if (!last) seq->add(std::make_unique<ActivationLayer>(act, next, leaky_slope));
    cur = next;
  }
  return seq;
}

}  // namespace nn
}  // namespace fite
