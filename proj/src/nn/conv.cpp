#include "fite/nn/conv.hpp"

#include <cmath>

#include "fite/errors.hpp"

namespace fite {
namespace nn {

Conv2d::Conv2d(int in_channels, int out_channels, int in_h, int in_w, int stride, uint64_t seed)
    : cin_(in_channels), cout_(out_channels), h_(in_h), w_(in_w), stride_(stride) {
  if (stride_ != 1 && stride_ != 2) throw ConfigError("conv: stride must be 1 or 2");
  oh_ = (h_ + stride_ - 1) / stride_;
  ow_ = (w_ + stride_ - 1) / stride_;
  long nw = long(cout_) * cin_ * 9;
  params_.resize(nw + cout_);
  grads_ = VecX::Zero(params_.size());
  Rng rng(seed);
  double bound = 1.0 / std::sqrt(double(cin_) * 9);
  for (long i = 0; i < nw; ++i) params_[i] = rng.uniform(-bound, bound);
  for (int i = 0; i < cout_; ++i) params_[nw + i] = 0;
}

MatXR Conv2d::forward(const MatXR& x) {
  if (x.cols() != input_dim()) throw DimensionError("conv: input width mismatch");
  last_input_ = x;
  has_forward_ = true;
  const long batch = x.rows();
  MatXR y(batch, output_dim());
  const double* wts = params_.data();
  const double* bias = params_.data() + long(cout_) * cin_ * 9;
  for (long n = 0; n < batch; ++n) {
    const double* in = x.row(n).data();
    double* out = y.row(n).data();
    for (int co = 0; co < cout_; ++co) {
      double* oc = out + long(co) * oh_ * ow_;
      for (int oy = 0; oy < oh_; ++oy)
        for (int ox = 0; ox < ow_; ++ox) oc[oy * ow_ + ox] = bias[co];
      for (int ci = 0; ci < cin_; ++ci) {
        const double* icp = in + long(ci) * h_ * w_;
        const double* k = wts + (long(co) * cin_ + ci) * 9;
        for (int oy = 0; oy < oh_; ++oy) {
          int iy0 = oy * stride_ - 1;
          for (int ox = 0; ox < ow_; ++ox) {
            int ix0 = ox * stride_ - 1;
            double acc = 0;
            for (int ky = 0; ky < 3; ++ky) {
              int iy = iy0 + ky;
              if (iy < 0 || iy >= h_) continue;
              for (int kx = 0; kx < 3; ++kx) {
                int ix = ix0 + kx;
                if (ix < 0 || ix >= w_) continue;
                acc += icp[iy * w_ + ix] * k[ky * 3 + kx];
              }
            }
            oc[oy * ow_ + ox] += acc;
          }
        }
      }
    }
  }
  return y;
}

MatXR Conv2d::backward(const MatXR& dy) {
  if (!has_forward_) throw StateError("conv: backward without forward");
  if (dy.cols() != output_dim() || dy.rows() != last_input_.rows())
    throw DimensionError("conv: cotangent shape mismatch");
  const long batch = dy.rows();
  MatXR dx = MatX::Zero(batch, input_dim());
  const double* wts = params_.data();
  double* dwts = grads_.data();
  double* dbias = grads_.data() + long(cout_) * cin_ * 9;
  for (long n = 0; n < batch; ++n) {
    const double* in = last_input_.row(n).data();
    const double* dout = dy.row(n).data();
    double* din = dx.row(n).data();
    for (int co = 0; co < cout_; ++co) {
      const double* doc = dout + long(co) * oh_ * ow_;
      for (int oy = 0; oy < oh_; ++oy)
        for (int ox = 0; ox < ow_; ++ox) dbias[co] += doc[oy * ow_ + ox];
      for (int ci = 0; ci < cin_; ++ci) {
        const double* icp = in + long(ci) * h_ * w_;
        double* dicp = din + long(ci) * h_ * w_;
        const double* k = wts + (long(co) * cin_ + ci) * 9;
        double* dk = dwts + (long(co) * cin_ + ci) * 9;
        for (int oy = 0; oy < oh_; ++oy) {
          int iy0 = oy * stride_ - 1;
          for (int ox = 0; ox < ow_; ++ox) {
            int ix0 = ox * stride_ - 1;
            double g = doc[oy * ow_ + ox];
            if (g == 0) continue;
            for (int ky = 0; ky < 3; ++ky) {
              int iy = iy0 + ky;
              if (iy < 0 || iy >= h_) continue;
              for (int kx = 0; kx < 3; ++kx) {
                int ix = ix0 + kx;
                if (ix < 0 || ix >= w_) continue;
                dk[ky * 3 + kx] += icp[iy * w_ + ix] * g;
                dicp[iy * w_ + ix] += k[ky * 3 + kx] * g;
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) {
  long nw = long(cout_) * cin_ * 9;
  out.push_back({prefix + "kernel", params_.data(), grads_.data(), nw});
  out.push_back({prefix + "bias", params_.data() + nw, grads_.data() + nw, cout_});
}

Upsample2x::Upsample2x(int channels, int in_h, int in_w) : c_(channels), h_(in_h), w_(in_w) {}

MatXR Upsample2x::forward(const MatXR& x) {
  if (x.cols() != input_dim()) throw DimensionError("upsample: input width mismatch");
  const long batch = x.rows();
  MatXR y(batch, output_dim());
  int oh = 2 * h_, ow = 2 * w_;
  for (long n = 0; n < batch; ++n) {
    const double* in = x.row(n).data();
    double* out = y.row(n).data();
    for (int c = 0; c < c_; ++c) {
      const double* ic = in + long(c) * h_ * w_;
      double* oc = out + long(c) * oh * ow;
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) oc[yy * ow + xx] = ic[(yy / 2) * w_ + xx / 2];
    }
  }
  return y;
}

MatXR Upsample2x::backward(const MatXR& dy) {
  if (dy.cols() != output_dim()) throw DimensionError("upsample: cotangent width mismatch");
  const long batch = dy.rows();
  MatXR dx = MatX::Zero(batch, input_dim());
  int oh = 2 * h_, ow = 2 * w_;
  for (long n = 0; n < batch; ++n) {
    const double* dout = dy.row(n).data();
    double* din = dx.row(n).data();
    for (int c = 0; c < c_; ++c) {
      const double* doc = dout + long(c) * oh * ow;
      double* dic = din + long(c) * h_ * w_;
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) dic[(yy / 2) * w_ + xx / 2] += doc[yy * ow + xx];
    }
  }
  return dx;
}

}  // namespace nn
}  // namespace fite
