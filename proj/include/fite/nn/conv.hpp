#pragma once

#include "fite/nn/module.hpp"

namespace fite {
namespace nn {

// 3x3 convolution, zero padding 1, stride 1 or 2. Rows are flattened
// channels-first images [C][H][W].
class Conv2d : public Module {
 public:
  Conv2d(int in_channels, int out_channels, int in_h, int in_w, int stride, uint64_t seed);

  long input_dim() const override { return long(cin_) * h_ * w_; }
  long output_dim() const override { return long(cout_) * oh_ * ow_; }
  int out_h() const { return oh_; }
  int out_w() const { return ow_; }
  MatXR forward(const MatXR& x) override;
  MatXR backward(const MatXR& dy) override;
  void collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) override;

 private:
  int cin_, cout_, h_, w_, stride_, oh_, ow_;
  VecX params_, grads_;  // [w[cout][cin][3][3], b[cout]]
  MatXR last_input_;
  bool has_forward_ = false;
};

// Nearest-neighbor 2x upsampling of [C][H][W] rows.
class Upsample2x : public Module {
 public:
  Upsample2x(int channels, int in_h, int in_w);

  long input_dim() const override { return long(c_) * h_ * w_; }
  long output_dim() const override { return long(c_) * 2 * h_ * 2 * w_; }
  MatXR forward(const MatXR& x) override;
  MatXR backward(const MatXR& dy) override;
  void collect_segments(const std::string&, std::vector<ParamSegment>&) override {}

 private:
  int c_, h_, w_;
};

}  // namespace nn
}  // namespace fite
