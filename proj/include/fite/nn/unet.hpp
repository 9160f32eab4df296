#pragma once

#include <memory>

#include "fite/nn/conv.hpp"
#include "fite/nn/module.hpp"

namespace fite {
namespace nn {

struct UNetConfig {
  int in_channels = 3;
  int out_channels = 16;  // C_pose
  int base_channels = 8;
  int height = 128;
  int width = 128;  // both divisible by 4
};

// Small U-shaped encoder: 3 resolution levels, 3x3 convolutions, stride-2
// downsampling, nearest-neighbor upsampling, skip concatenations, leaky
// activations. Output spatial size equals input spatial size.
class UNetEncoder : public Module {
 public:
  UNetEncoder(const UNetConfig& config, uint64_t seed);

  long input_dim() const override;
  long output_dim() const override;
  MatXR forward(const MatXR& x) override;
  MatXR backward(const MatXR& dy) override;
  void collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) override;
  double kink_margin() const override;

  const UNetConfig& config() const { return cfg_; }

 private:
  UNetConfig cfg_;
  std::unique_ptr<Conv2d> enc0_, down1_, enc1_, down2_, bottleneck_, up_conv1_, up_conv2_, head_;
  std::unique_ptr<Upsample2x> up1_, up2_;

  // forward intermediates (pre-activation values for the leaky units)
  MatXR z_enc0_, z_down1_, z_enc1_, z_down2_, z_bott_, z_up1_, z_up2_;
  MatXR a_enc0_, a_enc1_;  // skip activations
  bool has_forward_ = false;

  static MatXR leaky(const MatXR& z);
  static MatXR leaky_grad(const MatXR& z, const MatXR& dy);
};

}  // namespace nn
}  // namespace fite
