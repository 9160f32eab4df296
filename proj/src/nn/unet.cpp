#include "fite/nn/unet.hpp"

#include <algorithm>

#include "fite/errors.hpp"

namespace fite {
namespace nn {

namespace {
constexpr double kLeakySlope = 0.2;

// channels-first concat of two image batches with equal spatial size
MatXR concat_channels(const MatXR& a, long ca, const MatXR& b, long cb, long hw) {
  MatXR out(a.rows(), (ca + cb) * hw);
  out.block(0, 0, a.rows(), ca * hw) = a;
  out.block(0, ca * hw, a.rows(), cb * hw) = b;
  return out;
}

}  // namespace

MatXR UNetEncoder::leaky(const MatXR& z) {
  return z.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
}

MatXR UNetEncoder::leaky_grad(const MatXR& z, const MatXR& dy) {
  return dy.cwiseProduct(z.unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakySlope; }));
}

UNetEncoder::UNetEncoder(const UNetConfig& config, uint64_t seed) : cfg_(config) {
  if (cfg_.height % 4 != 0 || cfg_.width % 4 != 0)
    throw ConfigError("unet: height and width must be divisible by 4");
  int c0 = cfg_.base_channels, c1 = 2 * c0, c2 = 4 * c0;
  int h = cfg_.height, w = cfg_.width;
  auto s = [&](int i) { return hash_combine(seed, uint64_t(i)); };
  enc0_ = std::make_unique<Conv2d>(cfg_.in_channels, c0, h, w, 1, s(0));
  down1_ = std::make_unique<Conv2d>(c0, c1, h, w, 2, s(1));
  enc1_ = std::make_unique<Conv2d>(c1, c1, h / 2, w / 2, 1, s(2));
  down2_ = std::make_unique<Conv2d>(c1, c2, h / 2, w / 2, 2, s(3));
  bottleneck_ = std::make_unique<Conv2d>(c2, c2, h / 4, w / 4, 1, s(4));
  up1_ = std::make_unique<Upsample2x>(c2, h / 4, w / 4);
  up_conv1_ = std::make_unique<Conv2d>(c2 + c1, c1, h / 2, w / 2, 1, s(5));
  up2_ = std::make_unique<Upsample2x>(c1, h / 2, w / 2);
  up_conv2_ = std::make_unique<Conv2d>(c1 + c0, c0, h, w, 1, s(6));
  head_ = std::make_unique<Conv2d>(c0, cfg_.out_channels, h, w, 1, s(7));
}

long UNetEncoder::input_dim() const { return long(cfg_.in_channels) * cfg_.height * cfg_.width; }
long UNetEncoder::output_dim() const { return long(cfg_.out_channels) * cfg_.height * cfg_.width; }

MatXR UNetEncoder::forward(const MatXR& x) {
  int c0 = cfg_.base_channels, c1 = 2 * c0, c2 = 4 * c0;
  long hw = long(cfg_.height) * cfg_.width;
  long hw2 = hw / 4, hw4 = hw / 16;

  z_enc0_ = enc0_->forward(x);
  a_enc0_ = leaky(z_enc0_);
  z_down1_ = down1_->forward(a_enc0_);
  MatXR a_down1 = leaky(z_down1_);
  z_enc1_ = enc1_->forward(a_down1);
  a_enc1_ = leaky(z_enc1_);
  z_down2_ = down2_->forward(a_enc1_);
  MatXR a_down2 = leaky(z_down2_);
  z_bott_ = bottleneck_->forward(a_down2);
  MatXR a_bott = leaky(z_bott_);

  MatXR u1 = up1_->forward(a_bott);
  MatXR cat1 = concat_channels(u1, c2, a_enc1_, c1, hw2);
  z_up1_ = up_conv1_->forward(cat1);
  MatXR a_up1 = leaky(z_up1_);

  MatXR u2 = up2_->forward(a_up1);
  MatXR cat2 = concat_channels(u2, c1, a_enc0_, c0, hw);
  z_up2_ = up_conv2_->forward(cat2);
  MatXR a_up2 = leaky(z_up2_);

  has_forward_ = true;
  (void)hw4;
  return head_->forward(a_up2);
}

MatXR UNetEncoder::backward(const MatXR& dy) {
  if (!has_forward_) throw StateError("unet: backward without forward");
  int c0 = cfg_.base_channels, c1 = 2 * c0, c2 = 4 * c0;
  long hw = long(cfg_.height) * cfg_.width;
  long hw2 = hw / 4;

  MatXR d_a_up2 = head_->backward(dy);
  MatXR d_cat2 = up_conv2_->backward(leaky_grad(z_up2_, d_a_up2));
  MatXR d_u2 = d_cat2.block(0, 0, dy.rows(), c1 * hw);
  MatXR d_skip0 = d_cat2.block(0, c1 * hw, dy.rows(), c0 * hw);

  MatXR d_a_up1 = up2_->backward(d_u2);
  MatXR d_cat1 = up_conv1_->backward(leaky_grad(z_up1_, d_a_up1));
  MatXR d_u1 = d_cat1.block(0, 0, dy.rows(), c2 * hw2);
  MatXR d_skip1 = d_cat1.block(0, c2 * hw2, dy.rows(), c1 * hw2);

  MatXR d_a_bott = up1_->backward(d_u1);
  MatXR d_a_down2 = bottleneck_->backward(leaky_grad(z_bott_, d_a_bott));
  MatXR d_a_enc1 = down2_->backward(leaky_grad(z_down2_, d_a_down2));
  d_a_enc1 += d_skip1;
  MatXR d_a_down1 = enc1_->backward(leaky_grad(z_enc1_, d_a_enc1));
  MatXR d_a_enc0 = down1_->backward(leaky_grad(z_down1_, d_a_down1));
  d_a_enc0 += d_skip0;
  return enc0_->backward(leaky_grad(z_enc0_, d_a_enc0));
}

void UNetEncoder::collect_segments(const std::string& prefix, std::vector<ParamSegment>& out) {
  enc0_->collect_segments(prefix + "enc0/", out);
  down1_->collect_segments(prefix + "down1/", out);
  enc1_->collect_segments(prefix + "enc1/", out);
  down2_->collect_segments(prefix + "down2/", out);
  bottleneck_->collect_segments(prefix + "bottleneck/", out);
  up_conv1_->collect_segments(prefix + "up1/", out);
  up_conv2_->collect_segments(prefix + "up2/", out);
  head_->collect_segments(prefix + "head/", out);
}

double UNetEncoder::kink_margin() const {
  if (!has_forward_) return std::numeric_limits<double>::infinity();
  double m = std::numeric_limits<double>::infinity();
  for (const MatXR* z : {&z_enc0_, &z_down1_, &z_enc1_, &z_down2_, &z_bott_, &z_up1_, &z_up2_})
    if (z->size() > 0) m = std::min(m, z->cwiseAbs().minCoeff());
  return m;
}

}  // namespace nn
}  // namespace fite
