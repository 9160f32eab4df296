#include <doctest.h>

#include <filesystem>

#include "fite/errors.hpp"
#include "fite/nn/adam.hpp"
#include "fite/nn/checkpoint.hpp"
#include "fite/nn/conv.hpp"
#include "fite/nn/gradcheck.hpp"
#include "fite/nn/module.hpp"
#include "fite/nn/unet.hpp"

using namespace fite;
using namespace fite::nn;

namespace {

std::function<MatXR(Rng&)> sampler(long rows, long cols, double lo = -1, double hi = 1) {
  return [=](Rng& rng) {
    MatXR x(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) x(i, j) = rng.uniform(lo, hi);
    return x;
  };
}

// wraps a module and corrupts one weight-gradient entry by a factor of two
class CorruptedBackward : public Module {
 public:
  explicit CorruptedBackward(Module& inner) : inner_(inner) {}
  long input_dim() const override { return inner_.input_dim(); }
  long output_dim() const override { return inner_.output_dim(); }
  MatXR forward(const MatXR& x) override { return inner_.forward(x); }
  MatXR backward(const MatXR& dy) override {
    MatXR dx = inner_.backward(dy);
    auto segs = inner_.segments();
    // scale the largest-magnitude weight gradient
    double* target = nullptr;
    double best = -1;
    for (auto& s : segs)
      for (long i = 0; i < s.size; ++i)
        if (std::abs(s.grads[i]) > best) {
          best = std::abs(s.grads[i]);
          target = &s.grads[i];
        }
    if (target) *target *= 2.0;
    return dx;
  }
  void collect_segments(const std::string& p, std::vector<ParamSegment>& out) override {
    inner_.collect_segments(p, out);
  }
  double kink_margin() const override { return inner_.kink_margin(); }

 private:
  Module& inner_;
};

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("zero-parameter dense layer") {
  Dense dense(4, 3, 7);
  dense.zero_params();
  Rng rng(1);
  MatXR x = sampler(2, 4)(rng);
  MatXR y = dense.forward(x);
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
  MatXR dy = MatXR::Ones(2, 3);
  MatXR dx = dense.backward(dy);
  CHECK(dx.cwiseAbs().maxCoeff() == 0.0);  // gradient through zero weights
}

TEST_CASE("backward before forward is a state error") {
  Dense dense(4, 3, 7);
  CHECK_THROWS_AS(dense.backward(MatXR::Ones(1, 3)), StateError);
}

TEST_CASE("gradcheck: dense, activations, mlp") {
  Dense dense(11, 7, 42);
  CHECK(gradcheck(dense, sampler(3, 11), 1e-4, 1).passed());

  ActivationLayer leaky(Activation::LeakyRelu, 9);
  CHECK(gradcheck(leaky, sampler(2, 9), 1e-4, 2).passed());
  ActivationLayer soft(Activation::Softplus, 9);
  CHECK(gradcheck(soft, sampler(2, 9), 1e-4, 3).passed());
  ActivationLayer sig(Activation::Sigmoid, 9);
  CHECK(gradcheck(sig, sampler(2, 9), 1e-4, 4).passed());

  auto mlp = make_mlp(9, 32, 4, 5, Activation::LeakyRelu, 43);
  CHECK(gradcheck(*mlp, sampler(2, 9), 1e-4, 5).passed());
  auto mlp_soft = make_mlp(9, 24, 3, 2, Activation::Softplus, 44);
  CHECK(gradcheck(*mlp_soft, sampler(2, 9), 1e-4, 6).passed());
}

TEST_CASE("gradcheck: composition chain rule end to end") {
  // two stacked mlps checked as one composite
  auto composite = std::make_unique<Sequential>();
  composite->add(make_mlp(6, 16, 2, 8, Activation::Softplus, 51));
  composite->add(make_mlp(8, 16, 2, 4, Activation::Softplus, 52));
  CHECK(gradcheck(*composite, sampler(2, 6), 1e-4, 7).passed());
}

TEST_CASE("gradcheck: conv stride 1 and 2, upsample, unet") {
  Conv2d conv1(2, 3, 8, 8, 1, 45);
  CHECK(gradcheck(conv1, sampler(1, 2 * 8 * 8), 1e-4, 8).passed());
  Conv2d conv2(2, 3, 8, 8, 2, 46);
  CHECK(gradcheck(conv2, sampler(1, 2 * 8 * 8), 1e-4, 9).passed());
  Upsample2x up(3, 6, 6);
  CHECK(gradcheck(up, sampler(1, 3 * 6 * 6), 1e-4, 10).passed());

  UNetConfig uc;
  uc.in_channels = 3;
  uc.out_channels = 4;
  uc.base_channels = 4;
  uc.height = uc.width = 16;
  UNetEncoder unet(uc, 47);
  CHECK(gradcheck(unet, sampler(1, 3 * 16 * 16), 1e-4, 11).passed());
}

TEST_CASE("corrupted backward fails gradcheck") {
  Dense dense(6, 4, 48);
  CorruptedBackward corrupted(dense);
  CHECK_FALSE(gradcheck(corrupted, sampler(2, 6), 1e-4, 12).passed());
}

TEST_CASE("unet output size equals input size") {
  UNetConfig uc;
  uc.in_channels = 3;
  uc.out_channels = 5;
  uc.base_channels = 4;
  uc.height = uc.width = 12;
  UNetEncoder unet(uc, 3);
  Rng rng(3);
  MatXR x = sampler(2, 3 * 12 * 12)(rng);
  MatXR y = unet.forward(x);
  CHECK(y.rows() == 2);
  CHECK(y.cols() == 5 * 12 * 12);
  CHECK_THROWS_AS(([&] {
                    UNetConfig bad = uc;
                    bad.height = 10;  // not divisible by 4
                    UNetEncoder u(bad, 1);
                  }()),
                  ConfigError);
}

TEST_CASE("forward determinism") {
  auto mlp = make_mlp(5, 16, 3, 2, Activation::LeakyRelu, 61);
  Rng rng(9);
  MatXR x = sampler(4, 5)(rng);
  MatXR y1 = mlp->forward(x);
  MatXR y2 = mlp->forward(x);
  CHECK((y1 - y2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  VecX p = VecX::Constant(5, 1.5);
  VecX g = VecX::Zero(5);
  AdamState state;
  state.init(5);
  adam_step(p.data(), g.data(), 5, state, {});
  CHECK((p.array() == 1.5).all());
}

TEST_CASE("adam: constant gradient step magnitude approaches lr") {
  AdamParams hyper;
  AdamState state;
  state.init(1);
  double p = 0, prev = 0;
  double g = -2.25;
  for (int i = 0; i < 300; ++i) {
    prev = p;
    adam_step(&p, &g, 1, state, hyper);
  }
  CHECK(std::abs(p - prev) == doctest::Approx(hyper.lr).epsilon(1e-6));
  CHECK(p > prev);  // moving against the negative gradient
}

TEST_CASE("adam: identical runs, identical trajectories; nan rejected") {
  auto run = [] {
    VecX p = VecX::LinSpaced(4, -1, 1);
    AdamState state;
    state.init(4);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
      VecX g(4);
      for (int j = 0; j < 4; ++j) g[j] = rng.uniform(-1, 1);
      adam_step(p.data(), g.data(), 4, state, {});
    }
    return p;
  };
  VecX a = run(), b = run();
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  VecX p = VecX::Zero(1);
  double bad = std::numeric_limits<double>::quiet_NaN();
  AdamState state;
  state.init(1);
  CHECK_THROWS_AS(adam_step(p.data(), &bad, 1, state, {}), TrainingError);
}

TEST_CASE("checkpoint round trip preserves parameters") {
  auto mlp = make_mlp(7, 12, 3, 4, Activation::LeakyRelu, 71);
  auto path = (std::filesystem::temp_directory_path() / "fite_ckpt_test.bin").string();
  save_checkpoint(path, "test header 123", *mlp);

  auto mlp2 = make_mlp(7, 12, 3, 4, Activation::LeakyRelu, 999);  // different init
  Checkpoint ckpt = load_checkpoint(path);
  CHECK(ckpt.header == "test header 123");
  load_into(ckpt, *mlp2);

  Rng rng(1);
  MatXR x = sampler(3, 7)(rng);
  MatXR y1 = mlp->forward(x);
  MatXR y2 = mlp2->forward(x);
  // float32 storage: agreement to single precision
  CHECK((y1 - y2).cwiseAbs().maxCoeff() < 1e-5);

  auto wrong = make_mlp(7, 12, 2, 4, Activation::LeakyRelu, 1);
  CHECK_THROWS_AS(load_into(ckpt, *wrong), IoError);
}

}  // TEST_SUITE
