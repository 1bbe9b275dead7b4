#include <gtest/gtest.h>

#include "nowcast/layers.hpp"
#include "nowcast/losses.hpp"
#include "test_support.hpp"

using namespace nowcast;
using nowcast::testing::check_gradients;
using nowcast::testing::random_tensor;
using nowcast::testing::random_tensor_f;

namespace {

template <class T>
void zero_biases(ModuleState<T> st) {
  for (auto& p : st.params)
    if (p.name.ends_with("bias") || p.name.ends_with("beta")) p.var.mutable_value().fill(T{0});
}

bool all_finite(const Tensor<float>& t) {
  for (float v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

TEST(Dsc, WeightCountMatchesClosedForm) {
  Rng rng(1);
  DepthwiseSeparableConv<float> dsc(64, 128, 3, rng);
  EXPECT_EQ(dsc.weight_count(), 8768u);
  EXPECT_LT(dsc.weight_count(), 64u * 128u * 9u);
  for (int in : {1, 3, 12, 25, 40})
    for (int out : {1, 7, 16, 64}) {
      DepthwiseSeparableConv<float> d(in, out, 3, rng);
      EXPECT_EQ(d.weight_count(), std::size_t(in) * 9 + std::size_t(in) * out) << in << "->" << out;
    }
}

TEST(Dsc, ZeroInputZeroBiasGivesZero) {
  Rng rng(2);
  DepthwiseSeparableConv<float> dsc(4, 6, 3, rng);
  ModuleState<float> st;
  dsc.collect("", st);
  zero_biases(st);
  auto y = dsc.forward(leaf(Tensor<float>({2, 4, 16, 16})));
  EXPECT_EQ(y.shape(), (Shape{2, 6, 16, 16}));
  for (float v : y.value().values()) EXPECT_EQ(v, 0.0f);
}

TEST(Dsc, PreservesSpatialSizeAndRejectsChannelMismatch) {
  Rng rng(3);
  DepthwiseSeparableConv<float> dsc(3, 5, 3, rng);
  auto y = dsc.forward(leaf(random_tensor_f({1, 3, 64, 64}, rng)));
  EXPECT_EQ(y.shape(), (Shape{1, 5, 64, 64}));
  EXPECT_THROW(dsc.forward(leaf(random_tensor_f({1, 4, 8, 8}, rng))), ShapeError);
}

TEST(DoubleDsc, ContractAndEvalDeterminism) {
  Rng rng(4);
  DoubleDsc<float> block(BlockConfig{5, 16}, rng);
  auto x = leaf(random_tensor_f({2, 5, 12, 12}, rng));
  ForwardContext<float> train_ctx{true, false, nullptr, nullptr};
  auto y = block.forward(x, train_ctx);
  EXPECT_EQ(y.shape(), (Shape{2, 16, 12, 12}));
  for (float v : y.value().values()) EXPECT_GE(v, 0.0f);
  ForwardContext<float> eval;
  auto a = block.forward(x, eval).value();
  auto b = block.forward(x, eval).value();
  EXPECT_EQ(a, b);
  EXPECT_TRUE(all_finite(a));
}

TEST(DoubleDsc, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  DoubleDsc<double> block(BlockConfig{3, 4}, rng);
  ModuleState<double> st;
  block.collect("", st);
  auto x = leaf(random_tensor({2, 3, 6, 6}, rng), true);
  std::vector<Var<double>> leaves{x};
  for (auto& p : st.params) leaves.push_back(p.var);
  ForwardContext<double> ctx{true, false, nullptr, nullptr};
  auto target = random_tensor({2, 4, 6, 6}, rng);
  // Running statistics drift between evaluations but do not enter the training-mode output.
  auto r = check_gradients([&] { return loss_l2(target, block.forward(x, ctx)); }, leaves);
  EXPECT_LT(r.relative_error, 1e-5);
}

TEST(Cbam, ZeroInputWithZeroBiasesGivesZero) {
  Rng rng(6);
  Cbam<float> cbam(32, 16, 7, rng);
  ModuleState<float> st;
  cbam.collect("", st);
  zero_biases(st);
  auto d = cbam.forward_detailed(leaf(Tensor<float>({1, 32, 8, 8})));
  for (float v : d.out.value().values()) EXPECT_EQ(v, 0.0f);
  for (float g : d.channel_gate.value().values()) EXPECT_FLOAT_EQ(g, 0.5f);
  for (float g : d.spatial_gate.value().values()) EXPECT_FLOAT_EQ(g, 0.5f);
}

TEST(Cbam, GatesStrictlyInsideUnitIntervalAndOutputBounded) {
  Rng rng(7);
  Cbam<double> cbam(32, 16, 7, rng);
  auto x = random_tensor({2, 32, 9, 9}, rng, -3, 3);
  auto d = cbam.forward_detailed(leaf(x));
  for (double g : d.channel_gate.value().values()) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
  for (double g : d.spatial_gate.value().values()) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
  EXPECT_EQ(d.out.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(d.out.value()[i]), std::abs(x[i]));
}

TEST(Cbam, SaturatedGatesPassInputThrough) {
  Rng rng(8);
  Cbam<double> cbam(16, 16, 7, rng);
  cbam.mlp_out().weight().mutable_value().fill(0.0);
  cbam.mlp_out().bias().mutable_value().fill(30.0);
  cbam.spatial().weight().mutable_value().fill(0.0);
  cbam.spatial().bias().mutable_value().fill(30.0);
  auto x = random_tensor({1, 16, 8, 8}, rng);
  auto y = cbam.forward(leaf(x)).value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Cbam, ConfigAndShapeErrors) {
  Rng rng(9);
  EXPECT_THROW(Cbam<float>(8, 16, 7, rng), ConfigError);
  EXPECT_THROW(Cbam<float>(16, 16, 6, rng), ConfigError);
  Cbam<float> cbam(16, 16, 7, rng);
  EXPECT_THROW(cbam.forward(leaf(Tensor<float>({1, 17, 4, 4}))), ShapeError);
}

TEST(Cbam, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  Cbam<double> cbam(8, 4, 3, rng);
  ModuleState<double> st;
  cbam.collect("", st);
  auto x = leaf(random_tensor({2, 8, 5, 5}, rng), true);
  std::vector<Var<double>> leaves{x};
  for (auto& p : st.params) leaves.push_back(p.var);
  auto target = random_tensor({2, 8, 5, 5}, rng);
  auto r = check_gradients([&] { return loss_l2(target, cbam.forward(x)); }, leaves);
  EXPECT_LT(r.relative_error, 1e-5);
}

TEST(Down, HalvesSpatialSize) {
  Rng rng(11);
  ForwardContext<float> ctx;
  std::vector<std::int64_t> sizes{64};
  Var<float> h = leaf(random_tensor_f({1, 4, 64, 64}, rng));
  for (int level = 1; level < 5; ++level) {
    Down<float> down(BlockConfig{4, 4, 1, 7, 3}, rng);
    h = down.forward(h, ctx);
    sizes.push_back(h.shape()[2]);
  }
  EXPECT_EQ(sizes, (std::vector<std::int64_t>{64, 32, 16, 8, 4}));
  Down<float> down(BlockConfig{4, 4, 1, 7, 3}, rng);
  EXPECT_THROW(down.forward(leaf(Tensor<float>({1, 4, 7, 8})), ctx), ShapeError);
}

TEST(Down, MaxPoolOfConstantIsConstant) {
  auto y = ops::max_pool2x2(leaf(Tensor<float>({1, 2, 8, 8}, 0.7f))).value();
  EXPECT_EQ(y.shape(), (Shape{1, 2, 4, 4}));
  for (float v : y.values()) EXPECT_EQ(v, 0.7f);
}

TEST(Up, ConcatenationArithmetic) {
  Rng rng(12);
  Up<float> up(BlockConfig{1536, 256}, rng);
  ForwardContext<float> ctx;
  auto y = up.forward(leaf(random_tensor_f({1, 512, 8, 8}, rng)), leaf(random_tensor_f({1, 1024, 16, 16}, rng)), ctx, 0.5);
  EXPECT_EQ(y.shape(), (Shape{1, 256, 16, 16}));
  EXPECT_TRUE(all_finite(y.value()));
}

TEST(Up, RejectsSpatialAndChannelMismatch) {
  Rng rng(13);
  Up<float> up(BlockConfig{12, 4}, rng);
  ForwardContext<float> ctx;
  EXPECT_THROW(up.forward(leaf(Tensor<float>({1, 4, 4, 4})), leaf(Tensor<float>({1, 8, 6, 6})), ctx, 0.0), ShapeError);
  EXPECT_THROW(up.forward(leaf(Tensor<float>({1, 4, 4, 4})), leaf(Tensor<float>({1, 9, 8, 8})), ctx, 0.0), ShapeError);
}

TEST(Up, ZeroDropoutIsDeterministicEvenWhenStochastic) {
  Rng rng(14);
  Up<float> up(BlockConfig{12, 4}, rng);
  Rng a(1), b(2);
  auto x = leaf(random_tensor_f({1, 4, 4, 4}, rng));
  auto skip = leaf(random_tensor_f({1, 8, 8, 8}, rng));
  auto ya = up.forward(x, skip, ForwardContext<float>{false, true, &a, nullptr}, 0.0).value();
  auto yb = up.forward(x, skip, ForwardContext<float>{false, true, &b, nullptr}, 0.0).value();
  EXPECT_EQ(ya, yb);
  auto za = up.forward(x, skip, ForwardContext<float>{false, true, &a, nullptr}, 0.5).value();
  EXPECT_NE(za, ya);
}

TEST(Up, BilinearUpsampleOfConstantIsConstant) {
  auto y = ops::upsample_bilinear(leaf(Tensor<float>({1, 3, 4, 4}, 2.5f)), 8, 8).value();
  for (float v : y.values()) EXPECT_FLOAT_EQ(v, 2.5f);
}

TEST(Up, DownThenUpRestoresShape) {
  Rng rng(15);
  ForwardContext<float> ctx;
  Down<float> down(BlockConfig{3, 6}, rng);
  Up<float> up(BlockConfig{9, 3}, rng);
  auto x = leaf(random_tensor_f({2, 3, 16, 16}, rng));
  auto y = up.forward(down.forward(x, ctx), x, ctx, 0.0);
  EXPECT_EQ(y.shape(), x.shape());
}
