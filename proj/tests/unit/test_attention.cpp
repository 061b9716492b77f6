#include <gtest/gtest.h>

#include <cmath>

#include "athv/attention.hpp"
#include "gradcheck.hpp"

using namespace athv;
using namespace athv::testing;

namespace {

AttentionParams<D> zero_params(std::size_t c) {
  AttentionParams<D> p;
  p.fc1_weight = Var<D>::parameter(Tensor<D>(Shape{c / 2, c}));
  p.fc1_bias = Var<D>::parameter(Tensor<D>(Shape{c / 2}));
  p.fc2_weight = Var<D>::parameter(Tensor<D>(Shape{c, c / 2}));
  p.fc2_bias = Var<D>::parameter(Tensor<D>(Shape{c}));
  p.conv_weight = Var<D>::parameter(Tensor<D>(Shape{1, c, 1, 1}));
  p.conv_bias = Var<D>::parameter(Tensor<D>(Shape{1}));
  return p;
}

AttentionParams<D> random_params(std::size_t c, std::uint64_t seed) {
  AttentionParams<D> p;
  p.fc1_weight = Var<D>::parameter(random_tensor(Shape{c / 2, c}, seed));
  p.fc1_bias = Var<D>::parameter(random_tensor(Shape{c / 2}, seed + 1));
  p.fc2_weight = Var<D>::parameter(random_tensor(Shape{c, c / 2}, seed + 2));
  p.fc2_bias = Var<D>::parameter(random_tensor(Shape{c}, seed + 3));
  p.conv_weight = Var<D>::parameter(random_tensor(Shape{1, c, 1, 1}, seed + 4));
  p.conv_bias = Var<D>::parameter(random_tensor(Shape{1}, seed + 5));
  return p;
}

Var<D> cst(const Tensor<D>& t) { return Var<D>::constant(t); }

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST(ChannelAttention, ZeroWeightsGiveHalf) {
  const Tensor<D> x = random_tensor(Shape{4, 3, 3}, 1);
  const auto [s, y] = channel_attention(cst(x), zero_params(4));
  for (double v : s.value().data()) EXPECT_EQ(v, 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], 0.5 * x[i]);
}

TEST(ChannelAttention, SaturatedBiasPassesInputThrough) {
  AttentionParams<D> p = zero_params(2);
  p.fc2_bias = Var<D>::parameter(Tensor<D>(Shape{2}, 20.0));
  const Tensor<D> x = random_tensor(Shape{2, 2, 2}, 2);
  const auto [s, y] = channel_attention(cst(x), p);
  for (double v : s.value().data()) EXPECT_NEAR(v, 1.0, 1e-8);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.value()[i], x[i], 1e-8);
}

TEST(ChannelAttention, HandEvaluatedChain) {
  AttentionParams<D> p = zero_params(2);
  p.fc1_weight = Var<D>::parameter(Tensor<D>(Shape{1, 2}, std::vector<D>{1, 0}));
  p.fc2_weight = Var<D>::parameter(Tensor<D>(Shape{2, 1}, std::vector<D>{1, 0}));
  Tensor<D> x(Shape{2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) x[i] = 2, x[4 + i] = 4;
  const auto [s, y] = channel_attention(cst(x), p);
  EXPECT_NEAR(s.value()[0], 0.8808, 1e-4);
  EXPECT_DOUBLE_EQ(s.value()[0], sigmoid(2.0));
  EXPECT_DOUBLE_EQ(s.value()[1], 0.5);
}

TEST(SpatialAttention, ZeroWeightsGiveHalf) {
  const Tensor<D> x = random_tensor(Shape{2, 3, 4}, 3);
  const auto [s, y] = spatial_attention(cst(x), zero_params(2));
  EXPECT_EQ(s.shape(), (Shape{3, 4}));
  for (double v : s.value().data()) EXPECT_EQ(v, 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], 0.5 * x[i]);
}

TEST(SpatialAttention, HandEvaluated) {
  AttentionParams<D> p = zero_params(2);
  p.conv_weight = Var<D>::parameter(Tensor<D>(Shape{1, 2, 1, 1}, 1.0));
  Tensor<D> x(Shape{2, 1, 2}, std::vector<D>{1, 0, 2, 0});
  const auto [s, y] = spatial_attention(cst(x), p);
  EXPECT_NEAR(s.value()[0], 0.9526, 1e-4);
  EXPECT_DOUBLE_EQ(s.value()[0], sigmoid(3.0));
  EXPECT_DOUBLE_EQ(s.value()[1], 0.5);  // zero pixel
}

TEST(AttentionForward, ZeroParamsHalveNonNegativeInput) {
  const Tensor<D> x = random_tensor(Shape{4, 4, 4}, 4, 0.0, 2.0);
  const auto y = attention_forward(cst(x), zero_params(4));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], 0.5 * x[i]);
}

TEST(AttentionForward, MaxOfScaledCopies) {
  // Channel gate 0.2 everywhere, spatial gate 0.8 everywhere.
  AttentionParams<D> p = zero_params(2);
  p.fc2_bias = Var<D>::parameter(Tensor<D>(Shape{2}, std::log(0.2 / 0.8)));
  p.conv_bias = Var<D>::parameter(Tensor<D>(Shape{1}, std::log(0.8 / 0.2)));
  const Tensor<D> x = random_tensor(Shape{2, 3, 3}, 5, 0.0, 1.0);
  const auto y = attention_forward(cst(x), p);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.value()[i], 0.8 * x[i], 1e-15);
}

TEST(AttentionForward, ZeroInputGivesZero) {
  const auto y = attention_forward(cst(Tensor<D>(Shape{2, 3, 3})), random_params(2, 6));
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(AttentionForward, GatesStrictlyInsideUnitInterval) {
  const Tensor<D> x = random_tensor(Shape{4, 5, 5}, 7, -3, 3);
  const auto p = random_params(4, 8);
  {
    const auto held = channel_attention(cst(x), p).first.value();
    for (double v : held.data()) EXPECT_TRUE(v > 0 && v < 1);
  }
  {
    const auto held = spatial_attention(cst(x), p).first.value();
    for (double v : held.data()) EXPECT_TRUE(v > 0 && v < 1);
  }
}

TEST(AttentionForward, AttenuatesNonNegativeInput) {
  const Tensor<D> x = random_tensor(Shape{6, 4, 4}, 9, 0.0, 5.0);
  const auto y = attention_forward(cst(x), random_params(6, 10));
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_GE(y.value()[i], 0.0);
    EXPECT_LE(y.value()[i], x[i]);
  }
}

TEST(AttentionForward, GradCheckThroughMaxOut) {
  auto x = Var<D>::parameter(random_tensor(Shape{2, 2, 2}, 11));
  const auto p = random_params(2, 12);
  const auto r = gradcheck([&] { return probe(attention_forward(x, p)); },
                           {x, p.fc1_weight, p.fc1_bias, p.fc2_weight, p.fc2_bias, p.conv_weight, p.conv_bias});
  EXPECT_LE(r.max_rel_error, 1e-5) << r.worst;
}

TEST(AttentionParams, ShapesAndCounts) {
  ParamStore<D> store;
  declare_attention(store, "att", 8, 1);
  const auto p = AttentionParams<D>::from_store(store, "att");
  EXPECT_EQ(p.fc1_weight.shape(), (Shape{4, 8}));
  EXPECT_EQ(p.fc2_weight.shape(), (Shape{8, 4}));
  EXPECT_EQ(p.conv_weight.shape(), (Shape{1, 8, 1, 1}));
  EXPECT_EQ(p.channels(), 8u);
  EXPECT_EQ(store.parameter_count(), attention_parameter_count(8));
  EXPECT_EQ(attention_parameter_count(8), 4u * 8 + 4 + 8 * 4 + 8 + 8 + 1);
}

TEST(AttentionParams, OddChannelsRejected) {
  ParamStore<D> store;
  EXPECT_THROW(declare_attention(store, "att", 3, 1), Error);
}

TEST(AttentionParams, ChannelMismatch) {
  EXPECT_THROW(attention_forward(cst(Tensor<D>(Shape{4, 2, 2})), zero_params(2)), Error);
}
