#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "athv/kvtext.hpp"
#include "athv/unet.hpp"
#include "gradcheck.hpp"

using namespace athv;
using namespace athv::testing;

namespace {

std::size_t golden_count(const std::string& key) {
  std::ifstream in(std::string(ATHV_GOLDEN_DIR) + "/parameter_counts.txt");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return std::stoul(parse_key_values(text).at(key));
}

}  // namespace

TEST(UNet, ParameterCountMatchesGolden) {
  const UNetConfig cfg{1, 1, 32, 4, false};
  EXPECT_EQ(unet_parameter_count(cfg), golden_count("unet_base32_depth4"));
  ParamStore<float> store;
  declare_unet(store, "unet", cfg, 0);
  EXPECT_EQ(store.parameter_count(), 7846081u);
}

TEST(UNet, ClosedFormCountAgreesWithDeclaration) {
  for (const UNetConfig cfg : {UNetConfig{2, 2, 8, 1, false}, UNetConfig{2, 2, 16, 3, true}, UNetConfig{8, 8, 4, 2, false},
                               UNetConfig{1, 1, 6, 2, true}}) {
    ParamStore<double> store;
    declare_unet(store, "n", cfg, 3);
    EXPECT_EQ(store.parameter_count(), unet_parameter_count(cfg));
  }
}

TEST(UNet, ShapeContract) {
  const UNetConfig cfg{3, 5, 4, 2, false};
  ParamStore<double> store;
  declare_unet(store, "n", cfg, 1);
  const auto y = unet_forward(Var<D>::constant(random_tensor(Shape{3, 16, 12}, 2)), cfg, store, "n");
  EXPECT_EQ(y.shape(), (Shape{5, 16, 12}));
}

TEST(UNet, NonMultipleExtentsArePaddedAndCropped) {
  const UNetConfig cfg{1, 1, 4, 3, true};
  ParamStore<double> store;
  declare_unet(store, "n", cfg, 1);
  for (const Shape s : {Shape{1, 13, 10}, Shape{1, 7, 9}, Shape{1, 1, 1}}) {
    const auto y = unet_forward(Var<D>::constant(random_tensor(s, 3)), cfg, store, "n");
    EXPECT_EQ(y.shape(), s);
    for (double v : y.value().data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(UNet, WrongInputChannels) {
  const UNetConfig cfg{2, 2, 4, 1, false};
  ParamStore<double> store;
  declare_unet(store, "n", cfg, 1);
  EXPECT_THROW(unet_forward(Var<D>::constant(Tensor<D>(Shape{1, 8, 8})), cfg, store, "n"), Error);
}

TEST(UNet, ZeroFinalLayerGivesZeroOutput) {
  const UNetConfig cfg{2, 2, 4, 2, true};
  ParamStore<double> store;
  declare_unet(store, "n", cfg, 1, true);
  const auto y = unet_forward(Var<D>::constant(random_tensor(Shape{2, 8, 8}, 4)), cfg, store, "n");
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(UNet, AllZeroParametersGiveZeroOutput) {
  const UNetConfig cfg{1, 1, 4, 2, true};
  ParamStore<double> declared;
  declare_unet(declared, "n", cfg, 1);
  ParamStore<double> store;
  for (const auto& [name, v] : declared) store.add(name, Tensor<D>(v.shape()));
  const auto y = unet_forward(Var<D>::constant(random_tensor(Shape{1, 8, 8}, 5)), cfg, store, "n");
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(UNet, DeterministicInSeed) {
  const UNetConfig cfg{1, 1, 4, 2, false};
  ParamStore<double> a, b, c;
  declare_unet(a, "n", cfg, 7);
  declare_unet(b, "n", cfg, 7);
  declare_unet(c, "n", cfg, 8);
  const Var<D> x = Var<D>::constant(random_tensor(Shape{1, 8, 8}, 6));
  EXPECT_TRUE(bit_identical(unet_forward(x, cfg, a, "n").value(), unet_forward(x, cfg, b, "n").value()));
  EXPECT_FALSE(bit_identical(unet_forward(x, cfg, a, "n").value(), unet_forward(x, cfg, c, "n").value()));
}

TEST(UNet, AttentionAddsLayersToEveryBlock) {
  ParamStore<double> store;
  declare_unet(store, "n", UNetConfig{1, 1, 4, 2, true}, 1);
  for (const char* block : {"enc0", "enc1", "bottleneck", "dec1", "dec0"})
    EXPECT_TRUE(store.contains(std::string("n.") + block + ".att.fc1.weight")) << block;
  ParamStore<double> plain;
  declare_unet(plain, "n", UNetConfig{1, 1, 4, 2, false}, 1);
  EXPECT_FALSE(plain.contains("n.enc0.att.fc1.weight"));
}

TEST(UNet, InvalidConfigs) {
  EXPECT_THROW((UNetConfig{1, 1, 4, 0, false}.validate()), Error);
  EXPECT_THROW((UNetConfig{1, 1, 5, 2, true}.validate()), Error);
  EXPECT_THROW((UNetConfig{0, 1, 4, 2, false}.validate()), Error);
}

TEST(UNet, GradCheck) {
  const UNetConfig cfg{1, 1, 2, 1, true};
  ParamStore<double> store;
  declare_unet(store, "n", cfg, 11);
  // Non-zero biases keep the gradient away from the relu kinks at init.
  ParamStore<double> perturbed;
  for (const auto& [name, v] : store) {
    Tensor<D> t = v.value();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.05 * random_tensor(t.shape(), 12)[i];
    perturbed.add(name, std::move(t));
  }
  auto x = Var<D>::parameter(random_tensor(Shape{1, 4, 4}, 13));
  std::vector<Var<D>> inputs{x};
  for (const auto& [name, v] : perturbed) inputs.push_back(v);
  const auto r = gradcheck([&] { return probe(unet_forward(x, cfg, perturbed, "n")); }, inputs, 1e-6, 16);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}
