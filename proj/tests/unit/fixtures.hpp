#pragma once

#include "athv/data.hpp"
#include "athv/masks.hpp"
#include "athv/networks.hpp"
#include "gradcheck.hpp"

namespace athv::testing {

/// Small multi-coil problem: a positive image, analytic maps, noiseless
/// k-space and its masked version.
struct TinyProblem {
  Tensor<D> image;
  SensitivityMaps<D> maps;
  KSpace<D> full;
  Mask mask;
  KSpace<D> masked;
};

inline TinyProblem tiny_problem(std::size_t n, std::size_t coils, double accel = 4.0, std::uint64_t seed = 1) {
  TinyProblem p;
  p.image = random_tensor(Shape{n, n}, seed, 0.2, 1.0);
  p.maps = make_coil_maps<D>(coils, n, n);
  p.full = simulate_acquisition(p.image, p.maps, 0.0, seed);
  p.mask = cartesian_mask(n, n, accel, 0.25, MaskKind::CartesianRandom, seed);
  p.masked = apply_mask(p.full, p.mask);
  return p;
}

inline ModelConfig tiny_config(Arch arch, std::size_t coils = 2, std::size_t cascades = 2) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.cascades = cascades;
  cfg.coils = coils;
  cfg.unet.base_channels = 4;
  cfg.unet.depth = 2;
  cfg.cascade_unet.base_channels = 4;
  cfg.cascade_unet.depth = 1;
  cfg.sens_unet.base_channels = 4;
  cfg.sens_unet.depth = 1;
  return cfg;
}

/// Copy of `model` with every parameter replaced by zeros.
inline Model<D> zeroed(const Model<D>& model) {
  Model<D> z;
  z.config = model.config;
  for (const auto& [name, v] : model.params) z.params.add(name, Tensor<D>(v.shape()));
  return z;
}

/// Copy of `model` with the parameters of groups starting with `prefix` zeroed.
inline Model<D> zero_group(const Model<D>& model, const std::string& prefix) {
  Model<D> z;
  z.config = model.config;
  for (const auto& [name, v] : model.params)
    z.params.add(name, name.rfind(prefix, 0) == 0 ? Tensor<D>(v.shape()) : v.value());
  return z;
}

inline Var<D> cst(const Tensor<D>& t) { return Var<D>::constant(t); }

}  // namespace athv::testing
