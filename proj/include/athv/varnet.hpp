#pragma once

#include "athv/networks.hpp"

namespace athv {

/// G(k) = F(E(CNN(R(F^-1(k))))): coil images are combined with the maps,
/// refined as a 2-channel complex image, re-expanded and transformed back.
template <typename T>
Var<T> refinement_term(const Var<T>& k_t, const Var<T>& maps, const UNetConfig& cfg, const ParamStore<T>& params,
                       const std::string& prefix);

/// Runs `cascades` steps of k <- k - eta_t M (k - k_masked) + G_t(k) starting
/// from k_masked, with weights under cascade<t>.eta / cascade<t>.cnn.
template <typename T>
Var<T> unroll_cascades(const Var<T>& k_masked, const Mask& mask, const Var<T>& maps, const ParamStore<T>& params,
                       const UNetConfig& cascade_cfg, std::size_t cascades);

/// Coil-combined magnitude |R(F^-1(k))| as an [H,W] image.
template <typename T>
Var<T> combined_magnitude(const Var<T>& k, const Var<T>& maps);

/// Unrolled k-space network; final == intermediate.
template <typename T>
ReconstructionOutput<T> forward_e2e_varnet(const Var<T>& k_masked, const Mask& mask, const Model<T>& model);

struct HybridOptions {
  bool attention = true;
  bool refinement = true;
};

/// Unrolled network with attention cascades, then final = intermediate + U-Net(intermediate).
template <typename T>
ReconstructionOutput<T> forward_atthybrid(const Var<T>& k_masked, const Mask& mask, const Model<T>& model,
                                          HybridOptions options = {});

/// Dispatches on the model's architecture. The U-Net baseline receives the
/// zero-filled image computed from k_masked.
template <typename T>
ReconstructionOutput<T> forward_model(const Model<T>& model, const Var<T>& k_masked, const Mask& mask);

}  // namespace athv
