#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "athv/kspace.hpp"
#include "athv/params.hpp"
#include "athv/unet.hpp"

namespace athv {

enum class Arch { UNet, WNet, E2EVarNet, AttHybridVarNet };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& s);
inline bool is_varnet(Arch a) { return a == Arch::E2EVarNet || a == Arch::AttHybridVarNet; }

/// Architecture plus the widths of its sub-networks. Channel counts inside the
/// UNetConfigs are filled in by resolved(); only widths and depths matter here.
struct ModelConfig {
  Arch arch = Arch::AttHybridVarNet;
  std::size_t cascades = 8;
  std::size_t coils = 4;
  /// U-Net baseline, W-Net (both halves) and the image-domain refinement net.
  UNetConfig unet{1, 1, 32, 4, false};
  UNetConfig cascade_unet{2, 2, 16, 3, false};
  UNetConfig sens_unet{2, 2, 8, 2, false};
  double alpha = 1.0;
  /// Zero the last layer of every additive/residual sub-network at init.
  bool zero_init_residual = true;

  void validate() const;
  /// Copy with channel counts and attention flags set per architecture.
  ModelConfig resolved() const;

  /// Line-oriented `key = value` text, the checkpoint header format.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  /// Applies recognised keys from a parsed config map, leaving others alone.
  void apply(const std::map<std::string, std::string>& kv);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct Model {
  ModelConfig config;  // resolved
  ParamStore<T> params;
};

/// Every parameter initialized (Kaiming-uniform weights, zero biases, eta = 1);
/// deterministic in (config, seed).
template <typename T>
Model<T> build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Both magnitude images are [H,W].
template <typename T>
struct ReconstructionOutput {
  Var<T> intermediate;
  Var<T> final;
  Var<T> k_final;  // [N,2,H,W]; W-Net's refined k-space, unset for the U-Net baseline
  Var<T> maps;     // estimated sensitivities, varnets only
};

/// Calibration-region k-space -> per-coil images -> shared residual U-Net
/// refiner -> per-pixel normalization to unit root-sum-of-squares.
template <typename T>
Var<T> sens_estimate(const Var<T>& k_masked, const Mask& mask, const UNetConfig& cfg, const ParamStore<T>& params,
                     const std::string& prefix);

/// Root-sum-of-squares magnitude of the inverse transform of each coil.
template <typename T>
Var<T> zero_filled_image(const Var<T>& k_masked);

/// U-Net (plain mapping) on the zero-filled magnitude image [H,W].
template <typename T>
ReconstructionOutput<T> forward_unet(const Var<T>& zero_filled, const Model<T>& model);

/// k-space U-Net over 2N stacked channels, inverse transform + RSS, image U-Net.
template <typename T>
ReconstructionOutput<T> forward_wnet(const Var<T>& k_masked, const Mask& mask, const Model<T>& model);

// Checkpoints: container entries "config" (ModelConfig text) and "param/<path>".
template <typename T>
void save_model(const Model<T>& model, const std::filesystem::path& path);
template <typename T>
Model<T> load_model(const std::filesystem::path& path);

}  // namespace athv
