#pragma once

#include <cstdint>
#include <string>

#include "athv/params.hpp"

namespace athv {

struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t base_channels = 32;
  std::size_t depth = 4;
  bool with_attention = false;

  /// Throws on depth 0 or an odd base width with attention enabled.
  void validate() const;
  std::size_t channels_at(std::size_t level) const { return base_channels << level; }
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

/// Registers every weight of a U-Net under `prefix`. The final 1x1 conv is
/// zeroed when `zero_final` is set, turning a residual use into the identity.
template <typename T>
void declare_unet(ParamStore<T>& store, const std::string& prefix, const UNetConfig& cfg, std::uint64_t seed,
                  bool zero_final = false);

/// Closed-form parameter count of declare_unet for `cfg`.
std::size_t unet_parameter_count(const UNetConfig& cfg);

/// Encoder (conv block + 2x2 average pool) x depth, bottleneck block, decoder
/// (nearest upsample, concatenated skip, conv block) x depth, final 1x1 conv.
/// A conv block is (3x3 conv, instance norm, relu) x 2, followed by an
/// attention layer when enabled. Inputs whose extents are not multiples of
/// 2^depth are reflect-padded and the output cropped back.
template <typename T>
Var<T> unet_forward(const Var<T>& x, const UNetConfig& cfg, const ParamStore<T>& store, const std::string& prefix);

}  // namespace athv
