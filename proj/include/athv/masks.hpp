#pragma once

#include <cstdint>

#include "athv/kspace.hpp"

namespace athv {

/// Nearest integer, halves rounded away from zero. Used for every sample budget.
long round_half_away(double v);

/// Column mask replicated over rows: round(w * center_fraction) contiguous
/// central columns plus extra columns up to round(w / accel) in total. The
/// extras are drawn uniformly without replacement (random) or evenly spaced
/// over the non-central columns with a seeded offset (equispaced).
Mask cartesian_mask(std::size_t h, std::size_t w, double accel, double center_fraction, MaskKind kind,
                    std::uint64_t seed);

/// Point mask with exactly round(h * w / accel) samples: a fully sampled
/// central square of side round(sqrt(h * w) * center_fraction), the rest drawn
/// without replacement with weight exp(-d^2 / (2 sigma^2)),
/// sigma = sigma_scale * min(h, w), d the distance to the k-space center.
Mask gaussian2d_mask(std::size_t h, std::size_t w, double accel, double center_fraction = 0.04,
                     double sigma_scale = 0.25, std::uint64_t seed = 0);

/// Parameters naming one mask family; `make(seed)` regenerates a member.
struct MaskSpec {
  MaskKind kind = MaskKind::CartesianRandom;
  double accel = 4.0;
  double center_fraction = 0.08;
  double sigma_scale = 0.25;

  Mask make(std::size_t h, std::size_t w, std::uint64_t seed) const;
};

}  // namespace athv
