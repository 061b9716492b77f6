#include "athv/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "athv/rng.hpp"

namespace athv {

long round_half_away(double v) { return std::lround(v); }

namespace {

void check_common(std::size_t h, std::size_t w, double accel, double center_fraction) {
  require(h >= 1 && w >= 1, ErrorCode::InvalidArgument, "mask extents must be positive");
  require(std::isfinite(accel) && accel >= 1.0, ErrorCode::InvalidArgument, "acceleration must be >= 1");
  require(center_fraction >= 0.0 && center_fraction <= 1.0, ErrorCode::InvalidArgument,
          "center fraction must lie in [0, 1]");
}

}  // namespace

Mask cartesian_mask(std::size_t h, std::size_t w, double accel, double center_fraction, MaskKind kind,
                    std::uint64_t seed) {
  check_common(h, w, accel, center_fraction);
  require(kind != MaskKind::Gaussian2D, ErrorCode::InvalidArgument, "cartesian_mask needs a cartesian kind");
  const auto n_center = std::size_t(round_half_away(double(w) * center_fraction));
  const auto n_total = std::size_t(std::max(1L, round_half_away(double(w) / accel)));
  require(n_center <= n_total, ErrorCode::Infeasible,
          "center block of " + std::to_string(n_center) + " columns exceeds the budget of " + std::to_string(n_total));

  std::vector<std::uint8_t> columns(w, 0);
  const std::size_t c0 = (w - n_center + 1) / 2;
  for (std::size_t j = c0; j < c0 + n_center; ++j) columns[j] = 1;

  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < w; ++j)
    if (!columns[j]) candidates.push_back(j);
  const std::size_t extra = n_total - n_center;
  Rng rng(seed);
  if (kind == MaskKind::CartesianRandom) {
    // Partial Fisher-Yates: the first `extra` slots are a uniform draw.
    for (std::size_t i = 0; i < extra; ++i) {
      const std::size_t j = i + rng.below(candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
      columns[candidates[i]] = 1;
    }
  } else if (extra > 0) {
    const double spacing = double(candidates.size()) / double(extra);
    const double offset = rng.uniform();
    for (std::size_t i = 0; i < extra; ++i)
      columns[candidates[std::size_t(std::floor((double(i) + offset) * spacing))]] = 1;
  }

  Mask m;
  m.height = h;
  m.width = w;
  m.accel = accel;
  m.center_fraction = center_fraction;
  m.kind = kind;
  m.seed = seed;
  m.pattern.resize(h * w);
  for (std::size_t i = 0; i < h; ++i) std::copy(columns.begin(), columns.end(), m.pattern.begin() + i * w);
  m.center = n_total == w ? CalibrationRegion{0, h, 0, w} : CalibrationRegion{0, n_center ? h : 0, c0, n_center};
  return m;
}

Mask gaussian2d_mask(std::size_t h, std::size_t w, double accel, double center_fraction, double sigma_scale,
                     std::uint64_t seed) {
  check_common(h, w, accel, center_fraction);
  require(sigma_scale > 0.0, ErrorCode::InvalidArgument, "sigma_scale must be positive");
  const std::size_t total = h * w;
  const auto budget = std::size_t(std::max(1L, round_half_away(double(total) / accel)));
  const auto side = std::size_t(round_half_away(std::sqrt(double(total)) * center_fraction));
  require(side <= std::min(h, w) && side * side <= budget, ErrorCode::Infeasible,
          "central block of side " + std::to_string(side) + " exceeds the budget of " + std::to_string(budget));

  Mask m;
  m.height = h;
  m.width = w;
  m.accel = accel;
  m.center_fraction = center_fraction;
  m.kind = MaskKind::Gaussian2D;
  m.seed = seed;
  m.pattern.assign(total, 0);
  const std::size_t r0 = (h - side + 1) / 2, c0 = (w - side + 1) / 2;
  for (std::size_t i = r0; i < r0 + side; ++i)
    for (std::size_t j = c0; j < c0 + side; ++j) m.pattern[i * w + j] = 1;
  m.center = budget == total ? CalibrationRegion{0, h, 0, w} : CalibrationRegion{r0, side, c0, side};

  // Weighted sampling without replacement (Efraimidis-Spirakis): keep the
  // points with the largest log(u) / weight.
  const double sigma = sigma_scale * double(std::min(h, w));
  const double ci = double(h / 2), cj = double(w / 2);
  Rng rng(seed);
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(total);
  for (std::size_t p = 0; p < total; ++p) {
    if (m.pattern[p]) continue;
    const double di = double(p / w) - ci, dj = double(p % w) - cj;
    const double weight = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    double u;
    do {
      u = rng.uniform();
    } while (u <= 0.0);
    keys.emplace_back(weight > 0.0 ? std::log(u) / weight : -INFINITY, p);
  }
  const std::size_t extra = budget - side * side;
  auto by_key = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
  std::partial_sort(keys.begin(), keys.begin() + std::ptrdiff_t(extra), keys.end(), by_key);
  for (std::size_t k = 0; k < extra; ++k) m.pattern[keys[k].second] = 1;
  return m;
}

Mask MaskSpec::make(std::size_t h, std::size_t w, std::uint64_t seed) const {
  if (kind == MaskKind::Gaussian2D) return gaussian2d_mask(h, w, accel, center_fraction, sigma_scale, seed);
  return cartesian_mask(h, w, accel, center_fraction, kind, seed);
}

}  // namespace athv
