#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "athv/autodiff.hpp"
#include "athv/tensor.hpp"

namespace athv {

// Complex fields are real tensors with a (real, imaginary) plane pair just
// before the spatial axes: an image is [2,H,W], coil data is [N,2,H,W].

/// Complex image x, stored as [2,H,W].
template <typename T>
struct ComplexImage {
  Tensor<T> data;

  ComplexImage() = default;
  explicit ComplexImage(Tensor<T> t);
  std::size_t height() const { return data.dim(1); }
  std::size_t width() const { return data.dim(2); }
};

/// Multi-coil k-space [N,2,H,W].
template <typename T>
struct KSpace {
  Tensor<T> data;

  KSpace() = default;
  explicit KSpace(Tensor<T> t);
  std::size_t coils() const { return data.dim(0); }
  std::size_t height() const { return data.dim(2); }
  std::size_t width() const { return data.dim(3); }
};

/// Coil sensitivities [N,2,H,W]; normalized maps satisfy sum_i |S_i|^2 = 1.
template <typename T>
struct SensitivityMaps {
  Tensor<T> maps;

  SensitivityMaps() = default;
  explicit SensitivityMaps(Tensor<T> t);
  std::size_t coils() const { return maps.dim(0); }
  /// Largest |sum_i |S_i(p)|^2 - 1| over all pixels.
  double max_normalization_error() const;
};

enum class MaskKind : std::uint8_t { CartesianRandom, CartesianEquispaced, Gaussian2D };

std::string to_string(MaskKind kind);
MaskKind parse_mask_kind(const std::string& s);

/// Axis-aligned block of k-space that a mask samples fully.
struct CalibrationRegion {
  std::size_t row0 = 0, rows = 0, col0 = 0, cols = 0;
  bool empty() const { return rows == 0 || cols == 0; }
  friend bool operator==(const CalibrationRegion&, const CalibrationRegion&) = default;
};

/// Binary undersampling pattern with the parameters that produced it.
struct Mask {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> pattern;  // row-major, values in {0,1}
  double accel = 1.0;
  double center_fraction = 0.0;
  MaskKind kind = MaskKind::CartesianRandom;
  std::uint64_t seed = 0;
  CalibrationRegion center;

  std::size_t sampled() const;
  bool at(std::size_t row, std::size_t col) const { return pattern[row * width + col] != 0; }
  /// Number of columns containing at least one sample.
  std::size_t sampled_columns() const;

  template <typename T>
  Tensor<T> as_tensor() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

// ---- plain transforms -------------------------------------------------------

/// Centered orthonormal 2-D DFT over the last two axes of [...,2,H,W]. H and W
/// must be powers of two.
template <typename T>
Tensor<T> fft2c(const Tensor<T>& x);
template <typename T>
Tensor<T> ifft2c(const Tensor<T>& x);

template <typename T>
KSpace<T> apply_mask(const KSpace<T>& k, const Mask& m);
template <typename T>
Tensor<T> expand(const ComplexImage<T>& x, const SensitivityMaps<T>& s);
template <typename T>
ComplexImage<T> reduce(const Tensor<T>& coils, const SensitivityMaps<T>& s);
/// k_t - eta * M (k_t - k_ref) + g.
template <typename T>
KSpace<T> dc_step(const KSpace<T>& k_t, const KSpace<T>& k_ref, const Mask& m, T eta, const KSpace<T>& g);

/// Per-pixel sqrt of the sum of squares over all leading planes: [...,H,W] -> [H,W].
template <typename T>
Tensor<T> root_sum_squares(const Tensor<T>& x);

// ---- differentiable counterparts -------------------------------------------

template <typename T>
Var<T> fft2c(const Var<T>& x);
template <typename T>
Var<T> ifft2c(const Var<T>& x);
/// E(x) = (S_1 x, ..., S_N x): x[2,H,W], maps[N,2,H,W] -> [N,2,H,W].
template <typename T>
Var<T> expand(const Var<T>& x, const Var<T>& maps);
/// R(y) = sum_i conj(S_i) y_i: y[N,2,H,W], maps[N,2,H,W] -> [2,H,W].
template <typename T>
Var<T> reduce(const Var<T>& coils, const Var<T>& maps);
/// mask is a constant [H,W] pattern, eta a [1] tensor.
template <typename T>
Var<T> dc_step(const Var<T>& k_t, const Var<T>& k_ref, const Var<T>& mask, const Var<T>& eta, const Var<T>& g);
/// Subgradient 0 where the magnitude is 0.
template <typename T>
Var<T> root_sum_squares(const Var<T>& x);
/// S_i / sqrt(sum_j |S_j|^2) per pixel. Pixels with no energy become the
/// uniform real map 1/sqrt(N), with zero gradient.
template <typename T>
Var<T> normalize_maps(const Var<T>& maps);

}  // namespace athv
