#pragma once

#include <vector>

#include "athv/autodiff.hpp"

namespace athv {

// Elementwise binary ops broadcast numpy-style (right-aligned, singleton axes).
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
/// Pointwise maximum. On ties the gradient goes to `a` in full.
template <typename T> Var<T> maximum(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> scale(const Var<T>& x, T factor);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);

/// Cross-correlation of x[C_in,H,W] with kernel[C_out,C_in,kH,kW] plus bias[C_out].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias, int stride = 1, int padding = 0);

/// [C,H,W] -> [C], per-channel spatial mean.
template <typename T> Var<T> global_avg_pool(const Var<T>& x);

/// x[in], weight[out,in], bias[out] -> [out].
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

/// 2x2 average pooling over the last two axes of [C,H,W]; H and W must be even.
template <typename T> Var<T> pool_down(const Var<T>& x);
/// Nearest-neighbour 2x upsampling over the last two axes of [C,H,W].
template <typename T> Var<T> upsample(const Var<T>& x);

/// Per-channel normalization of [C,H,W] to zero mean and unit (biased) variance.
template <typename T> Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));

/// Concatenation along axis 0.
template <typename T> Var<T> concat(const std::vector<Var<T>>& xs);
/// Slice [start, start+length) along axis 0.
template <typename T> Var<T> narrow(const Var<T>& x, std::size_t start, std::size_t length);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);

/// Reflect padding of the last two axes (no edge repeat, as numpy "reflect").
template <typename T>
Var<T> reflect_pad(const Var<T>& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right);
/// Window [top, top+h) x [left, left+w) of the last two axes.
template <typename T>
Var<T> crop(const Var<T>& x, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);

/// sqrt(mean((pred - target)^2)) / (max(target) - min(target) + eps), as a
/// scalar node differentiable in pred. The subgradient at zero error is 0.
template <typename T>
Var<T> nrmse_loss(const Tensor<T>& target, const Var<T>& pred, double eps = 1e-11);

}  // namespace athv
