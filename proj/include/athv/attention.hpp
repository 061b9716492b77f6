#pragma once

#include <string>
#include <utility>

#include "athv/params.hpp"

namespace athv {

/// Weights of one spatial/channel attention layer over C channels:
/// fc1 [C/2, C], fc2 [C, C/2] (each with bias) and a pointwise conv [1, C, 1, 1].
template <typename T>
struct AttentionParams {
  Var<T> fc1_weight, fc1_bias, fc2_weight, fc2_bias, conv_weight, conv_bias;

  /// Looks up prefix.fc1.weight etc.; throws if C is odd or shapes disagree.
  static AttentionParams from_store(const ParamStore<T>& store, const std::string& prefix);
  std::size_t channels() const { return fc2_weight.shape()[0]; }
};

/// Registers the attention weights under `prefix`. Rejects odd C.
template <typename T>
void declare_attention(ParamStore<T>& store, const std::string& prefix, std::size_t channels, std::uint64_t seed);

std::size_t attention_parameter_count(std::size_t channels);

/// s_c = sigmoid(fc2(relu(fc1(avgpool(x))))), y_c = s_c * x. Returns (s_c [C], y_c).
template <typename T>
std::pair<Var<T>, Var<T>> channel_attention(const Var<T>& x, const AttentionParams<T>& p);

/// s_s = sigmoid(conv1x1(x)), y_s = s_s * x. Returns (s_s [H,W], y_s).
template <typename T>
std::pair<Var<T>, Var<T>> spatial_attention(const Var<T>& x, const AttentionParams<T>& p);

/// max(y_c, y_s), elementwise.
template <typename T>
Var<T> attention_forward(const Var<T>& x, const AttentionParams<T>& p);

}  // namespace athv
