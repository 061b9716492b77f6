#include "athv/attention.hpp"

#include "athv/ops.hpp"

namespace athv {
namespace {

void check_even(std::size_t channels) {
  require(channels >= 2 && channels % 2 == 0, ErrorCode::InvalidArgument,
          "attention needs an even channel count, got " + std::to_string(channels));
}

template <typename T>
void check_input(const Var<T>& x, const AttentionParams<T>& p) {
  require(x.shape().size() == 3 && x.shape()[0] == p.channels(), ErrorCode::ShapeMismatch,
          "attention over " + std::to_string(p.channels()) + " channels got input " + shape_str(x.shape()));
}

}  // namespace

template <typename T>
AttentionParams<T> AttentionParams<T>::from_store(const ParamStore<T>& store, const std::string& prefix) {
  AttentionParams p{store.get(prefix + ".fc1.weight"), store.get(prefix + ".fc1.bias"),
                    store.get(prefix + ".fc2.weight"), store.get(prefix + ".fc2.bias"),
                    store.get(prefix + ".conv.weight"), store.get(prefix + ".conv.bias")};
  const std::size_t c = p.fc2_weight.shape()[0];
  check_even(c);
  require(p.fc1_weight.shape() == Shape{c / 2, c} && p.fc2_weight.shape() == Shape{c, c / 2} &&
              p.conv_weight.shape() == Shape{1, c, 1, 1},
          ErrorCode::ShapeMismatch, "inconsistent attention parameters under " + prefix);
  return p;
}

template <typename T>
void declare_attention(ParamStore<T>& store, const std::string& prefix, std::size_t channels, std::uint64_t seed) {
  check_even(channels);
  declare_layer(store, prefix + ".fc1", Shape{channels / 2, channels}, channels, seed);
  declare_layer(store, prefix + ".fc2", Shape{channels, channels / 2}, channels / 2, seed);
  declare_layer(store, prefix + ".conv", Shape{1, channels, 1, 1}, channels, seed);
}

std::size_t attention_parameter_count(std::size_t c) {
  return (c / 2) * c + c / 2 + c * (c / 2) + c + c + 1;
}

template <typename T>
std::pair<Var<T>, Var<T>> channel_attention(const Var<T>& x, const AttentionParams<T>& p) {
  check_input(x, p);
  const Var<T> z = global_avg_pool(x);
  const Var<T> hidden = relu(linear(z, p.fc1_weight, p.fc1_bias));
  const Var<T> s = sigmoid(linear(hidden, p.fc2_weight, p.fc2_bias));
  const Var<T> y = mul(x, reshape(s, Shape{p.channels(), 1, 1}));
  return {s, y};
}

template <typename T>
std::pair<Var<T>, Var<T>> spatial_attention(const Var<T>& x, const AttentionParams<T>& p) {
  check_input(x, p);
  const Var<T> s = sigmoid(conv2d(x, p.conv_weight, p.conv_bias));
  const Var<T> y = mul(x, s);
  return {reshape(s, Shape{x.shape()[1], x.shape()[2]}), y};
}

template <typename T>
Var<T> attention_forward(const Var<T>& x, const AttentionParams<T>& p) {
  auto [s_c, y_c] = channel_attention(x, p);
  auto [s_s, y_s] = spatial_attention(x, p);
  return maximum(y_c, y_s);
}

#define ATHV_INSTANTIATE_ATTENTION(T)                                                                      \
  template struct AttentionParams<T>;                                                                      \
  template void declare_attention(ParamStore<T>&, const std::string&, std::size_t, std::uint64_t);         \
  template std::pair<Var<T>, Var<T>> channel_attention(const Var<T>&, const AttentionParams<T>&);          \
  template std::pair<Var<T>, Var<T>> spatial_attention(const Var<T>&, const AttentionParams<T>&);          \
  template Var<T> attention_forward(const Var<T>&, const AttentionParams<T>&);

ATHV_INSTANTIATE_ATTENTION(float)
ATHV_INSTANTIATE_ATTENTION(double)

}  // namespace athv
