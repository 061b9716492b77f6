#include "athv/unet.hpp"

#include "athv/attention.hpp"
#include "athv/ops.hpp"

namespace athv {

void UNetConfig::validate() const {
  require(depth >= 1, ErrorCode::InvalidArgument, "U-Net depth must be >= 1");
  require(in_channels >= 1 && out_channels >= 1 && base_channels >= 1, ErrorCode::InvalidArgument,
          "U-Net channel counts must be positive");
  require(!with_attention || base_channels % 2 == 0, ErrorCode::InvalidArgument,
          "attention U-Nets need an even base width");
}

namespace {

std::size_t conv_count(std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; }

std::size_t block_count(std::size_t in, std::size_t out, bool attention) {
  return conv_count(in, out, 3) + conv_count(out, out, 3) + (attention ? attention_parameter_count(out) : 0);
}

template <typename T>
void declare_block(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out, bool attention,
                   std::uint64_t seed) {
  declare_layer(store, name + ".conv1", Shape{out, in, 3, 3}, in * 9, seed);
  declare_layer(store, name + ".conv2", Shape{out, out, 3, 3}, out * 9, seed);
  if (attention) declare_attention(store, name + ".att", out, seed);
}

template <typename T>
Var<T> block_forward(Var<T> h, const ParamStore<T>& store, const std::string& name, bool attention) {
  for (const char* conv : {".conv1", ".conv2"}) {
    const std::string c = name + conv;
    h = relu(instance_norm(conv2d(h, store.get(c + ".weight"), store.get(c + ".bias"), 1, 1)));
  }
  if (attention) h = attention_forward(h, AttentionParams<T>::from_store(store, name + ".att"));
  return h;
}

}  // namespace

template <typename T>
void declare_unet(ParamStore<T>& store, const std::string& prefix, const UNetConfig& cfg, std::uint64_t seed,
                  bool zero_final) {
  cfg.validate();
  std::size_t in = cfg.in_channels;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    declare_block(store, prefix + ".enc" + std::to_string(l), in, cfg.channels_at(l), cfg.with_attention, seed);
    in = cfg.channels_at(l);
  }
  declare_block(store, prefix + ".bottleneck", in, cfg.channels_at(cfg.depth), cfg.with_attention, seed);
  for (std::size_t l = cfg.depth; l-- > 0;)
    declare_block(store, prefix + ".dec" + std::to_string(l), cfg.channels_at(l + 1) + cfg.channels_at(l),
                  cfg.channels_at(l), cfg.with_attention, seed);
  declare_layer(store, prefix + ".final", Shape{cfg.out_channels, cfg.base_channels, 1, 1}, cfg.base_channels, seed,
                zero_final);
}

std::size_t unet_parameter_count(const UNetConfig& cfg) {
  cfg.validate();
  std::size_t n = 0, in = cfg.in_channels;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    n += block_count(in, cfg.channels_at(l), cfg.with_attention);
    in = cfg.channels_at(l);
  }
  n += block_count(in, cfg.channels_at(cfg.depth), cfg.with_attention);
  for (std::size_t l = 0; l < cfg.depth; ++l)
    n += block_count(cfg.channels_at(l + 1) + cfg.channels_at(l), cfg.channels_at(l), cfg.with_attention);
  return n + conv_count(cfg.base_channels, cfg.out_channels, 1);
}

template <typename T>
Var<T> unet_forward(const Var<T>& x, const UNetConfig& cfg, const ParamStore<T>& store, const std::string& prefix) {
  require(x.shape().size() == 3 && x.shape()[0] == cfg.in_channels, ErrorCode::ShapeMismatch,
          prefix + ": U-Net expects " + std::to_string(cfg.in_channels) + " input channels, got " +
              shape_str(x.shape()));
  const std::size_t h = x.shape()[1], w = x.shape()[2];
  const std::size_t multiple = std::size_t{1} << cfg.depth;
  const std::size_t ph = (multiple - h % multiple) % multiple, pw = (multiple - w % multiple) % multiple;
  Var<T> cur = (ph || pw) ? reflect_pad(x, ph / 2, ph - ph / 2, pw / 2, pw - pw / 2) : x;

  std::vector<Var<T>> skips;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    cur = block_forward(cur, store, prefix + ".enc" + std::to_string(l), cfg.with_attention);
    skips.push_back(cur);
    cur = pool_down(cur);
  }
  cur = block_forward(cur, store, prefix + ".bottleneck", cfg.with_attention);
  for (std::size_t l = cfg.depth; l-- > 0;) {
    cur = concat<T>({upsample(cur), skips[l]});
    cur = block_forward(cur, store, prefix + ".dec" + std::to_string(l), cfg.with_attention);
  }
  cur = conv2d(cur, store.get(prefix + ".final.weight"), store.get(prefix + ".final.bias"));
  return (ph || pw) ? crop(cur, ph / 2, pw / 2, h, w) : cur;
}

template void declare_unet(ParamStore<float>&, const std::string&, const UNetConfig&, std::uint64_t, bool);
template void declare_unet(ParamStore<double>&, const std::string&, const UNetConfig&, std::uint64_t, bool);
template Var<float> unet_forward(const Var<float>&, const UNetConfig&, const ParamStore<float>&, const std::string&);
template Var<double> unet_forward(const Var<double>&, const UNetConfig&, const ParamStore<double>&, const std::string&);

}  // namespace athv
