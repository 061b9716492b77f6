#include "athv/networks.hpp"

#include "athv/container.hpp"
#include "athv/kvtext.hpp"
#include "athv/ops.hpp"

namespace athv {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::UNet: return "unet";
    case Arch::WNet: return "wnet";
    case Arch::E2EVarNet: return "e2e-varnet";
    case Arch::AttHybridVarNet: return "atthybrid-varnet";
  }
  return "unknown";
}

Arch parse_arch(const std::string& s) {
  if (s == "unet") return Arch::UNet;
  if (s == "wnet") return Arch::WNet;
  if (s == "e2e-varnet") return Arch::E2EVarNet;
  if (s == "atthybrid-varnet") return Arch::AttHybridVarNet;
  throw Error(ErrorCode::InvalidArgument, "unknown architecture '" + s + "'");
}

void ModelConfig::validate() const {
  require(!is_varnet(arch) || cascades >= 1, ErrorCode::InvalidArgument, "varnet architectures need cascades >= 1");
  require(alpha >= 0.0, ErrorCode::InvalidArgument, "alpha must be non-negative");
  require(coils >= 1, ErrorCode::InvalidArgument, "coils must be >= 1");
  const ModelConfig r = resolved();
  r.unet.validate();
  r.cascade_unet.validate();
  r.sens_unet.validate();
}

ModelConfig ModelConfig::resolved() const {
  ModelConfig r = *this;
  const bool att = arch == Arch::AttHybridVarNet;
  r.unet.in_channels = r.unet.out_channels = 1;
  r.unet.with_attention = att;
  r.cascade_unet.in_channels = r.cascade_unet.out_channels = 2;
  r.cascade_unet.with_attention = att;
  r.sens_unet.in_channels = r.sens_unet.out_channels = 2;
  r.sens_unet.with_attention = false;
  return r;
}

std::string ModelConfig::to_text() const {
  KeyValues kv{
      {"arch", to_string(arch)},
      {"cascades", std::to_string(cascades)},
      {"coils", std::to_string(coils)},
      {"alpha", format_double(alpha)},
      {"zero_init_residual", zero_init_residual ? "true" : "false"},
      {"unet_base", std::to_string(unet.base_channels)},
      {"unet_depth", std::to_string(unet.depth)},
      {"cascade_base", std::to_string(cascade_unet.base_channels)},
      {"cascade_depth", std::to_string(cascade_unet.depth)},
      {"sens_base", std::to_string(sens_unet.base_channels)},
      {"sens_depth", std::to_string(sens_unet.depth)},
  };
  return format_key_values(kv);
}

void ModelConfig::apply(const KeyValues& kv) {
  if (kv.count("arch")) arch = parse_arch(kv.at("arch"));
  cascades = kv_size(kv, "cascades", cascades);
  coils = kv_size(kv, "coils", coils);
  alpha = kv_double(kv, "alpha", alpha);
  zero_init_residual = kv_bool(kv, "zero_init_residual", zero_init_residual);
  unet.base_channels = kv_size(kv, "unet_base", unet.base_channels);
  unet.depth = kv_size(kv, "unet_depth", unet.depth);
  cascade_unet.base_channels = kv_size(kv, "cascade_base", cascade_unet.base_channels);
  cascade_unet.depth = kv_size(kv, "cascade_depth", cascade_unet.depth);
  sens_unet.base_channels = kv_size(kv, "sens_base", sens_unet.base_channels);
  sens_unet.depth = kv_size(kv, "sens_depth", sens_unet.depth);
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  cfg.apply(parse_key_values(text));
  return cfg.resolved();
}

namespace {

UNetConfig kspace_unet_config(const ModelConfig& cfg) {
  UNetConfig u = cfg.unet;
  u.in_channels = u.out_channels = 2 * cfg.coils;
  u.with_attention = false;
  return u;
}

}  // namespace

template <typename T>
Model<T> build_model(const ModelConfig& cfg_in, std::uint64_t seed) {
  cfg_in.validate();
  Model<T> m;
  m.config = cfg_in.resolved();
  const ModelConfig& cfg = m.config;
  const bool zr = cfg.zero_init_residual;
  switch (cfg.arch) {
    case Arch::UNet:
      declare_unet(m.params, "unet", cfg.unet, seed);
      break;
    case Arch::WNet:
      declare_unet(m.params, "kspace_unet", kspace_unet_config(cfg), seed);
      declare_unet(m.params, "image_unet", cfg.unet, seed);
      break;
    case Arch::E2EVarNet:
    case Arch::AttHybridVarNet:
      declare_unet(m.params, "sens", cfg.sens_unet, seed, zr);
      for (std::size_t t = 0; t < cfg.cascades; ++t) {
        const std::string p = "cascade" + std::to_string(t);
        m.params.add(p + ".eta", Tensor<T>::scalar(T(1)));
        declare_unet(m.params, p + ".cnn", cfg.cascade_unet, seed, zr);
      }
      if (cfg.arch == Arch::AttHybridVarNet) declare_unet(m.params, "refine", cfg.unet, seed, zr);
      break;
  }
  return m;
}

template <typename T>
Var<T> zero_filled_image(const Var<T>& k_masked) {
  return root_sum_squares(ifft2c(k_masked));
}

template <typename T>
Var<T> sens_estimate(const Var<T>& k_masked, const Mask& mask, const UNetConfig& cfg, const ParamStore<T>& params,
                     const std::string& prefix) {
  require(!mask.center.empty(), ErrorCode::InvalidArgument,
          "sensitivity estimation needs a mask with a fully sampled center region");
  const auto& ks = k_masked.shape();
  require(ks.size() == 4 && ks[1] == 2 && ks[2] == mask.height && ks[3] == mask.width, ErrorCode::ShapeMismatch,
          "k-space " + shape_str(ks) + " does not match the mask");
  const std::size_t n = ks[0], h = ks[2], w = ks[3];
  Tensor<T> window(Shape{h, w});
  const CalibrationRegion& c = mask.center;
  for (std::size_t i = c.row0; i < c.row0 + c.rows; ++i)
    for (std::size_t j = c.col0; j < c.col0 + c.cols; ++j) window[i * w + j] = T(1);
  const Var<T> coil_images = ifft2c(mul(k_masked, Var<T>::constant(std::move(window))));
  std::vector<Var<T>> refined;
  for (std::size_t i = 0; i < n; ++i) {
    const Var<T> raw = reshape(narrow(coil_images, i, 1), Shape{2, h, w});
    const Var<T> s = add(raw, unet_forward(raw, cfg, params, prefix));
    refined.push_back(reshape(s, Shape{1, 2, h, w}));
  }
  return normalize_maps(concat(refined));
}

template <typename T>
ReconstructionOutput<T> forward_unet(const Var<T>& zero_filled, const Model<T>& model) {
  require(model.config.arch == Arch::UNet, ErrorCode::InvalidArgument, "forward_unet needs a unet model");
  require(zero_filled.shape().size() == 2, ErrorCode::ShapeMismatch, "forward_unet expects an [H,W] image");
  const Shape hw = zero_filled.shape();
  const Var<T> out = unet_forward(reshape(zero_filled, Shape{1, hw[0], hw[1]}), model.config.unet, model.params, "unet");
  ReconstructionOutput<T> r;
  r.intermediate = r.final = reshape(out, hw);
  return r;
}

template <typename T>
ReconstructionOutput<T> forward_wnet(const Var<T>& k_masked, const Mask& mask, const Model<T>& model) {
  const ModelConfig& cfg = model.config;
  require(cfg.arch == Arch::WNet, ErrorCode::InvalidArgument, "forward_wnet needs a wnet model");
  const Shape ks = k_masked.shape();
  require(ks.size() == 4 && ks[0] == cfg.coils && ks[2] == mask.height && ks[3] == mask.width,
          ErrorCode::ShapeMismatch, "W-Net built for " + std::to_string(cfg.coils) + " coils got k-space " + shape_str(ks));
  const std::size_t h = ks[2], w = ks[3];
  const Var<T> stacked = reshape(k_masked, Shape{2 * ks[0], h, w});
  const Var<T> k_refined = reshape(unet_forward(stacked, kspace_unet_config(cfg), model.params, "kspace_unet"), ks);
  const Var<T> image = root_sum_squares(ifft2c(k_refined));
  const Var<T> out = unet_forward(reshape(image, Shape{1, h, w}), cfg.unet, model.params, "image_unet");
  ReconstructionOutput<T> r;
  r.intermediate = image;
  r.final = reshape(out, Shape{h, w});
  r.k_final = k_refined;
  return r;
}

template <typename T>
void save_model(const Model<T>& model, const std::filesystem::path& path) {
  std::vector<ContainerEntry> entries;
  entries.push_back(ContainerEntry::from_text("config", model.config.to_text()));
  for (const auto& [name, v] : model.params) entries.push_back(ContainerEntry::from_tensor("param/" + name, v.value()));
  write_container_file(path, entries);
}

template <typename T>
Model<T> load_model(const std::filesystem::path& path) {
  const auto entries = read_container_file(path);
  Model<T> m;
  m.config = ModelConfig::from_text(find_entry(entries, "config").text());
  m.config.validate();
  // Rebuild to learn the expected names and shapes, then overwrite.
  Model<T> fresh = build_model<T>(m.config, 0);
  std::size_t loaded = 0;
  for (const auto& e : entries) {
    if (e.name.rfind("param/", 0) != 0) continue;
    const std::string name = e.name.substr(6);
    require(fresh.params.contains(name), ErrorCode::Corrupt, "checkpoint parameter '" + name + "' unknown to its config");
    Tensor<T> t = e.to_tensor<T>();
    require(t.shape() == fresh.params.get(name).shape(), ErrorCode::Corrupt, "checkpoint parameter '" + name + "' has shape " + shape_str(t.shape()));
    m.params.add(name, std::move(t));
    ++loaded;
  }
  require(loaded == fresh.params.size(), ErrorCode::Corrupt,
          "checkpoint holds " + std::to_string(loaded) + " of " + std::to_string(fresh.params.size()) + " parameters");
  return m;
}

#define ATHV_INSTANTIATE_NETWORKS(T)                                                                            \
  template Model<T> build_model(const ModelConfig&, std::uint64_t);                                             \
  template Var<T> zero_filled_image(const Var<T>&);                                                             \
  template Var<T> sens_estimate(const Var<T>&, const Mask&, const UNetConfig&, const ParamStore<T>&,            \
                                const std::string&);                                                            \
  template ReconstructionOutput<T> forward_unet(const Var<T>&, const Model<T>&);                                \
  template ReconstructionOutput<T> forward_wnet(const Var<T>&, const Mask&, const Model<T>&);                   \
  template void save_model(const Model<T>&, const std::filesystem::path&);                                      \
  template Model<T> load_model(const std::filesystem::path&);

ATHV_INSTANTIATE_NETWORKS(float)
ATHV_INSTANTIATE_NETWORKS(double)

}  // namespace athv
