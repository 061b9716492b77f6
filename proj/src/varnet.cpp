#include "athv/varnet.hpp"

#include "athv/ops.hpp"

namespace athv {

template <typename T>
Var<T> refinement_term(const Var<T>& k_t, const Var<T>& maps, const UNetConfig& cfg, const ParamStore<T>& params,
                       const std::string& prefix) {
  require(k_t.shape() == maps.shape(), ErrorCode::ShapeMismatch,
          "refinement term: k-space " + shape_str(k_t.shape()) + " vs maps " + shape_str(maps.shape()));
  const Var<T> image = reduce(ifft2c(k_t), maps);
  return fft2c(expand(unet_forward(image, cfg, params, prefix), maps));
}

template <typename T>
Var<T> unroll_cascades(const Var<T>& k_masked, const Mask& mask, const Var<T>& maps, const ParamStore<T>& params,
                       const UNetConfig& cascade_cfg, std::size_t cascades) {
  const Var<T> pattern = Var<T>::constant(mask.as_tensor<T>());
  Var<T> k = k_masked;
  for (std::size_t t = 0; t < cascades; ++t) {
    const std::string p = "cascade" + std::to_string(t);
    const Var<T> g = refinement_term(k, maps, cascade_cfg, params, p + ".cnn");
    k = dc_step(k, k_masked, pattern, params.get(p + ".eta"), g);
  }
  return k;
}

template <typename T>
Var<T> combined_magnitude(const Var<T>& k, const Var<T>& maps) {
  return root_sum_squares(reduce(ifft2c(k), maps));
}

namespace {

template <typename T>
ReconstructionOutput<T> run_unrolled(const Var<T>& k_masked, const Mask& mask, const Model<T>& model,
                                     const UNetConfig& cascade_cfg) {
  const ModelConfig& cfg = model.config;
  ReconstructionOutput<T> r;
  r.maps = sens_estimate(k_masked, mask, cfg.sens_unet, model.params, "sens");
  r.k_final = unroll_cascades(k_masked, mask, r.maps, model.params, cascade_cfg, cfg.cascades);
  r.intermediate = r.final = combined_magnitude(r.k_final, r.maps);
  return r;
}

}  // namespace

template <typename T>
ReconstructionOutput<T> forward_e2e_varnet(const Var<T>& k_masked, const Mask& mask, const Model<T>& model) {
  require(is_varnet(model.config.arch), ErrorCode::InvalidArgument, "forward_e2e_varnet needs a varnet model");
  UNetConfig cascade_cfg = model.config.cascade_unet;
  cascade_cfg.with_attention = false;
  return run_unrolled(k_masked, mask, model, cascade_cfg);
}

template <typename T>
ReconstructionOutput<T> forward_atthybrid(const Var<T>& k_masked, const Mask& mask, const Model<T>& model,
                                          HybridOptions options) {
  require(model.config.arch == Arch::AttHybridVarNet, ErrorCode::InvalidArgument,
          "forward_atthybrid needs an atthybrid-varnet model");
  UNetConfig cascade_cfg = model.config.cascade_unet;
  cascade_cfg.with_attention = options.attention;
  ReconstructionOutput<T> r = run_unrolled(k_masked, mask, model, cascade_cfg);
  if (options.refinement) {
    const Shape hw = r.intermediate.shape();
    const Var<T> delta =
        unet_forward(reshape(r.intermediate, Shape{1, hw[0], hw[1]}), model.config.unet, model.params, "refine");
    r.final = add(r.intermediate, reshape(delta, hw));
  }
  return r;
}

template <typename T>
ReconstructionOutput<T> forward_model(const Model<T>& model, const Var<T>& k_masked, const Mask& mask) {
  switch (model.config.arch) {
    case Arch::UNet: return forward_unet(zero_filled_image(k_masked), model);
    case Arch::WNet: return forward_wnet(k_masked, mask, model);
    case Arch::E2EVarNet: return forward_e2e_varnet(k_masked, mask, model);
    case Arch::AttHybridVarNet: return forward_atthybrid(k_masked, mask, model);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown architecture");
}

#define ATHV_INSTANTIATE_VARNET(T)                                                                              \
  template Var<T> refinement_term(const Var<T>&, const Var<T>&, const UNetConfig&, const ParamStore<T>&,        \
                                  const std::string&);                                                          \
  template Var<T> unroll_cascades(const Var<T>&, const Mask&, const Var<T>&, const ParamStore<T>&,              \
                                  const UNetConfig&, std::size_t);                                              \
  template Var<T> combined_magnitude(const Var<T>&, const Var<T>&);                                             \
  template ReconstructionOutput<T> forward_e2e_varnet(const Var<T>&, const Mask&, const Model<T>&);             \
  template ReconstructionOutput<T> forward_atthybrid(const Var<T>&, const Mask&, const Model<T>&, HybridOptions); \
  template ReconstructionOutput<T> forward_model(const Model<T>&, const Var<T>&, const Mask&);

ATHV_INSTANTIATE_VARNET(float)
ATHV_INSTANTIATE_VARNET(double)

}  // namespace athv
