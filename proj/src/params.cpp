#include "athv/params.hpp"

#include <cmath>

#include "athv/rng.hpp"

namespace athv {

std::string group_of(std::string_view name) {
  return std::string(name.substr(0, name.find('.')));
}

template <typename T>
void ParamStore<T>::add(const std::string& name, Tensor<T> init) {
  require(!contains(name), ErrorCode::InvalidArgument, "duplicate parameter '" + name + "'");
  params_.emplace(name, Var<T>::parameter(std::move(init)));
}

template <typename T>
const Var<T>& ParamStore<T>::get(std::string_view name) const {
  auto it = params_.find(name);
  require(it != params_.end(), ErrorCode::InvalidArgument, "missing parameter '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.size();
  return n;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count(std::string_view group) const {
  std::size_t n = 0;
  for (const auto& [name, v] : params_)
    if (group_of(name) == group) n += v.size();
  return n;
}

template <typename T>
std::vector<std::string> ParamStore<T>::groups() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : params_) {
    std::string g = group_of(name);
    if (out.empty() || out.back() != g) out.push_back(std::move(g));
  }
  return out;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

template <typename T>
Tensor<T> kaiming_uniform(const Shape& shape, std::size_t fan_in, std::uint64_t seed, std::string_view name) {
  Rng rng(derive_seed(seed, name));
  const double bound = std::sqrt(6.0 / double(fan_in));
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = T(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
void declare_layer(ParamStore<T>& store, const std::string& name, Shape weight_shape, std::size_t fan_in,
                   std::uint64_t seed, bool zero_weight) {
  const std::size_t out = weight_shape[0];
  const std::string wname = name + ".weight";
  store.add(wname, zero_weight ? Tensor<T>(weight_shape) : kaiming_uniform<T>(weight_shape, fan_in, seed, wname));
  store.add(name + ".bias", Tensor<T>(Shape{out}));
}

template class ParamStore<float>;
template class ParamStore<double>;
template Tensor<float> kaiming_uniform(const Shape&, std::size_t, std::uint64_t, std::string_view);
template Tensor<double> kaiming_uniform(const Shape&, std::size_t, std::uint64_t, std::string_view);
template void declare_layer(ParamStore<float>&, const std::string&, Shape, std::size_t, std::uint64_t, bool);
template void declare_layer(ParamStore<double>&, const std::string&, Shape, std::size_t, std::uint64_t, bool);

}  // namespace athv
