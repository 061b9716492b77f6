#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "athv/autodiff.hpp"

namespace athv {

/// Named trainable tensors, ordered by their stable path strings
/// ("refine.enc0.conv1.weight"). The group of a parameter is the path
/// component before the first dot.
template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, Var<T>, std::less<>>;

  void add(const std::string& name, Tensor<T> init);
  const Var<T>& get(std::string_view name) const;
  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }

  std::size_t size() const { return params_.size(); }
  std::size_t parameter_count() const;
  std::size_t parameter_count(std::string_view group) const;
  std::vector<std::string> groups() const;

  void zero_grad();

  typename Map::const_iterator begin() const { return params_.begin(); }
  typename Map::const_iterator end() const { return params_.end(); }

 private:
  Map params_;
};

std::string group_of(std::string_view name);

/// Uniform(-b, b) with b = sqrt(6 / fan_in), drawn from a stream keyed by
/// (seed, name) so a parameter's value does not depend on what else exists.
template <typename T>
Tensor<T> kaiming_uniform(const Shape& shape, std::size_t fan_in, std::uint64_t seed, std::string_view name);

/// Registers name.weight (Kaiming) and name.bias (zeros) for a conv or linear layer.
template <typename T>
void declare_layer(ParamStore<T>& store, const std::string& name, Shape weight_shape, std::size_t fan_in,
                   std::uint64_t seed, bool zero_weight = false);

}  // namespace athv
