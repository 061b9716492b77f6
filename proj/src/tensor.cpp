#include "athv/tensor.hpp"

#include <cmath>
#include <cstring>

namespace athv {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
bool bit_identical(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(T)) == 0;
}

template <typename T>
std::uint64_t content_hash(const Tensor<T>& t) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.ptr());
  for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

template class Tensor<float>;
template class Tensor<double>;
template bool bit_identical(const Tensor<float>&, const Tensor<float>&);
template bool bit_identical(const Tensor<double>&, const Tensor<double>&);
template std::uint64_t content_hash(const Tensor<float>&);
template std::uint64_t content_hash(const Tensor<double>&);

}  // namespace athv
