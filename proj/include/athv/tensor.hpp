#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "athv/error.hpp"

namespace athv {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape);

/// Every buffer starts on a 64-byte boundary, so vectorized kernels take the
/// same code path (and round identically) regardless of allocation history.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

enum class DType : std::uint8_t { U8 = 0, F32 = 1, F64 = 2 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }

/// Dense row-major array. Channel-major [C, H, W] for images; complex data
/// uses a trailing-axis pair of real planes, e.g. [N, 2, H, W].
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(numel(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, const std::vector<T>& data) : Tensor(std::move(shape), Buffer<T>(data.begin(), data.end())) {}

  Tensor(Shape shape, Buffer<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    require(data_.size() == numel(shape_), ErrorCode::ShapeMismatch,
            "data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_str(shape_));
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, Buffer<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T item() const {
    require(data_.size() == 1, ErrorCode::ShapeMismatch, "item() on non-scalar " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape shape) const {
    require(numel(shape) == data_.size(), ErrorCode::ShapeMismatch,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    Buffer<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_extents() const {
    for (std::size_t d : shape_) require(d > 0, ErrorCode::InvalidArgument, "zero extent in shape " + shape_str(shape_));
  }

  Shape shape_;
  Buffer<T> data_;
};

/// Bitwise equality, distinguishing -0.0 from 0.0 and comparing NaN payloads.
template <typename T>
bool bit_identical(const Tensor<T>& a, const Tensor<T>& b);

/// FNV-1a over the raw little-endian bytes; used for golden regression values.
template <typename T>
std::uint64_t content_hash(const Tensor<T>& t);

}  // namespace athv
