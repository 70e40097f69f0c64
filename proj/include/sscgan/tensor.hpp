#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sscgan/error.hpp"

namespace sscgan::nn {

using Shape = std::vector<int>;

// 64-byte aligned storage. Vectorized Eigen kernels pick code paths by
// buffer alignment, so a fixed alignment keeps results bitwise reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major array with an explicit shape.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[axis]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  AlignedVector<T>& storage() { return data_; }
  const AlignedVector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) throw ShapeError("reshape changes element count");
    shape_ = std::move(shape);
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::copy(data_.begin(), data_.end(), out.data());
    return out;
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

}  // namespace sscgan::nn
