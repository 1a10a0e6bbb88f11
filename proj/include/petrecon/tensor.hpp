#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <vector>

#include "petrecon/errors.hpp"

namespace petrecon::nn {

/// Cache-line aligned storage. Vectorized kernels round differently depending
/// on where a buffer starts, so a fixed alignment keeps results reproducible.
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
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

struct Shape {
  int n = 0;  // batch
  int c = 0;  // channels
  int h = 0;
  int w = 0;

  std::size_t numel() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NCHW tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, const std::vector<double>& data) : shape_(shape), data_(data.begin(), data.end()) {
    if (data_.size() != shape_.numel()) throw DimensionError("tensor data does not match its shape");
  }

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  /// Contiguous (c, h, w) block of batch item n.
  std::span<double> item(int n) { return std::span<double>(data_).subspan(n * item_size(), item_size()); }
  std::span<const double> item(int n) const {
    return std::span<const double>(data_).subspan(n * item_size(), item_size());
  }
  /// One (h, w) plane.
  std::span<double> plane(int n, int c) {
    return std::span<double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
  }
  std::span<const double> plane(int n, int c) const {
    return std::span<const double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t item_size() const { return static_cast<std::size_t>(shape_.c) * shape_.plane(); }
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_;
  AlignedBuffer data_;
};

}  // namespace petrecon::nn
