#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace denssiam {

// std::allocator that default-initializes scalars (no zero fill). Tensors
// zero their storage explicitly unless constructed via uninit().
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  template <typename U, typename... Args>
  void construct(U* ptr, Args&&... args) {
    if constexpr (sizeof...(Args) == 0) {
      ::new (static_cast<void*>(ptr)) U;
    } else {
      ::new (static_cast<void*>(ptr)) U(std::forward<Args>(args)...);
    }
  }
};

// Reusable scratch storage with no value initialization; grows, never
// shrinks. One thread_local instance per hot call site.
template <typename T>
class ScratchBuffer {
 public:
  T* resize(std::size_t n) {
    if (n > cap_) {
      data_ = std::make_unique_for_overwrite<T[]>(n);
      cap_ = n;
    }
    return data_.get();
  }

 private:
  std::unique_ptr<T[]> data_;
  std::size_t cap_ = 0;
};

// Dense row-major tensor, rank <= 4. Activations use the fixed layout
// (batch, height, width, channels); conv kernels use (kh, kw, in, out).
// float is the speed path, double the verification path.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  // Storage left uninitialized; caller must write every element.
  static Tensor uninit(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, T v);
  static Tensor randn(std::vector<int> shape, Rng& rng, T stddev = T(1));

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  T& at(int i) { return data_[static_cast<std::size_t>(i)]; }
  const T& at(int i) const { return data_[static_cast<std::size_t>(i)]; }
  T& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  const T& at(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  T& at(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  T& at(int b, int y, int x, int c) {
    return data_[((static_cast<std::size_t>(b) * shape_[1] + y) * shape_[2] + x) *
                     shape_[3] +
                 c];
  }
  const T& at(int b, int y, int x, int c) const {
    return data_[((static_cast<std::size_t>(b) * shape_[1] + y) * shape_[2] + x) *
                     shape_[3] +
                 c];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(T v);
  void zero() { fill(T(0)); }

  // Throws NumericError naming `what` on the first NaN/Inf.
  void check_finite(const std::string& what) const;

 private:
  struct uninit_tag {};
  Tensor(std::vector<int> shape, uninit_tag);

  std::vector<int> shape_;
  std::vector<T, DefaultInitAllocator<T>> data_;
};

std::string shape_str(const std::vector<int>& shape);

std::size_t shape_numel(const std::vector<int>& shape);

// floor((extent + 2*padding - window)/stride) + 1; ConfigError if <= 0.
int out_extent(int extent, int window, int stride, int padding,
               const std::string& what);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace denssiam
