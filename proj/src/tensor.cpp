#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace denssiam {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

int out_extent(int extent, int window, int stride, int padding,
               const std::string& what) {
  const int out = (extent + 2 * padding - window) / stride + 1;
  if (extent + 2 * padding < window || out <= 0) {
    throw ConfigError(what + ": window " + std::to_string(window) + " stride " +
                      std::to_string(stride) + " pad " + std::to_string(padding) +
                      " gives non-positive output for extent " +
                      std::to_string(extent));
  }
  return out;
}

template <typename T>
Tensor<T>::Tensor(std::vector<int> shape, uninit_tag) : shape_(std::move(shape)) {
  if (shape_.size() > 4) {
    throw ContractError("tensor rank > 4: " + shape_str(shape_));
  }
  for (int d : shape_) {
    if (d < 0) throw ContractError("negative dimension in " + shape_str(shape_));
  }
  data_.resize(shape_numel(shape_));  // default-init: no fill
}

template <typename T>
Tensor<T>::Tensor(std::vector<int> shape) : Tensor(std::move(shape), uninit_tag{}) {
  std::fill(data_.begin(), data_.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::uninit(std::vector<int> shape) {
  return Tensor(std::move(shape), uninit_tag{});
}

template <typename T>
Tensor<T> Tensor<T>::full(std::vector<int> shape, T v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::randn(std::vector<int> shape, Rng& rng, T stddev) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>(rng.normal()) * stddev;
  }
  return t;
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
void Tensor<T>::check_finite(const std::string& what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(what + ": non-finite value at flat index " +
                         std::to_string(i));
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace denssiam
