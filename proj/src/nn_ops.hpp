#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace denssiam {

enum class Mode { kTrain, kInfer };

// Geometry of a 2-D convolution. Kernels are stored (kh, kw, in, out).
struct ConvSpec {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  int in_channels = 0;
  int out_channels = 0;

  int out_h(int in_h) const { return out_extent(in_h, kernel_h, stride, padding, "conv2d"); }
  int out_w(int in_w) const { return out_extent(in_w, kernel_w, stride, padding, "conv2d"); }
};

// ---- convolution ----

// input (B,H,W,Cin), kernel (kh,kw,Cin,Cout), bias (Cout) or empty.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, const ConvSpec& spec);

template <typename T>
struct ConvGrads {
  Tensor<T> input_grad;
  Tensor<T> kernel_grad;
  Tensor<T> bias_grad;
};

// `want_input_grad=false` skips the dX GEMM (first layer of a net).
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel,
                             const ConvSpec& spec, const Tensor<T>& upstream_grad,
                             bool want_input_grad = true);

// ---- average pooling ----

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int size, int stride);

template <typename T>
Tensor<T> avg_pool2d_backward(const std::vector<int>& input_shape, int size,
                              int stride, const Tensor<T>& upstream_grad);

// ---- batch normalization ----

template <typename T>
struct BatchNormResult {
  Tensor<T> output;
  Tensor<T> xhat;          // cached normalized input (train mode)
  std::vector<T> inv_std;  // per channel
};

// Train mode normalizes with batch statistics over batch*spatial (biased
// variance, epsilon added), updates running stats as
// r <- momentum*r + (1-momentum)*batch, and requires batch > 1.
// Infer mode normalizes with the running stats and caches nothing.
// running_mean / running_var are rank-1 (channels) tensors.
template <typename T>
BatchNormResult<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                              const Tensor<T>& beta, Tensor<T>& running_mean,
                              Tensor<T>& running_var, Mode mode, T epsilon,
                              T momentum);

template <typename T>
struct BatchNormGrads {
  Tensor<T> input_grad;
  Tensor<T> gamma_grad;
  Tensor<T> beta_grad;
};

template <typename T>
BatchNormGrads<T> batch_norm_backward(const Tensor<T>& upstream_grad,
                                      const Tensor<T>& xhat,
                                      const std::vector<T>& inv_std,
                                      const Tensor<T>& gamma);

// ---- elementwise / shape ops ----

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

// Needs the forward *output* (mask is output > 0).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& upstream_grad);

// Stabilized softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& input, int axis);

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& output, const Tensor<T>& upstream_grad,
                           int axis);

// Channel concatenation (axis 3) of rank-4 tensors.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts);

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& grad,
                                      const std::vector<int>& channel_counts);

// 2-D matrix product (n,k) x (k,m).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
struct MatmulGrads {
  Tensor<T> a_grad;
  Tensor<T> b_grad;
};

template <typename T>
MatmulGrads<T> matmul_backward(const Tensor<T>& a, const Tensor<T>& b,
                               const Tensor<T>& upstream_grad);

// Inverted dropout: train mode zeroes each element with probability p and
// scales survivors by 1/(1-p); infer mode is the identity. The mask is a
// pure function of (seed, flat index), so backward recomputes it.
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double p, std::uint64_t seed, Mode mode);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& upstream_grad, double p,
                           std::uint64_t seed, Mode mode);

}  // namespace denssiam
