#pragma once

#include <string>
#include <vector>

#include "nn_ops.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace denssiam {

// Per-forward context threaded through the net. dropout_salt changes every
// training step so masks differ across steps but stay reproducible.
struct FwdCtx {
  Mode mode = Mode::kInfer;
  bool cache = false;  // keep intermediates for a backward pass
  std::uint64_t dropout_salt = 0;
};

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ConvSpec spec, Param<T>* kernel, Param<T>* bias)
      : spec_(spec), kernel_(kernel), bias_(bias) {}

  Tensor<T> forward(const Tensor<T>& x, const FwdCtx& ctx);
  // Accumulates kernel/bias grads into the store; returns dX unless skipped.
  Tensor<T> backward(const Tensor<T>& dy, bool want_input_grad = true);

  const Tensor<T>& cached_input() const { return cached_input_; }
  const ConvSpec& spec() const { return spec_; }

 private:
  ConvSpec spec_;
  Param<T>* kernel_ = nullptr;
  Param<T>* bias_ = nullptr;
  Tensor<T> cached_input_;
};

template <typename T>
class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  BatchNormLayer(Param<T>* gamma, Param<T>* beta, Param<T>* run_mean,
                 Param<T>* run_var, T eps, T momentum)
      : gamma_(gamma), beta_(beta), run_mean_(run_mean), run_var_(run_var),
        eps_(eps), momentum_(momentum) {}

  Tensor<T> forward(const Tensor<T>& x, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  Param<T>* gamma_ = nullptr;
  Param<T>* beta_ = nullptr;
  Param<T>* run_mean_ = nullptr;
  Param<T>* run_var_ = nullptr;
  T eps_ = T(1e-5);
  T momentum_ = T(0.9);
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// Seeded dropout bound to a fixed site path; the mask stream is
// fork(salt, path), so every site draws independently per step.
template <typename T>
class DropoutSite {
 public:
  DropoutSite() = default;
  DropoutSite(std::string path, double rate)
      : path_(std::move(path)), rate_(rate) {}

  Tensor<T> forward(const Tensor<T>& x, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& dy) const;

 private:
  std::string path_;
  double rate_ = 0.0;
  std::uint64_t seed_ = 0;
  Mode mode_ = Mode::kInfer;
};

// One densely-connected layer: BN -> ReLU -> 1x1 conv (bottleneck) ->
// BN -> ReLU -> 3x3 conv (pad 1) -> dropout. Emits `growth` channels.
template <typename T>
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(ParamStore<T>& store, const std::string& path, int in_channels,
             int growth, int bottleneck, double dropout_rate, T bn_eps,
             T bn_momentum, Rng& init_rng);

  Tensor<T> forward(const Tensor<T>& concat_in, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& dy);

  int in_channels() const { return in_channels_; }

 private:
  int in_channels_ = 0;
  BatchNormLayer<T> bn1_, bn2_;
  Conv2dLayer<T> conv1_, conv2_;
  DropoutSite<T> drop_;
};

// Dense connectivity: layer l consumes concat(input, y_1 .. y_{l-1}) and
// the block returns concat(input, y_1 .. y_L).
template <typename T>
class DenseBlock {
 public:
  DenseBlock() = default;
  DenseBlock(ParamStore<T>& store, const std::string& path, int in_channels,
             int num_layers, int growth, int bottleneck, double dropout_rate,
             T bn_eps, T bn_momentum, Rng& init_rng);

  Tensor<T> forward(const Tensor<T>& x, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& dy);

  int out_channels() const;

 private:
  int in_channels_ = 0;
  int growth_ = 0;
  std::vector<DenseLayer<T>> layers_;
};

// 1x1 conv to `out_channels`, 2x2 stride-2 average pool, dropout.
template <typename T>
class TransitionLayer {
 public:
  TransitionLayer() = default;
  TransitionLayer(ParamStore<T>& store, const std::string& path, int in_channels,
                  int out_channels, double dropout_rate, Rng& init_rng);

  Tensor<T> forward(const Tensor<T>& x, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  Conv2dLayer<T> conv_;
  DropoutSite<T> drop_;
  std::vector<int> pool_in_shape_;
};

// Pre-activation unit (BN -> ReLU -> conv) used by the final block.
template <typename T>
class PreActConvUnit {
 public:
  PreActConvUnit() = default;
  PreActConvUnit(ParamStore<T>& store, const std::string& path, ConvSpec spec,
                 T bn_eps, T bn_momentum, Rng& init_rng);

  Tensor<T> forward(const Tensor<T>& x, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  BatchNormLayer<T> bn_;
  Conv2dLayer<T> conv_;
};

// Binds to (or registers, with He fan-in init) a conv kernel + zero bias.
template <typename T>
Conv2dLayer<T> make_conv(ParamStore<T>& store, const std::string& path,
                         ConvSpec spec, Rng& init_rng, bool with_bias = true);

template <typename T>
BatchNormLayer<T> make_batch_norm(ParamStore<T>& store, const std::string& path,
                                  int channels, T eps, T momentum);

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& from);

}  // namespace denssiam
