#include "layers.hpp"

#include <cmath>
#include <functional>

namespace denssiam {

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& from) {
  if (!into.same_shape(from)) {
    throw ContractError("accumulate: shape mismatch " + shape_str(into.shape()) +
                        " vs " + shape_str(from.shape()));
  }
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

namespace {

template <typename T>
Param<T>& get_or_add(ParamStore<T>& store, const std::string& name,
                     const std::function<Tensor<T>()>& init, bool trainable) {
  if (Param<T>* p = store.find(name)) return *p;
  return store.add(name, init(), trainable);
}

}  // namespace

template <typename T>
Conv2dLayer<T> make_conv(ParamStore<T>& store, const std::string& path,
                         ConvSpec spec, Rng& init_rng, bool with_bias) {
  const int fan_in = spec.kernel_h * spec.kernel_w * spec.in_channels;
  const T stddev = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
  Param<T>& kernel = get_or_add<T>(
      store, path + ".kernel",
      [&] {
        Rng krng = init_rng.fork(path + ".kernel");
        return Tensor<T>::randn(
            {spec.kernel_h, spec.kernel_w, spec.in_channels, spec.out_channels},
            krng, stddev);
      },
      true);
  Param<T>* bias = nullptr;
  if (with_bias) {
    bias = &get_or_add<T>(
        store, path + ".bias", [&] { return Tensor<T>({spec.out_channels}); },
        true);
  }
  return Conv2dLayer<T>(spec, &kernel, bias);
}

template <typename T>
BatchNormLayer<T> make_batch_norm(ParamStore<T>& store, const std::string& path,
                                  int channels, T eps, T momentum) {
  Param<T>& gamma = get_or_add<T>(
      store, path + ".gamma", [&] { return Tensor<T>::full({channels}, T(1)); },
      true);
  Param<T>& beta = get_or_add<T>(
      store, path + ".beta", [&] { return Tensor<T>({channels}); }, true);
  Param<T>& rm = get_or_add<T>(
      store, path + ".running_mean", [&] { return Tensor<T>({channels}); },
      false);
  Param<T>& rv = get_or_add<T>(
      store, path + ".running_var",
      [&] { return Tensor<T>::full({channels}, T(1)); }, false);
  return BatchNormLayer<T>(&gamma, &beta, &rm, &rv, eps, momentum);
}

// ---- Conv2dLayer ----

template <typename T>
Tensor<T> Conv2dLayer<T>::forward(const Tensor<T>& x, const FwdCtx& ctx) {
  Tensor<T> out = conv2d(x, kernel_->value,
                         bias_ ? bias_->value : Tensor<T>(), spec_);
  if (ctx.cache) cached_input_ = x;
  return out;
}

template <typename T>
Tensor<T> Conv2dLayer<T>::backward(const Tensor<T>& dy, bool want_input_grad) {
  if (cached_input_.empty()) {
    throw ContractError("conv backward without cached forward input");
  }
  ConvGrads<T> g =
      conv2d_backward(cached_input_, kernel_->value, spec_, dy, want_input_grad);
  accumulate(kernel_->grad, g.kernel_grad);
  if (bias_) accumulate(bias_->grad, g.bias_grad);
  return std::move(g.input_grad);
}

// ---- BatchNormLayer ----

template <typename T>
Tensor<T> BatchNormLayer<T>::forward(const Tensor<T>& x, const FwdCtx& ctx) {
  BatchNormResult<T> r =
      batch_norm(x, gamma_->value, beta_->value, run_mean_->value,
                 run_var_->value, ctx.mode, eps_, momentum_);
  if (ctx.cache && ctx.mode == Mode::kTrain) {
    xhat_ = std::move(r.xhat);
    inv_std_ = std::move(r.inv_std);
  }
  return std::move(r.output);
}

template <typename T>
Tensor<T> BatchNormLayer<T>::backward(const Tensor<T>& dy) {
  if (xhat_.empty()) {
    throw ContractError("batch_norm backward without cached train forward");
  }
  BatchNormGrads<T> g = batch_norm_backward(dy, xhat_, inv_std_, gamma_->value);
  accumulate(gamma_->grad, g.gamma_grad);
  accumulate(beta_->grad, g.beta_grad);
  return std::move(g.input_grad);
}

// ---- DropoutSite ----

template <typename T>
Tensor<T> DropoutSite<T>::forward(const Tensor<T>& x, const FwdCtx& ctx) {
  seed_ = Rng(ctx.dropout_salt).fork(path_).seed();
  mode_ = ctx.mode;
  return dropout(x, rate_, seed_, mode_);
}

template <typename T>
Tensor<T> DropoutSite<T>::backward(const Tensor<T>& dy) const {
  return dropout_backward(dy, rate_, seed_, mode_);
}

// ---- DenseLayer ----

template <typename T>
DenseLayer<T>::DenseLayer(ParamStore<T>& store, const std::string& path,
                          int in_channels, int growth, int bottleneck,
                          double dropout_rate, T bn_eps, T bn_momentum,
                          Rng& init_rng)
    : in_channels_(in_channels),
      bn1_(make_batch_norm(store, path + ".bn1", in_channels, bn_eps, bn_momentum)),
      bn2_(make_batch_norm(store, path + ".bn2", bottleneck, bn_eps, bn_momentum)),
      conv1_(make_conv(store, path + ".conv1",
                       ConvSpec{1, 1, 1, 0, in_channels, bottleneck}, init_rng)),
      conv2_(make_conv(store, path + ".conv2",
                       ConvSpec{3, 3, 1, 1, bottleneck, growth}, init_rng)),
      drop_(path + ".drop", dropout_rate) {}

template <typename T>
Tensor<T> DenseLayer<T>::forward(const Tensor<T>& concat_in, const FwdCtx& ctx) {
  if (concat_in.dim(3) != in_channels_) {
    throw ContractError("dense layer expects " + std::to_string(in_channels_) +
                        " input channels, got " + shape_str(concat_in.shape()));
  }
  Tensor<T> y = bn1_.forward(concat_in, ctx);
  y = relu(y);
  y = conv1_.forward(y, ctx);
  y = bn2_.forward(y, ctx);
  y = relu(y);
  y = conv2_.forward(y, ctx);
  return drop_.forward(y, ctx);
}

template <typename T>
Tensor<T> DenseLayer<T>::backward(const Tensor<T>& dy) {
  Tensor<T> g = drop_.backward(dy);
  g = conv2_.backward(g);
  g = relu_backward(conv2_.cached_input(), g);
  g = bn2_.backward(g);
  g = conv1_.backward(g);
  g = relu_backward(conv1_.cached_input(), g);
  return bn1_.backward(g);
}

// ---- DenseBlock ----

template <typename T>
DenseBlock<T>::DenseBlock(ParamStore<T>& store, const std::string& path,
                          int in_channels, int num_layers, int growth,
                          int bottleneck, double dropout_rate, T bn_eps,
                          T bn_momentum, Rng& init_rng)
    : in_channels_(in_channels), growth_(growth) {
  layers_.reserve(static_cast<std::size_t>(num_layers));
  for (int l = 0; l < num_layers; ++l) {
    layers_.emplace_back(store, path + ".layer" + std::to_string(l),
                         in_channels + l * growth, growth, bottleneck,
                         dropout_rate, bn_eps, bn_momentum, init_rng);
  }
}

template <typename T>
int DenseBlock<T>::out_channels() const {
  return in_channels_ + static_cast<int>(layers_.size()) * growth_;
}

template <typename T>
Tensor<T> DenseBlock<T>::forward(const Tensor<T>& x, const FwdCtx& ctx) {
  std::vector<Tensor<T>> segments;
  segments.reserve(layers_.size() + 1);
  segments.push_back(x);
  for (auto& layer : layers_) {
    std::vector<const Tensor<T>*> parts;
    parts.reserve(segments.size());
    for (const auto& s : segments) parts.push_back(&s);
    Tensor<T> cat = concat_channels(parts);
    segments.push_back(layer.forward(cat, ctx));
  }
  std::vector<const Tensor<T>*> parts;
  for (const auto& s : segments) parts.push_back(&s);
  return concat_channels(parts);
}

template <typename T>
Tensor<T> DenseBlock<T>::backward(const Tensor<T>& dy) {
  const int num_layers = static_cast<int>(layers_.size());
  std::vector<int> counts;
  counts.push_back(in_channels_);
  for (int l = 0; l < num_layers; ++l) counts.push_back(growth_);
  // acc[i] is the gradient w.r.t. segment i (input or layer output)
  std::vector<Tensor<T>> acc = split_channels(dy, counts);
  for (int l = num_layers - 1; l >= 0; --l) {
    Tensor<T> d_in = layers_[static_cast<std::size_t>(l)].backward(
        acc[static_cast<std::size_t>(l) + 1]);
    std::vector<int> in_counts(counts.begin(), counts.begin() + l + 1);
    std::vector<Tensor<T>> pieces = split_channels(d_in, in_counts);
    for (int i = 0; i <= l; ++i) {
      accumulate(acc[static_cast<std::size_t>(i)],
                 pieces[static_cast<std::size_t>(i)]);
    }
  }
  return std::move(acc[0]);
}

// ---- TransitionLayer ----

template <typename T>
TransitionLayer<T>::TransitionLayer(ParamStore<T>& store, const std::string& path,
                                    int in_channels, int out_channels,
                                    double dropout_rate, Rng& init_rng)
    : conv_(make_conv(store, path + ".conv",
                      ConvSpec{1, 1, 1, 0, in_channels, out_channels}, init_rng)),
      drop_(path + ".drop", dropout_rate) {}

template <typename T>
Tensor<T> TransitionLayer<T>::forward(const Tensor<T>& x, const FwdCtx& ctx) {
  if (x.dim(1) < 2 || x.dim(2) < 2) {
    throw ConfigError("transition: spatial extent < 2: " + shape_str(x.shape()));
  }
  Tensor<T> y = conv_.forward(x, ctx);
  pool_in_shape_ = y.shape();
  y = avg_pool2d(y, 2, 2);
  return drop_.forward(y, ctx);
}

template <typename T>
Tensor<T> TransitionLayer<T>::backward(const Tensor<T>& dy) {
  Tensor<T> g = drop_.backward(dy);
  g = avg_pool2d_backward(pool_in_shape_, 2, 2, g);
  return conv_.backward(g);
}

// ---- PreActConvUnit ----

template <typename T>
PreActConvUnit<T>::PreActConvUnit(ParamStore<T>& store, const std::string& path,
                                  ConvSpec spec, T bn_eps, T bn_momentum,
                                  Rng& init_rng)
    : bn_(make_batch_norm(store, path + ".bn", spec.in_channels, bn_eps,
                          bn_momentum)),
      conv_(make_conv(store, path + ".conv", spec, init_rng)) {}

template <typename T>
Tensor<T> PreActConvUnit<T>::forward(const Tensor<T>& x, const FwdCtx& ctx) {
  Tensor<T> y = bn_.forward(x, ctx);
  y = relu(y);
  return conv_.forward(y, ctx);
}

template <typename T>
Tensor<T> PreActConvUnit<T>::backward(const Tensor<T>& dy) {
  Tensor<T> g = conv_.backward(dy);
  g = relu_backward(conv_.cached_input(), g);
  return bn_.backward(g);
}

#define DENSSIAM_INSTANTIATE(T)                                               \
  template void accumulate<T>(Tensor<T>&, const Tensor<T>&);                  \
  template Conv2dLayer<T> make_conv<T>(ParamStore<T>&, const std::string&,    \
                                       ConvSpec, Rng&, bool);                 \
  template BatchNormLayer<T> make_batch_norm<T>(ParamStore<T>&,               \
                                                const std::string&, int, T,   \
                                                T);                           \
  template class Conv2dLayer<T>;                                              \
  template class BatchNormLayer<T>;                                           \
  template class DropoutSite<T>;                                              \
  template class DenseLayer<T>;                                               \
  template class DenseBlock<T>;                                               \
  template class TransitionLayer<T>;                                          \
  template class PreActConvUnit<T>;

DENSSIAM_INSTANTIATE(float)
DENSSIAM_INSTANTIATE(double)
#undef DENSSIAM_INSTANTIATE

}  // namespace denssiam
