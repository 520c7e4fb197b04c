#pragma once

#include "layers.hpp"

namespace denssiam {

struct AttentionConfig {
  int channels = 128;
  int reduction = 16;  // channel width of the f/g projections
  bool residual = false;
};

// Positional self-attention over a (B,H,W,C) map. Projections f and g are
// bias-free 1x1 convolutions to `reduction` channels, h to `channels`.
// phi(:,j) = softmax_i( f(x_i) . g(x_j) ), out_j = sum_i phi(i,j) * h(x_i),
// so every column of phi is a distribution over source positions and the
// output is a per-position convex combination of h values.

// f,g: (B,H,W,r); h: (B,H,W,C). Pure 1x1 convolutions, no bias.
template <typename T>
void attention_projections(const Tensor<T>& x, const Tensor<T>& wf,
                           const Tensor<T>& wg, const Tensor<T>& wh,
                           Tensor<T>& f, Tensor<T>& g, Tensor<T>& h);

// phi: (B,N,N) with N = H*W; column j is a distribution over i.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& f, const Tensor<T>& g);

// out (B,H,W,C): out[j,:] = sum_i phi[i,j] * h[i,:].
template <typename T>
Tensor<T> attention_apply(const Tensor<T>& phi, const Tensor<T>& h);

template <typename T>
class Attention {
 public:
  Attention() = default;
  Attention(ParamStore<T>& store, const AttentionConfig& cfg, Rng& init_rng);

  Tensor<T> forward(const Tensor<T>& x, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  AttentionConfig cfg_;
  Param<T>* wf_ = nullptr;
  Param<T>* wg_ = nullptr;
  Param<T>* wh_ = nullptr;
  Tensor<T> x_, f_, g_, h_, phi_;
};

using AttentionF = Attention<float>;
using AttentionD = Attention<double>;

}  // namespace denssiam
