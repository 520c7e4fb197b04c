#pragma once

#include "params.hpp"
#include "tensor.hpp"

namespace denssiam {

// Similarity head: channel-summed valid cross-correlation of the target
// embedding over the search embedding, followed by the learned scalar
// adjust v = gain * corr + bias, and the logistic map loss.

// Batched score maps; raw is kept for the backward pass.
template <typename T>
struct ScoreMaps {
  Tensor<T> values;  // (B, sh, sw), affine-adjusted
  Tensor<T> raw;     // (B, sh, sw), plain correlation
};

// target (B,th,tw,C) slides over search (B,sh,sw,C) pairwise per batch item.
template <typename T>
ScoreMaps<T> cross_correlate(const Tensor<T>& target_emb,
                             const Tensor<T>& search_emb, T gain, T bias);

template <typename T>
struct CorrelationGrads {
  Tensor<T> target_grad;
  Tensor<T> search_grad;
  T gain_grad;
  T bias_grad;
};

template <typename T>
CorrelationGrads<T> cross_correlate_backward(const Tensor<T>& target_emb,
                                             const Tensor<T>& search_emb,
                                             const Tensor<T>& raw, T gain,
                                             const Tensor<T>& upstream_grad);

// (size,size) map of +-1: +1 iff euclidean distance from the center cell
// (offset by dy,dx cells) is <= r_pos. Size must be odd.
template <typename T>
Tensor<T> make_label_map(int size, double r_pos, double dy = 0.0, double dx = 0.0);

// log(1 + exp(-y*v)) in softplus form; y in {-1,+1}.
double logistic_loss(double v, double y);

template <typename T>
struct MapLoss {
  double loss;
  Tensor<T> values_grad;
};

// Uniform mode is the plain mean over all cells; balanced mode reweights so
// the positive and negative classes contribute one half each.
template <typename T>
MapLoss<T> map_loss(const Tensor<T>& values, const Tensor<T>& labels,
                    bool balanced);

}  // namespace denssiam
