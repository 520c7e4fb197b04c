#include "head.hpp"

#include <cmath>

namespace denssiam {

namespace {

template <typename T>
void check_corr_args(const Tensor<T>& target, const Tensor<T>& search) {
  if (target.rank() != 4 || search.rank() != 4) {
    throw ContractError("cross_correlate: rank-4 embeddings required");
  }
  if (target.dim(0) != search.dim(0)) {
    throw ContractError("cross_correlate: batch mismatch " +
                        shape_str(target.shape()) + " vs " +
                        shape_str(search.shape()));
  }
  if (target.dim(3) != search.dim(3)) {
    throw ContractError("cross_correlate: channel mismatch " +
                        shape_str(target.shape()) + " vs " +
                        shape_str(search.shape()));
  }
  if (target.dim(1) > search.dim(1) || target.dim(2) > search.dim(2)) {
    throw ContractError("cross_correlate: target " + shape_str(target.shape()) +
                        " larger than search " + shape_str(search.shape()));
  }
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

template <typename T>
ScoreMaps<T> cross_correlate(const Tensor<T>& target_emb,
                             const Tensor<T>& search_emb, T gain, T bias) {
  check_corr_args(target_emb, search_emb);
  const int b = target_emb.dim(0);
  const int th = target_emb.dim(1), tw = target_emb.dim(2), c = target_emb.dim(3);
  const int sh = search_emb.dim(1), sw = search_emb.dim(2);
  const int oh = sh - th + 1, ow = sw - tw + 1;
  const std::size_t row_span = static_cast<std::size_t>(tw) * c;

  ScoreMaps<T> maps;
  maps.raw = Tensor<T>({b, oh, ow});
  maps.values = Tensor<T>({b, oh, ow});
  for (int bi = 0; bi < b; ++bi) {
    const T* tbase = target_emb.data() + static_cast<std::size_t>(bi) * th * tw * c;
    const T* sbase = search_emb.data() + static_cast<std::size_t>(bi) * sh * sw * c;
    for (int p = 0; p < oh; ++p) {
      for (int q = 0; q < ow; ++q) {
        T acc = T(0);
        for (int u = 0; u < th; ++u) {
          const T* trow = tbase + static_cast<std::size_t>(u) * tw * c;
          const T* srow = sbase +
                          (static_cast<std::size_t>(p + u) * sw + q) * c;
          for (std::size_t i = 0; i < row_span; ++i) acc += trow[i] * srow[i];
        }
        maps.raw.at(bi, p, q) = acc;
        maps.values.at(bi, p, q) = gain * acc + bias;
      }
    }
  }
  return maps;
}

template <typename T>
CorrelationGrads<T> cross_correlate_backward(const Tensor<T>& target_emb,
                                             const Tensor<T>& search_emb,
                                             const Tensor<T>& raw, T gain,
                                             const Tensor<T>& upstream_grad) {
  check_corr_args(target_emb, search_emb);
  if (!upstream_grad.same_shape(raw)) {
    throw ContractError("cross_correlate_backward: upstream " +
                        shape_str(upstream_grad.shape()) + " vs raw " +
                        shape_str(raw.shape()));
  }
  const int b = target_emb.dim(0);
  const int th = target_emb.dim(1), tw = target_emb.dim(2), c = target_emb.dim(3);
  const int sh = search_emb.dim(1), sw = search_emb.dim(2);
  const int oh = sh - th + 1, ow = sw - tw + 1;
  const std::size_t row_span = static_cast<std::size_t>(tw) * c;

  CorrelationGrads<T> g;
  g.target_grad = Tensor<T>(target_emb.shape());
  g.search_grad = Tensor<T>(search_emb.shape());
  double dgain = 0.0, dbias = 0.0;
  for (int bi = 0; bi < b; ++bi) {
    const T* tbase = target_emb.data() + static_cast<std::size_t>(bi) * th * tw * c;
    const T* sbase = search_emb.data() + static_cast<std::size_t>(bi) * sh * sw * c;
    T* dtbase = g.target_grad.data() + static_cast<std::size_t>(bi) * th * tw * c;
    T* dsbase = g.search_grad.data() + static_cast<std::size_t>(bi) * sh * sw * c;
    for (int p = 0; p < oh; ++p) {
      for (int q = 0; q < ow; ++q) {
        const T up = upstream_grad.at(bi, p, q);
        dgain += static_cast<double>(up) * raw.at(bi, p, q);
        dbias += static_cast<double>(up);
        const T draw = gain * up;
        if (draw == T(0)) continue;
        for (int u = 0; u < th; ++u) {
          const T* trow = tbase + static_cast<std::size_t>(u) * tw * c;
          const T* srow = sbase +
                          (static_cast<std::size_t>(p + u) * sw + q) * c;
          T* dtrow = dtbase + static_cast<std::size_t>(u) * tw * c;
          T* dsrow = dsbase +
                     (static_cast<std::size_t>(p + u) * sw + q) * c;
          for (std::size_t i = 0; i < row_span; ++i) {
            dtrow[i] += draw * srow[i];
            dsrow[i] += draw * trow[i];
          }
        }
      }
    }
  }
  g.gain_grad = static_cast<T>(dgain);
  g.bias_grad = static_cast<T>(dbias);
  return g;
}

template <typename T>
Tensor<T> make_label_map(int size, double r_pos, double dy, double dx) {
  if (size < 1 || size % 2 == 0) {
    throw ConfigError("label map size must be odd and positive, got " +
                      std::to_string(size));
  }
  if (r_pos < 0.0) {
    throw ConfigError("label map r_pos must be >= 0");
  }
  const double cy = (size - 1) / 2.0 + dy;
  const double cx = (size - 1) / 2.0 + dx;
  Tensor<T> labels({size, size});
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double d = std::hypot(i - cy, j - cx);
      labels.at(i, j) = d <= r_pos ? T(1) : T(-1);
    }
  }
  return labels;
}

double logistic_loss(double v, double y) {
  if (y != 1.0 && y != -1.0) {
    throw ContractError("logistic_loss: label must be +-1, got " +
                        std::to_string(y));
  }
  const double z = -y * v;
  // softplus(z) = max(z,0) + log1p(exp(-|z|))
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

template <typename T>
MapLoss<T> map_loss(const Tensor<T>& values, const Tensor<T>& labels,
                    bool balanced) {
  if (!values.same_shape(labels)) {
    throw ContractError("map_loss: score " + shape_str(values.shape()) +
                        " vs labels " + shape_str(labels.shape()));
  }
  const std::size_t n = values.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > T(0)) ++n_pos;
  }
  const std::size_t n_neg = n - n_pos;
  // a single-class map cannot be balanced; fall back to the uniform mean
  if (n_pos == 0 || n_neg == 0) balanced = false;

  MapLoss<T> out;
  out.values_grad = Tensor<T>(values.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels[i] > T(0) ? 1.0 : -1.0;
    const double v = static_cast<double>(values[i]);
    double w;
    if (balanced) {
      w = y > 0.0 ? 1.0 / (2.0 * static_cast<double>(n_pos))
                  : 1.0 / (2.0 * static_cast<double>(n_neg));
    } else {
      w = 1.0 / static_cast<double>(n);
    }
    loss += w * logistic_loss(v, y);
    out.values_grad[i] = static_cast<T>(-w * y * sigmoid(-y * v));
  }
  out.loss = loss;
  return out;
}

#define DENSSIAM_INSTANTIATE(T)                                               \
  template ScoreMaps<T> cross_correlate<T>(const Tensor<T>&, const Tensor<T>&,\
                                           T, T);                             \
  template CorrelationGrads<T> cross_correlate_backward<T>(                   \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T,                \
      const Tensor<T>&);                                                      \
  template Tensor<T> make_label_map<T>(int, double, double, double);          \
  template MapLoss<T> map_loss<T>(const Tensor<T>&, const Tensor<T>&, bool);

DENSSIAM_INSTANTIATE(float)
DENSSIAM_INSTANTIATE(double)
#undef DENSSIAM_INSTANTIATE

}  // namespace denssiam
