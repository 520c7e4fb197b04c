#include "attention.hpp"

#include <cmath>

#include "blas.hpp"

namespace denssiam {

namespace {

template <typename T>
ConvSpec proj_spec(const Tensor<T>& w) {
  return ConvSpec{1, 1, 1, 0, w.dim(2), w.dim(3)};
}

}  // namespace

template <typename T>
void attention_projections(const Tensor<T>& x, const Tensor<T>& wf,
                           const Tensor<T>& wg, const Tensor<T>& wh,
                           Tensor<T>& f, Tensor<T>& g, Tensor<T>& h) {
  if (x.rank() != 4) {
    throw ContractError("attention: input must be rank 4, got " +
                        shape_str(x.shape()));
  }
  if (wf.dim(2) != x.dim(3) || wg.dim(2) != x.dim(3) || wh.dim(2) != x.dim(3)) {
    throw ContractError("attention: projection kernels expect " +
                        std::to_string(wf.dim(2)) + " channels, input has " +
                        std::to_string(x.dim(3)));
  }
  const Tensor<T> no_bias;
  f = conv2d(x, wf, no_bias, proj_spec(wf));
  g = conv2d(x, wg, no_bias, proj_spec(wg));
  h = conv2d(x, wh, no_bias, proj_spec(wh));
}

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& f, const Tensor<T>& g) {
  if (!f.same_shape(g)) {
    throw ContractError("attention_weights: f " + shape_str(f.shape()) +
                        " vs g " + shape_str(g.shape()));
  }
  const int b = f.dim(0), n = f.dim(1) * f.dim(2), r = f.dim(3);
  Tensor<T> phi({b, n, n});
  for (int bi = 0; bi < b; ++bi) {
    const T* fp = f.data() + static_cast<std::size_t>(bi) * n * r;
    const T* gp = g.data() + static_cast<std::size_t>(bi) * n * r;
    T* mp = phi.data() + static_cast<std::size_t>(bi) * n * n;
    // m[i,j] = f_i . g_j
    gemm(false, true, n, n, r, T(1), fp, r, gp, r, T(0), mp, n);
  }
  phi.check_finite("attention scores");
  // columns are distributions over source positions i
  return softmax(phi, 1);
}

template <typename T>
Tensor<T> attention_apply(const Tensor<T>& phi, const Tensor<T>& h) {
  const int b = h.dim(0), n = h.dim(1) * h.dim(2), c = h.dim(3);
  if (phi.rank() != 3 || phi.dim(0) != b || phi.dim(1) != n || phi.dim(2) != n) {
    throw ContractError("attention_apply: phi " + shape_str(phi.shape()) +
                        " does not match h " + shape_str(h.shape()));
  }
  Tensor<T> out(h.shape());
  for (int bi = 0; bi < b; ++bi) {
    const T* pp = phi.data() + static_cast<std::size_t>(bi) * n * n;
    const T* hp = h.data() + static_cast<std::size_t>(bi) * n * c;
    T* op = out.data() + static_cast<std::size_t>(bi) * n * c;
    // out[j,:] = sum_i phi[i,j] h[i,:]  ->  out = phi^T * H
    gemm(true, false, n, c, n, T(1), pp, n, hp, c, T(0), op, c);
  }
  return out;
}

template <typename T>
Attention<T>::Attention(ParamStore<T>& store, const AttentionConfig& cfg,
                        Rng& init_rng)
    : cfg_(cfg) {
  auto make_proj = [&](const std::string& name, int out_ch) -> Param<T>* {
    if (Param<T>* p = store.find(name)) return p;
    // fan-in scaling with unit gain: the projection inputs are the raw
    // (unrectified) embedding, so the ReLU factor of 2 does not apply
    const T stddev =
        static_cast<T>(std::sqrt(1.0 / static_cast<double>(cfg.channels)));
    Rng r = init_rng.fork(name);
    return &store.add(name,
                      Tensor<T>::randn({1, 1, cfg.channels, out_ch}, r, stddev),
                      true);
  };
  wf_ = make_proj("attn.f.kernel", cfg.reduction);
  wg_ = make_proj("attn.g.kernel", cfg.reduction);
  wh_ = make_proj("attn.h.kernel", cfg.channels);
}

template <typename T>
Tensor<T> Attention<T>::forward(const Tensor<T>& x, const FwdCtx& ctx) {
  if (x.dim(3) != cfg_.channels) {
    throw ContractError("attention: expected " + std::to_string(cfg_.channels) +
                        " channels, got " + shape_str(x.shape()));
  }
  Tensor<T> f, g, h;
  attention_projections(x, wf_->value, wg_->value, wh_->value, f, g, h);
  Tensor<T> phi = attention_weights(f, g);
  Tensor<T> out = attention_apply(phi, h);
  if (cfg_.residual) accumulate(out, x);
  if (ctx.cache) {
    x_ = x;
    f_ = std::move(f);
    g_ = std::move(g);
    h_ = std::move(h);
    phi_ = std::move(phi);
  }
  out.check_finite("attention forward");
  return out;
}

template <typename T>
Tensor<T> Attention<T>::backward(const Tensor<T>& dy) {
  if (x_.empty()) {
    throw ContractError("attention backward without cached forward");
  }
  const int b = x_.dim(0), n = x_.dim(1) * x_.dim(2), c = cfg_.channels,
            r = cfg_.reduction;

  Tensor<T> dh(h_.shape());
  Tensor<T> dphi(phi_.shape());
  for (int bi = 0; bi < b; ++bi) {
    const std::size_t nc = static_cast<std::size_t>(n) * c;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const T* dyp = dy.data() + bi * nc;
    const T* pp = phi_.data() + bi * nn;
    const T* hp = h_.data() + bi * nc;
    // dh[i,:] = sum_j phi[i,j] dy[j,:]
    gemm(false, false, n, c, n, T(1), pp, n, dyp, c, T(0), dh.data() + bi * nc, c);
    // dphi[i,j] = h[i,:] . dy[j,:]
    gemm(false, true, n, n, c, T(1), hp, c, dyp, c, T(0), dphi.data() + bi * nn,
         n);
  }
  Tensor<T> dm = softmax_backward(phi_, dphi, 1);

  Tensor<T> df(f_.shape()), dg(g_.shape());
  for (int bi = 0; bi < b; ++bi) {
    const std::size_t nr = static_cast<std::size_t>(n) * r;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const T* dmp = dm.data() + bi * nn;
    // df[i,:] = sum_j dm[i,j] g[j,:] ; dg[j,:] = sum_i dm[i,j] f[i,:]
    gemm(false, false, n, r, n, T(1), dmp, n, g_.data() + bi * nr, r, T(0),
         df.data() + bi * nr, r);
    gemm(true, false, n, r, n, T(1), dmp, n, f_.data() + bi * nr, r, T(0),
         dg.data() + bi * nr, r);
  }

  // back through the three bias-free 1x1 projections; dx accumulates all paths
  auto back_proj = [&](Param<T>* w, const Tensor<T>& dproj) {
    ConvGrads<T> g = conv2d_backward(x_, w->value, proj_spec(w->value), dproj);
    accumulate(w->grad, g.kernel_grad);
    return std::move(g.input_grad);
  };
  Tensor<T> dx = back_proj(wf_, df);
  accumulate(dx, back_proj(wg_, dg));
  accumulate(dx, back_proj(wh_, dh));
  if (cfg_.residual) accumulate(dx, dy);
  return dx;
}

#define DENSSIAM_INSTANTIATE(T)                                              \
  template void attention_projections<T>(const Tensor<T>&, const Tensor<T>&, \
                                         const Tensor<T>&, const Tensor<T>&, \
                                         Tensor<T>&, Tensor<T>&, Tensor<T>&);\
  template Tensor<T> attention_weights<T>(const Tensor<T>&, const Tensor<T>&);\
  template Tensor<T> attention_apply<T>(const Tensor<T>&, const Tensor<T>&); \
  template class Attention<T>;

DENSSIAM_INSTANTIATE(float)
DENSSIAM_INSTANTIATE(double)
#undef DENSSIAM_INSTANTIATE

}  // namespace denssiam
