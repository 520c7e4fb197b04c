#include "nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "blas.hpp"

extern "C" void openblas_set_num_threads(int);

namespace denssiam {

void set_blas_threads(int n) { openblas_set_num_threads(n < 1 ? 1 : n); }

namespace {

template <typename T>
void require(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

// Gathers one batch item into a (oh*ow) x (kh*kw*C) matrix. Window rows are
// contiguous kw*C spans of the NHWC input row, so interior copies are memcpy.
template <typename T>
void im2col(const T* in, int h, int w, int c, const ConvSpec& s, int oh, int ow,
            T* col) {
  const int kh = s.kernel_h, kw = s.kernel_w, stride = s.stride, pad = s.padding;
  const std::size_t span = static_cast<std::size_t>(kw) * c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ky = 0; ky < kh; ++ky) {
      const int iy = oy * stride + ky - pad;
      T* dst_base = col + (static_cast<std::size_t>(oy) * ow) * (kh * span) +
                    static_cast<std::size_t>(ky) * span;
      if (iy < 0 || iy >= h) {
        for (int ox = 0; ox < ow; ++ox) {
          std::memset(dst_base + static_cast<std::size_t>(ox) * (kh * span), 0,
                      span * sizeof(T));
        }
        continue;
      }
      const T* src_row = in + static_cast<std::size_t>(iy) * w * c;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix0 = ox * stride - pad;
        T* dst = dst_base + static_cast<std::size_t>(ox) * (kh * span);
        if (ix0 >= 0 && ix0 + kw <= w) {
          std::memcpy(dst, src_row + static_cast<std::size_t>(ix0) * c,
                      span * sizeof(T));
        } else {
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= w) {
              std::fill_n(dst + static_cast<std::size_t>(kx) * c, c, T(0));
            } else {
              std::memcpy(dst + static_cast<std::size_t>(kx) * c,
                          src_row + static_cast<std::size_t>(ix) * c,
                          static_cast<std::size_t>(c) * sizeof(T));
            }
          }
        }
      }
    }
  }
}

// Scatter-add of a col matrix back onto the input gradient.
template <typename T>
void col2im_add(const T* col, int h, int w, int c, const ConvSpec& s, int oh,
                int ow, T* grad) {
  const int kh = s.kernel_h, kw = s.kernel_w, stride = s.stride, pad = s.padding;
  const std::size_t span = static_cast<std::size_t>(kw) * c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ky = 0; ky < kh; ++ky) {
      const int iy = oy * stride + ky - pad;
      if (iy < 0 || iy >= h) continue;
      T* dst_row = grad + static_cast<std::size_t>(iy) * w * c;
      const T* src_base = col + (static_cast<std::size_t>(oy) * ow) * (kh * span) +
                          static_cast<std::size_t>(ky) * span;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix0 = ox * stride - pad;
        const T* src = src_base + static_cast<std::size_t>(ox) * (kh * span);
        const int kx_lo = std::max(0, -ix0);
        const int kx_hi = std::min(kw, w - ix0);
        for (int kx = kx_lo; kx < kx_hi; ++kx) {
          T* dst = dst_row + static_cast<std::size_t>(ix0 + kx) * c;
          const T* sp = src + static_cast<std::size_t>(kx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += sp[ch];
        }
      }
    }
  }
}

template <typename T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& kernel,
                     const Tensor<T>& bias, const ConvSpec& spec) {
  require<T>(input.rank() == 4, "conv2d: input must be rank 4, got " +
                                    shape_str(input.shape()));
  require<T>(kernel.rank() == 4, "conv2d: kernel must be rank 4, got " +
                                     shape_str(kernel.shape()));
  require<T>(input.dim(3) == spec.in_channels,
             "conv2d: input channels " + shape_str(input.shape()) +
                 " do not match spec in_channels " +
                 std::to_string(spec.in_channels));
  const std::vector<int> want = {spec.kernel_h, spec.kernel_w, spec.in_channels,
                                 spec.out_channels};
  require<T>(kernel.shape() == want, "conv2d: kernel shape " +
                                         shape_str(kernel.shape()) +
                                         " does not match spec " + shape_str(want));
  require<T>(bias.empty() || (bias.rank() == 1 && bias.dim(0) == spec.out_channels),
             "conv2d: bias shape " + shape_str(bias.shape()) +
                 " does not match out_channels " +
                 std::to_string(spec.out_channels));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, const ConvSpec& spec) {
  check_conv_args(input, kernel, bias, spec);
  const int b = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const int oh = spec.out_h(h), ow = spec.out_w(w);
  const int m = oh * ow;
  const int k = spec.kernel_h * spec.kernel_w * c;
  const int n = spec.out_channels;

  const bool pointwise = spec.kernel_h == 1 && spec.kernel_w == 1 &&
                         spec.stride == 1 && spec.padding == 0;
  Tensor<T> out = Tensor<T>::uninit({b, oh, ow, n});
  thread_local ScratchBuffer<T> col_buf;
  T* col = pointwise ? nullptr : col_buf.resize(static_cast<std::size_t>(m) * k);
  for (int bi = 0; bi < b; ++bi) {
    const T* in = input.data() + static_cast<std::size_t>(bi) * h * w * c;
    T* o = out.data() + static_cast<std::size_t>(bi) * m * n;
    const T* lhs = in;
    if (!pointwise) {
      im2col(in, h, w, c, spec, oh, ow, col);
      lhs = col;
    }
    gemm(false, false, m, n, k, T(1), lhs, k, kernel.data(), n, T(0), o, n);
    if (!bias.empty()) {
      for (int r = 0; r < m; ++r) {
        T* row = o + static_cast<std::size_t>(r) * n;
        for (int j = 0; j < n; ++j) row[j] += bias[static_cast<std::size_t>(j)];
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel,
                             const ConvSpec& spec, const Tensor<T>& upstream_grad,
                             bool want_input_grad) {
  Tensor<T> no_bias;
  check_conv_args(input, kernel, no_bias, spec);
  const int b = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const int oh = spec.out_h(h), ow = spec.out_w(w);
  const std::vector<int> want = {b, oh, ow, spec.out_channels};
  require<T>(upstream_grad.shape() == want,
             "conv2d_backward: upstream shape " + shape_str(upstream_grad.shape()) +
                 " does not match forward output " + shape_str(want));

  const int m = oh * ow;
  const int k = spec.kernel_h * spec.kernel_w * c;
  const int n = spec.out_channels;

  ConvGrads<T> g;
  g.kernel_grad = Tensor<T>(kernel.shape());
  g.bias_grad = Tensor<T>({n});
  if (want_input_grad) g.input_grad = Tensor<T>(input.shape());

  const bool pointwise = spec.kernel_h == 1 && spec.kernel_w == 1 &&
                         spec.stride == 1 && spec.padding == 0;
  thread_local ScratchBuffer<T> col_buf, dcol_buf;
  T* col = pointwise ? nullptr : col_buf.resize(static_cast<std::size_t>(m) * k);
  T* dcol = (want_input_grad && !pointwise)
                ? dcol_buf.resize(static_cast<std::size_t>(m) * k)
                : nullptr;
  for (int bi = 0; bi < b; ++bi) {
    const T* in = input.data() + static_cast<std::size_t>(bi) * h * w * c;
    const T* dy = upstream_grad.data() + static_cast<std::size_t>(bi) * m * n;
    const T* lhs = in;
    if (!pointwise) {
      im2col(in, h, w, c, spec, oh, ow, col);
      lhs = col;
    }
    // dW += col^T * dY
    gemm(true, false, k, n, m, T(1), lhs, k, dy, n, T(1),
         g.kernel_grad.data(), n);
    for (int r = 0; r < m; ++r) {
      const T* row = dy + static_cast<std::size_t>(r) * n;
      for (int j = 0; j < n; ++j) g.bias_grad[static_cast<std::size_t>(j)] += row[j];
    }
    if (want_input_grad) {
      T* dx = g.input_grad.data() + static_cast<std::size_t>(bi) * h * w * c;
      if (pointwise) {
        // each input element feeds exactly one output: dX = dY * W^T
        gemm(false, true, m, k, n, T(1), dy, n, kernel.data(), n, T(0), dx, k);
      } else {
        gemm(false, true, m, k, n, T(1), dy, n, kernel.data(), n, T(0), dcol, k);
        col2im_add(dcol, h, w, c, spec, oh, ow, dx);
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int size, int stride) {
  require<T>(input.rank() == 4, "avg_pool2d: input must be rank 4");
  const int b = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  if (size > h || size > w) {
    throw ConfigError("avg_pool2d: size " + std::to_string(size) +
                      " exceeds spatial extent " + shape_str(input.shape()));
  }
  const int oh = (h - size) / stride + 1;
  const int ow = (w - size) / stride + 1;
  const T inv = T(1) / static_cast<T>(size * size);
  Tensor<T> out({b, oh, ow, c});
  for (int bi = 0; bi < b; ++bi) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T* o = &out.at(bi, oy, ox, 0);
        for (int ky = 0; ky < size; ++ky) {
          const T* row = &input.at(bi, oy * stride + ky, ox * stride, 0);
          for (int kx = 0; kx < size; ++kx) {
            const T* p = row + static_cast<std::size_t>(kx) * c;
            for (int ch = 0; ch < c; ++ch) o[ch] += p[ch];
          }
        }
        for (int ch = 0; ch < c; ++ch) o[ch] *= inv;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool2d_backward(const std::vector<int>& input_shape, int size,
                              int stride, const Tensor<T>& upstream_grad) {
  const int b = input_shape[0], h = input_shape[1], w = input_shape[2],
            c = input_shape[3];
  const int oh = (h - size) / stride + 1;
  const int ow = (w - size) / stride + 1;
  const std::vector<int> want = {b, oh, ow, c};
  require<T>(upstream_grad.shape() == want,
             "avg_pool2d_backward: upstream shape " +
                 shape_str(upstream_grad.shape()) + " does not match " +
                 shape_str(want));
  const T inv = T(1) / static_cast<T>(size * size);
  Tensor<T> dx(input_shape);
  for (int bi = 0; bi < b; ++bi) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* gy = &upstream_grad.at(bi, oy, ox, 0);
        for (int ky = 0; ky < size; ++ky) {
          T* row = &dx.at(bi, oy * stride + ky, ox * stride, 0);
          for (int kx = 0; kx < size; ++kx) {
            T* p = row + static_cast<std::size_t>(kx) * c;
            for (int ch = 0; ch < c; ++ch) p[ch] += gy[ch] * inv;
          }
        }
      }
    }
  }
  return dx;
}

template <typename T>
BatchNormResult<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                              const Tensor<T>& beta, Tensor<T>& running_mean,
                              Tensor<T>& running_var, Mode mode, T epsilon,
                              T momentum) {
  require<T>(input.rank() == 4, "batch_norm: input must be rank 4");
  const int b = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  require<T>(gamma.size() == static_cast<std::size_t>(c) &&
                 beta.size() == static_cast<std::size_t>(c),
             "batch_norm: gamma/beta length must equal channels " +
                 std::to_string(c));
  require<T>(running_mean.size() == static_cast<std::size_t>(c) &&
                 running_var.size() == static_cast<std::size_t>(c),
             "batch_norm: running stats length must equal channels");

  BatchNormResult<T> r;
  r.output = Tensor<T>::uninit(input.shape());
  const std::size_t rows = static_cast<std::size_t>(b) * h * w;

  if (mode == Mode::kTrain) {
    if (b < 2) throw ContractError("batch_norm: train mode requires batch > 1");
    // chunked accumulation: vectorizable T partials, double totals
    std::vector<double> sum(c, 0.0), sumsq(c, 0.0);
    std::vector<T> psum(c, T(0)), psumsq(c, T(0));
    constexpr std::size_t kChunk = 256;
    const T* p = input.data();
    std::size_t i = 0;
    while (i < rows) {
      const std::size_t end = std::min(rows, i + kChunk);
      for (; i < end; ++i, p += c) {
        for (int ch = 0; ch < c; ++ch) {
          const T v = p[ch];
          psum[ch] += v;
          psumsq[ch] += v * v;
        }
      }
      for (int ch = 0; ch < c; ++ch) {
        sum[ch] += static_cast<double>(psum[ch]);
        sumsq[ch] += static_cast<double>(psumsq[ch]);
        psum[ch] = T(0);
        psumsq[ch] = T(0);
      }
    }
    std::vector<T> mean(c), var(c);
    r.inv_std.resize(c);
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (int ch = 0; ch < c; ++ch) {
      const double mu = sum[ch] * inv_rows;
      const double v = std::max(0.0, sumsq[ch] * inv_rows - mu * mu);
      mean[ch] = static_cast<T>(mu);
      var[ch] = static_cast<T>(v);
      r.inv_std[ch] = T(1) / std::sqrt(var[ch] + epsilon);
      running_mean[static_cast<std::size_t>(ch)] =
          momentum * running_mean[static_cast<std::size_t>(ch)] +
          (T(1) - momentum) * mean[ch];
      running_var[static_cast<std::size_t>(ch)] =
          momentum * running_var[static_cast<std::size_t>(ch)] +
          (T(1) - momentum) * var[ch];
    }
    r.xhat = Tensor<T>::uninit(input.shape());
    const T* in = input.data();
    T* xh = r.xhat.data();
    T* out = r.output.data();
    for (std::size_t i = 0; i < rows; ++i, in += c, xh += c, out += c) {
      for (int ch = 0; ch < c; ++ch) {
        const T z = (in[ch] - mean[ch]) * r.inv_std[ch];
        xh[ch] = z;
        out[ch] = gamma[static_cast<std::size_t>(ch)] * z +
                  beta[static_cast<std::size_t>(ch)];
      }
    }
  } else {
    std::vector<T> scale(c), shift(c);
    for (int ch = 0; ch < c; ++ch) {
      const T is = T(1) / std::sqrt(running_var[static_cast<std::size_t>(ch)] + epsilon);
      scale[ch] = gamma[static_cast<std::size_t>(ch)] * is;
      shift[ch] = beta[static_cast<std::size_t>(ch)] -
                  running_mean[static_cast<std::size_t>(ch)] * scale[ch];
    }
    const T* in = input.data();
    T* out = r.output.data();
    for (std::size_t i = 0; i < rows; ++i, in += c, out += c) {
      for (int ch = 0; ch < c; ++ch) out[ch] = scale[ch] * in[ch] + shift[ch];
    }
  }
  return r;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(const Tensor<T>& upstream_grad,
                                      const Tensor<T>& xhat,
                                      const std::vector<T>& inv_std,
                                      const Tensor<T>& gamma) {
  require<T>(upstream_grad.same_shape(xhat),
             "batch_norm_backward: upstream/xhat shape mismatch");
  const int c = upstream_grad.dim(3);
  const std::size_t rows = upstream_grad.size() / static_cast<std::size_t>(c);

  BatchNormGrads<T> g;
  g.input_grad = Tensor<T>::uninit(upstream_grad.shape());
  g.gamma_grad = Tensor<T>({c});
  g.beta_grad = Tensor<T>({c});

  std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
  {
    std::vector<T> pdy(c, T(0)), pdyx(c, T(0));
    constexpr std::size_t kChunk = 256;
    const T* dy = upstream_grad.data();
    const T* xh = xhat.data();
    std::size_t i = 0;
    while (i < rows) {
      const std::size_t end = std::min(rows, i + kChunk);
      for (; i < end; ++i, dy += c, xh += c) {
        for (int ch = 0; ch < c; ++ch) {
          pdy[ch] += dy[ch];
          pdyx[ch] += dy[ch] * xh[ch];
        }
      }
      for (int ch = 0; ch < c; ++ch) {
        sum_dy[ch] += static_cast<double>(pdy[ch]);
        sum_dy_xhat[ch] += static_cast<double>(pdyx[ch]);
        pdy[ch] = T(0);
        pdyx[ch] = T(0);
      }
    }
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  std::vector<T> mean_dy(c), mean_dy_xhat(c);
  for (int ch = 0; ch < c; ++ch) {
    g.beta_grad[static_cast<std::size_t>(ch)] = static_cast<T>(sum_dy[ch]);
    g.gamma_grad[static_cast<std::size_t>(ch)] = static_cast<T>(sum_dy_xhat[ch]);
    mean_dy[ch] = static_cast<T>(sum_dy[ch] * inv_rows);
    mean_dy_xhat[ch] = static_cast<T>(sum_dy_xhat[ch] * inv_rows);
  }
  const T* dy = upstream_grad.data();
  const T* xh = xhat.data();
  T* dx = g.input_grad.data();
  for (std::size_t i = 0; i < rows; ++i, dy += c, xh += c, dx += c) {
    for (int ch = 0; ch < c; ++ch) {
      dx[ch] = gamma[static_cast<std::size_t>(ch)] * inv_std[ch] *
               (dy[ch] - mean_dy[ch] - xh[ch] * mean_dy_xhat[ch]);
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = Tensor<T>::uninit(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > T(0) ? input[i] : T(0);
  }
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& upstream_grad) {
  require<T>(output.same_shape(upstream_grad), "relu_backward: shape mismatch");
  Tensor<T> dx = Tensor<T>::uninit(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    dx[i] = output[i] > T(0) ? upstream_grad[i] : T(0);
  }
  return dx;
}

namespace {
struct AxisView {
  std::size_t outer, n, inner;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw ContractError("softmax: axis " + std::to_string(axis) +
                        " out of range for " + shape_str(shape));
  }
  AxisView v{1, static_cast<std::size_t>(shape[axis]), 1};
  for (int i = 0; i < axis; ++i) v.outer *= static_cast<std::size_t>(shape[i]);
  for (std::size_t i = axis + 1; i < shape.size(); ++i) {
    v.inner *= static_cast<std::size_t>(shape[i]);
  }
  return v;
}
}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& input, int axis) {
  const AxisView v = axis_view(input.shape(), axis);
  Tensor<T> out = Tensor<T>::uninit(input.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.n * v.inner + in;
      T mx = input[base];
      for (std::size_t i = 1; i < v.n; ++i) {
        mx = std::max(mx, input[base + i * v.inner]);
      }
      if (!std::isfinite(mx)) {
        throw NumericError("softmax: non-finite input");
      }
      T sum = T(0);
      for (std::size_t i = 0; i < v.n; ++i) {
        const T e = std::exp(input[base + i * v.inner] - mx);
        out[base + i * v.inner] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (std::size_t i = 0; i < v.n; ++i) out[base + i * v.inner] *= inv;
    }
  }
  return out;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& output, const Tensor<T>& upstream_grad,
                           int axis) {
  require<T>(output.same_shape(upstream_grad), "softmax_backward: shape mismatch");
  const AxisView v = axis_view(output.shape(), axis);
  Tensor<T> dx = Tensor<T>::uninit(output.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.n * v.inner + in;
      T dot = T(0);
      for (std::size_t i = 0; i < v.n; ++i) {
        dot += output[base + i * v.inner] * upstream_grad[base + i * v.inner];
      }
      for (std::size_t i = 0; i < v.n; ++i) {
        const std::size_t idx = base + i * v.inner;
        dx[idx] = output[idx] * (upstream_grad[idx] - dot);
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  require<T>(!parts.empty(), "concat: no inputs");
  const auto& first = *parts[0];
  require<T>(first.rank() == 4, "concat: rank-4 tensors required");
  int total_c = 0;
  for (const auto* p : parts) {
    require<T>(p->rank() == 4 && p->dim(0) == first.dim(0) &&
                   p->dim(1) == first.dim(1) && p->dim(2) == first.dim(2),
               "concat: non-channel dims disagree: " + shape_str(first.shape()) +
                   " vs " + shape_str(p->shape()));
    total_c += p->dim(3);
  }
  const int b = first.dim(0), h = first.dim(1), w = first.dim(2);
  Tensor<T> out = Tensor<T>::uninit({b, h, w, total_c});
  const std::size_t positions = static_cast<std::size_t>(b) * h * w;
  std::size_t offset = 0;
  for (const auto* p : parts) {
    const int c = p->dim(3);
    const T* src = p->data();
    T* dst = out.data() + offset;
    for (std::size_t i = 0; i < positions; ++i) {
      std::memcpy(dst + i * total_c, src + i * c,
                  static_cast<std::size_t>(c) * sizeof(T));
    }
    offset += static_cast<std::size_t>(c);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& grad,
                                      const std::vector<int>& channel_counts) {
  require<T>(grad.rank() == 4, "split: rank-4 tensor required");
  int total = 0;
  for (int c : channel_counts) total += c;
  require<T>(total == grad.dim(3), "split: channel counts do not sum to " +
                                       std::to_string(grad.dim(3)));
  const int b = grad.dim(0), h = grad.dim(1), w = grad.dim(2);
  const std::size_t positions = static_cast<std::size_t>(b) * h * w;
  std::vector<Tensor<T>> parts;
  parts.reserve(channel_counts.size());
  std::size_t offset = 0;
  for (int c : channel_counts) {
    Tensor<T> part = Tensor<T>::uninit({b, h, w, c});
    T* dst = part.data();
    const T* src = grad.data() + offset;
    for (std::size_t i = 0; i < positions; ++i) {
      std::memcpy(dst + i * static_cast<std::size_t>(c),
                  src + i * static_cast<std::size_t>(grad.dim(3)),
                  static_cast<std::size_t>(c) * sizeof(T));
    }
    offset += static_cast<std::size_t>(c);
    parts.push_back(std::move(part));
  }
  return parts;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require<T>(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 tensors required");
  require<T>(a.dim(1) == b.dim(0), "matmul: inner dims disagree: " +
                                       shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::uninit({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), T(1), a.data(), a.dim(1),
       b.data(), b.dim(1), T(0), out.data(), b.dim(1));
  return out;
}

template <typename T>
MatmulGrads<T> matmul_backward(const Tensor<T>& a, const Tensor<T>& b,
                               const Tensor<T>& upstream_grad) {
  const std::vector<int> want = {a.dim(0), b.dim(1)};
  require<T>(upstream_grad.shape() == want, "matmul_backward: upstream shape " +
                                                shape_str(upstream_grad.shape()) +
                                                " does not match " +
                                                shape_str(want));
  MatmulGrads<T> g;
  g.a_grad = Tensor<T>::uninit(a.shape());
  g.b_grad = Tensor<T>::uninit(b.shape());
  gemm(false, true, a.dim(0), a.dim(1), b.dim(1), T(1), upstream_grad.data(),
       b.dim(1), b.data(), b.dim(1), T(0), g.a_grad.data(), a.dim(1));
  gemm(true, false, b.dim(0), b.dim(1), a.dim(0), T(1), a.data(), a.dim(1),
       upstream_grad.data(), b.dim(1), T(0), g.b_grad.data(), b.dim(1));
  return g;
}

namespace {
inline bool dropout_keep(std::uint64_t seed, std::size_t i, double p) {
  const double u =
      static_cast<double>(Rng(seed).at(static_cast<std::uint64_t>(i)) >> 11) *
      0x1.0p-53;
  return u >= p;
}
}  // namespace

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double p, std::uint64_t seed, Mode mode) {
  require<T>(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1), got " +
                                      std::to_string(p));
  Tensor<T> out = Tensor<T>::uninit(input.shape());
  if (mode == Mode::kInfer || p == 0.0) {
    std::memcpy(out.data(), input.data(), input.size() * sizeof(T));
    return out;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = dropout_keep(seed, i, p) ? input[i] * scale : T(0);
  }
  return out;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& upstream_grad, double p,
                           std::uint64_t seed, Mode mode) {
  Tensor<T> dx = Tensor<T>::uninit(upstream_grad.shape());
  if (mode == Mode::kInfer || p == 0.0) {
    std::memcpy(dx.data(), upstream_grad.data(), dx.size() * sizeof(T));
    return dx;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < dx.size(); ++i) {
    dx[i] = dropout_keep(seed, i, p) ? upstream_grad[i] * scale : T(0);
  }
  return dx;
}

#define DENSSIAM_INSTANTIATE(T)                                                  \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,              \
                               const Tensor<T>&, const ConvSpec&);              \
  template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,  \
                                           const ConvSpec&, const Tensor<T>&,   \
                                           bool);                               \
  template Tensor<T> avg_pool2d<T>(const Tensor<T>&, int, int);                 \
  template Tensor<T> avg_pool2d_backward<T>(const std::vector<int>&, int, int,  \
                                            const Tensor<T>&);                  \
  template BatchNormResult<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&, \
                                            const Tensor<T>&, Tensor<T>&,       \
                                            Tensor<T>&, Mode, T, T);            \
  template BatchNormGrads<T> batch_norm_backward<T>(                            \
      const Tensor<T>&, const Tensor<T>&, const std::vector<T>&,                \
      const Tensor<T>&);                                                        \
  template Tensor<T> relu<T>(const Tensor<T>&);                                 \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> softmax<T>(const Tensor<T>&, int);                         \
  template Tensor<T> softmax_backward<T>(const Tensor<T>&, const Tensor<T>&,    \
                                         int);                                  \
  template Tensor<T> concat_channels<T>(const std::vector<const Tensor<T>*>&);  \
  template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&,           \
                                                    const std::vector<int>&);   \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);             \
  template MatmulGrads<T> matmul_backward<T>(const Tensor<T>&, const Tensor<T>&,\
                                             const Tensor<T>&);                 \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, std::uint64_t, Mode); \
  template Tensor<T> dropout_backward<T>(const Tensor<T>&, double,              \
                                         std::uint64_t, Mode);

DENSSIAM_INSTANTIATE(float)
DENSSIAM_INSTANTIATE(double)
#undef DENSSIAM_INSTANTIATE

}  // namespace denssiam
