#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "gradcheck.hpp"
#include "nn_ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

using namespace denssiam;

namespace {

// Reference convolution: direct NHWC sliding window, no GEMM, no im2col.
// Deliberately separate from the library path.
template <typename T>
Tensor<T> conv2d_reference(const Tensor<T>& in, const Tensor<T>& k,
                           const Tensor<T>& bias, const ConvSpec& s) {
  const int b = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
  const int oh = (h + 2 * s.padding - s.kernel_h) / s.stride + 1;
  const int ow = (w + 2 * s.padding - s.kernel_w) / s.stride + 1;
  Tensor<T> out({b, oh, ow, s.out_channels});
  for (int bi = 0; bi < b; ++bi)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int oc = 0; oc < s.out_channels; ++oc) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[oc]);
          for (int ky = 0; ky < s.kernel_h; ++ky)
            for (int kx = 0; kx < s.kernel_w; ++kx) {
              const int iy = oy * s.stride + ky - s.padding;
              const int ix = ox * s.stride + kx - s.padding;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (int ic = 0; ic < c; ++ic) {
                acc += static_cast<double>(in.at(bi, iy, ix, ic)) *
                       static_cast<double>(k.at(ky, kx, ic, oc));
              }
            }
          out.at(bi, oy, ox, oc) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, T scale = T(1)) {
  return Tensor<T>::randn(std::move(shape), rng, scale);
}

}  // namespace

TEST_CASE("rng stream is deterministic and counter-based") {
  Rng a(42), b(42);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  CHECK(c.at(7) == Rng(42).at(7));
  // fork independence: different labels give different streams
  CHECK(Rng(1).fork("a").next_u64() != Rng(1).fork("b").next_u64());
  // uniforms live in [0,1)
  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  // normal has roughly unit variance
  Rng n(5);
  double sum = 0, sumsq = 0;
  const int kN = 20000;
  for (int i = 0; i < kN; ++i) {
    const double z = n.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::fabs(sum / kN) < 0.03);
  CHECK(sumsq / kN == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("tensor invariants") {
  TensorF t({2, 3, 4, 5});
  CHECK(t.size() == 2u * 3 * 4 * 5);
  CHECK(t.rank() == 4);
  CHECK_THROWS_AS(TensorF({1, 2, 3, 4, 5}), ContractError);
  t.at(1, 2, 3, 4) = 7.0f;
  CHECK(t[t.size() - 1] == 7.0f);
  TensorF bad({2, 2});
  bad.at(0, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(bad.check_finite("test"), NumericError);
}

TEST_CASE("conv2d output shapes match the closed-form formula") {
  Rng rng(1);
  // stem geometry: 127 -> 61 at 72 channels
  {
    ConvSpec s{7, 7, 2, 0, 3, 72};
    auto in = random_tensor<float>({8, 127, 127, 3}, rng);
    auto k = random_tensor<float>({7, 7, 3, 72}, rng, 0.1f);
    auto b = TensorF({72});
    auto out = conv2d(in, k, b, s);
    CHECK(out.shape() == std::vector<int>{8, 61, 61, 72});
  }
  // search-side stem: 255 -> 125
  {
    ConvSpec s{7, 7, 2, 0, 3, 4};
    auto in = random_tensor<float>({1, 255, 255, 3}, rng);
    auto k = random_tensor<float>({7, 7, 3, 4}, rng, 0.1f);
    auto out = conv2d(in, k, TensorF(), s);
    CHECK(out.dim(1) == 125);
    CHECK(out.dim(2) == 125);
  }
  // randomized geometry property
  for (int t = 0; t < 20; ++t) {
    const int n = static_cast<int>(rng.uniform_int(3, 14));
    const int k = static_cast<int>(rng.uniform_int(1, std::min(5, n)));
    const int st = static_cast<int>(rng.uniform_int(1, 3));
    const int p = static_cast<int>(rng.uniform_int(0, 2));
    if (n + 2 * p < k) continue;
    ConvSpec s{k, k, st, p, 2, 3};
    auto in = random_tensor<float>({1, n, n, 2}, rng);
    auto kk = random_tensor<float>({k, k, 2, 3}, rng);
    auto out = conv2d(in, kk, TensorF(), s);
    CHECK(out.dim(1) == (n + 2 * p - k) / st + 1);
  }
}

TEST_CASE("conv2d identity kernel and purity") {
  Rng rng(2);
  auto in = random_tensor<float>({1, 5, 5, 1}, rng);
  TensorF k({1, 1, 1, 1});
  k[0] = 1.0f;
  ConvSpec s{1, 1, 1, 0, 1, 1};
  auto out = conv2d(in, k, TensorF({1}), s);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i] == in[i]);
  auto again = conv2d(in, k, TensorF({1}), s);
  CHECK(std::memcmp(out.data(), again.data(), out.size() * sizeof(float)) == 0);
}

TEST_CASE("conv2d matches the direct-loop reference") {
  Rng rng(3);
  for (int t = 0; t < 8; ++t) {
    const int kh = static_cast<int>(rng.uniform_int(1, 3));
    const int st = static_cast<int>(rng.uniform_int(1, 2));
    const int p = static_cast<int>(rng.uniform_int(0, 1));
    ConvSpec s{kh, kh, st, p, 3, 4};
    auto in = random_tensor<float>({2, 7, 6, 3}, rng);
    auto k = random_tensor<float>({kh, kh, 3, 4}, rng);
    auto b = random_tensor<float>({4}, rng);
    auto got = conv2d(in, k, b, s);
    auto want = conv2d_reference(in, k, b, s);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("conv2d contract violations") {
  Rng rng(4);
  auto in = random_tensor<float>({1, 5, 5, 3}, rng);
  auto k = random_tensor<float>({3, 3, 2, 4}, rng);  // wrong in_channels
  ConvSpec s{3, 3, 1, 0, 2, 4};
  CHECK_THROWS_AS(conv2d(in, k, TensorF(), s), ContractError);
  ConvSpec too_big{9, 9, 1, 0, 3, 4};
  auto k2 = random_tensor<float>({9, 9, 3, 4}, rng);
  CHECK_THROWS_AS(conv2d(in, k2, TensorF(), too_big), ConfigError);
}

TEST_CASE("conv2d_backward scalar chain rule and zero upstream") {
  // 1x1 kernel over a 1x1 image: dW = x * dy, dx = w * dy, db = dy
  TensorF in({1, 1, 1, 1});
  in[0] = 3.0f;
  TensorF k({1, 1, 1, 1});
  k[0] = 5.0f;
  ConvSpec s{1, 1, 1, 0, 1, 1};
  TensorF up({1, 1, 1, 1});
  up[0] = 2.0f;
  auto g = conv2d_backward(in, k, s, up);
  CHECK(g.kernel_grad[0] == 6.0f);
  CHECK(g.input_grad[0] == 10.0f);
  CHECK(g.bias_grad[0] == 2.0f);

  up[0] = 0.0f;
  auto gz = conv2d_backward(in, k, s, up);
  CHECK(gz.kernel_grad[0] == 0.0f);
  CHECK(gz.input_grad[0] == 0.0f);
}

TEST_CASE("conv2d_backward matches finite differences (64-bit, 5 seeds)") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    ConvSpec s{3, 3, 1, 0, 2, 3};
    auto in = random_tensor<double>({1, 6, 6, 2}, rng);
    auto k = random_tensor<double>({3, 3, 2, 3}, rng);
    auto b = random_tensor<double>({3}, rng);
    auto out = conv2d(in, k, b, s);
    auto w = make_loss_weights(out.size(), rng);
    TensorD up(out.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
    auto g = conv2d_backward(in, k, s, up);
    auto loss = [&]() { return weighted_loss(conv2d(in, k, b, s), w); };
    const auto fd = fd_settings_for(true);
    CHECK(fd_max_rel_error(in, g.input_grad, loss, fd, rng) < 1e-5);
    CHECK(fd_max_rel_error(k, g.kernel_grad, loss, fd, rng) < 1e-5);
  }
}

TEST_CASE("avg_pool2d values and geometry") {
  Rng rng(7);
  // 61 -> 30 and the search-path chain 125 -> 62 -> 31
  auto a = random_tensor<float>({1, 61, 61, 2}, rng);
  CHECK(avg_pool2d(a, 2, 2).dim(1) == 30);
  auto p125 = random_tensor<float>({1, 125, 125, 1}, rng);
  auto p62 = avg_pool2d(p125, 2, 2);
  CHECK(p62.dim(1) == 62);
  CHECK(avg_pool2d(p62, 2, 2).dim(1) == 31);
  // constant input stays constant
  auto c = TensorF::full({1, 4, 4, 3}, 2.5f);
  auto pc = avg_pool2d(c, 2, 2);
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK(pc[i] == doctest::Approx(2.5f));
  // size too large
  CHECK_THROWS_AS(avg_pool2d(c, 5, 1), ConfigError);
}

TEST_CASE("avg_pool2d backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 11);
    auto in = random_tensor<double>({2, 5, 5, 3}, rng);
    auto out = avg_pool2d(in, 2, 2);
    auto w = make_loss_weights(out.size(), rng);
    TensorD up(out.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
    auto dx = avg_pool2d_backward(in.shape(), 2, 2, up);
    auto loss = [&]() { return weighted_loss(avg_pool2d(in, 2, 2), w); };
    CHECK(fd_max_rel_error(in, dx, loss, fd_settings_for(true), rng) < 1e-5);
  }
}

TEST_CASE("batch_norm train-mode statistics and affine") {
  Rng rng(8);
  const int c = 3;
  auto in = random_tensor<float>({4, 5, 5, c}, rng, 2.0f);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] += 1.5f;  // nonzero mean
  TensorF gamma = TensorF::full({c}, 1.0f);
  TensorF beta({c});
  TensorF run_mean({c});
  TensorF run_var = TensorF::full({c}, 1.0f);
  auto r = batch_norm(in, gamma, beta, run_mean, run_var, Mode::kTrain, 1e-5f, 0.9f);
  const std::size_t rows = in.size() / c;
  for (int ch = 0; ch < c; ++ch) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < rows; ++i) mean += r.output[i * c + ch];
    mean /= static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      const double d = r.output[i * c + ch] - mean;
      var += d * d;
    }
    var /= static_cast<double>(rows);
    CHECK(std::fabs(mean) < 1e-4);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }

  // gamma=2, beta=3 on standardized data -> mean 3, std 2
  TensorF gamma2 = TensorF::full({c}, 2.0f);
  TensorF beta3 = TensorF::full({c}, 3.0f);
  TensorF rm2({c});
  TensorF rv2 = TensorF::full({c}, 1.0f);
  auto r2 = batch_norm(in, gamma2, beta3, rm2, rv2, Mode::kTrain, 1e-5f, 0.9f);
  for (int ch = 0; ch < c; ++ch) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < rows; ++i) mean += r2.output[i * c + ch];
    mean /= static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      const double d = r2.output[i * c + ch] - mean;
      var += d * d;
    }
    var /= static_cast<double>(rows);
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(1e-3));
  }

  // batch of 1 in train mode is rejected
  auto single = random_tensor<float>({1, 5, 5, c}, rng);
  CHECK_THROWS_AS(
      batch_norm(single, gamma, beta, run_mean, run_var, Mode::kTrain, 1e-5f, 0.9f),
      ContractError);

  // running stats moved toward batch stats with momentum 0.9
  CHECK(run_mean[0] != 0.0f);
  // infer mode uses running stats and is deterministic
  auto inf1 = batch_norm(in, gamma, beta, run_mean, run_var, Mode::kInfer, 1e-5f, 0.9f);
  auto inf2 = batch_norm(in, gamma, beta, run_mean, run_var, Mode::kInfer, 1e-5f, 0.9f);
  CHECK(std::memcmp(inf1.output.data(), inf2.output.data(),
                    inf1.output.size() * sizeof(float)) == 0);
}

TEST_CASE("batch_norm zero-variance channel is handled by epsilon") {
  TensorF in({2, 2, 2, 1});
  in.fill(4.0f);
  TensorF gamma = TensorF::full({1}, 1.0f);
  TensorF beta({1});
  TensorF rm({1});
  TensorF rv = TensorF::full({1}, 1.0f);
  auto r = batch_norm(in, gamma, beta, rm, rv, Mode::kTrain, 1e-5f, 0.9f);
  for (std::size_t i = 0; i < r.output.size(); ++i) {
    CHECK(std::isfinite(r.output[i]));
    CHECK(r.output[i] == doctest::Approx(0.0f).epsilon(1e-4));
  }
}

TEST_CASE("batch_norm backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 13);
    const int c = 2;
    auto in = random_tensor<double>({3, 4, 4, c}, rng);
    TensorD gamma = TensorD::full({c}, 1.3);
    TensorD beta = TensorD::full({c}, -0.2);
    auto run = [&](Tensor<double>& x) {
      TensorD rm({c});
      TensorD rv = TensorD::full({c}, 1.0);
      return batch_norm(x, gamma, beta, rm, rv, Mode::kTrain, 1e-5, 0.9);
    };
    auto fwd = run(in);
    auto w = make_loss_weights(fwd.output.size(), rng);
    TensorD up(fwd.output.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
    auto g = batch_norm_backward(up, fwd.xhat, fwd.inv_std, gamma);
    auto loss = [&]() { return weighted_loss(run(in).output, w); };
    CHECK(fd_max_rel_error(in, g.input_grad, loss, fd_settings_for(true), rng) <
          1e-5);
    auto loss_g = [&]() { return weighted_loss(run(in).output, w); };
    CHECK(fd_max_rel_error(gamma, g.gamma_grad, loss_g, fd_settings_for(true),
                           rng) < 1e-5);
    CHECK(fd_max_rel_error(beta, g.beta_grad, loss_g, fd_settings_for(true),
                           rng) < 1e-5);
  }
}

TEST_CASE("softmax properties") {
  // all-equal vector of length 81 -> every entry 1/81
  TensorF flat({81});
  flat.fill(3.7f);
  auto sm = softmax(flat, 0);
  for (std::size_t i = 0; i < sm.size(); ++i) {
    CHECK(sm[i] == doctest::Approx(1.0f / 81.0f).epsilon(1e-6));
  }
  // random tensors: strictly positive, sums to 1 +- 1e-6 along the axis
  Rng rng(9);
  auto t = random_tensor<float>({2, 3, 4, 5}, rng, 3.0f);
  for (int axis = 0; axis < 4; ++axis) {
    auto s = softmax(t, axis);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] > 0.0f);
  }
  auto s3 = softmax(t, 3);
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) {
        float sum = 0;
        for (int c = 0; c < 5; ++c) sum += s3.at(b, y, x, c);
        CHECK(std::fabs(sum - 1.0f) <= 1e-6f);
      }
  // shift invariance is exact for exactly-representable shifts
  TensorF m({4});
  m.at(0) = 1.0f; m.at(1) = -2.0f; m.at(2) = 0.5f; m.at(3) = 3.0f;
  TensorF shifted({4});
  for (int i = 0; i < 4; ++i) shifted.at(i) = m.at(i) + 8.0f;
  auto a = softmax(m, 0), b = softmax(shifted, 0);
  CHECK(std::memcmp(a.data(), b.data(), 4 * sizeof(float)) == 0);
}

TEST_CASE("softmax backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 17);
    auto in = random_tensor<double>({3, 7}, rng);
    auto out = softmax(in, 1);
    auto w = make_loss_weights(out.size(), rng);
    TensorD up(out.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
    auto dx = softmax_backward(out, up, 1);
    auto loss = [&]() { return weighted_loss(softmax(in, 1), w); };
    CHECK(fd_max_rel_error(in, dx, loss, fd_settings_for(true), rng) < 1e-5);
  }
}

TEST_CASE("concat and split round trip") {
  Rng rng(10);
  auto a = random_tensor<float>({2, 3, 3, 4}, rng);
  auto b = random_tensor<float>({2, 3, 3, 2}, rng);
  auto cat = concat_channels<float>({&a, &b});
  CHECK(cat.shape() == std::vector<int>{2, 3, 3, 6});
  CHECK(cat.at(1, 2, 2, 3) == a.at(1, 2, 2, 3));
  CHECK(cat.at(1, 2, 2, 4) == b.at(1, 2, 2, 0));
  auto parts = split_channels(cat, {4, 2});
  CHECK(std::memcmp(parts[0].data(), a.data(), a.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(parts[1].data(), b.data(), b.size() * sizeof(float)) == 0);
  auto bad = random_tensor<float>({2, 4, 3, 2}, rng);
  CHECK_THROWS_AS(concat_channels<float>({&a, &bad}), ContractError);
}

TEST_CASE("matmul small case and backward") {
  TensorF a({2, 3});
  TensorF b({3, 2});
  for (int i = 0; i < 6; ++i) {
    a[i] = static_cast<float>(i + 1);
    b[i] = static_cast<float>(6 - i);
  }
  auto c = matmul(a, b);
  // [[1,2,3],[4,5,6]] x [[6,5],[4,3],[2,1]] = [[20,14],[56,41]]
  CHECK(c.at(0, 0) == 20.0f);
  CHECK(c.at(0, 1) == 14.0f);
  CHECK(c.at(1, 0) == 56.0f);
  CHECK(c.at(1, 1) == 41.0f);
  TensorF wrong({4, 2});
  CHECK_THROWS_AS(matmul(a, wrong), ContractError);

  Rng rng(11);
  auto ad = random_tensor<double>({3, 4}, rng);
  auto bd = random_tensor<double>({4, 2}, rng);
  auto out = matmul(ad, bd);
  auto w = make_loss_weights(out.size(), rng);
  TensorD up(out.shape());
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
  auto g = matmul_backward(ad, bd, up);
  auto loss = [&]() { return weighted_loss(matmul(ad, bd), w); };
  CHECK(fd_max_rel_error(ad, g.a_grad, loss, fd_settings_for(true), rng) < 1e-5);
  CHECK(fd_max_rel_error(bd, g.b_grad, loss, fd_settings_for(true), rng) < 1e-5);
}

TEST_CASE("dropout semantics") {
  Rng rng(12);
  auto in = random_tensor<float>({2, 4, 4, 3}, rng);
  // p = 0 is the identity in both modes
  auto t0 = dropout(in, 0.0, 99, Mode::kTrain);
  auto i0 = dropout(in, 0.0, 99, Mode::kInfer);
  CHECK(std::memcmp(t0.data(), in.data(), in.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(i0.data(), in.data(), in.size() * sizeof(float)) == 0);
  // infer mode is the identity for any p
  auto inf = dropout(in, 0.5, 99, Mode::kInfer);
  CHECK(std::memcmp(inf.data(), in.data(), in.size() * sizeof(float)) == 0);
  // deterministic given seed
  auto d1 = dropout(in, 0.3, 7, Mode::kTrain);
  auto d2 = dropout(in, 0.3, 7, Mode::kTrain);
  CHECK(std::memcmp(d1.data(), d2.data(), d1.size() * sizeof(float)) == 0);
  auto d3 = dropout(in, 0.3, 8, Mode::kTrain);
  CHECK(std::memcmp(d1.data(), d3.data(), d1.size() * sizeof(float)) != 0);
  CHECK_THROWS_AS(dropout(in, 1.0, 7, Mode::kTrain), ContractError);
}

TEST_CASE("inverted dropout preserves expectation within 2%") {
  const double p = 0.2;
  TensorF ones = TensorF::full({100}, 1.0f);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    auto out = dropout(ones, p, static_cast<std::uint64_t>(t + 1), Mode::kTrain);
    for (std::size_t i = 0; i < out.size(); ++i) total += out[i];
  }
  const double mean = total / (trials * 100.0);
  CHECK(std::fabs(mean - 1.0) < 0.02);
}

TEST_CASE("relu and its backward") {
  TensorF in({4});
  in.at(0) = -1.0f; in.at(1) = 0.0f; in.at(2) = 2.0f; in.at(3) = -0.5f;
  auto out = relu(in);
  CHECK(out.at(0) == 0.0f);
  CHECK(out.at(2) == 2.0f);
  TensorF up = TensorF::full({4}, 1.0f);
  auto dx = relu_backward(out, up);
  CHECK(dx.at(0) == 0.0f);
  CHECK(dx.at(2) == 1.0f);
}
