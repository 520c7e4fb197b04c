#include <doctest.h>

#include <cmath>
#include <cstring>

#include "attention.hpp"
#include "gradcheck.hpp"

using namespace denssiam;

TEST_CASE("projection shapes: (1,9,9,128) with r=16") {
  Rng rng(1);
  auto x = TensorF::randn({1, 9, 9, 128}, rng, 0.5f);
  auto wf = TensorF::randn({1, 1, 128, 16}, rng, 0.1f);
  auto wg = TensorF::randn({1, 1, 128, 16}, rng, 0.1f);
  auto wh = TensorF::randn({1, 1, 128, 128}, rng, 0.1f);
  TensorF f, g, h;
  attention_projections(x, wf, wg, wh, f, g, h);
  CHECK(f.shape() == std::vector<int>{1, 9, 9, 16});
  CHECK(g.shape() == std::vector<int>{1, 9, 9, 16});
  CHECK(h.shape() == std::vector<int>{1, 9, 9, 128});

  // zero projection kernel gives the zero map
  TensorF wf0({1, 1, 128, 16});
  attention_projections(x, wf0, wg, wh, f, g, h);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == 0.0f);

  // identity-like W_h reproduces x
  TensorF whi({1, 1, 128, 128});
  for (int c = 0; c < 128; ++c) whi.at(0, 0, c, c) = 1.0f;
  attention_projections(x, wf, wg, whi, f, g, h);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(h[i] == doctest::Approx(x[i]).epsilon(1e-6));
  }
}

TEST_CASE("attention weights: uniform, degenerate, and hand-sized cases") {
  // f = g = 0 -> every entry 1/N, N = 81
  TensorF f0({1, 9, 9, 16}), g0({1, 9, 9, 16});
  auto phi = attention_weights(f0, g0);
  CHECK(phi.shape() == std::vector<int>{1, 81, 81});
  for (std::size_t i = 0; i < phi.size(); ++i) {
    CHECK(phi[i] == doctest::Approx(1.0f / 81.0f).epsilon(1e-6));
  }

  // single position
  TensorF f1({1, 1, 1, 4}), g1({1, 1, 1, 4});
  f1.fill(0.3f);
  g1.fill(-2.0f);
  auto phi1 = attention_weights(f1, g1);
  CHECK(phi1.size() == 1);
  CHECK(phi1[0] == doctest::Approx(1.0f));

  // N=2 with m = [[0,0],[ln3,ln3]] -> each column (0.25, 0.75)
  TensorF f2({1, 1, 2, 1}), g2({1, 1, 2, 1});
  f2.at(0, 0, 0, 0) = 0.0f;
  f2.at(0, 0, 1, 0) = 1.0f;
  const float ln3 = std::log(3.0f);
  g2.at(0, 0, 0, 0) = ln3;
  g2.at(0, 0, 1, 0) = ln3;
  auto phi2 = attention_weights(f2, g2);
  for (int j = 0; j < 2; ++j) {
    CHECK(phi2.at(0, 0, j) == doctest::Approx(0.25f).epsilon(1e-6));
    CHECK(phi2.at(0, 1, j) == doctest::Approx(0.75f).epsilon(1e-6));
  }
}

TEST_CASE("attention weights are column-stochastic on random inputs") {
  Rng rng(5);
  auto f = TensorF::randn({2, 3, 3, 4}, rng, 2.0f);
  auto g = TensorF::randn({2, 3, 3, 4}, rng, 2.0f);
  auto phi = attention_weights(f, g);
  const int n = 9;
  for (int b = 0; b < 2; ++b) {
    for (int j = 0; j < n; ++j) {
      float sum = 0.0f;
      for (int i = 0; i < n; ++i) {
        CHECK(phi.at(b, i, j) >= 0.0f);
        sum += phi.at(b, i, j);
      }
      CHECK(std::fabs(sum - 1.0f) <= 1e-6f);
    }
  }
}

TEST_CASE("shift invariance of the score softmax is exact for integer shifts") {
  // An extra f channel of 1s with g channel c adds the constant c to every m.
  TensorF f({1, 2, 2, 1}), g({1, 2, 2, 1});
  TensorF fs({1, 2, 2, 2}), gs({1, 2, 2, 2});
  Rng rng(6);
  for (int i = 0; i < 4; ++i) {
    const float a = static_cast<float>(rng.uniform_int(-3, 3));
    const float b = static_cast<float>(rng.uniform_int(-3, 3));
    f[static_cast<std::size_t>(i)] = a;
    g[static_cast<std::size_t>(i)] = b;
    fs[static_cast<std::size_t>(2 * i)] = a;
    fs[static_cast<std::size_t>(2 * i) + 1] = 1.0f;
    gs[static_cast<std::size_t>(2 * i)] = b;
    gs[static_cast<std::size_t>(2 * i) + 1] = 8.0f;
  }
  auto phi = attention_weights(f, g);
  auto phi_shifted = attention_weights(fs, gs);
  CHECK(std::memcmp(phi.data(), phi_shifted.data(), phi.size() * sizeof(float)) ==
        0);
}

TEST_CASE("attention apply: uniform, identity, and constant-h cases") {
  Rng rng(7);
  auto h = TensorF::randn({1, 2, 2, 3}, rng);
  const int n = 4;
  // uniform phi -> positional mean of h
  TensorF uni({1, n, n});
  uni.fill(1.0f / n);
  auto out = attention_apply(uni, h);
  for (int c = 0; c < 3; ++c) {
    float mean = 0;
    for (int i = 0; i < n; ++i) mean += h[static_cast<std::size_t>(i * 3 + c)];
    mean /= n;
    for (int j = 0; j < n; ++j) {
      CHECK(out[static_cast<std::size_t>(j * 3 + c)] ==
            doctest::Approx(mean).epsilon(1e-6));
    }
  }
  // identity phi -> h
  TensorF eye({1, n, n});
  for (int i = 0; i < n; ++i) eye.at(0, i, i) = 1.0f;
  auto out_eye = attention_apply(eye, h);
  for (std::size_t i = 0; i < h.size(); ++i) {
    CHECK(out_eye[i] == doctest::Approx(h[i]));
  }
  // constant h -> constant output for any column-stochastic phi
  TensorF hc = TensorF::full({1, 2, 2, 3}, 1.7f);
  auto fr = TensorF::randn({1, 2, 2, 2}, rng);
  auto gr = TensorF::randn({1, 2, 2, 2}, rng);
  auto phi = attention_weights(fr, gr);
  auto out_c = attention_apply(phi, hc);
  for (std::size_t i = 0; i < out_c.size(); ++i) {
    CHECK(out_c[i] == doctest::Approx(1.7f).epsilon(1e-5));
  }
}

TEST_CASE("attention module: shape identity and convexity bounds") {
  for (int hw : {3, 9, 15}) {
    ParamStoreF store;
    Rng init(40 + hw);
    Attention<float> attn(store, AttentionConfig{8, 2, false}, init);
    Rng rng(50 + hw);
    auto x = TensorF::randn({2, hw, hw, 8}, rng);
    FwdCtx ctx;
    auto out = attn.forward(x, ctx);
    CHECK(out.shape() == x.shape());
  }
  // convexity: per batch item and channel, output within [min h, max h]
  ParamStoreF store;
  Rng init(60);
  Attention<float> attn(store, AttentionConfig{8, 2, false}, init);
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = TensorF::randn({1, 4, 4, 8}, rng);
    TensorF f, g, h;
    attention_projections(x, store.at("attn.f.kernel").value,
                          store.at("attn.g.kernel").value,
                          store.at("attn.h.kernel").value, f, g, h);
    FwdCtx ctx;
    auto out = attn.forward(x, ctx);
    for (int c = 0; c < 8; ++c) {
      float lo = h.at(0, 0, 0, c), hi = lo;
      for (int i = 0; i < 16; ++i) {
        const float v = h[static_cast<std::size_t>(i * 8 + c)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      for (int j = 0; j < 16; ++j) {
        const float v = out[static_cast<std::size_t>(j * 8 + c)];
        CHECK(v >= lo - 1e-5f);
        CHECK(v <= hi + 1e-5f);
      }
    }
  }
}

TEST_CASE("attention backward matches finite differences (64-bit)") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParamStoreD store;
    Rng init(seed);
    Attention<double> attn(store, AttentionConfig{8, 2, false}, init);
    Rng rng(seed * 101);
    auto x = TensorD::randn({1, 3, 3, 8}, rng);
    FwdCtx ctx{Mode::kTrain, true, 0};
    auto out = attn.forward(x, ctx);
    auto w = make_loss_weights(out.size(), rng);
    TensorD up(out.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
    store.zero_grads();
    auto dx = attn.backward(up);
    auto loss = [&]() { return weighted_loss(attn.forward(x, ctx), w); };
    const auto fd = fd_settings_for(true);
    CHECK(fd_max_rel_error(x, dx, loss, fd, rng) < 1e-5);
    for (const char* name : {"attn.f.kernel", "attn.g.kernel", "attn.h.kernel"}) {
      auto& p = store.at(name);
      CHECK(fd_max_rel_error(p.value, p.grad, loss, fd, rng) < 1e-5);
    }
  }
}

TEST_CASE("attention backward matches finite differences (32-bit)") {
  // The float analytic gradient is judged against a double-precision
  // difference quotient evaluated at the same (float-representable) point.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng init(seed);
    ParamStoreD sd;
    Attention<double> ad(sd, AttentionConfig{8, 2, false}, init);
    for (std::size_t i = 0; i < sd.count(); ++i) round_to_float(sd.item(i).value);
    Rng rng(seed * 103);
    auto xd = TensorD::randn({1, 3, 3, 8}, rng);
    round_to_float(xd);

    Rng init2(seed);
    ParamStoreF sf;
    Attention<float> af(sf, AttentionConfig{8, 2, false}, init2);
    for (std::size_t i = 0; i < sf.count(); ++i) {
      sf.item(i).value = tensor_cast<float>(sd.item(i).value);
    }
    auto xf = tensor_cast<float>(xd);

    FwdCtx ctx{Mode::kTrain, true, 0};
    auto out = af.forward(xf, ctx);
    auto w = make_loss_weights(out.size(), rng);
    TensorF up(out.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = static_cast<float>(w[i]);
    sf.zero_grads();
    auto dx = af.backward(up);

    auto dloss = [&]() { return weighted_loss(ad.forward(xd, ctx), w); };
    auto numeric = fd_numeric_grad(xd, dloss, 1e-5);
    CHECK(mixed_max_rel_error(dx, numeric, 1e-4) < 1e-3);
  }
}

TEST_CASE("residual flag adds the input back") {
  ParamStoreF store;
  Rng init(70);
  Attention<float> plain(store, AttentionConfig{8, 2, false}, init);
  Attention<float> res(store, AttentionConfig{8, 2, true}, init);
  Rng rng(71);
  auto x = TensorF::randn({1, 3, 3, 8}, rng);
  FwdCtx ctx;
  auto a = plain.forward(x, ctx);
  auto b = res.forward(x, ctx);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i] == doctest::Approx(a[i] + x[i]).epsilon(1e-6));
  }
}
