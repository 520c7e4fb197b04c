#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "head.hpp"

using namespace denssiam;

namespace {

// Quadruple-loop reference correlation, independent of the library path.
template <typename T>
Tensor<T> correlate_reference(const Tensor<T>& t, const Tensor<T>& s, T gain,
                              T bias) {
  const int b = t.dim(0), th = t.dim(1), tw = t.dim(2), c = t.dim(3);
  const int oh = s.dim(1) - th + 1, ow = s.dim(2) - tw + 1;
  Tensor<T> out({b, oh, ow});
  for (int bi = 0; bi < b; ++bi)
    for (int p = 0; p < oh; ++p)
      for (int q = 0; q < ow; ++q) {
        double acc = 0;
        for (int u = 0; u < th; ++u)
          for (int v = 0; v < tw; ++v)
            for (int ch = 0; ch < c; ++ch)
              acc += static_cast<double>(t.at(bi, u, v, ch)) *
                     s.at(bi, p + u, q + v, ch);
        out.at(bi, p, q) = static_cast<T>(gain * acc + bias);
      }
  return out;
}

std::pair<int, int> map_argmax(const Tensor<float>& m) {
  int by = 0, bx = 0;
  float best = m.at(0, 0, 0);
  for (int p = 0; p < m.dim(1); ++p)
    for (int q = 0; q < m.dim(2); ++q)
      if (m.at(0, p, q) > best) {
        best = m.at(0, p, q);
        by = p;
        bx = q;
      }
  return {by, bx};
}

}  // namespace

TEST_CASE("score map geometry: (9,9,128) over (25,25,128) gives 17x17") {
  Rng rng(1);
  auto t = TensorF::randn({1, 9, 9, 128}, rng, 0.1f);
  auto s = TensorF::randn({1, 25, 25, 128}, rng, 0.1f);
  auto maps = cross_correlate(t, s, 1.0f, 0.0f);
  CHECK(maps.values.shape() == std::vector<int>{1, 17, 17});
  // randomized size pairs follow search - target + 1
  for (int trial = 0; trial < 10; ++trial) {
    const int th = static_cast<int>(rng.uniform_int(1, 4));
    const int sh = th + static_cast<int>(rng.uniform_int(0, 5));
    auto tt = TensorF::randn({1, th, th, 3}, rng);
    auto ss = TensorF::randn({1, sh, sh, 3}, rng);
    auto m = cross_correlate(tt, ss, 1.0f, 0.0f);
    CHECK(m.values.dim(1) == sh - th + 1);
  }
  // target larger than search is a contract violation
  auto big = TensorF::randn({1, 30, 30, 128}, rng);
  CHECK_THROWS_AS(cross_correlate(big, s, 1.0f, 0.0f), ContractError);
}

TEST_CASE("cross correlation matches the reference within 1e-5 relative") {
  Rng rng(2);
  for (int trial = 0; trial < 6; ++trial) {
    auto t = TensorF::randn({2, 3, 3, 5}, rng);
    auto s = TensorF::randn({2, 7, 6, 5}, rng);
    auto got = cross_correlate(t, s, 0.7f, -0.1f);
    auto want = correlate_reference(t, s, 0.7f, -0.1f);
    for (std::size_t i = 0; i < got.values.size(); ++i) {
      const float denom = std::max(1e-6f, std::fabs(want[i]));
      CHECK(std::fabs(got.values[i] - want[i]) / denom < 1e-5f);
    }
  }
}

TEST_CASE("planted peak localizes and translates by one cell") {
  Rng rng(3);
  const int th = 3, c = 4, sh = 9;
  auto target = TensorF::randn({1, th, th, c}, rng);
  auto make_search = [&](int py, int px) {
    TensorF s({1, sh, sh, c});
    Rng noise(99);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = 0.05f * static_cast<float>(noise.normal());
    }
    for (int u = 0; u < th; ++u)
      for (int v = 0; v < th; ++v)
        for (int ch = 0; ch < c; ++ch)
          s.at(0, py + u, px + v, ch) += target.at(0, u, v, ch);
    return s;
  };
  auto m1 = cross_correlate(target, make_search(2, 3), 1.0f, 0.0f);
  auto [p1, q1] = map_argmax(m1.values);
  CHECK(p1 == 2);
  CHECK(q1 == 3);
  auto m2 = cross_correlate(target, make_search(2, 4), 1.0f, 0.0f);
  auto [p2, q2] = map_argmax(m2.values);
  CHECK(p2 == 2);
  CHECK(q2 == q1 + 1);
}

TEST_CASE("zero target: raw all zero, values equal the bias") {
  Rng rng(4);
  TensorF t({1, 3, 3, 4});
  auto s = TensorF::randn({1, 8, 8, 4}, rng);
  auto m = cross_correlate(t, s, 2.0f, 0.35f);
  for (std::size_t i = 0; i < m.raw.size(); ++i) {
    CHECK(m.raw[i] == 0.0f);
    CHECK(m.values[i] == doctest::Approx(0.35f));
  }
}

TEST_CASE("correlation backward matches finite differences (64-bit)") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 7);
    auto t = TensorD::randn({1, 3, 3, 4}, rng);
    auto s = TensorD::randn({1, 5, 5, 4}, rng);
    double gain = 0.5, bias = 0.1;
    auto fwd = cross_correlate(t, s, gain, bias);
    auto w = make_loss_weights(fwd.values.size(), rng);
    TensorD up(fwd.values.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
    auto g = cross_correlate_backward(t, s, fwd.raw, gain, up);
    auto loss = [&]() {
      return weighted_loss(cross_correlate(t, s, gain, bias).values, w);
    };
    const auto fd = fd_settings_for(true);
    CHECK(fd_max_rel_error(t, g.target_grad, loss, fd, rng) < 1e-5);
    CHECK(fd_max_rel_error(s, g.search_grad, loss, fd, rng) < 1e-5);
    // gain/bias via scalar probes
    {
      const double eps = 1e-4;
      auto at_gain = [&](double gv) {
        return weighted_loss(cross_correlate(t, s, gv, bias).values, w);
      };
      const double numeric = (at_gain(gain + eps) - at_gain(gain - eps)) / (2 * eps);
      CHECK(std::fabs(numeric - g.gain_grad) /
                std::max(1e-6, std::fabs(numeric)) < 1e-5);
      auto at_bias = [&](double bv) {
        return weighted_loss(cross_correlate(t, s, gain, bv).values, w);
      };
      const double nb = (at_bias(bias + eps) - at_bias(bias - eps)) / (2 * eps);
      CHECK(std::fabs(nb - g.bias_grad) / std::max(1e-6, std::fabs(nb)) < 1e-5);
    }
  }
}

TEST_CASE("label map: counts, rotation symmetry, degenerate radius") {
  auto labels = make_label_map<float>(17, 2.0);
  int positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CHECK((labels[i] == 1.0f || labels[i] == -1.0f));
    if (labels[i] > 0) ++positives;
  }
  CHECK(positives == 13);
  // 90-degree rotation invariance
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j)
      CHECK(labels.at(i, j) == labels.at(j, 16 - i));
  // r_pos = 0: only the center
  auto tight = make_label_map<float>(9, 0.0);
  int tp = 0;
  for (std::size_t i = 0; i < tight.size(); ++i) {
    if (tight[i] > 0) ++tp;
  }
  CHECK(tp == 1);
  CHECK(tight.at(4, 4) == 1.0f);
  CHECK_THROWS_AS(make_label_map<float>(16, 2.0), ConfigError);
}

TEST_CASE("logistic loss: zero-score value, symmetry, tail, stability") {
  CHECK(logistic_loss(0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (double v : {-20.0, -3.5, -0.1, 0.0, 0.4, 7.0, 55.0}) {
    CHECK(logistic_loss(v, -1.0) ==
          doctest::Approx(logistic_loss(-v, 1.0)).epsilon(1e-12));
  }
  // ln(1 + e^-10), frozen from a high-precision evaluation
  CHECK(logistic_loss(10.0, 1.0) == doctest::Approx(4.5398899216870535e-05));
  // no overflow for |v| <= 1e4
  CHECK(std::isfinite(logistic_loss(1e4, -1.0)));
  CHECK(logistic_loss(1e4, -1.0) == doctest::Approx(1e4));
  CHECK_THROWS_AS(logistic_loss(0.0, 0.5), ContractError);
}

TEST_CASE("map loss: constant map, separation limit, hand-computed case") {
  auto labels = make_label_map<float>(17, 2.0);
  TensorF v({17, 17});
  auto uniform = map_loss(v, labels, false);
  auto balanced = map_loss(v, labels, true);
  CHECK(uniform.loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(balanced.loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  // perfect separation drives the loss to zero
  TensorF sep({17, 17});
  for (std::size_t i = 0; i < sep.size(); ++i) sep[i] = 50.0f * labels[i];
  CHECK(map_loss(sep, labels, false).loss < 1e-9);
  CHECK(map_loss(sep, labels, true).loss < 1e-9);

  // v = 0 except center +10: direct-summation oracle over the 289 cells
  TensorF center({17, 17});
  center.at(8, 8) = 10.0f;
  double oracle = 0.0;
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j)
      oracle += std::log1p(std::exp(-static_cast<double>(labels.at(i, j)) *
                                    center.at(i, j)));
  oracle /= 289.0;
  const double closed_form = (288.0 * std::log(2.0) + logistic_loss(10.0, 1.0)) / 289.0;
  CHECK(oracle == doctest::Approx(closed_form).epsilon(1e-12));
  CHECK(map_loss(center, labels, false).loss ==
        doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("unbalanced map loss is invariant under label-fixing permutations") {
  Rng rng(8);
  auto labels = make_label_map<float>(9, 1.5);
  TensorF v({9, 9});
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<float>(rng.normal());
  }
  const double base = map_loss(v, labels, false).loss;
  // swap score values between two same-label cells
  auto swap_cells = [&](int i1, int j1, int i2, int j2) {
    REQUIRE(labels.at(i1, j1) == labels.at(i2, j2));
    std::swap(v.at(i1, j1), v.at(i2, j2));
  };
  swap_cells(0, 0, 8, 8);  // both negative
  swap_cells(4, 4, 4, 5);  // both positive (r_pos 1.5 covers distance 1)
  CHECK(map_loss(v, labels, false).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("map loss gradient matches finite differences (64-bit, 1e-6)") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 13);
    auto labels = make_label_map<double>(9, 2.0);
    TensorD v({9, 9});
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.normal();
    for (bool balanced : {false, true}) {
      auto ml = map_loss(v, labels, balanced);
      const double eps = 1e-5;
      double worst = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double saved = v[i];
        v[i] = saved + eps;
        const double lp = map_loss(v, labels, balanced).loss;
        v[i] = saved - eps;
        const double lm = map_loss(v, labels, balanced).loss;
        v[i] = saved;
        const double numeric = (lp - lm) / (2 * eps);
        const double denom = std::max(
            {1e-8, std::fabs(numeric),
             std::fabs(static_cast<double>(ml.values_grad[i]))});
        worst = std::max(
            worst, std::fabs(numeric - ml.values_grad[i]) / denom);
      }
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("offset label maps keep the positive disc inside the map") {
  auto shifted = make_label_map<float>(17, 2.0, -2.0, 3.0);
  int positives = 0;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    if (shifted[i] > 0) ++positives;
  }
  CHECK(positives == 13);
  CHECK(shifted.at(6, 11) == 1.0f);  // center moved to (8-2, 8+3)
  CHECK(shifted.at(8, 8) == -1.0f);
}
