#include <doctest.h>

#include <cmath>
#include <cstring>

#include "backbone.hpp"
#include "gradcheck.hpp"

using namespace denssiam;

namespace {

template <typename T>
Tensor<T> random_image(int b, int s, Rng& rng) {
  Tensor<T> img({b, s, s, 3});
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = static_cast<T>(rng.uniform());
  }
  return img;
}

// channel-summed energy argmax over the spatial grid
template <typename T>
std::pair<int, int> embedding_argmax(const Tensor<T>& emb) {
  int by = 0, bx = 0;
  double best = -1.0;
  for (int y = 0; y < emb.dim(1); ++y) {
    for (int x = 0; x < emb.dim(2); ++x) {
      double e = 0;
      for (int c = 0; c < emb.dim(3); ++c) {
        const double v = emb.at(0, y, x, c);
        e += v * v;
      }
      if (e > best) {
        best = e;
        by = y;
        bx = x;
      }
    }
  }
  return {by, bx};
}

}  // namespace

TEST_CASE("target branch stage shapes match the published table") {
  ParamStoreF store;
  Rng init(1);
  BranchF branch(store, BackboneConfig{}, init);
  Rng rng(2);
  auto img = random_image<float>(8, 127, rng);
  FwdCtx ctx;  // infer
  auto emb = branch.forward(img, ctx);
  CHECK(emb.shape() == std::vector<int>{8, 9, 9, 128});

  const std::vector<std::vector<int>> want = {
      {8, 61, 61, 72},  {8, 61, 61, 144}, {8, 30, 30, 36}, {8, 30, 30, 180},
      {8, 15, 15, 36},  {8, 15, 15, 252}, {8, 9, 9, 128}};
  const auto& stages = branch.stage_shapes();
  REQUIRE(stages.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(stages[i].shape == want[i]);
  }
}

TEST_CASE("search path: 255 -> 25x25 embedding via 125/62/31") {
  ParamStoreF store;
  Rng init(1);
  BranchF branch(store, BackboneConfig{}, init);
  Rng rng(3);
  auto img = random_image<float>(1, 255, rng);
  FwdCtx ctx;
  auto emb = branch.forward(img, ctx);
  CHECK(emb.shape() == std::vector<int>{1, 25, 25, 128});
  const auto& stages = branch.stage_shapes();
  CHECK(stages[0].shape == std::vector<int>{1, 125, 125, 72});
  CHECK(stages[2].shape == std::vector<int>{1, 62, 62, 36});
  CHECK(stages[4].shape == std::vector<int>{1, 31, 31, 36});
}

TEST_CASE("branch rejects undersized or non-square input") {
  ParamStoreF store;
  Rng init(1);
  BranchF branch(store, BackboneConfig{}, init);
  Rng rng(4);
  auto small = random_image<float>(1, 64, rng);
  FwdCtx ctx;
  CHECK_THROWS_AS(branch.forward(small, ctx), ConfigError);
}

TEST_CASE("weight sharing: two branches over one store are bit-identical") {
  ParamStoreF store;
  Rng init(7);
  BranchF target(store, BackboneConfig{}, init);
  BranchF search(store, BackboneConfig{}, init);
  Rng rng(8);
  auto img = random_image<float>(1, 127, rng);
  FwdCtx ctx;
  auto a = target.forward(img, ctx);
  auto b = search.forward(img, ctx);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("init is deterministic and He-scaled, BN gammas start at 1") {
  ParamStoreF s1, s2;
  Rng i1(42), i2(42);
  BranchF b1(s1, BackboneConfig{}, i1);
  BranchF b2(s2, BackboneConfig{}, i2);
  REQUIRE(s1.count() == s2.count());
  for (std::size_t i = 0; i < s1.count(); ++i) {
    const auto& p = s1.item(i);
    const auto& q = s2.item(i);
    CHECK(p.name == q.name);
    CHECK(std::memcmp(p.value.data(), q.value.data(),
                      p.value.size() * sizeof(float)) == 0);
    if (p.name.find(".gamma") != std::string::npos) {
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        CHECK(p.value[k] == 1.0f);
      }
    }
  }
  // empirical std within 10% of sqrt(2/fan_in) for large fans
  auto check_std = [&](const std::string& name, int fan_in) {
    const auto& k = s1.at(name).value;
    double sum = 0, sumsq = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      sum += k[i];
      sumsq += static_cast<double>(k[i]) * k[i];
    }
    const double mean = sum / static_cast<double>(k.size());
    const double stddev =
        std::sqrt(sumsq / static_cast<double>(k.size()) - mean * mean);
    const double want = std::sqrt(2.0 / fan_in);
    CHECK(stddev == doctest::Approx(want).epsilon(0.10));
  };
  check_std("block1.layer0.conv2.kernel", 3 * 3 * 144);
  check_std("block4.unit0.conv.kernel", 7 * 7 * 252);
}

TEST_CASE("dense connectivity preserves the identity path") {
  ParamStoreF store;
  Rng init(5);
  DenseBlock<float> block(store, "blk", 8, 2, 4, 16, 0.0, 1e-5f, 0.9f, init);
  Rng rng(6);
  TensorF x({2, 6, 6, 8});
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.normal());
  }
  FwdCtx ctx{Mode::kTrain, false, 0};
  auto out = block.forward(x, ctx);
  CHECK(out.dim(3) == 8 + 2 * 4);
  // first 8 channels of the output are exactly the input
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 6; ++xx)
        for (int c = 0; c < 8; ++c)
          CHECK(out.at(b, y, xx, c) == x.at(b, y, xx, c));
  // zeroing the input zeroes that slice of the output
  TensorF zero({2, 6, 6, 8});
  auto out0 = block.forward(zero, ctx);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 8; ++c) CHECK(out0.at(b, 0, 0, c) == 0.0f);
}

TEST_CASE("dense layer: zero input with zero BN beta gives bias-only output") {
  ParamStoreF store;
  Rng init(9);
  DenseLayer<float> layer(store, "dl", 4, 3, 8, 0.0, 1e-5f, 0.9f, init);
  store.at("dl.conv2.bias").value.fill(0.25f);
  TensorF zero({1, 5, 5, 4});
  FwdCtx ctx;  // infer: running stats are zero-mean unit-var at init
  auto out = layer.forward(zero, ctx);
  CHECK(out.shape() == std::vector<int>{1, 5, 5, 3});
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] == doctest::Approx(0.25f).epsilon(1e-6));
  }
}

TEST_CASE("dense layer channel accounting rejects mismatch") {
  ParamStoreF store;
  Rng init(10);
  DenseLayer<float> layer(store, "dl", 144, 36, 144, 0.0, 1e-5f, 0.9f, init);
  CHECK(layer.in_channels() == 144);  // block2 layer3: 36 + 3*36
  TensorF bad({2, 5, 5, 100});
  FwdCtx ctx;
  CHECK_THROWS_AS(layer.forward(bad, ctx), ContractError);
}

TEST_CASE("transition rejects spatial extent < 2") {
  ParamStoreF store;
  Rng init(11);
  TransitionLayer<float> t(store, "tr", 8, 4, 0.0, init);
  TensorF tiny({1, 1, 1, 8});
  FwdCtx ctx;
  CHECK_THROWS_AS(t.forward(tiny, ctx), ConfigError);
}

TEST_CASE("total stride is 8: shifting the pattern shifts the argmax one cell") {
  ParamStoreF store;
  Rng init(12);
  BranchF branch(store, BackboneConfig{}, init);
  Rng rng(13);
  TensorF img({1, 255, 255, 3});
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = 0.1f * static_cast<float>(rng.uniform());
  }
  // bright blob near the middle
  const int cy = 120, cx = 104;
  for (int y = cy; y < cy + 16; ++y)
    for (int x = cx; x < cx + 16; ++x)
      for (int c = 0; c < 3; ++c) img.at(0, y, x, c) = 1.0f;

  TensorF shifted({1, 255, 255, 3});
  for (int y = 0; y < 255; ++y)
    for (int x = 0; x < 255; ++x)
      for (int c = 0; c < 3; ++c)
        shifted.at(0, y, x, (c)) =
            img.at(0, y, (x + 255 - 8) % 255, c);  // content moves +8 in x

  FwdCtx ctx;
  auto e1 = branch.forward(img, ctx);
  auto e2 = branch.forward(shifted, ctx);
  auto [y1, x1] = embedding_argmax(e1);
  auto [y2, x2] = embedding_argmax(e2);
  CHECK(y2 == y1);
  CHECK(x2 == x1 + 1);
}

TEST_CASE("gradient reaches the stem after one backward pass") {
  ParamStoreF store;
  Rng init(14);
  BranchF branch(store, BackboneConfig{}, init);
  Rng rng(15);
  auto img = random_image<float>(2, 127, rng);
  FwdCtx ctx{Mode::kTrain, true, 1};
  auto emb = branch.forward(img, ctx);
  TensorF up(emb.shape());
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i] = static_cast<float>(rng.uniform() - 0.5);
  }
  store.zero_grads();
  branch.backward(up);
  const auto& g = store.at("stem.kernel").grad;
  double norm = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    norm += static_cast<double>(g[i]) * g[i];
  }
  CHECK(norm > 0.0);
}

TEST_CASE("dense layer backward matches finite differences (64-bit)") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParamStoreD store;
    Rng init(seed);
    DenseLayer<double> layer(store, "dl", 6, 4, 12, 0.2, 1e-5, 0.9, init);
    Rng rng(seed * 31);
    TensorD x({2, 4, 4, 6});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    FwdCtx ctx{Mode::kTrain, true, 77};
    auto out = layer.forward(x, ctx);
    auto w = make_loss_weights(out.size(), rng);
    TensorD up(out.shape());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = w[i];
    store.zero_grads();
    auto dx = layer.backward(up);
    auto loss = [&]() { return weighted_loss(layer.forward(x, ctx), w); };
    const auto fd = fd_settings_for(true);
    CHECK(fd_max_rel_error(x, dx, loss, fd, rng) < 1e-5);
    // a conv kernel and a BN gamma deep inside the composite
    auto& k = store.at("dl.conv1.kernel");
    CHECK(fd_max_rel_error(k.value, k.grad, loss, fd, rng) < 1e-5);
    auto& gm = store.at("dl.bn1.gamma");
    CHECK(fd_max_rel_error(gm.value, gm.grad, loss, fd, rng) < 1e-5);
  }
}

TEST_CASE("block4 pad mode also lands on 9x9x128") {
  ParamStoreF store;
  Rng init(21);
  BackboneConfig cfg;
  cfg.block4_mode = "pad";
  BranchF branch(store, cfg, init);
  Rng rng(22);
  auto img = random_image<float>(1, 127, rng);
  FwdCtx ctx;
  auto emb = branch.forward(img, ctx);
  CHECK(emb.shape() == std::vector<int>{1, 9, 9, 128});
}
