#include "backbone.hpp"

namespace denssiam {

namespace {

template <typename T>
std::vector<PreActConvUnit<T>> build_block4(ParamStore<T>& store,
                                            const BackboneConfig& cfg,
                                            Rng& init_rng) {
  const int in = 36 + 6 * cfg.growth;  // block 3 output channels
  const int out = cfg.embed_channels;
  const T eps = static_cast<T>(cfg.bn_eps);
  const T mom = static_cast<T>(cfg.bn_momentum);
  std::vector<PreActConvUnit<T>> units;
  units.reserve(3);
  units.emplace_back(store, "block4.unit0", ConvSpec{7, 7, 1, 0, in, out}, eps,
                     mom, init_rng);
  if (cfg.block4_mode == "pad") {
    units.emplace_back(store, "block4.unit1", ConvSpec{7, 7, 1, 3, out, out},
                       eps, mom, init_rng);
    units.emplace_back(store, "block4.unit2", ConvSpec{7, 7, 1, 3, out, out},
                       eps, mom, init_rng);
  } else if (cfg.block4_mode == "conv1x1") {
    units.emplace_back(store, "block4.unit1", ConvSpec{1, 1, 1, 0, out, out},
                       eps, mom, init_rng);
    units.emplace_back(store, "block4.unit2", ConvSpec{1, 1, 1, 0, out, out},
                       eps, mom, init_rng);
  } else {
    throw ConfigError("unknown block4_mode: " + cfg.block4_mode);
  }
  return units;
}

}  // namespace

template <typename T>
Branch<T>::Branch(ParamStore<T>& store, const BackboneConfig& cfg, Rng& init_rng)
    : cfg_(cfg),
      stem_(make_conv(store, "stem",
                      ConvSpec{7, 7, 2, 0, 3, cfg.stem_channels}, init_rng)),
      block1_(store, "block1", cfg.stem_channels, 2, cfg.growth, cfg.bottleneck,
              cfg.dropout_rate, static_cast<T>(cfg.bn_eps),
              static_cast<T>(cfg.bn_momentum), init_rng),
      block2_(store, "block2", cfg.transition_channels, 4, cfg.growth,
              cfg.bottleneck, cfg.dropout_rate, static_cast<T>(cfg.bn_eps),
              static_cast<T>(cfg.bn_momentum), init_rng),
      block3_(store, "block3", cfg.transition_channels, 6, cfg.growth,
              cfg.bottleneck, cfg.dropout_rate, static_cast<T>(cfg.bn_eps),
              static_cast<T>(cfg.bn_momentum), init_rng),
      trans1_(store, "trans1", block1_.out_channels(), cfg.transition_channels,
              cfg.dropout_rate, init_rng),
      trans2_(store, "trans2", block2_.out_channels(), cfg.transition_channels,
              cfg.dropout_rate, init_rng),
      block4_(build_block4(store, cfg, init_rng)) {}

template <typename T>
Tensor<T> Branch<T>::forward(const Tensor<T>& image, const FwdCtx& ctx) {
  if (image.rank() != 4 || image.dim(3) != 3) {
    throw ContractError("branch: image must be (B,S,S,3), got " +
                        shape_str(image.shape()));
  }
  if (image.dim(1) < kExemplarSize || image.dim(1) != image.dim(2)) {
    throw ConfigError("branch: input must be square with side >= " +
                      std::to_string(kExemplarSize) + ", got " +
                      shape_str(image.shape()));
  }
  stage_shapes_.clear();
  auto record = [&](const char* name, const Tensor<T>& t) {
    stage_shapes_.push_back({name, t.shape()});
  };

  Tensor<T> y = stem_.forward(image, ctx);
  record("stem", y);
  y = block1_.forward(y, ctx);
  record("block1", y);
  y = trans1_.forward(y, ctx);
  record("trans1", y);
  y = block2_.forward(y, ctx);
  record("block2", y);
  y = trans2_.forward(y, ctx);
  record("trans2", y);
  y = block3_.forward(y, ctx);
  record("block3", y);
  for (auto& unit : block4_) y = unit.forward(y, ctx);
  record("block4", y);
  y.check_finite("branch forward");
  return y;
}

template <typename T>
Tensor<T> Branch<T>::backward(const Tensor<T>& d_embedding, bool want_input_grad) {
  Tensor<T> g = d_embedding;
  for (auto it = block4_.rbegin(); it != block4_.rend(); ++it) {
    g = it->backward(g);
  }
  g = block3_.backward(g);
  g = trans2_.backward(g);
  g = block2_.backward(g);
  g = trans1_.backward(g);
  g = block1_.backward(g);
  return stem_.backward(g, want_input_grad);
}

template class Branch<float>;
template class Branch<double>;

}  // namespace denssiam
