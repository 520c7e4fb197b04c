#pragma once

#include <string>
#include <utility>
#include <vector>

#include "layers.hpp"

namespace denssiam {

// Branch topology constants, read off the published data-dimension table:
// growth 36, bottleneck 144, blocks of 2/4/6 layers, transitions to 36
// channels, final block emitting 128 channels, total stride 8.
struct BackboneConfig {
  int growth = 36;
  int bottleneck = 144;
  int stem_channels = 72;
  int embed_channels = 128;
  int transition_channels = 36;
  std::string block4_mode = "conv1x1";  // "conv1x1" | "pad"
  double dropout_rate = 0.2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;
};

constexpr int kExemplarSize = 127;
constexpr int kSearchSize = 255;
constexpr int kTotalStride = 8;

struct StageShape {
  std::string name;
  std::vector<int> shape;
};

// One Siamese branch. Two instances constructed over the same ParamStore
// share every parameter; each instance owns only its forward caches, so a
// target and a search branch can both run a cached forward before either
// runs backward.
template <typename T>
class Branch {
 public:
  Branch(ParamStore<T>& store, const BackboneConfig& cfg, Rng& init_rng);

  // image: (B, S, S, 3) with S >= 127; 127 -> (B,9,9,128), 255 -> (B,25,25,128)
  Tensor<T> forward(const Tensor<T>& image, const FwdCtx& ctx);
  Tensor<T> backward(const Tensor<T>& d_embedding, bool want_input_grad = false);

  // shapes recorded by the last forward, one entry per stage
  const std::vector<StageShape>& stage_shapes() const { return stage_shapes_; }

 private:
  BackboneConfig cfg_;
  Conv2dLayer<T> stem_;
  DenseBlock<T> block1_, block2_, block3_;
  TransitionLayer<T> trans1_, trans2_;
  std::vector<PreActConvUnit<T>> block4_;
  std::vector<StageShape> stage_shapes_;
};

using BranchF = Branch<float>;
using BranchD = Branch<double>;

}  // namespace denssiam
