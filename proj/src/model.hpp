#pragma once

#include <memory>

#include "attention.hpp"
#include "backbone.hpp"
#include "config.hpp"
#include "head.hpp"

namespace denssiam {

// The assembled network: one ParamStore shared by a target branch
// (backbone + self-attention) and a search branch (backbone only), plus the
// learned score adjust. Float-only; the verification path instantiates the
// templated pieces directly.
class Model {
 public:
  // fresh He-initialized parameters, deterministic in seed
  Model(const Config& cfg, std::uint64_t seed);

  const Config& config() const { return cfg_; }
  ParamStoreF& store() { return store_; }
  const ParamStoreF& store() const { return store_; }

  // inference-mode embeddings (BN running stats, no dropout)
  TensorF embed_target(const TensorF& exemplars);
  TensorF embed_search(const TensorF& searches);

  // adjusted score maps for already-computed embeddings
  ScoreMaps<float> score(const TensorF& target_emb, const TensorF& search_emb);

  // Full train-mode forward/backward over a pair batch. offsets_cells holds
  // the per-pair true object offset (dy,dx) in score-map cells; gradients
  // accumulate into the store. Returns the batch-mean map loss.
  double train_pair_batch(const TensorF& exemplars, const TensorF& searches,
                          const std::vector<std::pair<double, double>>& offsets,
                          std::uint64_t dropout_salt);

  // stage shapes of the last target forward, attention row included
  std::vector<StageShape> target_stage_shapes(const TensorF& exemplars);

  float gain() const { return gain_->value[0]; }
  float bias() const { return bias_->value[0]; }

 private:
  Config cfg_;
  ParamStoreF store_;
  std::unique_ptr<BranchF> target_branch_;
  std::unique_ptr<BranchF> search_branch_;
  std::unique_ptr<AttentionF> attention_;
  Param<float>* gain_ = nullptr;
  Param<float>* bias_ = nullptr;
};

BackboneConfig backbone_config(const Config& cfg);

}  // namespace denssiam
