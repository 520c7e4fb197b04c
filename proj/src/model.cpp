#include "model.hpp"

namespace denssiam {

BackboneConfig backbone_config(const Config& cfg) {
  BackboneConfig b;
  b.block4_mode = cfg.model.block4_mode;
  b.dropout_rate = cfg.model.dropout_rate;
  b.bn_eps = cfg.model.bn_eps;
  b.bn_momentum = cfg.model.bn_momentum;
  return b;
}

Model::Model(const Config& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng init(seed);
  const BackboneConfig bb = backbone_config(cfg);
  target_branch_ = std::make_unique<BranchF>(store_, bb, init);
  search_branch_ = std::make_unique<BranchF>(store_, bb, init);
  AttentionConfig ac;
  ac.channels = bb.embed_channels;
  ac.reduction = cfg.model.attention_reduction;
  ac.residual = cfg.model.attention_residual;
  attention_ = std::make_unique<AttentionF>(store_, ac, init);
  gain_ = &store_.add("head.gain",
                      TensorF::full({1}, static_cast<float>(cfg.model.gain_init)),
                      true);
  bias_ = &store_.add("head.bias", TensorF({1}), true);
}

TensorF Model::embed_target(const TensorF& exemplars) {
  FwdCtx ctx;  // infer, no cache
  TensorF emb = target_branch_->forward(exemplars, ctx);
  return attention_->forward(emb, ctx);
}

TensorF Model::embed_search(const TensorF& searches) {
  FwdCtx ctx;
  return search_branch_->forward(searches, ctx);
}

ScoreMaps<float> Model::score(const TensorF& target_emb,
                              const TensorF& search_emb) {
  return cross_correlate(target_emb, search_emb, gain_->value[0],
                         bias_->value[0]);
}

std::vector<StageShape> Model::target_stage_shapes(const TensorF& exemplars) {
  FwdCtx ctx;
  TensorF emb = target_branch_->forward(exemplars, ctx);
  TensorF att = attention_->forward(emb, ctx);
  std::vector<StageShape> stages = target_branch_->stage_shapes();
  stages.push_back({"attention", att.shape()});
  return stages;
}

double Model::train_pair_batch(
    const TensorF& exemplars, const TensorF& searches,
    const std::vector<std::pair<double, double>>& offsets,
    std::uint64_t dropout_salt) {
  const int b = exemplars.dim(0);
  if (searches.dim(0) != b ||
      offsets.size() != static_cast<std::size_t>(b)) {
    throw ContractError("train_pair_batch: batch size mismatch");
  }

  FwdCtx ctx{Mode::kTrain, true, dropout_salt};
  TensorF t_emb = target_branch_->forward(exemplars, ctx);
  t_emb = attention_->forward(t_emb, ctx);
  FwdCtx sctx{Mode::kTrain, true, Rng(dropout_salt).fork("search").seed()};
  TensorF s_emb = search_branch_->forward(searches, sctx);

  ScoreMaps<float> maps = score(t_emb, s_emb);
  maps.values.check_finite("score maps");
  const int sh = maps.values.dim(1), sw = maps.values.dim(2);
  if (sh != sw || sh % 2 == 0) {
    throw ContractError("train_pair_batch: score map must be square and odd, got " +
                        shape_str(maps.values.shape()));
  }

  // per-pair loss over an offset label map; upstream grad scaled by 1/B
  TensorF dvalues(maps.values.shape());
  double total_loss = 0.0;
  const float inv_b = 1.0f / static_cast<float>(b);
  for (int bi = 0; bi < b; ++bi) {
    TensorF v({sh, sw});
    for (int i = 0; i < sh; ++i)
      for (int j = 0; j < sw; ++j) v.at(i, j) = maps.values.at(bi, i, j);
    TensorF labels = make_label_map<float>(sh, cfg_.training.r_pos,
                                           offsets[static_cast<std::size_t>(bi)].first,
                                           offsets[static_cast<std::size_t>(bi)].second);
    MapLoss<float> ml = map_loss(v, labels, cfg_.training.balanced_loss);
    total_loss += ml.loss;
    for (int i = 0; i < sh; ++i)
      for (int j = 0; j < sw; ++j)
        dvalues.at(bi, i, j) = ml.values_grad.at(i, j) * inv_b;
  }

  CorrelationGrads<float> cg = cross_correlate_backward(
      t_emb, s_emb, maps.raw, gain_->value[0], dvalues);
  gain_->grad[0] += cg.gain_grad;
  bias_->grad[0] += cg.bias_grad;

  TensorF d_pre_attention = attention_->backward(cg.target_grad);
  target_branch_->backward(d_pre_attention);
  search_branch_->backward(cg.search_grad);

  return total_loss / static_cast<double>(b);
}

}  // namespace denssiam
