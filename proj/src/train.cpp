#include "train.hpp"

#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace denssiam {

namespace fs = std::filesystem;

double lr_schedule(int epoch, const TrainSection& t) {
  if (epoch < 0 || epoch >= t.epochs) {
    throw ContractError("lr_schedule: epoch " + std::to_string(epoch) +
                        " outside [0," + std::to_string(t.epochs) + ")");
  }
  if (t.epochs == 1) return t.lr_start;
  const double frac = static_cast<double>(epoch) / (t.epochs - 1);
  return t.lr_start * std::pow(t.lr_end / t.lr_start, frac);
}

void sgd_step(ParamStoreF& store, double lr, double momentum,
              double weight_decay) {
  const float m = static_cast<float>(momentum);
  const float l = static_cast<float>(lr);
  const float wd = static_cast<float>(weight_decay);
  for (std::size_t i = 0; i < store.count(); ++i) {
    auto& p = store.item(i);
    if (!p.trainable) continue;
    float* v = p.velocity.data();
    float* g = p.grad.data();
    float* w = p.value.data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      if (!std::isfinite(g[k])) {
        throw NumericError("non-finite gradient in parameter '" + p.name +
                           "' at flat index " + std::to_string(k));
      }
      const float eff = wd == 0.0f ? g[k] : g[k] + wd * w[k];
      v[k] = m * v[k] + eff;
      w[k] -= l * v[k];
    }
  }
}

TrainPair sample_pair(const SequenceRecord& seq, Rng& rng,
                      const TrainSection& t) {
  const int len = seq.length();
  if (len < 2) {
    throw ContractError("sample_pair: sequence must have >= 2 frames");
  }
  for (int attempt = 0; attempt < 16; ++attempt) {
    const int a = static_cast<int>(rng.uniform_int(0, len - 1));
    const int lo = std::max(0, a - t.max_frame_gap);
    const int hi = std::min(len - 1, a + t.max_frame_gap);
    const int b = static_cast<int>(rng.uniform_int(lo, hi));
    const Box& box_a = seq.boxes[static_cast<std::size_t>(a)];
    const Box& box_b = seq.boxes[static_cast<std::size_t>(b)];
    if (box_a.w < 1 || box_a.h < 1 || box_b.w < 1 || box_b.h < 1) {
      continue;  // degenerate box: resample
    }
    TrainPair pair;
    pair.exemplar = crop_resample(seq.frames[static_cast<std::size_t>(a)],
                                  box_a.cx(), box_a.cy(), context_side(box_a),
                                  kExemplarSize)
                        .patch;
    const double search_side =
        context_side(box_b) * static_cast<double>(kSearchSize) / kExemplarSize;
    const int jx = static_cast<int>(rng.uniform_int(-t.jitter_px, t.jitter_px));
    const int jy = static_cast<int>(rng.uniform_int(-t.jitter_px, t.jitter_px));
    const double step = search_side / kSearchSize;
    pair.search = crop_resample(seq.frames[static_cast<std::size_t>(b)],
                                box_b.cx() - jx * step, box_b.cy() - jy * step,
                                search_side, kSearchSize)
                      .patch;
    pair.off_x = static_cast<double>(jx) / kTotalStride;
    pair.off_y = static_cast<double>(jy) / kTotalStride;
    return pair;
  }
  throw ContractError("sample_pair: no usable pair after bounded retries in '" +
                      seq.id + "'");
}

double train_epoch(Model& model, TrainState& state, const PairSource& next_pair,
                   int steps, int epoch, const StepHook& on_step) {
  const TrainSection& t = model.config().training;
  const double lr = lr_schedule(epoch, t);
  const int b = t.batch_size;
  double loss_sum = 0.0;
  for (int s = 0; s < steps; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    TensorF exemplars({b, kExemplarSize, kExemplarSize, 3});
    TensorF searches({b, kSearchSize, kSearchSize, 3});
    std::vector<std::pair<double, double>> offsets(static_cast<std::size_t>(b));
    for (int k = 0; k < b; ++k) {
      const TrainPair& p = next_pair();
      std::memcpy(&exemplars.at(k, 0, 0, 0), p.exemplar.data(),
                  p.exemplar.size() * sizeof(float));
      std::memcpy(&searches.at(k, 0, 0, 0), p.search.data(),
                  p.search.size() * sizeof(float));
      offsets[static_cast<std::size_t>(k)] = {p.off_y, p.off_x};
    }
    model.store().zero_grads();
    const std::uint64_t salt =
        Rng(t.seed).fork("dropout", state.step).seed();
    const double loss =
        model.train_pair_batch(exemplars, searches, offsets, salt);
    sgd_step(model.store(), lr, t.momentum, t.weight_decay);
    ++state.step;
    loss_sum += loss;
    if (on_step) {
      const auto t1 = std::chrono::steady_clock::now();
      StepMetrics sm;
      sm.epoch = epoch;
      sm.step = state.step;
      sm.loss = loss;
      sm.lr = lr;
      sm.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      on_step(sm);
    }
  }
  return loss_sum / std::max(1, steps);
}

std::vector<SequenceRecord> make_training_data(const DataSection& d) {
  std::vector<SequenceRecord> data;
  data.reserve(static_cast<std::size_t>(d.sequences));
  Rng rng(d.seed);
  for (int i = 0; i < d.sequences; ++i) {
    SynthSpec spec;
    spec.width = d.width;
    spec.height = d.height;
    spec.frames = d.frames;
    spec.seed = d.seed + static_cast<std::uint64_t>(i) + 1;
    spec.shape = (i % 2 == 0) ? "rect" : "ellipse";
    switch (i % 3) {
      case 0: spec.motion = "linear"; break;
      case 1: spec.motion = "sine"; break;
      default: spec.motion = "static"; break;
    }
    spec.velocity_x = rng.uniform() * 4.0 - 2.0;
    spec.velocity_y = rng.uniform() * 2.0 - 1.0;
    spec.size = 48 + static_cast<int>(rng.uniform_int(0, 32));
    spec.noise = d.noise;
    spec.occlusion = d.occlusion && (i % 4 == 3);
    data.push_back(gen_synthetic_sequence(spec));
  }
  return data;
}

PairSampler::PairSampler(const std::vector<SequenceRecord>& data,
                         const TrainSection& t, Rng rng)
    : data_(data), cfg_(t), rng_(rng) {
  if (data_.empty()) throw ContractError("PairSampler: no sequences");
}

const TrainPair& PairSampler::next() {
  const auto idx = static_cast<std::size_t>(
      rng_.uniform_int(0, static_cast<std::int64_t>(data_.size()) - 1));
  current_ = sample_pair(data_[idx], rng_, cfg_);
  return current_;
}

void run_training(Model& model, const Config& cfg, const std::string& out_dir,
                  const std::vector<SequenceRecord>* data,
                  const StepHook& on_step) {
  fs::create_directories(out_dir);
  {
    std::ofstream echo(fs::path(out_dir) / "config.json");
    echo << config_to_json(cfg) << "\n";
  }
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
  if (!metrics) throw IoError("cannot write metrics under " + out_dir);

  std::vector<SequenceRecord> generated;
  if (!data) {
    generated = make_training_data(cfg.data);
    data = &generated;
  }

  const TrainSection& t = cfg.training;
  const int steps = std::max(1, t.pairs_per_epoch / t.batch_size);
  PairSampler sampler(*data, t, Rng(t.seed).fork("sampler"));
  TrainState state;

  for (int epoch = 0; epoch < t.epochs; ++epoch) {
    const auto log_step = [&](const StepMetrics& sm) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "{\"epoch\":%d,\"step\":%llu,\"loss\":%.8g,\"lr\":%.8g,"
                    "\"wall_ms\":%.3f}\n",
                    sm.epoch, static_cast<unsigned long long>(sm.step), sm.loss,
                    sm.lr, sm.wall_ms);
      metrics << line;
      metrics.flush();
      if (on_step) on_step(sm);
    };
    train_epoch(model, state, [&]() -> const TrainPair& { return sampler.next(); },
                steps, epoch, log_step);
    state.epoch = epoch + 1;
    if (t.checkpoint_every > 0 && ((epoch + 1) % t.checkpoint_every == 0 ||
                                   epoch + 1 == t.epochs)) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.dsmc", epoch + 1);
      save_checkpoint((fs::path(out_dir) / name).string(), model.store(), state,
                      cfg);
    }
  }
  save_checkpoint((fs::path(out_dir) / "checkpoint.dsmc").string(), model.store(),
                  state, cfg);
}

}  // namespace denssiam
