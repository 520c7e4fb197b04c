#pragma once

#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "model.hpp"
#include "synth.hpp"

namespace denssiam {

// lr(epoch) = lr_start * (lr_end/lr_start)^(epoch/(epochs-1));
// a single-epoch schedule stays at lr_start.
double lr_schedule(int epoch, const TrainSection& t);

// Classic momentum: v <- momentum*v + g; p <- p - lr*v. Weight decay (when
// nonzero) enters as g + wd*p. Aborts with NumericError naming the
// parameter on a non-finite gradient.
void sgd_step(ParamStoreF& store, double lr, double momentum,
              double weight_decay);

struct TrainPair {
  TensorF exemplar;  // (1,127,127,3)
  TensorF search;    // (1,255,255,3)
  double off_y = 0;  // true object offset in score-map cells
  double off_x = 0;
};

// Two frames at gap <= max_frame_gap; the exemplar is the context crop of
// its own frame's box, the search crop is centered so the object lands
// jitter patch-pixels off center. Degenerate boxes resample (bounded).
TrainPair sample_pair(const SequenceRecord& seq, Rng& rng,
                      const TrainSection& t);

struct StepMetrics {
  int epoch = 0;
  std::uint64_t step = 0;
  double loss = 0;
  double lr = 0;
  double wall_ms = 0;
};

using PairSource = std::function<const TrainPair&()>;
using StepHook = std::function<void(const StepMetrics&)>;

// Runs `steps` optimizer steps at the epoch's learning rate. Returns the
// mean loss over the epoch.
double train_epoch(Model& model, TrainState& state, const PairSource& next_pair,
                   int steps, int epoch, const StepHook& on_step = {});

// Deterministic desk-scale training corpus derived from cfg.data.
std::vector<SequenceRecord> make_training_data(const DataSection& d);

// Draws random pairs from a sequence corpus.
class PairSampler {
 public:
  PairSampler(const std::vector<SequenceRecord>& data, const TrainSection& t,
              Rng rng);
  const TrainPair& next();

 private:
  const std::vector<SequenceRecord>& data_;
  TrainSection cfg_;
  Rng rng_;
  TrainPair current_;
};

// Full run: builds (or accepts) data, trains cfg.training.epochs epochs,
// writes per-epoch checkpoints, checkpoint.dsmc, config.json and
// metrics.jsonl under out_dir.
void run_training(Model& model, const Config& cfg, const std::string& out_dir,
                  const std::vector<SequenceRecord>* data = nullptr,
                  const StepHook& on_step = {});

}  // namespace denssiam
