#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace denssiam {

struct ModelConfig {
  std::string block4_mode = "conv1x1";  // "conv1x1" | "pad"
  int attention_reduction = 16;
  bool attention_residual = false;
  double dropout_rate = 0.2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;
  double gain_init = 1e-3;
};

struct TrainSection {
  int epochs = 20;               // desk scale; the full regimen uses 100
  int pairs_per_epoch = 2000;    // desk scale; the full regimen uses 53200
  int batch_size = 8;
  double momentum = 0.9;
  double lr_start = 1e-3;
  double lr_end = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  double r_pos = 2.0;            // positive-label radius in score-map cells
  bool balanced_loss = true;
  int max_frame_gap = 100;
  int jitter_px = 32;            // search-crop offset bound, patch pixels
  int checkpoint_every = 1;      // epochs between checkpoints
};

struct TrackSection {
  double scale_base = 1.0375;
  std::vector<int> scale_exponents = {-2, 0, 2};
  double scale_interp = 0.764;
  std::string scale_interp_mode = "toward_new";  // or "toward_old"
  double window_influence = 0.176;
  int upsample_factor = 16;
  double scale_penalty = 1.0;  // multiplier on non-central scales; 1 = off
};

struct EvalSection {
  int reinit_gap = 5;   // frames skipped after a failure before reinit
  int burn_in = 10;     // frames after (re)init excluded from accuracy
};

// Synthetic sequence description; doubles as the training-data generator
// settings (the trainer varies shape/motion/seed per sequence).
struct SynthSpec {
  int width = 320;
  int height = 240;
  int frames = 100;
  std::string shape = "rect";     // "rect" | "ellipse"
  std::string motion = "linear";  // "linear" | "sine" | "static"
  double velocity_x = 2.0;
  double velocity_y = 0.0;
  int size = 64;
  double noise = 0.0;             // additive gaussian sigma, [0,1] pixel units
  bool occlusion = false;
  double illumination_drift = 0.0;
  std::uint64_t seed = 7;
};

struct DataSection {
  int sequences = 24;
  int frames = 40;
  int width = 320;
  int height = 240;
  double noise = 0.02;
  bool occlusion = false;
  std::uint64_t seed = 100;  // base seed; sequence i uses seed+i
};

struct Config {
  int threads = 1;
  ModelConfig model;
  TrainSection training;
  TrackSection tracking;
  EvalSection eval;
  DataSection data;
  SynthSpec synth;
};

// JSON document <-> Config. Parsing is strict: unknown keys are rejected,
// value constraints are checked (ConfigError with the offending field).
Config config_from_json(const std::string& json_text);
std::string config_to_json(const Config& cfg);

Config load_config_file(const std::string& path);

// Applies "dotted.path=value" onto a JSON config document. The path must
// already exist and the value must parse to the same JSON type.
std::string apply_override(const std::string& json_text,
                           const std::string& dotted_key,
                           const std::string& value);

void validate(const Config& cfg);

}  // namespace denssiam
