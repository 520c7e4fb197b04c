#pragma once

#include "model.hpp"
#include "synth.hpp"

namespace denssiam {

// Online tracker state. The target embedding is computed once at init and
// never updated; the box adapts by decoded displacement and the smoothed
// three-scale search.
struct TrackState {
  double cx = 0, cy = 0;     // box center, pixels
  double w = 0, h = 0;       // box size, pixels
  double scale_smooth = 1.0; // smoothed per-step scale multiplier
  TensorF target_embedding;  // (1,9,9,128)
};

struct TrackDiagnostics {
  std::vector<TensorF> raw_maps;  // one 17x17 map per scale
  int chosen_scale_index = 0;
  float peak_value = 0;
};

// Raised-cosine outer product normalized to sum 1.
TensorF cosine_window(int size);

// Square context crop of the box resampled to 127x127.
CropResult crop_exemplar(const Image& frame, const Box& box);

// Same center, side = context(state size) * 255/127 * scale_mult, to 255.
CropResult crop_search(const Image& frame, const TrackState& state,
                       double scale_mult);

class Tracker {
 public:
  Tracker(Model& model, const TrackSection& cfg);

  TrackState init(const Image& frame, const Box& box);
  // advances state in place, returns the new box
  Box step(const Image& frame, TrackState& state,
           TrackDiagnostics* diag = nullptr);

  static Box state_box(const TrackState& state);

 private:
  Model& model_;
  TrackSection cfg_;
  TensorF window_;  // cached cosine window at the upsampled size
  int window_size_ = 0;
};

// Runs the tracker over a whole sequence; output[0] echoes the init box.
std::vector<Box> track_sequence(Model& model, const TrackSection& cfg,
                                const SequenceRecord& seq, double* fps = nullptr);

// "x,y,w,h" per frame.
void save_box_file(const std::string& path, const std::vector<Box>& boxes);

}  // namespace denssiam
