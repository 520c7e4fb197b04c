#pragma once

#include "tracker.hpp"

namespace denssiam {

// intersection over union; 0 when the union is empty
double iou(const Box& a, const Box& b);

// Minimal tracker surface the protocol drives. frame_index lets reference
// trackers (oracle) look up ground truth; real trackers ignore it.
class TrackerIface {
 public:
  virtual ~TrackerIface() = default;
  virtual void start(const Image& frame, const Box& box, int frame_index) = 0;
  virtual Box update(const Image& frame, int frame_index) = 0;
};

class DensSiamTrackerAdapter : public TrackerIface {
 public:
  DensSiamTrackerAdapter(Model& model, const TrackSection& cfg)
      : tracker_(model, cfg) {}
  void start(const Image& frame, const Box& box, int) override {
    state_ = tracker_.init(frame, box);
  }
  Box update(const Image& frame, int) override {
    return tracker_.step(frame, state_);
  }

 private:
  Tracker tracker_;
  TrackState state_;
};

// Replays ground truth; the protocol upper bound (A=1, R=0).
class OracleTracker : public TrackerIface {
 public:
  explicit OracleTracker(const SequenceRecord& seq) : seq_(&seq) {}
  void start(const Image&, const Box&, int) override {}
  Box update(const Image&, int frame_index) override {
    return seq_->boxes.at(static_cast<std::size_t>(frame_index));
  }

 private:
  const SequenceRecord* seq_;
};

// Always reports the same box; the adversarial bound.
class FixedBoxTracker : public TrackerIface {
 public:
  explicit FixedBoxTracker(const Box& box) : box_(box) {}
  void start(const Image&, const Box&, int) override {}
  Box update(const Image&, int) override { return box_; }

 private:
  Box box_;
};

struct FrameOutcome {
  int frame = 0;
  double overlap = 0;
  bool counted = false;  // contributes to accuracy
  bool failure = false;
};

struct SequenceEval {
  std::string id;
  int frames = 0;
  double mean_iou_success = 0;  // over counted frames
  int failures = 0;
  double eo_mean_iou = 0;  // no-reinit run, zeros after drift included
  double fps = 0;
  std::vector<FrameOutcome> outcomes;
};

// Supervised protocol: init on frame 0; a frame with zero overlap is a
// failure; the tracker restarts from ground truth reinit_gap frames later;
// the burn_in frames after each restart are excluded from accuracy. A
// tracker exception counts as a failure followed by the same restart.
SequenceEval run_vot_protocol(TrackerIface& tracker, const SequenceRecord& seq,
                              const EvalSection& cfg);

// One uninterrupted pass; mean IoU over all predicted frames.
double run_plain_mean_iou(TrackerIface& tracker, const SequenceRecord& seq);

struct EvalReport {
  std::vector<SequenceEval> sequences;
  double accuracy = 0;            // pooled mean IoU over counted frames
  double robustness_per_100 = 0;  // failures per 100 frames
  double eo_simplified = 0;       // mean over sequences of eo_mean_iou
  double fps = 0;
};

EvalReport aggregate(const std::vector<SequenceEval>& records);

std::string report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

}  // namespace denssiam
