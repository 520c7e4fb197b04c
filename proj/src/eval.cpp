#include "eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <json.hpp>
#include <sstream>

namespace denssiam {

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

SequenceEval run_vot_protocol(TrackerIface& tracker, const SequenceRecord& seq,
                              const EvalSection& cfg) {
  if (seq.length() < 2) {
    throw ContractError("run_vot_protocol: sequence must have >= 2 frames");
  }
  SequenceEval ev;
  ev.id = seq.id;
  ev.frames = seq.length();
  ev.outcomes.reserve(static_cast<std::size_t>(seq.length()));

  tracker.start(seq.frames[0], seq.boxes[0], 0);
  int reinit_at = -1;      // pending reinit frame, -1 = none
  int last_reinit = -1;    // frame of the most recent restart
  double iou_sum = 0.0;
  int counted = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int i = 1; i < seq.length(); ++i) {
    FrameOutcome fo;
    fo.frame = i;
    if (reinit_at >= 0) {
      if (i < reinit_at) {
        ev.outcomes.push_back(fo);  // inactive, skipped
        continue;
      }
      tracker.start(seq.frames[static_cast<std::size_t>(i)],
                    seq.boxes[static_cast<std::size_t>(i)], i);
      last_reinit = i;
      reinit_at = -1;
      ev.outcomes.push_back(fo);  // the restart frame itself is not scored
      continue;
    }
    double v = 0.0;
    bool crashed = false;
    try {
      const Box box = tracker.update(seq.frames[static_cast<std::size_t>(i)], i);
      v = iou(box, seq.boxes[static_cast<std::size_t>(i)]);
    } catch (const std::exception&) {
      crashed = true;
    }
    fo.overlap = v;
    if (crashed || v == 0.0) {
      fo.failure = true;
      ++ev.failures;
      reinit_at = i + cfg.reinit_gap;
      if (reinit_at >= seq.length()) reinit_at = seq.length();  // never reached
    } else if (last_reinit < 0 || i - last_reinit > cfg.burn_in) {
      fo.counted = true;
      iou_sum += v;
      ++counted;
    }
    ev.outcomes.push_back(fo);
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double secs = std::chrono::duration<double>(t1 - t0).count();
  ev.fps = secs > 0 ? (seq.length() - 1) / secs : 0.0;
  ev.mean_iou_success = counted > 0 ? iou_sum / counted : 0.0;
  return ev;
}

double run_plain_mean_iou(TrackerIface& tracker, const SequenceRecord& seq) {
  if (seq.length() < 2) return 0.0;
  tracker.start(seq.frames[0], seq.boxes[0], 0);
  double sum = 0.0;
  for (int i = 1; i < seq.length(); ++i) {
    double v = 0.0;
    try {
      const Box box = tracker.update(seq.frames[static_cast<std::size_t>(i)], i);
      v = iou(box, seq.boxes[static_cast<std::size_t>(i)]);
    } catch (const std::exception&) {
      v = 0.0;
    }
    sum += v;
  }
  return sum / (seq.length() - 1);
}

EvalReport aggregate(const std::vector<SequenceEval>& records) {
  if (records.empty()) throw ContractError("aggregate: no sequence records");
  EvalReport rep;
  rep.sequences = records;
  double iou_sum = 0.0;
  std::size_t counted = 0;
  int failures = 0;
  long total_frames = 0;
  double eo_sum = 0.0;
  double fps_num = 0.0, fps_den = 0.0;
  for (const auto& r : records) {
    for (const auto& fo : r.outcomes) {
      if (fo.counted) {
        iou_sum += fo.overlap;
        ++counted;
      }
    }
    failures += r.failures;
    total_frames += r.frames;
    eo_sum += r.eo_mean_iou;
    if (r.fps > 0) {
      fps_num += r.frames - 1;
      fps_den += (r.frames - 1) / r.fps;
    }
  }
  rep.accuracy = counted > 0 ? iou_sum / static_cast<double>(counted) : 0.0;
  rep.robustness_per_100 =
      total_frames > 0 ? 100.0 * failures / static_cast<double>(total_frames) : 0.0;
  rep.eo_simplified = eo_sum / static_cast<double>(records.size());
  rep.fps = fps_den > 0 ? fps_num / fps_den : 0.0;
  return rep;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["aggregate"] = {{"accuracy", report.accuracy},
                    {"robustness_per_100_frames", report.robustness_per_100},
                    {"eo_simplified", report.eo_simplified},
                    {"fps", report.fps}};
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& r : report.sequences) {
    seqs.push_back({{"sequence", r.id},
                    {"frames", r.frames},
                    {"mean_iou_success", r.mean_iou_success},
                    {"failures", r.failures},
                    {"eo_mean_iou", r.eo_mean_iou},
                    {"fps", r.fps}});
  }
  j["sequences"] = std::move(seqs);
  return j.dump(2);
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "sequence,frames,meanIoU,failures,fps\n";
  char line[256];
  for (const auto& r : report.sequences) {
    std::snprintf(line, sizeof(line), "%s,%d,%.6f,%d,%.3f\n", r.id.c_str(),
                  r.frames, r.mean_iou_success, r.failures, r.fps);
    os << line;
  }
  return os.str();
}

}  // namespace denssiam
