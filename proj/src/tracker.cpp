#include "tracker.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

namespace denssiam {

TensorF cosine_window(int size) {
  if (size < 2) throw ConfigError("cosine_window: size must be >= 2");
  std::vector<double> hann(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    hann[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (size - 1)));
  }
  TensorF w({size, size});
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double v = hann[static_cast<std::size_t>(i)] *
                       hann[static_cast<std::size_t>(j)];
      w.at(i, j) = static_cast<float>(v);
      sum += v;
    }
  }
  const float inv = static_cast<float>(1.0 / sum);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= inv;
  return w;
}

CropResult crop_exemplar(const Image& frame, const Box& box) {
  return crop_resample(frame, box.cx(), box.cy(), context_side(box),
                       kExemplarSize);
}

CropResult crop_search(const Image& frame, const TrackState& state,
                       double scale_mult) {
  const Box box{state.cx - state.w / 2, state.cy - state.h / 2, state.w, state.h};
  const double side = context_side(box) *
                      (static_cast<double>(kSearchSize) / kExemplarSize) *
                      scale_mult;
  return crop_resample(frame, state.cx, state.cy, side, kSearchSize);
}

Tracker::Tracker(Model& model, const TrackSection& cfg)
    : model_(model), cfg_(cfg) {
  const int score_size = (kSearchSize - kExemplarSize) / kTotalStride + 1;  // 17
  window_size_ = (score_size - 1) * cfg_.upsample_factor + 1;
  window_ = cosine_window(window_size_);
}

TrackState Tracker::init(const Image& frame, const Box& box) {
  if (box.w <= 0 || box.h <= 0) {
    throw ContractError("tracker init: box must have positive size");
  }
  TrackState state;
  state.cx = box.cx();
  state.cy = box.cy();
  state.w = box.w;
  state.h = box.h;
  state.scale_smooth = 1.0;
  CropResult crop = crop_exemplar(frame, box);
  state.target_embedding = model_.embed_target(crop.patch);
  return state;
}

Box Tracker::state_box(const TrackState& state) {
  return Box{state.cx - state.w / 2, state.cy - state.h / 2, state.w, state.h};
}

Box Tracker::step(const Image& frame, TrackState& state, TrackDiagnostics* diag) {
  if (state.target_embedding.empty()) {
    throw ContractError("tracker step before init");
  }
  const int num_scales = static_cast<int>(cfg_.scale_exponents.size());
  std::vector<double> sides(static_cast<std::size_t>(num_scales));

  // one batched search forward over all scales
  TensorF searches({num_scales, kSearchSize, kSearchSize, 3});
  for (int si = 0; si < num_scales; ++si) {
    const double mult =
        std::pow(cfg_.scale_base, cfg_.scale_exponents[static_cast<std::size_t>(si)]);
    const Box box = state_box(state);
    sides[static_cast<std::size_t>(si)] =
        context_side(box) * (static_cast<double>(kSearchSize) / kExemplarSize) *
        mult;
    CropResult crop = crop_resample(frame, state.cx, state.cy,
                                    sides[static_cast<std::size_t>(si)],
                                    kSearchSize);
    std::memcpy(&searches.at(si, 0, 0, 0), crop.patch.data(),
                crop.patch.size() * sizeof(float));
  }
  TensorF search_emb = model_.embed_search(searches);

  // replicate the cached target embedding across the scale batch
  const auto& temb = state.target_embedding;
  TensorF target_rep({num_scales, temb.dim(1), temb.dim(2), temb.dim(3)});
  const std::size_t per = temb.size();
  for (int si = 0; si < num_scales; ++si) {
    std::memcpy(target_rep.data() + static_cast<std::size_t>(si) * per,
                temb.data(), per * sizeof(float));
  }
  ScoreMaps<float> maps = model_.score(target_rep, search_emb);

  const int score_size = maps.values.dim(1);
  const int up_size = window_size_;
  const int center = (up_size - 1) / 2;

  int best_scale = 0, best_y = center, best_x = center;
  float best_val = -std::numeric_limits<float>::infinity();
  auto better = [&](float val, int si, int dy, int dx, int cur_si, int cur_dy,
                    int cur_dx) {
    if (val != best_val) return val > best_val;
    // ties: prefer the central exponent, then the smaller displacement
    const int exp_cur = std::abs(cfg_.scale_exponents[static_cast<std::size_t>(cur_si)]);
    const int exp_new = std::abs(cfg_.scale_exponents[static_cast<std::size_t>(si)]);
    if (exp_new != exp_cur) return exp_new < exp_cur;
    return dy * dy + dx * dx < cur_dy * cur_dy + cur_dx * cur_dx;
  };

  if (diag) {
    diag->raw_maps.clear();
  }
  for (int si = 0; si < num_scales; ++si) {
    TensorF flat({score_size, score_size});
    const double penalty =
        cfg_.scale_exponents[static_cast<std::size_t>(si)] == 0 ? 1.0
                                                                : cfg_.scale_penalty;
    for (int i = 0; i < score_size; ++i)
      for (int j = 0; j < score_size; ++j)
        flat.at(i, j) = maps.values.at(si, i, j) * static_cast<float>(penalty);
    if (diag) diag->raw_maps.push_back(flat);

    TensorF up = bicubic_upsample(flat, cfg_.upsample_factor);
    // normalize to a distribution, then blend with the cosine prior
    float lo = up[0];
    for (std::size_t i = 0; i < up.size(); ++i) lo = std::min(lo, up[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) sum += up[i] - lo;
    const float inv = sum > 0.0 ? static_cast<float>(1.0 / sum)
                                : 1.0f / static_cast<float>(up.size());
    const float gamma = static_cast<float>(cfg_.window_influence);
    for (int i = 0; i < up_size; ++i) {
      for (int j = 0; j < up_size; ++j) {
        const float r = sum > 0.0 ? (up.at(i, j) - lo) * inv : inv;
        const float blended = (1.0f - gamma) * r + gamma * window_.at(i, j);
        if (!std::isfinite(blended)) {
          throw NumericError("tracker: non-finite response");
        }
        if (better(blended, si, i - center, j - center, best_scale,
                   best_y - center, best_x - center)) {
          best_val = blended;
          best_scale = si;
          best_y = i;
          best_x = j;
        }
      }
    }
  }

  // decode displacement: upsample cell -> score cell -> patch px -> frame px
  const double cells_y =
      static_cast<double>(best_y - center) / cfg_.upsample_factor;
  const double cells_x =
      static_cast<double>(best_x - center) / cfg_.upsample_factor;
  const double patch_scale = sides[static_cast<std::size_t>(best_scale)] /
                             static_cast<double>(kSearchSize);
  state.cx += cells_x * kTotalStride * patch_scale;
  state.cy += cells_y * kTotalStride * patch_scale;

  // smoothed scale update toward the chosen multiplier
  const double chosen =
      std::pow(cfg_.scale_base,
               cfg_.scale_exponents[static_cast<std::size_t>(best_scale)]);
  const double a = cfg_.scale_interp;
  double box_factor, smooth_next;
  if (cfg_.scale_interp_mode == "toward_new") {
    box_factor = (1.0 - a) + a * chosen;
    smooth_next = (1.0 - a) * state.scale_smooth + a * chosen;
  } else {
    box_factor = a + (1.0 - a) * chosen;
    smooth_next = a * state.scale_smooth + (1.0 - a) * chosen;
  }
  state.w *= box_factor;
  state.h *= box_factor;
  state.scale_smooth = smooth_next;

  // clamp: box stays inside the frame
  state.w = std::min(state.w, static_cast<double>(frame.width));
  state.h = std::min(state.h, static_cast<double>(frame.height));
  state.w = std::max(state.w, 4.0);
  state.h = std::max(state.h, 4.0);
  state.cx = std::clamp(state.cx, state.w / 2, frame.width - state.w / 2);
  state.cy = std::clamp(state.cy, state.h / 2, frame.height - state.h / 2);

  if (diag) {
    diag->chosen_scale_index = best_scale;
    diag->peak_value = best_val;
  }
  return state_box(state);
}

std::vector<Box> track_sequence(Model& model, const TrackSection& cfg,
                                const SequenceRecord& seq, double* fps) {
  if (seq.length() < 1) throw ContractError("track_sequence: empty sequence");
  Tracker tracker(model, cfg);
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(seq.length()));
  const auto t0 = std::chrono::steady_clock::now();
  TrackState state = tracker.init(seq.frames[0], seq.boxes[0]);
  out.push_back(seq.boxes[0]);  // first line echoes the init box
  for (int i = 1; i < seq.length(); ++i) {
    out.push_back(tracker.step(seq.frames[static_cast<std::size_t>(i)], state));
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (fps) {
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    *fps = secs > 0 ? static_cast<double>(seq.length()) / secs : 0.0;
  }
  return out;
}

void save_box_file(const std::string& path, const std::vector<Box>& boxes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write box file: " + path);
  char line[160];
  for (const Box& b : boxes) {
    std::snprintf(line, sizeof(line), "%.4f,%.4f,%.4f,%.4f\n", b.x, b.y, b.w, b.h);
    out << line;
  }
}

}  // namespace denssiam
