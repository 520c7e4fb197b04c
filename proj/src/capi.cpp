#include "denssiam.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "blas.hpp"
#include "checkpoint.hpp"
#include "eval.hpp"
#include "train.hpp"
#include "verify.hpp"

using namespace denssiam;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
ds_status guarded(Fn&& fn) {
  try {
    fn();
    return DS_OK;
  } catch (const ContractError& e) {
    g_last_error = e.what();
    return DS_ERR_ARGUMENT;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return DS_ERR_CONFIG;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return DS_ERR_IO;
  } catch (const FormatError& e) {
    g_last_error = e.what();
    return DS_ERR_FORMAT;
  } catch (const NumericError& e) {
    g_last_error = e.what();
    return DS_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DS_ERR_INTERNAL;
  }
}

ds_status require_arg(bool ok, const char* msg) {
  if (!ok) {
    g_last_error = msg;
    return DS_ERR_ARGUMENT;
  }
  return DS_OK;
}

Model load_model_file(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  Model model(ckpt.config, ckpt.config.training.seed);
  restore_store(model.store(), ckpt);
  return model;
}

}  // namespace

struct ds_model_s {
  Model model;
  TrainState state;
};

struct ds_sequence_s {
  SequenceRecord seq;
};

struct ds_tracker_s {
  ds_model* model;
  Tracker tracker;
  TrackState state;
  bool started = false;

  ds_tracker_s(ds_model* m, const TrackSection& cfg)
      : model(m), tracker(m->model, cfg) {}
};

extern "C" {

const char* ds_status_name(ds_status status) {
  switch (status) {
    case DS_OK: return "ok";
    case DS_ERR_ARGUMENT: return "argument";
    case DS_ERR_CONFIG: return "config";
    case DS_ERR_IO: return "io";
    case DS_ERR_FORMAT: return "format";
    case DS_ERR_NUMERIC: return "numeric";
    default: return "internal";
  }
}

const char* ds_version(void) { return "1.0.0"; }

const char* ds_last_error(void) { return g_last_error.c_str(); }

void ds_string_free(char* s) { std::free(s); }

ds_status ds_config_default(char** out_json) {
  if (ds_status s = require_arg(out_json != nullptr, "out_json is null")) return s;
  return guarded([&] { *out_json = dup_string(config_to_json(Config{})); });
}

ds_status ds_config_load(const char* path, char** out_json) {
  if (ds_status s = require_arg(path && out_json, "null argument")) return s;
  return guarded(
      [&] { *out_json = dup_string(config_to_json(load_config_file(path))); });
}

ds_status ds_config_override(const char* config_json, const char* dotted_key,
                             const char* value, char** out_json) {
  if (ds_status s =
          require_arg(config_json && dotted_key && value && out_json,
                      "null argument")) {
    return s;
  }
  return guarded([&] {
    const std::string merged = apply_override(config_json, dotted_key, value);
    config_from_json(merged);  // re-validate
    *out_json = dup_string(merged);
  });
}

ds_status ds_set_threads(int32_t threads) {
  if (ds_status s = require_arg(threads >= 1, "threads must be >= 1")) return s;
  set_blas_threads(threads);
  return DS_OK;
}

ds_status ds_model_create(const char* config_json, uint64_t seed,
                          ds_model** out) {
  if (ds_status s = require_arg(config_json && out, "null argument")) return s;
  return guarded([&] {
    Config cfg = config_from_json(config_json);
    *out = new ds_model_s{Model(cfg, seed)};
  });
}

ds_status ds_model_open(const char* checkpoint_path, ds_model** out) {
  if (ds_status s = require_arg(checkpoint_path && out, "null argument")) return s;
  return guarded([&] {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    Model model(ckpt.config, ckpt.config.training.seed);
    restore_store(model.store(), ckpt);
    *out = new ds_model_s{std::move(model), ckpt.state};
  });
}

ds_status ds_model_save(ds_model* model, const char* path) {
  if (ds_status s = require_arg(model && path, "null argument")) return s;
  return guarded([&] {
    save_checkpoint(path, model->model.store(), model->state,
                    model->model.config());
  });
}

void ds_model_close(ds_model* model) { delete model; }

ds_status ds_sequence_open(const char* dir, ds_sequence** out) {
  if (ds_status s = require_arg(dir && out, "null argument")) return s;
  return guarded([&] { *out = new ds_sequence_s{load_sequence(dir)}; });
}

ds_status ds_sequence_synth(const char* config_json, ds_sequence** out) {
  if (ds_status s = require_arg(config_json && out, "null argument")) return s;
  return guarded([&] {
    Config cfg = config_from_json(config_json);
    *out = new ds_sequence_s{gen_synthetic_sequence(cfg.synth)};
  });
}

ds_status ds_sequence_save(const ds_sequence* seq, const char* dir) {
  if (ds_status s = require_arg(seq && dir, "null argument")) return s;
  return guarded([&] { save_sequence(seq->seq, dir); });
}

int32_t ds_sequence_frames(const ds_sequence* seq) {
  return seq ? seq->seq.length() : 0;
}

ds_status ds_sequence_groundtruth(const ds_sequence* seq, int32_t frame,
                                  double box_xywh[4]) {
  if (ds_status s = require_arg(seq && box_xywh, "null argument")) return s;
  if (ds_status s = require_arg(frame >= 0 && frame < seq->seq.length(),
                                "frame index out of range")) {
    return s;
  }
  const Box& b = seq->seq.boxes[static_cast<std::size_t>(frame)];
  box_xywh[0] = b.x;
  box_xywh[1] = b.y;
  box_xywh[2] = b.w;
  box_xywh[3] = b.h;
  return DS_OK;
}

void ds_sequence_close(ds_sequence* seq) { delete seq; }

ds_status ds_tracker_create(ds_model* model, const char* config_json,
                            ds_tracker** out) {
  if (ds_status s = require_arg(model && out, "null argument")) return s;
  return guarded([&] {
    const TrackSection cfg = config_json
                                 ? config_from_json(config_json).tracking
                                 : model->model.config().tracking;
    *out = new ds_tracker_s(model, cfg);
  });
}

namespace {
Image image_from_rgb(const uint8_t* rgb, int32_t width, int32_t height) {
  Image img(width, height);
  std::memcpy(img.rgb.data(), rgb, img.rgb.size());
  return img;
}
}  // namespace

ds_status ds_tracker_start(ds_tracker* tracker, const uint8_t* rgb,
                           int32_t width, int32_t height,
                           const double box_xywh[4]) {
  if (ds_status s = require_arg(tracker && rgb && box_xywh, "null argument")) {
    return s;
  }
  if (ds_status s = require_arg(width > 0 && height > 0, "empty frame")) return s;
  return guarded([&] {
    const Image frame = image_from_rgb(rgb, width, height);
    tracker->state = tracker->tracker.init(
        frame, Box{box_xywh[0], box_xywh[1], box_xywh[2], box_xywh[3]});
    tracker->started = true;
  });
}

ds_status ds_tracker_update(ds_tracker* tracker, const uint8_t* rgb,
                            int32_t width, int32_t height, double box_out[4]) {
  if (ds_status s = require_arg(tracker && rgb && box_out, "null argument")) {
    return s;
  }
  if (ds_status s = require_arg(tracker->started, "tracker not started")) return s;
  return guarded([&] {
    const Image frame = image_from_rgb(rgb, width, height);
    const Box b = tracker->tracker.step(frame, tracker->state);
    box_out[0] = b.x;
    box_out[1] = b.y;
    box_out[2] = b.w;
    box_out[3] = b.h;
  });
}

void ds_tracker_close(ds_tracker* tracker) { delete tracker; }

ds_status ds_train_run(const char* config_json, const char* data_dir,
                       const char* out_dir) {
  if (ds_status s = require_arg(config_json && out_dir, "null argument")) return s;
  return guarded([&] {
    Config cfg = config_from_json(config_json);
    set_blas_threads(cfg.threads);
    Model model(cfg, cfg.training.seed);
    if (data_dir) {
      namespace fs = std::filesystem;
      std::vector<SequenceRecord> data;
      std::vector<fs::path> dirs;
      for (const auto& e : fs::directory_iterator(data_dir)) {
        if (e.is_directory()) dirs.push_back(e.path());
      }
      std::sort(dirs.begin(), dirs.end());
      for (const auto& d : dirs) data.push_back(load_sequence(d.string()));
      if (data.empty()) throw IoError(std::string("no sequences under ") + data_dir);
      run_training(model, cfg, out_dir, &data);
    } else {
      run_training(model, cfg, out_dir);
    }
  });
}

ds_status ds_track_run(const char* checkpoint_path, const char* sequence_dir,
                       const char* out_path, const char* config_json,
                       double* fps_out) {
  if (ds_status s = require_arg(checkpoint_path && sequence_dir && out_path,
                                "null argument")) {
    return s;
  }
  return guarded([&] {
    Model model = load_model_file(checkpoint_path);
    const TrackSection cfg = config_json ? config_from_json(config_json).tracking
                                         : model.config().tracking;
    const SequenceRecord seq = load_sequence(sequence_dir);
    double fps = 0.0;
    const std::vector<Box> boxes = track_sequence(model, cfg, seq, &fps);
    save_box_file(out_path, boxes);
    if (fps_out) *fps_out = fps;
  });
}

ds_status ds_eval_run(const char* checkpoint_path, const char* dataset_dir,
                      const char* out_dir, const char* tracker_kind,
                      const char* config_json) {
  if (ds_status s = require_arg(dataset_dir && out_dir && tracker_kind,
                                "null argument")) {
    return s;
  }
  const std::string kind = tracker_kind;
  if (ds_status s = require_arg(kind == "denssiam" || kind == "oracle",
                                "tracker_kind must be 'denssiam' or 'oracle'")) {
    return s;
  }
  if (ds_status s = require_arg(kind == "oracle" || checkpoint_path,
                                "checkpoint_path required for 'denssiam'")) {
    return s;
  }
  return guarded([&] {
    namespace fs = std::filesystem;
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(dataset_dir)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) {
      throw IoError(std::string("no sequence directories under ") + dataset_dir);
    }

    std::unique_ptr<Model> model;
    Config cfg;
    if (kind == "denssiam") {
      LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
      cfg = ckpt.config;
      model = std::make_unique<Model>(cfg, cfg.training.seed);
      restore_store(model->store(), ckpt);
    }
    if (config_json) cfg = config_from_json(config_json);

    std::vector<SequenceEval> records;
    for (const auto& d : dirs) {
      const SequenceRecord seq = load_sequence(d.string());
      std::unique_ptr<TrackerIface> protocol_tracker, plain_tracker;
      if (kind == "oracle") {
        protocol_tracker = std::make_unique<OracleTracker>(seq);
        plain_tracker = std::make_unique<OracleTracker>(seq);
      } else {
        protocol_tracker =
            std::make_unique<DensSiamTrackerAdapter>(*model, cfg.tracking);
        plain_tracker =
            std::make_unique<DensSiamTrackerAdapter>(*model, cfg.tracking);
      }
      SequenceEval ev = run_vot_protocol(*protocol_tracker, seq, cfg.eval);
      ev.eo_mean_iou = run_plain_mean_iou(*plain_tracker, seq);
      records.push_back(std::move(ev));
    }
    const EvalReport report = aggregate(records);
    fs::create_directories(out_dir);
    {
      std::ofstream json(fs::path(out_dir) / "report.json");
      json << report_to_json(report) << "\n";
    }
    {
      std::ofstream csv(fs::path(out_dir) / "report.csv");
      csv << report_to_csv(report);
    }
  });
}

ds_status ds_verify_run(const char* mode, int32_t* failures_out) {
  if (ds_status s = require_arg(mode != nullptr, "mode is null")) return s;
  const std::string m = mode;
  if (ds_status s = require_arg(
          m == "shapes" || m == "grads" || m == "props" || m == "all",
          "mode must be shapes|grads|props|all")) {
    return s;
  }
  return guarded([&] {
    std::vector<CheckResult> results;
    if (m == "shapes") {
      results = verify_shapes();
    } else if (m == "grads") {
      results = verify_grads();
    } else if (m == "props") {
      results = verify_props();
    } else {
      results = verify_all();
    }
    const int failures = print_results(results);
    if (failures_out) *failures_out = failures;
  });
}

}  // extern "C"
