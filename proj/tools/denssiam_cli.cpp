// Command-line front end; drives the core strictly through the C API.

#include <CLI11.hpp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "denssiam.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // verification / runtime failure
constexpr int kExitUsage = 2;    // usage / config error

struct ScopedString {
  char* value = nullptr;
  ~ScopedString() { ds_string_free(value); }
};

int status_to_exit(ds_status s) {
  switch (s) {
    case DS_OK:
      return kExitOk;
    case DS_ERR_ARGUMENT:
    case DS_ERR_CONFIG:
    case DS_ERR_IO:
    case DS_ERR_FORMAT:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

int fail(ds_status s) {
  std::fprintf(stderr, "error (%s): %s\n", ds_status_name(s), ds_last_error());
  return status_to_exit(s);
}

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--override", opts.overrides,
                  "dotted config override key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "training/synth seed override");
  cmd->add_option("--threads", opts.threads, "worker thread count override");
}

// Builds the effective config JSON: file or defaults, then overrides.
ds_status build_config(const CommonOpts& opts, std::string* out) {
  ScopedString base;
  ds_status s = opts.config_path.empty()
                    ? ds_config_default(&base.value)
                    : ds_config_load(opts.config_path.c_str(), &base.value);
  if (s != DS_OK) return s;
  std::string json = base.value;

  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& ov : opts.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: override '%s' is not key=value\n", ov.c_str());
      return DS_ERR_CONFIG;
    }
    kv.emplace_back(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (opts.seed >= 0) {
    kv.emplace_back("training.seed", std::to_string(opts.seed));
    kv.emplace_back("synth.seed", std::to_string(opts.seed));
    kv.emplace_back("data.seed", std::to_string(opts.seed));
  }
  if (opts.threads > 0) {
    kv.emplace_back("threads", std::to_string(opts.threads));
  }
  for (const auto& [key, value] : kv) {
    ScopedString merged;
    s = ds_config_override(json.c_str(), key.c_str(), value.c_str(),
                           &merged.value);
    if (s != DS_OK) return s;
    json = merged.value;
  }
  *out = json;
  return DS_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DensSiam tracker: train, track, evaluate, verify, synthesize"};
  app.require_subcommand(1);

  CommonOpts train_opts, track_opts, eval_opts, verify_opts, synth_opts;

  auto* train = app.add_subcommand("train", "train a model, write checkpoints");
  std::string train_out, train_data;
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--data", train_data,
                    "directory of sequence subdirectories (default: synthetic)");
  add_common(train, train_opts);

  auto* track = app.add_subcommand("track", "track one sequence");
  std::string track_ckpt, track_seq, track_out;
  track->add_option("--checkpoint", track_ckpt, "model checkpoint")->required();
  track->add_option("--sequence", track_seq, "sequence directory")->required();
  track->add_option("--out", track_out, "output box file")->required();
  add_common(track, track_opts);

  auto* eval = app.add_subcommand("eval", "run the benchmark protocol");
  std::string eval_ckpt, eval_dataset, eval_out, eval_tracker = "denssiam";
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint");
  eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval->add_option("--out", eval_out, "report directory")->required();
  eval->add_option("--tracker", eval_tracker, "denssiam | oracle");
  add_common(eval, eval_opts);

  auto* verify = app.add_subcommand("verify", "run verification suites");
  std::string verify_mode = "all";
  verify->add_option("mode", verify_mode, "shapes | grads | props | all");
  add_common(verify, verify_opts);

  auto* synth = app.add_subcommand("synth", "generate a synthetic sequence");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output sequence directory")->required();
  add_common(synth, synth_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  ds_status s = DS_OK;
  if (train->parsed()) {
    std::string cfg;
    if ((s = build_config(train_opts, &cfg)) != DS_OK) return fail(s);
    s = ds_train_run(cfg.c_str(), train_data.empty() ? nullptr : train_data.c_str(),
                     train_out.c_str());
    if (s != DS_OK) return fail(s);
    std::printf("training complete; checkpoints under %s\n", train_out.c_str());
  } else if (track->parsed()) {
    std::string cfg;
    if ((s = build_config(track_opts, &cfg)) != DS_OK) return fail(s);
    if (track_opts.threads > 0) ds_set_threads(track_opts.threads);
    double fps = 0.0;
    s = ds_track_run(track_ckpt.c_str(), track_seq.c_str(), track_out.c_str(),
                     track_opts.config_path.empty() && track_opts.overrides.empty()
                         ? nullptr
                         : cfg.c_str(),
                     &fps);
    if (s != DS_OK) return fail(s);
    std::printf("%.2f fps\n", fps);
  } else if (eval->parsed()) {
    std::string cfg;
    if ((s = build_config(eval_opts, &cfg)) != DS_OK) return fail(s);
    if (eval_opts.threads > 0) ds_set_threads(eval_opts.threads);
    if (eval_tracker == "denssiam" && eval_ckpt.empty()) {
      std::fprintf(stderr, "error: --checkpoint is required for --tracker denssiam\n");
      return kExitUsage;
    }
    s = ds_eval_run(eval_ckpt.empty() ? nullptr : eval_ckpt.c_str(),
                    eval_dataset.c_str(), eval_out.c_str(), eval_tracker.c_str(),
                    eval_opts.config_path.empty() && eval_opts.overrides.empty()
                        ? nullptr
                        : cfg.c_str());
    if (s != DS_OK) return fail(s);
    std::printf("report written under %s\n", eval_out.c_str());
  } else if (verify->parsed()) {
    if (verify_opts.threads > 0) ds_set_threads(verify_opts.threads);
    int32_t failures = 0;
    s = ds_verify_run(verify_mode.c_str(), &failures);
    if (s != DS_OK) return fail(s);
    return failures == 0 ? kExitOk : kExitFailure;
  } else if (synth->parsed()) {
    std::string cfg;
    if ((s = build_config(synth_opts, &cfg)) != DS_OK) return fail(s);
    ds_sequence* seq = nullptr;
    if ((s = ds_sequence_synth(cfg.c_str(), &seq)) != DS_OK) return fail(s);
    const int32_t frames = ds_sequence_frames(seq);
    s = ds_sequence_save(seq, synth_out.c_str());
    ds_sequence_close(seq);
    if (s != DS_OK) return fail(s);
    std::printf("%d frames written under %s\n", frames, synth_out.c_str());
  }
  return kExitOk;
}
