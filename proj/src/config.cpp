#include "config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace denssiam {

using json = nlohmann::json;

namespace {

// Pulls known keys out of `j`, then rejects leftovers by name.
class StrictReader {
 public:
  StrictReader(const json& j, std::string scope)
      : j_(j), scope_(std::move(scope)) {
    if (!j.is_object()) {
      throw ConfigError("config section '" + scope_ + "' must be an object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;  // keep default
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + scope_ + "." + key +
                        "' has the wrong type");
    }
    seen_.push_back(key);
  }

  const json* section(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.push_back(key);
    return &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const auto& k : seen_) {
        if (k == it.key()) {
          known = true;
          break;
        }
      }
      if (!known) {
        throw ConfigError("unknown config key '" + scope_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string scope_;
  std::vector<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m) {
  StrictReader r(j, "model");
  r.get("block4_mode", m.block4_mode);
  r.get("attention_reduction", m.attention_reduction);
  r.get("attention_residual", m.attention_residual);
  r.get("dropout_rate", m.dropout_rate);
  r.get("bn_eps", m.bn_eps);
  r.get("bn_momentum", m.bn_momentum);
  r.get("gain_init", m.gain_init);
  r.finish();
}

void read_training(const json& j, TrainSection& t) {
  StrictReader r(j, "training");
  r.get("epochs", t.epochs);
  r.get("pairs_per_epoch", t.pairs_per_epoch);
  r.get("batch_size", t.batch_size);
  r.get("momentum", t.momentum);
  r.get("lr_start", t.lr_start);
  r.get("lr_end", t.lr_end);
  r.get("weight_decay", t.weight_decay);
  r.get("seed", t.seed);
  r.get("r_pos", t.r_pos);
  r.get("balanced_loss", t.balanced_loss);
  r.get("max_frame_gap", t.max_frame_gap);
  r.get("jitter_px", t.jitter_px);
  r.get("checkpoint_every", t.checkpoint_every);
  r.finish();
}

void read_tracking(const json& j, TrackSection& t) {
  StrictReader r(j, "tracking");
  r.get("scale_base", t.scale_base);
  r.get("scale_exponents", t.scale_exponents);
  r.get("scale_interp", t.scale_interp);
  r.get("scale_interp_mode", t.scale_interp_mode);
  r.get("window_influence", t.window_influence);
  r.get("upsample_factor", t.upsample_factor);
  r.get("scale_penalty", t.scale_penalty);
  r.finish();
}

void read_eval(const json& j, EvalSection& e) {
  StrictReader r(j, "eval");
  r.get("reinit_gap", e.reinit_gap);
  r.get("burn_in", e.burn_in);
  r.finish();
}

void read_synth(const json& j, SynthSpec& s, const char* scope) {
  StrictReader r(j, scope);
  r.get("width", s.width);
  r.get("height", s.height);
  r.get("frames", s.frames);
  r.get("shape", s.shape);
  r.get("motion", s.motion);
  r.get("velocity_x", s.velocity_x);
  r.get("velocity_y", s.velocity_y);
  r.get("size", s.size);
  r.get("noise", s.noise);
  r.get("occlusion", s.occlusion);
  r.get("illumination_drift", s.illumination_drift);
  r.get("seed", s.seed);
  r.finish();
}

void read_data(const json& j, DataSection& d) {
  StrictReader r(j, "data");
  r.get("sequences", d.sequences);
  r.get("frames", d.frames);
  r.get("width", d.width);
  r.get("height", d.height);
  r.get("noise", d.noise);
  r.get("occlusion", d.occlusion);
  r.get("seed", d.seed);
  r.finish();
}

}  // namespace

Config config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Config cfg;
  StrictReader r(j, "");
  r.get("threads", cfg.threads);
  if (const json* s = r.section("model")) read_model(*s, cfg.model);
  if (const json* s = r.section("training")) read_training(*s, cfg.training);
  if (const json* s = r.section("tracking")) read_tracking(*s, cfg.tracking);
  if (const json* s = r.section("eval")) read_eval(*s, cfg.eval);
  if (const json* s = r.section("data")) read_data(*s, cfg.data);
  if (const json* s = r.section("synth")) read_synth(*s, cfg.synth, "synth");
  r.finish();
  validate(cfg);
  return cfg;
}

std::string config_to_json(const Config& cfg) {
  json j;
  j["threads"] = cfg.threads;
  j["model"] = {{"block4_mode", cfg.model.block4_mode},
                {"attention_reduction", cfg.model.attention_reduction},
                {"attention_residual", cfg.model.attention_residual},
                {"dropout_rate", cfg.model.dropout_rate},
                {"bn_eps", cfg.model.bn_eps},
                {"bn_momentum", cfg.model.bn_momentum},
                {"gain_init", cfg.model.gain_init}};
  j["training"] = {{"epochs", cfg.training.epochs},
                   {"pairs_per_epoch", cfg.training.pairs_per_epoch},
                   {"batch_size", cfg.training.batch_size},
                   {"momentum", cfg.training.momentum},
                   {"lr_start", cfg.training.lr_start},
                   {"lr_end", cfg.training.lr_end},
                   {"weight_decay", cfg.training.weight_decay},
                   {"seed", cfg.training.seed},
                   {"r_pos", cfg.training.r_pos},
                   {"balanced_loss", cfg.training.balanced_loss},
                   {"max_frame_gap", cfg.training.max_frame_gap},
                   {"jitter_px", cfg.training.jitter_px},
                   {"checkpoint_every", cfg.training.checkpoint_every}};
  j["tracking"] = {{"scale_base", cfg.tracking.scale_base},
                   {"scale_exponents", cfg.tracking.scale_exponents},
                   {"scale_interp", cfg.tracking.scale_interp},
                   {"scale_interp_mode", cfg.tracking.scale_interp_mode},
                   {"window_influence", cfg.tracking.window_influence},
                   {"upsample_factor", cfg.tracking.upsample_factor},
                   {"scale_penalty", cfg.tracking.scale_penalty}};
  j["eval"] = {{"reinit_gap", cfg.eval.reinit_gap},
               {"burn_in", cfg.eval.burn_in}};
  j["data"] = {{"sequences", cfg.data.sequences},
               {"frames", cfg.data.frames},
               {"width", cfg.data.width},
               {"height", cfg.data.height},
               {"noise", cfg.data.noise},
               {"occlusion", cfg.data.occlusion},
               {"seed", cfg.data.seed}};
  j["synth"] = {{"width", cfg.synth.width},
                {"height", cfg.synth.height},
                {"frames", cfg.synth.frames},
                {"shape", cfg.synth.shape},
                {"motion", cfg.synth.motion},
                {"velocity_x", cfg.synth.velocity_x},
                {"velocity_y", cfg.synth.velocity_y},
                {"size", cfg.synth.size},
                {"noise", cfg.synth.noise},
                {"occlusion", cfg.synth.occlusion},
                {"illumination_drift", cfg.synth.illumination_drift},
                {"seed", cfg.synth.seed}};
  return j.dump(2);
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string apply_override(const std::string& json_text,
                           const std::string& dotted_key,
                           const std::string& value) {
  json j = json::parse(json_text);
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ks(dotted_key);
  while (std::getline(ks, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty override key");

  json* node = &j;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw ConfigError("override key '" + dotted_key +
                        "' does not match an existing config key");
    }
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->is_object() || !node->contains(leaf)) {
    throw ConfigError("override key '" + dotted_key +
                      "' does not match an existing config key");
  }
  json& slot = (*node)[leaf];
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare strings need no quotes on the command line
  }
  const bool both_numeric = slot.is_number() && parsed.is_number();
  if (!both_numeric && slot.type() != parsed.type()) {
    throw ConfigError("override '" + dotted_key + "' expects a " +
                      std::string(slot.type_name()) + ", got '" + value + "'");
  }
  slot = parsed;
  return j.dump(2);
}

void validate(const Config& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.threads < 1) fail("threads must be >= 1");
  const auto& m = cfg.model;
  if (m.block4_mode != "conv1x1" && m.block4_mode != "pad") {
    fail("model.block4_mode must be 'conv1x1' or 'pad'");
  }
  if (m.attention_reduction < 1 || m.attention_reduction > 128) {
    fail("model.attention_reduction must be in [1,128]");
  }
  if (m.dropout_rate < 0.0 || m.dropout_rate >= 1.0) {
    fail("model.dropout_rate must be in [0,1)");
  }
  if (m.gain_init <= 0.0) fail("model.gain_init must be > 0");
  const auto& t = cfg.training;
  if (t.epochs < 1) fail("training.epochs must be >= 1");
  if (t.pairs_per_epoch < 1) fail("training.pairs_per_epoch must be >= 1");
  if (t.batch_size < 2) fail("training.batch_size must be >= 2 (batch norm)");
  if (!(t.lr_start > t.lr_end && t.lr_end > 0.0)) {
    fail("training requires lr_start > lr_end > 0");
  }
  if (t.momentum < 0.0 || t.momentum >= 1.0) {
    fail("training.momentum must be in [0,1)");
  }
  if (t.r_pos < 0.0) fail("training.r_pos must be >= 0");
  if (t.max_frame_gap < 0) fail("training.max_frame_gap must be >= 0");
  if (t.jitter_px < 0) fail("training.jitter_px must be >= 0");
  const auto& tr = cfg.tracking;
  if (tr.scale_base <= 0.0) fail("tracking.scale_base must be > 0");
  if (tr.scale_exponents.empty()) fail("tracking.scale_exponents must be non-empty");
  if (tr.scale_interp < 0.0 || tr.scale_interp > 1.0) {
    fail("tracking.scale_interp must be in [0,1]");
  }
  if (tr.scale_interp_mode != "toward_new" && tr.scale_interp_mode != "toward_old") {
    fail("tracking.scale_interp_mode must be 'toward_new' or 'toward_old'");
  }
  if (tr.window_influence < 0.0 || tr.window_influence >= 1.0) {
    fail("tracking.window_influence must be in [0,1)");
  }
  if (tr.upsample_factor < 1) fail("tracking.upsample_factor must be >= 1");
  const auto& e = cfg.eval;
  if (e.reinit_gap < 1) fail("eval.reinit_gap must be >= 1");
  if (e.burn_in < 0) fail("eval.burn_in must be >= 0");
  auto check_synth = [&](const SynthSpec& s, const std::string& scope) {
    if (s.width < 160 || s.height < 120) fail(scope + ": frame too small");
    if (s.frames < 2) fail(scope + ".frames must be >= 2");
    if (s.shape != "rect" && s.shape != "ellipse") {
      fail(scope + ".shape must be 'rect' or 'ellipse'");
    }
    if (s.motion != "linear" && s.motion != "sine" && s.motion != "static") {
      fail(scope + ".motion must be 'linear', 'sine' or 'static'");
    }
    if (s.size < 16) fail(scope + ".size must be >= 16");
    if (s.noise < 0.0 || s.noise > 0.5) fail(scope + ".noise must be in [0,0.5]");
  };
  check_synth(cfg.synth, "synth");
  if (cfg.data.sequences < 1) fail("data.sequences must be >= 1");
  if (cfg.data.frames < 2) fail("data.frames must be >= 2");
}

}  // namespace denssiam
