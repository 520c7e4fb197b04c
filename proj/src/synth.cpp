#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace denssiam {

namespace fs = std::filesystem;

namespace {

struct Grating {
  double fx, fy, phase, amp;
};

std::vector<Grating> make_gratings(Rng& rng, int count, double max_freq,
                                   double amp) {
  std::vector<Grating> gs(static_cast<std::size_t>(count));
  for (auto& g : gs) {
    const double angle = rng.uniform() * 2.0 * std::numbers::pi;
    const double freq = (0.2 + 0.8 * rng.uniform()) * max_freq;
    g.fx = freq * std::cos(angle);
    g.fy = freq * std::sin(angle);
    g.phase = rng.uniform() * 2.0 * std::numbers::pi;
    g.amp = amp * (0.5 + rng.uniform());
  }
  return gs;
}

double eval_gratings(const std::vector<Grating>& gs, double x, double y) {
  double v = 0.0;
  for (const auto& g : gs) v += g.amp * std::sin(g.fx * x + g.fy * y + g.phase);
  return v;
}

inline std::uint8_t quantize(double v) {
  const double s = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(s));
}

}  // namespace

SequenceRecord gen_synthetic_sequence(const SynthSpec& spec) {
  if (spec.frames < 2) throw ConfigError("synthetic sequence needs >= 2 frames");
  Rng root(spec.seed);

  Rng bg_rng = root.fork("background");
  const auto bg_gratings = make_gratings(bg_rng, 4, 0.35, 0.05);
  double bg_base[3];
  for (double& b : bg_base) b = 0.35 + 0.3 * bg_rng.uniform();

  Rng obj_rng = root.fork("object");
  const auto obj_gratings = make_gratings(obj_rng, 3, 0.9, 0.08);
  double obj_base[3];
  for (double& b : obj_base) b = 0.15 + 0.7 * obj_rng.uniform();
  const double obj_w = spec.size * (0.85 + 0.3 * obj_rng.uniform());
  const double obj_h = spec.size * (0.85 + 0.3 * obj_rng.uniform());

  // start position leaves room to move
  const double margin_x = obj_w / 2 + 4, margin_y = obj_h / 2 + 4;
  double cx = margin_x + (spec.width - 2 * margin_x) * (0.2 + 0.6 * obj_rng.uniform());
  double cy = margin_y + (spec.height - 2 * margin_y) * (0.2 + 0.6 * obj_rng.uniform());
  const double cx0 = cx, cy0 = cy;

  const int bar_w = std::max(8, spec.size / 2);
  Rng occ_rng = root.fork("occluder");
  const auto bar_gratings = make_gratings(occ_rng, 2, 0.5, 0.06);

  SequenceRecord seq;
  seq.id = "synth-" + std::to_string(spec.seed);
  seq.frames.reserve(static_cast<std::size_t>(spec.frames));
  seq.boxes.reserve(static_cast<std::size_t>(spec.frames));

  for (int t = 0; t < spec.frames; ++t) {
    if (t > 0) {
      if (spec.motion == "linear") {
        cx += spec.velocity_x;
        cy += spec.velocity_y;
      } else if (spec.motion == "sine") {
        const double phase = 2.0 * std::numbers::pi * t / spec.frames;
        cx = cx0 + spec.velocity_x * 10.0 * std::sin(phase);
        cy = cy0 + spec.velocity_y * 10.0 * std::sin(2.0 * phase);
      }
    }
    cx = std::clamp(cx, margin_x, spec.width - margin_x);
    cy = std::clamp(cy, margin_y, spec.height - margin_y);

    const double illum =
        1.0 + spec.illumination_drift *
                  std::sin(2.0 * std::numbers::pi * t / spec.frames);
    const double bar_x =
        spec.occlusion
            ? (static_cast<double>(t) / (spec.frames - 1)) * (spec.width - bar_w)
            : -1e9;

    Image frame(spec.width, spec.height);
    Rng noise_rng = root.fork("noise", static_cast<std::uint64_t>(t));
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double dx = (x - cx) / (obj_w / 2.0);
        const double dy = (y - cy) / (obj_h / 2.0);
        bool inside;
        if (spec.shape == "ellipse") {
          inside = dx * dx + dy * dy <= 1.0;
        } else {
          inside = std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0;
        }
        const bool in_bar = x >= bar_x && x < bar_x + bar_w;
        double base[3];
        double tex;
        if (in_bar) {
          tex = eval_gratings(bar_gratings, x, y);
          base[0] = base[1] = base[2] = 0.5;
        } else if (inside) {
          tex = eval_gratings(obj_gratings, x - cx, y - cy);
          base[0] = obj_base[0];
          base[1] = obj_base[1];
          base[2] = obj_base[2];
        } else {
          tex = eval_gratings(bg_gratings, x, y);
          base[0] = bg_base[0];
          base[1] = bg_base[1];
          base[2] = bg_base[2];
        }
        std::uint8_t* p = frame.px(x, y);
        for (int c = 0; c < 3; ++c) {
          double v = (base[c] + tex) * illum;
          if (spec.noise > 0.0) v += spec.noise * noise_rng.normal();
          p[c] = quantize(v);
        }
      }
    }
    seq.frames.push_back(std::move(frame));
    seq.boxes.push_back(Box{cx - obj_w / 2.0, cy - obj_h / 2.0, obj_w, obj_h});
  }
  return seq;
}

void save_sequence(const SequenceRecord& seq, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream gt(fs::path(dir) / "groundtruth.txt");
  if (!gt) throw IoError("cannot write groundtruth.txt under " + dir);
  char name[32];
  for (int i = 0; i < seq.length(); ++i) {
    std::snprintf(name, sizeof(name), "%08d.png", i + 1);
    save_image((fs::path(dir) / name).string(), seq.frames[static_cast<std::size_t>(i)]);
    const Box& b = seq.boxes[static_cast<std::size_t>(i)];
    char line[160];
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", b.x, b.y, b.w,
                  b.h);
    gt << line;
  }
}

Box parse_groundtruth_line(const std::string& line, int line_no) {
  std::string cleaned = line;
  for (char& c : cleaned) {
    if (c == ',' || c == '\r' || c == '\t') c = ' ';
  }
  std::istringstream ss(cleaned);
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  if (!ss.eof()) {
    throw FormatError("groundtruth line " + std::to_string(line_no) +
                      ": malformed number in '" + line + "'");
  }
  if (vals.size() == 4) {
    return Box{vals[0], vals[1], vals[2], vals[3]};
  }
  if (vals.size() == 8) {
    double xmin = vals[0], xmax = vals[0], ymin = vals[1], ymax = vals[1];
    for (int k = 1; k < 4; ++k) {
      xmin = std::min(xmin, vals[static_cast<std::size_t>(2 * k)]);
      xmax = std::max(xmax, vals[static_cast<std::size_t>(2 * k)]);
      ymin = std::min(ymin, vals[static_cast<std::size_t>(2 * k) + 1]);
      ymax = std::max(ymax, vals[static_cast<std::size_t>(2 * k) + 1]);
    }
    return Box{xmin, ymin, xmax - xmin, ymax - ymin};
  }
  throw FormatError("groundtruth line " + std::to_string(line_no) +
                    ": expected 4 or 8 numbers, got " +
                    std::to_string(vals.size()));
}

SequenceRecord load_sequence(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> frame_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
        ext == ".ppm") {
      frame_files.push_back(entry.path());
    }
  }
  std::sort(frame_files.begin(), frame_files.end());
  if (frame_files.empty()) throw FormatError("no frame images in " + dir);

  std::ifstream gt(fs::path(dir) / "groundtruth.txt");
  if (!gt) throw IoError("missing groundtruth.txt in " + dir);
  std::vector<Box> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(gt, line)) {
    ++line_no;
    if (line.empty()) continue;
    boxes.push_back(parse_groundtruth_line(line, line_no));
  }
  if (boxes.size() != frame_files.size()) {
    throw FormatError("frame/groundtruth count mismatch in " + dir + ": " +
                      std::to_string(frame_files.size()) + " frames vs " +
                      std::to_string(boxes.size()) + " lines");
  }

  SequenceRecord seq;
  seq.id = fs::path(dir).filename().string();
  seq.frames.reserve(frame_files.size());
  for (const auto& f : frame_files) seq.frames.push_back(load_image(f.string()));
  seq.boxes = std::move(boxes);
  return seq;
}

}  // namespace denssiam
