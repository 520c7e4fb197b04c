#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "image.hpp"
#include "rng.hpp"

namespace denssiam {

// Ordered frames with one ground-truth box per frame.
struct SequenceRecord {
  std::string id;
  std::vector<Image> frames;
  std::vector<Box> boxes;

  int length() const { return static_cast<int>(frames.size()); }
};

// Renders a textured shape moving over a textured background. Motion is
// clamped so the box never leaves the frame; boxes are exact by
// construction. Deterministic in spec.seed.
SequenceRecord gen_synthetic_sequence(const SynthSpec& spec);

// Frame files %08d.png plus groundtruth.txt, one "x,y,w,h" line per frame.
void save_sequence(const SequenceRecord& seq, const std::string& dir);

// Reads zero-padded numbered image files plus groundtruth.txt. Lines may be
// 4-number "x,y,w,h" or 8-number polygons, which collapse to their
// axis-aligned bounding box.
SequenceRecord load_sequence(const std::string& dir);

Box parse_groundtruth_line(const std::string& line, int line_no);

}  // namespace denssiam
