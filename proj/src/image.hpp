#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace denssiam {

// Axis-aligned box, top-left origin, pixel units.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;
  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }
};

// 8-bit RGB frame, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {}

  std::uint8_t* px(int x, int y) {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* px(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

Image load_image(const std::string& path);
void save_image(const std::string& path, const Image& img);

// Square crop of continuous side `side` centered at (cx, cy), resampled
// bilinearly to (out_size, out_size, 3) floats in [0,1]. Taps outside the
// frame read the per-channel frame mean. fill_fraction is the share of
// output pixels whose sample center lies outside the frame.
struct CropResult {
  TensorF patch;  // (1, out, out, 3)
  double fill_fraction = 0.0;
};

CropResult crop_resample(const Image& frame, double cx, double cy, double side,
                         int out_size);

// Square context side sqrt((w+2p)(h+2p)) with margin p=(w+h)/4; degenerate
// boxes are expanded to 2x2 before the margin is applied.
double context_side(const Box& box);

// Separable Catmull-Rom upsampling of a 2-D map to ((h-1)*f+1, (w-1)*f+1);
// output (i,j) interpolates source position (i/f, j/f), edges clamped.
TensorF bicubic_upsample(const TensorF& map, int factor);

}  // namespace denssiam
