#include "image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace denssiam {

Image load_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + path);
  Image img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      std::uint8_t* p = img.px(x, y);
      p[0] = row[x][2];
      p[1] = row[x][1];
      p[2] = row[x][0];
    }
  }
  return img;
}

void save_image(const std::string& path, const Image& img) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* p = img.px(x, y);
      row[x] = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  if (!cv::imwrite(path, bgr)) throw IoError("cannot write image: " + path);
}

double context_side(const Box& box) {
  const double w = std::max(box.w, 2.0);
  const double h = std::max(box.h, 2.0);
  const double p = (w + h) / 4.0;
  return std::sqrt((w + 2 * p) * (h + 2 * p));
}

CropResult crop_resample(const Image& frame, double cx, double cy, double side,
                         int out_size) {
  if (side <= 0 || out_size < 1) {
    throw ContractError("crop_resample: side and out_size must be positive");
  }
  // per-channel frame means, used for out-of-frame taps
  double mean[3] = {0, 0, 0};
  const std::size_t n = static_cast<std::size_t>(frame.width) * frame.height;
  for (std::size_t i = 0; i < n; ++i) {
    mean[0] += frame.rgb[3 * i];
    mean[1] += frame.rgb[3 * i + 1];
    mean[2] += frame.rgb[3 * i + 2];
  }
  float meanf[3];
  for (int c = 0; c < 3; ++c) {
    meanf[c] = static_cast<float>(mean[c] / (255.0 * static_cast<double>(n)));
  }

  CropResult out;
  out.patch = TensorF({1, out_size, out_size, 3});
  const double left = cx - side / 2.0;
  const double top = cy - side / 2.0;
  const double step = side / out_size;
  int outside = 0;
  auto tap = [&](int x, int y, int c) -> float {
    if (x < 0 || x >= frame.width || y < 0 || y >= frame.height) return meanf[c];
    return static_cast<float>(frame.px(x, y)[c]) / 255.0f;
  };
  for (int i = 0; i < out_size; ++i) {
    const double v = top + (i + 0.5) * step;
    const int y0 = static_cast<int>(std::floor(v));
    const float fy = static_cast<float>(v - y0);
    for (int j = 0; j < out_size; ++j) {
      const double u = left + (j + 0.5) * step;
      const int x0 = static_cast<int>(std::floor(u));
      const float fx = static_cast<float>(u - x0);
      if (u < 0 || u > frame.width - 1 || v < 0 || v > frame.height - 1) {
        ++outside;
      }
      for (int c = 0; c < 3; ++c) {
        const float a = tap(x0, y0, c), b = tap(x0 + 1, y0, c);
        const float d = tap(x0, y0 + 1, c), e = tap(x0 + 1, y0 + 1, c);
        out.patch.at(0, i, j, c) = (1 - fy) * ((1 - fx) * a + fx * b) +
                                   fy * ((1 - fx) * d + fx * e);
      }
    }
  }
  out.fill_fraction =
      static_cast<double>(outside) / (static_cast<double>(out_size) * out_size);
  return out;
}

namespace {
// Catmull-Rom weights (a = -0.5)
inline void cubic_weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = -0.5 * t3 + t2 - 0.5 * t;
  w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
  w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
  w[3] = 0.5 * t3 - 0.5 * t2;
}
}  // namespace

TensorF bicubic_upsample(const TensorF& map, int factor) {
  if (map.rank() != 2) {
    throw ContractError("bicubic_upsample: rank-2 map required, got " +
                        shape_str(map.shape()));
  }
  if (factor < 1) throw ConfigError("bicubic_upsample: factor must be >= 1");
  const int h = map.dim(0), w = map.dim(1);
  const int oh = (h - 1) * factor + 1;
  const int ow = (w - 1) * factor + 1;
  TensorF out({oh, ow});
  auto clamp = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
  for (int i = 0; i < oh; ++i) {
    const int yi = i / factor;
    const double ty = static_cast<double>(i % factor) / factor;
    double wy[4];
    cubic_weights(ty, wy);
    for (int j = 0; j < ow; ++j) {
      const int xj = j / factor;
      const double tx = static_cast<double>(j % factor) / factor;
      double wx[4];
      cubic_weights(tx, wx);
      double acc = 0.0;
      for (int dy = -1; dy <= 2; ++dy) {
        const int sy = clamp(yi + dy, h - 1);
        double row = 0.0;
        for (int dx = -1; dx <= 2; ++dx) {
          row += wx[dx + 1] * map.at(sy, clamp(xj + dx, w - 1));
        }
        acc += wy[dy + 1] * row;
      }
      out.at(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace denssiam
