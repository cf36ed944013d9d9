#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixinterp {

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return std::max(0, x1 - x0); }
  int height() const { return std::max(0, y1 - y0); }
  long area() const { return static_cast<long>(width()) * height(); }
  bool empty() const { return width() == 0 || height() == 0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  Rect clipped(int w, int h) const {
    Rect r{std::clamp(x0, 0, w), std::clamp(y0, 0, h), std::clamp(x1, 0, w), std::clamp(y1, 0, h)};
    if (r.x1 < r.x0) r.x1 = r.x0;
    if (r.y1 < r.y0) r.y1 = r.y0;
    return r;
  }

  bool operator==(const Rect&) const = default;
};

Rect intersect(const Rect& a, const Rect& b);
double iou(const Rect& a, const Rect& b);

// Planar float image, values nominally in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {
    if (c <= 0 || h <= 0 || w <= 0) throw std::invalid_argument("image dimensions must be positive");
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  float& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const Image&) const = default;
};

// Single-channel H x W field (attribution maps, saliency, masks).
struct Map2d {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Map2d() = default;
  Map2d(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("map dimensions must be positive");
  }

  std::size_t size() const { return values.size(); }
  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const Map2d&) const = default;
};

// Dense NCHW batch tensor.
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t size() const { return data.size(); }
  float* sample(int i) { return data.data() + i * sample_size(); }
  const float* sample(int i) const { return data.data() + i * sample_size(); }
  float& at(int i, int ch, int y, int x) {
    return data[(static_cast<std::size_t>(i) * c + ch) * plane() + static_cast<std::size_t>(y) * w + x];
  }
  float at(int i, int ch, int y, int x) const {
    return data[(static_cast<std::size_t>(i) * c + ch) * plane() + static_cast<std::size_t>(y) * w + x];
  }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

Tensor stack(std::span<const Image> images);
Image unstack(const Tensor& t, int index);

// Bilinear resize with half-pixel centres (align_corners = false).
Map2d resize_bilinear(const Map2d& src, int out_h, int out_w);
Image resize_bilinear(const Image& src, int out_h, int out_w);

// Min-max normalisation to [0, 1]; an all-constant map becomes all zeros.
Map2d normalize_minmax(const Map2d& m);

}  // namespace mixinterp
