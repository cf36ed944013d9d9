#include "mixinterp/tensor.hpp"

#include <cmath>
#include <cstring>

namespace mixinterp {

Rect intersect(const Rect& a, const Rect& b) {
  Rect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  if (r.x1 < r.x0) r.x1 = r.x0;
  if (r.y1 < r.y0) r.y1 = r.y0;
  return r;
}

double iou(const Rect& a, const Rect& b) {
  const long inter = intersect(a, b).area();
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

Tensor stack(std::span<const Image> images) {
  if (images.empty()) return {};
  const Image& first = images.front();
  Tensor t(static_cast<int>(images.size()), first.channels, first.height, first.width);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(first)) throw std::invalid_argument("stack: images differ in shape");
    std::memcpy(t.sample(static_cast<int>(i)), images[i].data.data(), t.sample_size() * sizeof(float));
  }
  return t;
}

Image unstack(const Tensor& t, int index) {
  Image img(t.c, t.h, t.w);
  std::memcpy(img.data.data(), t.sample(index), t.sample_size() * sizeof(float));
  return img;
}

namespace {

struct Tap {
  int i0;
  int i1;
  float frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, static_cast<float>(src - i0)};
  }
  return taps;
}

void resize_plane(const float* src, int in_h, int in_w, float* dst, int out_h, int out_w) {
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  for (int y = 0; y < out_h; ++y) {
    const float* r0 = src + static_cast<std::size_t>(ty[y].i0) * in_w;
    const float* r1 = src + static_cast<std::size_t>(ty[y].i1) * in_w;
    const float fy = ty[y].frac;
    for (int x = 0; x < out_w; ++x) {
      const float fx = tx[x].frac;
      const float top = r0[tx[x].i0] + (r0[tx[x].i1] - r0[tx[x].i0]) * fx;
      const float bot = r1[tx[x].i0] + (r1[tx[x].i1] - r1[tx[x].i0]) * fx;
      dst[static_cast<std::size_t>(y) * out_w + x] = top + (bot - top) * fy;
    }
  }
}

}  // namespace

Map2d resize_bilinear(const Map2d& src, int out_h, int out_w) {
  if (src.height == out_h && src.width == out_w) return src;
  Map2d out(out_h, out_w);
  resize_plane(src.values.data(), src.height, src.width, out.values.data(), out_h, out_w);
  return out;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (src.height == out_h && src.width == out_w) return src;
  Image out(src.channels, out_h, out_w);
  for (int c = 0; c < src.channels; ++c) {
    resize_plane(src.data.data() + c * src.plane(), src.height, src.width,
                 out.data.data() + c * out.plane(), out_h, out_w);
  }
  return out;
}

Map2d normalize_minmax(const Map2d& m) {
  Map2d out = m;
  if (m.values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
  const float lo_v = *lo;
  const float range = *hi - lo_v;
  if (!(range > 0.0f)) {
    std::fill(out.values.begin(), out.values.end(), 0.0f);
    return out;
  }
  for (float& v : out.values) v = (v - lo_v) / range;
  return out;
}

}  // namespace mixinterp
