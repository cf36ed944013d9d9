#include "mixinterp/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace mixinterp {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (a.empty() || !a.same_shape(b)) throw std::invalid_argument("mixing requires two nonempty images of equal shape");
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("beta parameter alpha must be positive");
}

Rect centered_span(int side, int cx, int cy, int width, int height, int side_h) {
  Rect r;
  if (side >= width) {
    r.x0 = 0;
    r.x1 = width;
  } else {
    r.x0 = cx - side / 2;
    r.x1 = r.x0 + side;
  }
  if (side_h >= height) {
    r.y0 = 0;
    r.y1 = height;
  } else {
    r.y0 = cy - side_h / 2;
    r.y1 = r.y0 + side_h;
  }
  return r.clipped(width, height);
}

}  // namespace

MixOutcome cutout_at(const Image& image, int label, int patch_side, int cx, int cy) {
  if (patch_side <= 0) throw std::invalid_argument("cutout patch side must be positive");
  if (image.empty()) throw std::invalid_argument("cutout on empty image");
  MixOutcome out;
  out.image = image;
  out.label_a = label;
  out.mix_weight = 1.0;
  const Rect r = Rect{cx - patch_side / 2, cy - patch_side / 2, cx - patch_side / 2 + patch_side,
                      cy - patch_side / 2 + patch_side}
                     .clipped(image.width, image.height);
  for (int c = 0; c < image.channels; ++c)
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) out.image.at(c, y, x) = 0.0f;
  out.box = r;
  return out;
}

MixOutcome cutout(const Image& image, int label, int patch_side, SeededRandom& rng) {
  if (patch_side <= 0) throw std::invalid_argument("cutout patch side must be positive");
  if (image.empty()) throw std::invalid_argument("cutout on empty image");
  const int cx = rng.uniform_int(0, image.width - 1);
  const int cy = rng.uniform_int(0, image.height - 1);
  return cutout_at(image, label, patch_side, cx, cy);
}

MixOutcome mixup_with_lambda(const Image& a, const Image& b, int label_a, int label_b, double lam) {
  require_same_shape(a, b);
  if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("mix ratio must lie in [0, 1]");
  MixOutcome out;
  out.image = a;
  const float wa = static_cast<float>(lam);
  const float wb = static_cast<float>(1.0 - lam);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    float v = wa * a.data[i] + wb * b.data[i];
    // Keep the convex-combination bounds exact under rounding.
    v = std::clamp(v, std::min(a.data[i], b.data[i]), std::max(a.data[i], b.data[i]));
    out.image.data[i] = v;
  }
  out.label_a = label_a;
  out.label_b = label_b;
  out.mix_weight = lam;
  return out;
}

MixOutcome mixup(const Image& a, const Image& b, int label_a, int label_b, double alpha, SeededRandom& rng) {
  require_same_shape(a, b);
  require_alpha(alpha);
  return mixup_with_lambda(a, b, label_a, label_b, rng.beta(alpha, alpha));
}

CutBox cut_box_at(double lam, int width, int height, int cx, int cy) {
  if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("mix ratio must lie in [0, 1]");
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  const double cut = std::sqrt(1.0 - lam);
  const int w = static_cast<int>(std::lround(width * cut));
  const int h = static_cast<int>(std::lround(height * cut));
  CutBox out;
  if (w == 0 || h == 0) {
    out.box = Rect{0, 0, 0, 0};
    out.mix_weight = 1.0;
    return out;
  }
  out.box = centered_span(w, cx, cy, width, height, h);
  out.mix_weight = 1.0 - static_cast<double>(out.box.area()) / (static_cast<double>(width) * height);
  return out;
}

CutBox sample_cut_box(double lam, int width, int height, SeededRandom& rng) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  const int cx = rng.uniform_int(0, width - 1);
  const int cy = rng.uniform_int(0, height - 1);
  return cut_box_at(lam, width, height, cx, cy);
}

MixOutcome paste_box(const Image& a, const Image& b, int label_a, int label_b, const CutBox& box) {
  require_same_shape(a, b);
  MixOutcome out;
  out.image = a;
  const Rect r = box.box.clipped(a.width, a.height);
  for (int c = 0; c < a.channels; ++c)
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) out.image.at(c, y, x) = b.at(c, y, x);
  out.label_a = label_a;
  out.label_b = label_b;
  out.mix_weight = 1.0 - static_cast<double>(r.area()) / static_cast<double>(a.plane());
  out.box = r;
  return out;
}

MixOutcome cutmix_with_lambda(const Image& a, const Image& b, int label_a, int label_b, double lam,
                              SeededRandom& rng) {
  require_same_shape(a, b);
  return paste_box(a, b, label_a, label_b, sample_cut_box(lam, a.width, a.height, rng));
}

MixOutcome cutmix(const Image& a, const Image& b, int label_a, int label_b, double alpha, SeededRandom& rng) {
  require_same_shape(a, b);
  require_alpha(alpha);
  const double lam = rng.beta(alpha, alpha);
  return cutmix_with_lambda(a, b, label_a, label_b, lam, rng);
}

SaliencyField fine_grained_saliency(const Image& image) {
  if (image.empty()) throw std::invalid_argument("saliency of empty image");
  const int h = image.height;
  const int w = image.width;
  Map2d gray(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (image.channels == 3) {
        gray.at(y, x) = 0.299f * image.at(0, y, x) + 0.587f * image.at(1, y, x) + 0.114f * image.at(2, y, x);
      } else {
        float s = 0.0f;
        for (int c = 0; c < image.channels; ++c) s += image.at(c, y, x);
        gray.at(y, x) = s / static_cast<float>(image.channels);
      }
    }
  }
  auto px = [&](int y, int x) { return gray.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };
  Map2d mag(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gx = 0.5f * (px(y, x + 1) - px(y, x - 1));
      const float gy = 0.5f * (px(y + 1, x) - px(y - 1, x));
      mag.at(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  Map2d out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) s += mag.at(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1));
      out.at(y, x) = s / 9.0f;
    }
  }
  return out;
}

std::pair<int, int> saliency_peak(const SaliencyField& field) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < field.values.size(); ++i)
    if (field.values[i] > field.values[best]) best = i;
  return {static_cast<int>(best % field.width), static_cast<int>(best / field.width)};
}

MixOutcome saliencymix_with_lambda(const Image& a, const Image& b, int label_a, int label_b, double lam,
                                   const SaliencyFn& saliency) {
  require_same_shape(a, b);
  const SaliencyField field = saliency(b);
  if (field.height != b.height || field.width != b.width)
    throw std::invalid_argument("saliency field must match the image resolution");
  const auto [cx, cy] = saliency_peak(field);
  return paste_box(a, b, label_a, label_b, cut_box_at(lam, a.width, a.height, cx, cy));
}

MixOutcome saliencymix(const Image& a, const Image& b, int label_a, int label_b, double alpha, SeededRandom& rng,
                       const SaliencyFn& saliency) {
  require_same_shape(a, b);
  require_alpha(alpha);
  return saliencymix_with_lambda(a, b, label_a, label_b, rng.beta(alpha, alpha), saliency);
}

Image random_horizontal_flip(const Image& image, SeededRandom& rng) {
  if (!rng.bernoulli(0.5)) return image;
  Image out = image;
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
  return out;
}

Image random_resized_crop(const Image& image, double min_scale, SeededRandom& rng) {
  const double scale = rng.uniform(min_scale, 1.0);
  const int ch = std::max(1, static_cast<int>(std::lround(image.height * scale)));
  const int cw = std::max(1, static_cast<int>(std::lround(image.width * scale)));
  const int oy = rng.uniform_int(0, image.height - ch);
  const int ox = rng.uniform_int(0, image.width - cw);
  if (ch == image.height && cw == image.width) return image;
  Image crop(image.channels, ch, cw);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) crop.at(c, y, x) = image.at(c, oy + y, ox + x);
  return resize_bilinear(crop, image.height, image.width);
}

std::string_view to_string(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::baseline: return "baseline";
    case AugmentationKind::cutout: return "cutout";
    case AugmentationKind::mixup: return "mixup";
    case AugmentationKind::cutmix: return "cutmix";
    case AugmentationKind::saliencymix: return "saliencymix";
  }
  return "unknown";
}

AugmentationKind parse_augmentation(std::string_view name) {
  for (AugmentationKind k : all_augmentations())
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown augmentation '" + std::string(name) + "'");
}

const std::vector<AugmentationKind>& all_augmentations() {
  static const std::vector<AugmentationKind> kinds{AugmentationKind::baseline, AugmentationKind::cutout,
                                                   AugmentationKind::mixup, AugmentationKind::cutmix,
                                                   AugmentationKind::saliencymix};
  return kinds;
}

AugmentParams AugmentParams::defaults_for(AugmentationKind kind, int image_side) {
  AugmentParams p;
  p.alpha = kind == AugmentationKind::mixup ? 0.2 : 1.0;
  p.patch_side = std::max(1, image_side / 2);
  return p;
}

std::vector<std::string> AugmentParams::base_transforms() const {
  std::vector<std::string> out;
  if (flip) out.emplace_back("flip");
  if (crop) {
    out.emplace_back("crop");
    out.emplace_back("resize");
  }
  return out;
}

MixedBatch augment_batch(AugmentationKind kind, const AugmentParams& params, std::span<const Image> images,
                         std::span<const int> labels, SeededRandom& rng) {
  if (images.size() != labels.size()) throw std::invalid_argument("image and label counts differ");
  const int n = static_cast<int>(images.size());
  MixedBatch batch;
  batch.images.reserve(n);
  for (int i = 0; i < n; ++i) {
    Image img = images[i];
    if (params.flip) img = random_horizontal_flip(img, rng);
    if (params.crop) img = random_resized_crop(img, params.crop_min_scale, rng);
    batch.images.push_back(std::move(img));
  }
  batch.label_a.assign(labels.begin(), labels.end());
  batch.label_b = batch.label_a;
  batch.mix_weight.assign(n, 1.0f);
  if (kind == AugmentationKind::baseline || n == 0 || !rng.bernoulli(params.probability)) return batch;

  const std::vector<int> partner = rng.permutation(n);
  std::vector<Image> mixed;
  mixed.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Image& a = batch.images[i];
    const Image& b = batch.images[partner[i]];
    const int la = batch.label_a[i];
    const int lb = labels[partner[i]];
    MixOutcome m;
    switch (kind) {
      case AugmentationKind::cutout: m = cutout(a, la, params.patch_side, rng); break;
      case AugmentationKind::mixup: m = mixup(a, b, la, lb, params.alpha, rng); break;
      case AugmentationKind::cutmix: m = cutmix(a, b, la, lb, params.alpha, rng); break;
      case AugmentationKind::saliencymix: m = saliencymix(a, b, la, lb, params.alpha, rng); break;
      case AugmentationKind::baseline: break;
    }
    mixed.push_back(std::move(m.image));
    batch.label_b[i] = m.label_b.value_or(la);
    batch.mix_weight[i] = static_cast<float>(m.mix_weight);
  }
  batch.images = std::move(mixed);
  return batch;
}

}  // namespace mixinterp
