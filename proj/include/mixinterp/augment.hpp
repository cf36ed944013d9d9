#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixinterp/random.hpp"
#include "mixinterp/tensor.hpp"

namespace mixinterp {

struct MixOutcome {
  Image image;
  int label_a = 0;
  std::optional<int> label_b;  // absent for Cutout
  double mix_weight = 1.0;     // weight of label_a
  std::optional<Rect> box;     // cut-based methods only, already clipped
};

// Non-negative per-pixel saliency used to place SaliencyMix patches.
using SaliencyField = Map2d;
using SaliencyFn = std::function<SaliencyField(const Image&)>;

// Cutout: zero a patch_side square centred on (cx, cy), clipped at the borders.
MixOutcome cutout_at(const Image& image, int label, int patch_side, int cx, int cy);
MixOutcome cutout(const Image& image, int label, int patch_side, SeededRandom& rng);

MixOutcome mixup_with_lambda(const Image& a, const Image& b, int label_a, int label_b, double lam);
MixOutcome mixup(const Image& a, const Image& b, int label_a, int label_b, double alpha, SeededRandom& rng);

struct CutBox {
  Rect box;
  double mix_weight = 1.0;  // 1 - clipped area / image area
};

// Box with sides round(dim * sqrt(1 - lam)) centred on (cx, cy). A side that
// spans the whole image dimension covers it regardless of the centre.
CutBox cut_box_at(double lam, int width, int height, int cx, int cy);
CutBox sample_cut_box(double lam, int width, int height, SeededRandom& rng);

// Pixels inside box.box come from b, the rest from a.
MixOutcome paste_box(const Image& a, const Image& b, int label_a, int label_b, const CutBox& box);
MixOutcome cutmix_with_lambda(const Image& a, const Image& b, int label_a, int label_b, double lam,
                              SeededRandom& rng);
MixOutcome cutmix(const Image& a, const Image& b, int label_a, int label_b, double alpha, SeededRandom& rng);

// Gradient-magnitude saliency of the grayscale image smoothed by a 3x3 box
// filter. Stand-in for a fine-grained static saliency detector.
SaliencyField fine_grained_saliency(const Image& image);
// Row-major argmax; ties resolve to the smallest index.
std::pair<int, int> saliency_peak(const SaliencyField& field);

MixOutcome saliencymix_with_lambda(const Image& a, const Image& b, int label_a, int label_b, double lam,
                                   const SaliencyFn& saliency = fine_grained_saliency);
MixOutcome saliencymix(const Image& a, const Image& b, int label_a, int label_b, double alpha, SeededRandom& rng,
                       const SaliencyFn& saliency = fine_grained_saliency);

// Conventional augmentation shared by every regime.
Image random_horizontal_flip(const Image& image, SeededRandom& rng);
// Crops a square of side in [min_scale, 1] * image side at a random offset and
// resizes it back to the original resolution.
Image random_resized_crop(const Image& image, double min_scale, SeededRandom& rng);

enum class AugmentationKind { baseline, cutout, mixup, cutmix, saliencymix };

std::string_view to_string(AugmentationKind kind);
AugmentationKind parse_augmentation(std::string_view name);
const std::vector<AugmentationKind>& all_augmentations();

struct AugmentParams {
  double alpha = 1.0;
  int patch_side = 16;
  double probability = 1.0;  // chance a whole batch is mixed
  bool flip = true;
  bool crop = true;
  double crop_min_scale = 0.8;

  // Defaults: Mixup alpha 0.2, CutMix/SaliencyMix alpha 1.0, Cutout side = half the image.
  static AugmentParams defaults_for(AugmentationKind kind, int image_side);
  // Names of the conventional transforms enabled ("flip", "crop", "resize").
  std::vector<std::string> base_transforms() const;
};

struct MixedBatch {
  std::vector<Image> images;
  std::vector<int> label_a;
  std::vector<int> label_b;
  std::vector<float> mix_weight;
};

// Applies the conventional transforms to every sample, then the regime's
// mixing step pairing each sample with a partner drawn by a permutation of the
// batch (without replacement).
MixedBatch augment_batch(AugmentationKind kind, const AugmentParams& params, std::span<const Image> images,
                         std::span<const int> labels, SeededRandom& rng);

}  // namespace mixinterp
