#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mixinterp/nn.hpp"
#include "mixinterp/random.hpp"
#include "mixinterp/tensor.hpp"

namespace mixinterp {

enum class AttributionMethod { gradcam, iba };

std::string_view to_string(AttributionMethod m);
AttributionMethod parse_method(std::string_view name);

struct AttributionMap {
  Map2d values;  // input resolution, non-negative
  int target_class = 0;
  AttributionMethod method = AttributionMethod::gradcam;
  bool normalized = false;
};

// Min-max normalisation; idempotent.
AttributionMap normalize(const AttributionMap& map);

void save_attribution(const AttributionMap& map, const std::filesystem::path& path);
AttributionMap load_attribution(const std::filesystem::path& path);

// layer < 0 selects the last convolutional boundary.
AttributionMap gradcam(const Model& model, const Image& image, int target_class, int layer = -1);
// ReLU(sum_k w_k A_k) at the layer's own resolution, before upsampling.
Map2d gradcam_raw(const Model& model, const Image& image, int target_class, int layer = -1);

struct FeatureStats {
  int layer = 0;
  std::vector<float> mean;
  std::vector<float> stddev;  // floored at kStdFloor
  std::vector<bool> floored;  // true where the raw deviation was below the floor
  long count = 0;             // activations per channel

  static constexpr float kStdFloor = 1e-6f;
};

// Default bottleneck: output of the penultimate stage.
int default_iba_layer(const Model& model);

FeatureStats iba_fit_statistics(const Model& model, int layer, std::span<const Image> calibration,
                                std::size_t min_images = 100);

struct IbaSettings {
  double beta = 10.0;
  int steps = 10;
  double learning_rate = 1.0;
  int noise_samples = 10;
  double initial_alpha = 5.0;  // mask starts at sigmoid(5), nearly open
};

struct IbaResult {
  AttributionMap map;
  Map2d information;   // per-position KL at the bottleneck resolution, nats
  Map2d mask;          // final mask at the bottleneck resolution
  double mean_mask = 0.0;
  double total_information = 0.0;
  std::vector<double> loss;  // per optimisation step
};

IbaResult iba_detailed(const Model& model, const Image& image, int target_class, const IbaSettings& settings,
                       const FeatureStats& stats, SeededRandom& rng);
AttributionMap iba(const Model& model, const Image& image, int target_class, const IbaSettings& settings,
                   const FeatureStats& stats, SeededRandom& rng);

}  // namespace mixinterp
