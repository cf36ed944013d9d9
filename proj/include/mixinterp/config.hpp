#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixinterp/alignment.hpp"
#include "mixinterp/attribution.hpp"
#include "mixinterp/augment.hpp"
#include "mixinterp/dissection.hpp"
#include "mixinterp/faithfulness.hpp"
#include "mixinterp/harness.hpp"
#include "mixinterp/nn.hpp"
#include "mixinterp/scene.hpp"

namespace mixinterp {

enum class FillKind { dataset_mean, image_mean };

struct ExperimentConfig {
  std::string run_id;  // empty: derived from the config hash
  std::filesystem::path output_dir = "mixinterp-out";
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<AugmentationKind> models = all_augmentations();

  // data
  SceneConfig scene;
  int train_size = 2000;
  int val_size = 500;
  int eval_pool_size = 1500;
  std::uint64_t data_seed = 1;

  ArchConfig arch;
  Hyperparams hyper;
  AugmentParams cutout = AugmentParams::defaults_for(AugmentationKind::cutout, 32);
  AugmentParams mixup = AugmentParams::defaults_for(AugmentationKind::mixup, 32);
  AugmentParams cutmix = AugmentParams::defaults_for(AugmentationKind::cutmix, 32);
  AugmentParams saliencymix = AugmentParams::defaults_for(AugmentationKind::saliencymix, 32);
  AugmentParams baseline = AugmentParams::defaults_for(AugmentationKind::baseline, 32);

  // attribution
  std::vector<AttributionMethod> methods{AttributionMethod::gradcam, AttributionMethod::iba};
  IbaSettings iba;
  int iba_layer = -1;  // < 0: output of the penultimate stage
  int iba_calibration_images = 200;

  // evaluation samples
  int eval_samples = 200;
  SampleFilter filter;

  // alignment
  int ehr_points = 100;
  double ehr_min = 0.0;
  double ehr_max = 0.99;
  EhrNumerator ehr_numerator = EhrNumerator::thresholded;
  double wsol_threshold = kWsolThreshold;

  // faithfulness
  int cell_px = 4;
  int partition = 0;
  int n_orders = 5;
  int stride = 1;
  FillKind fill = FillKind::dataset_mean;

  // dissection
  int corpus_size = 400;
  std::uint64_t corpus_seed = 7;
  double iou_threshold = kDetectorThreshold;
  DetectorMode detector_mode = DetectorMode::best;

  const AugmentParams& augment_params(AugmentationKind k) const;
  AugmentParams& augment_params(AugmentationKind k);
  ThresholdGrid threshold_grid() const;

  // Throws ConfigError when a value is out of range.
  void validate() const;
  // Canonical key=value text of every setting, sorted by key.
  std::string canonical() const;
  // 16 hex digits of FNV-1a over canonical(), excluding output_dir and run_id.
  std::string hash() const;
  std::string effective_run_id() const;
  // Hash of the settings that determine trained weights (data, arch, train, augmentation keys).
  std::string training_hash() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};
const std::vector<ConfigKey>& config_keys();

// Flat "key = value" text; '#' starts a comment. Unknown keys, duplicates and
// malformed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace mixinterp
