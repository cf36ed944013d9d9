#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "mixinterp/nn.hpp"
#include "mixinterp/scene.hpp"

namespace mixinterp {

struct ConceptCorpus {
  std::vector<Image> images;
  std::vector<std::map<int, BinaryMask>> masks;  // per image: concept id -> mask
  std::vector<Concept> concepts;

  std::size_t size() const { return images.size(); }
  const Concept& concept_by_id(int id) const;
  void validate() const;
};

ConceptCorpus generate_concept_corpus(const SceneConfig& config, std::size_t count, std::uint64_t seed);

// Directory layout: concepts.txt (id, name, category per line), images/NNNNN.tensor,
// masks/NNNNN_<concept id>.tensor.
void save_corpus(const ConceptCorpus& corpus, const std::filesystem::path& dir);
ConceptCorpus load_corpus(const std::filesystem::path& dir);

struct UnitActivationProfile {
  int unit = 0;
  float threshold = 0.0f;  // T_k
  long sample_count = 0;
  double coverage = 0.0;   // fraction of positions strictly above T_k
  // Ties at the quantile leave fewer than half the target fraction above
  // T_k (constant units included).
  bool degenerate = false;
};

constexpr double kTopQuantile = 0.01;
constexpr double kDetectorThreshold = 0.04;

// Empirical top-quantile threshold: the smallest value with at most
// round(q * n) samples strictly above it.
float top_quantile_threshold(std::vector<float> values, double q = kTopQuantile);

// Activations are bilinearly upsampled to input resolution before the
// quantile is taken, so T_k applies to the same field that is thresholded.
std::vector<UnitActivationProfile> collect_profiles(const Model& model, int layer, const ConceptCorpus& corpus,
                                                    double q = kTopQuantile);

double unit_concept_iou(const Model& model, int layer, const UnitActivationProfile& profile,
                        const ConceptCorpus& corpus, int concept_id);

struct DetectorRecord {
  int unit = 0;
  int concept_id = 0;
  std::string concept_name;
  ConceptCategory category = ConceptCategory::object;
  double iou = 0.0;
};

enum class DetectorMode { best, multi };

struct DissectionResult {
  std::vector<UnitActivationProfile> profiles;
  std::vector<std::vector<double>> iou;  // unit x concept id
  std::vector<DetectorRecord> detectors;
};

DissectionResult dissect(const Model& model, int layer, const ConceptCorpus& corpus,
                         double iou_threshold = kDetectorThreshold, DetectorMode mode = DetectorMode::best);

// Units whose best concept (or, in multi mode, each concept) exceeds the threshold.
std::vector<DetectorRecord> find_detectors(const Model& model, int layer, const ConceptCorpus& corpus,
                                           double iou_threshold = kDetectorThreshold,
                                           DetectorMode mode = DetectorMode::best);
std::vector<DetectorRecord> select_detectors(const std::vector<std::vector<double>>& iou,
                                             const std::vector<Concept>& concepts, double iou_threshold,
                                             DetectorMode mode);

// Distinct concepts per category; every category is present in the result.
std::map<ConceptCategory, int> count_unique_concepts(const std::vector<DetectorRecord>& records);

}  // namespace mixinterp
