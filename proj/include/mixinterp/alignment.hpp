#pragma once

#include <optional>
#include <vector>

#include "mixinterp/attribution.hpp"
#include "mixinterp/tensor.hpp"

namespace mixinterp {

struct BoxSet {
  std::vector<Rect> boxes;
  int width = 0;
  int height = 0;

  BoxSet() = default;
  BoxSet(std::vector<Rect> b, int w, int h);

  // Throws std::invalid_argument for empty or out-of-image boxes.
  void validate() const;
  // Row-major union indicator, height x width.
  std::vector<bool> union_mask() const;
  double union_fraction() const;
};

struct ThresholdGrid {
  std::vector<double> values;

  explicit ThresholdGrid(std::vector<double> v);
  // count evenly spaced values from lo to hi inclusive.
  static ThresholdGrid linspace(double lo, double hi, int count);
  // 100 values in [0, 0.99].
  static ThresholdGrid standard();
};

double energy_pg(const Map2d& map, const BoxSet& boxes);
inline double energy_pg(const AttributionMap& map, const BoxSet& boxes) { return energy_pg(map.values, boxes); }

enum class EhrNumerator {
  thresholded,  // sum of L * S inside the box (default)
  printed,      // sum of L inside the box, as the equation is printed
};

struct EhrResult {
  double score = 0.0;    // trapezoid area divided by the threshold range
  double raw_auc = 0.0;  // trapezoid area, not normalised
  std::vector<double> ratios;
};

EhrResult ehr_detailed(const Map2d& map, const BoxSet& boxes, const ThresholdGrid& grid,
                       EhrNumerator numerator = EhrNumerator::thresholded);
inline double ehr(const AttributionMap& map, const BoxSet& boxes, const ThresholdGrid& grid = ThresholdGrid::standard(),
                  EhrNumerator numerator = EhrNumerator::thresholded) {
  return ehr_detailed(map.values, boxes, grid, numerator).score;
}

struct WsolResult {
  double iou = 0.0;
  std::optional<Rect> estimated_box;  // empty when nothing exceeds the threshold
};

constexpr double kWsolThreshold = 0.15;

WsolResult wsol_iou(const Map2d& map, const BoxSet& boxes, double threshold = kWsolThreshold);
inline WsolResult wsol_iou(const AttributionMap& map, const BoxSet& boxes, double threshold = kWsolThreshold) {
  return wsol_iou(map.values, boxes, threshold);
}

}  // namespace mixinterp
