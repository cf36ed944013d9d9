#include "mixinterp/alignment.hpp"

#include <cmath>
#include <stdexcept>

namespace mixinterp {

namespace {

void check_dims(const Map2d& map, const BoxSet& boxes) {
  if (map.height != boxes.height || map.width != boxes.width)
    throw std::invalid_argument("attribution map and boxes have different image dimensions");
  boxes.validate();
}

void check_finite_nonnegative(const Map2d& map) {
  for (float v : map.values)
    if (!std::isfinite(v) || v < 0.0f) throw std::invalid_argument("attribution map must be finite and non-negative");
}

}  // namespace

BoxSet::BoxSet(std::vector<Rect> b, int w, int h) : boxes(std::move(b)), width(w), height(h) { validate(); }

void BoxSet::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("box set needs positive image dimensions");
  if (boxes.empty()) throw std::invalid_argument("box set is empty");
  for (const Rect& r : boxes) {
    if (r.empty()) throw std::invalid_argument("empty bounding box");
    if (r.x0 < 0 || r.y0 < 0 || r.x1 > width || r.y1 > height)
      throw std::invalid_argument("bounding box outside the image");
  }
}

std::vector<bool> BoxSet::union_mask() const {
  std::vector<bool> m(static_cast<std::size_t>(width) * height, false);
  for (const Rect& r : boxes)
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) m[static_cast<std::size_t>(y) * width + x] = true;
  return m;
}

double BoxSet::union_fraction() const {
  const auto m = union_mask();
  long inside = 0;
  for (bool b : m) inside += b;
  return static_cast<double>(inside) / static_cast<double>(m.size());
}

ThresholdGrid::ThresholdGrid(std::vector<double> v) : values(std::move(v)) {
  if (values.size() < 2) throw std::invalid_argument("threshold grid needs at least two values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] < 1.0)) throw std::invalid_argument("thresholds must lie in [0, 1)");
    if (i > 0 && !(values[i] > values[i - 1])) throw std::invalid_argument("thresholds must be strictly increasing");
  }
}

ThresholdGrid ThresholdGrid::linspace(double lo, double hi, int count) {
  if (count < 2) throw std::invalid_argument("threshold grid needs at least two values");
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) v[i] = lo + (hi - lo) * i / (count - 1);
  return ThresholdGrid(std::move(v));
}

ThresholdGrid ThresholdGrid::standard() { return linspace(0.0, 0.99, 100); }

double energy_pg(const Map2d& map, const BoxSet& boxes) {
  check_dims(map, boxes);
  check_finite_nonnegative(map);
  const auto inside = boxes.union_mask();
  double in = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    total += map.values[i];
    if (inside[i]) in += map.values[i];
  }
  return total > 0.0 ? in / total : 0.0;
}

EhrResult ehr_detailed(const Map2d& map, const BoxSet& boxes, const ThresholdGrid& grid, EhrNumerator numerator) {
  check_dims(map, boxes);
  for (float v : map.values)
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) throw std::invalid_argument("EHR needs a map scaled to [0, 1]");
  const auto inside = boxes.union_mask();
  double unthresholded_inside = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (inside[i]) unthresholded_inside += map.values[i];

  EhrResult res;
  double previous = 0.0;
  for (double lambda : grid.values) {
    long count = 0;
    double energy = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (!(map.values[i] > lambda)) continue;
      ++count;
      if (inside[i]) energy += map.values[i];
    }
    double ratio = previous;
    if (count > 0) {
      const double num = numerator == EhrNumerator::thresholded ? energy : unthresholded_inside;
      ratio = num / static_cast<double>(count);
    }
    res.ratios.push_back(ratio);
    previous = ratio;
  }
  const auto& l = grid.values;
  for (std::size_t i = 1; i < l.size(); ++i) res.raw_auc += 0.5 * (res.ratios[i] + res.ratios[i - 1]) * (l[i] - l[i - 1]);
  res.score = res.raw_auc / (l.back() - l.front());
  return res;
}

WsolResult wsol_iou(const Map2d& map, const BoxSet& boxes, double threshold) {
  check_dims(map, boxes);
  int x0 = map.width, y0 = map.height, x1 = -1, y1 = -1;
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      if (!(map.at(y, x) > threshold)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  WsolResult res;
  if (x1 < 0) return res;
  const Rect est{x0, y0, x1 + 1, y1 + 1};
  res.estimated_box = est;
  for (const Rect& b : boxes.boxes) res.iou = std::max(res.iou, iou(est, b));
  return res;
}

}  // namespace mixinterp
