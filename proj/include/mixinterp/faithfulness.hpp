#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mixinterp/attribution.hpp"
#include "mixinterp/nn.hpp"
#include "mixinterp/random.hpp"
#include "mixinterp/tensor.hpp"

namespace mixinterp {

struct Dataset;

// Cells of an image, enumerated in row-major order.
struct GridLayout {
  int height = 0;
  int width = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Rect> cells;
  bool partial = false;  // trailing cells smaller than the nominal size

  std::size_t size() const { return cells.size(); }
  // Square cells of cell_px pixels; a remainder becomes a thinner trailing cell.
  static GridLayout pixel_cells(int height, int width, int cell_px);
  // k x k partition with floor(i * H / k) boundaries.
  static GridLayout partition(int height, int width, int k);
};

enum class Ordering { lerf, morf, rao };
std::string_view to_string(Ordering o);

struct GridRanking {
  GridLayout layout;
  Ordering ordering = Ordering::lerf;
  std::vector<int> order;          // cell indices, first processed first
  std::vector<double> cell_sums;   // indexed by cell
};

// LeRF ascending and MoRF descending in cell sum, ties to the smaller
// row-major index. RaO needs rng.
GridRanking rank_grids(const Map2d& map, const GridLayout& layout, Ordering ordering, SeededRandom* rng = nullptr);
GridRanking rank_grids(const Map2d& map, int cell_px, Ordering ordering, SeededRandom* rng = nullptr);

struct ReplacementPolicy {
  enum class Kind { channel_values, image_mean };
  Kind kind = Kind::channel_values;
  std::vector<float> values;  // per channel, for channel_values

  static ReplacementPolicy constant(std::vector<float> per_channel);
  static ReplacementPolicy dataset_mean(const Dataset& data);
  static ReplacementPolicy image_mean();
  Image fill_image(const Image& like) const;
};

enum class CurveMode { deletion, insertion };
std::string_view to_string(CurveMode m);

// Scores a batch of images for a class fixed by the caller.
using ScoreFn = std::function<std::vector<float>(std::span<const Image>)>;

struct ClassOracle {
  std::function<std::vector<float>(std::span<const Image>, int)> score;
  std::function<int(const Image&)> top_class;

  ScoreFn bind(int target_class) const;
};

ClassOracle model_oracle(const Model& model);

struct ScoreCurve {
  std::vector<double> x;   // fraction of cells processed
  std::vector<double> y;   // normalised score
  std::vector<double> se;  // per-step standard error, when aggregated
};

// Steps are evaluated at t = 0, stride, 2*stride, ... and always at the final step.
ScoreCurve deletion_curve(const ScoreFn& oracle, const Image& image, const GridRanking& ranking,
                          const ReplacementPolicy& fill, int stride = 1);
ScoreCurve insertion_curve(const ScoreFn& oracle, const Image& image, const GridRanking& ranking,
                           const ReplacementPolicy& fill, int stride = 1);
ScoreCurve perturbation_curve(CurveMode mode, const ScoreFn& oracle, const Image& image, const GridRanking& ranking,
                              const ReplacementPolicy& fill, int stride = 1);

// Mean (and spread across orders) of n_orders random-order curves.
ScoreCurve rao_mean_curve(const ScoreFn& oracle, const Image& image, const GridLayout& layout, int n_orders,
                          SeededRandom& rng, const ReplacementPolicy& fill, CurveMode mode, int stride = 1);

struct FaithfulnessSettings {
  int cell_px = 4;
  int partition = 0;  // > 0 selects a k x k partition instead of pixel cells
  int n_orders = 5;
  int stride = 1;
  std::uint64_t rao_seed = 0;
  ReplacementPolicy fill;

  GridLayout layout(int height, int width) const;
};

struct FaithfulnessResult {
  CurveMode mode = CurveMode::deletion;
  double auc = 0.0;  // x100
  double se = 0.0;   // x100, per-step SE averaged over steps
  ScoreCurve primary;     // mean LeRF (deletion) or MoRF (insertion) curve
  ScoreCurve rao;         // mean RaO curve
  ScoreCurve difference;  // primary - rao, with per-step SE
};

// RaO curves per image; they depend only on the image, the oracle and the
// seed, so one set serves every attribution method.
std::vector<ScoreCurve> rao_curves(const ClassOracle& oracle, std::span<const Image> images, CurveMode mode,
                                   const FaithfulnessSettings& settings);

FaithfulnessResult inter_model_score(const ClassOracle& oracle, std::span<const Image> images,
                                     std::span<const AttributionMap> maps, CurveMode mode,
                                     const FaithfulnessSettings& settings,
                                     const std::vector<ScoreCurve>* rao_cache = nullptr);

double trapezoid_auc(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mixinterp
