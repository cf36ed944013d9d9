#include "mixinterp/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mixinterp/errors.hpp"
#include "mixinterp/harness.hpp"
#include "mixinterp/scene.hpp"

namespace mixinterp {

namespace {

std::vector<int> evaluated_steps(int total, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<int> steps;
  for (int t = 0; t < total; t += stride) steps.push_back(t);
  steps.push_back(total);
  return steps;
}

void copy_cell(const Image& src, Image& dst, const Rect& r) {
  for (int c = 0; c < src.channels; ++c)
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) dst.at(c, y, x) = src.at(c, y, x);
}

struct CurveAccumulator {
  std::vector<double> sum;
  std::vector<double> sumsq;
  int count = 0;

  void add(const std::vector<double>& y) {
    if (sum.empty()) {
      sum.assign(y.size(), 0.0);
      sumsq.assign(y.size(), 0.0);
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      sum[i] += y[i];
      sumsq[i] += y[i] * y[i];
    }
    ++count;
  }

  ScoreCurve finish(const std::vector<double>& x) const {
    ScoreCurve c;
    c.x = x;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double mean = sum[i] / count;
      double se = 0.0;
      if (count > 1) {
        const double var = std::max(0.0, (sumsq[i] - count * mean * mean) / (count - 1));
        se = std::sqrt(var / count);
      }
      c.y.push_back(mean);
      c.se.push_back(se);
    }
    return c;
  }
};

}  // namespace

GridLayout GridLayout::pixel_cells(int height, int width, int cell_px) {
  if (cell_px <= 0) throw std::invalid_argument("cell size must be positive");
  if (height <= 0 || width <= 0) throw std::invalid_argument("grid needs positive image dimensions");
  GridLayout g;
  g.height = height;
  g.width = width;
  g.rows = (height + cell_px - 1) / cell_px;
  g.cols = (width + cell_px - 1) / cell_px;
  g.partial = height % cell_px != 0 || width % cell_px != 0;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      g.cells.push_back(Rect{c * cell_px, r * cell_px, std::min(width, (c + 1) * cell_px),
                             std::min(height, (r + 1) * cell_px)});
  return g;
}

GridLayout GridLayout::partition(int height, int width, int k) {
  if (k <= 0) throw std::invalid_argument("partition count must be positive");
  if (k > height || k > width) throw std::invalid_argument("partition finer than the image");
  GridLayout g;
  g.height = height;
  g.width = width;
  g.rows = k;
  g.cols = k;
  g.partial = height % k != 0 || width % k != 0;
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c)
      g.cells.push_back(Rect{c * width / k, r * height / k, (c + 1) * width / k, (r + 1) * height / k});
  return g;
}

std::string_view to_string(Ordering o) {
  switch (o) {
    case Ordering::lerf: return "lerf";
    case Ordering::morf: return "morf";
    case Ordering::rao: return "rao";
  }
  return "?";
}

std::string_view to_string(CurveMode m) { return m == CurveMode::deletion ? "deletion" : "insertion"; }

GridRanking rank_grids(const Map2d& map, const GridLayout& layout, Ordering ordering, SeededRandom* rng) {
  if (map.height != layout.height || map.width != layout.width)
    throw std::invalid_argument("attribution map does not match the grid layout");
  GridRanking r;
  r.layout = layout;
  r.ordering = ordering;
  r.cell_sums.resize(layout.size());
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const Rect& cell = layout.cells[k];
    double s = 0.0;
    for (int y = cell.y0; y < cell.y1; ++y)
      for (int x = cell.x0; x < cell.x1; ++x) s += map.at(y, x);
    r.cell_sums[k] = s;
  }
  const int n = static_cast<int>(layout.size());
  if (ordering == Ordering::rao) {
    if (rng == nullptr) throw std::invalid_argument("random ordering needs a random source");
    r.order = rng->permutation(n);
    return r;
  }
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), 0);
  const auto& s = r.cell_sums;
  if (ordering == Ordering::lerf)
    std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) { return s[a] < s[b]; });
  else
    std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) { return s[a] > s[b]; });
  return r;
}

GridRanking rank_grids(const Map2d& map, int cell_px, Ordering ordering, SeededRandom* rng) {
  return rank_grids(map, GridLayout::pixel_cells(map.height, map.width, cell_px), ordering, rng);
}

ReplacementPolicy ReplacementPolicy::constant(std::vector<float> per_channel) {
  if (per_channel.empty()) throw std::invalid_argument("fill needs at least one channel value");
  ReplacementPolicy p;
  p.values = std::move(per_channel);
  return p;
}

ReplacementPolicy ReplacementPolicy::dataset_mean(const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("cannot take the mean of an empty dataset");
  const int c = data.images.front().channels;
  std::vector<double> sum(c, 0.0);
  double count = 0.0;
  for (const Image& img : data.images) {
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < img.plane(); ++j) sum[ch] += img.data[ch * img.plane() + j];
    count += static_cast<double>(img.plane());
  }
  std::vector<float> v(c);
  for (int ch = 0; ch < c; ++ch) v[ch] = static_cast<float>(sum[ch] / count);
  return constant(std::move(v));
}

ReplacementPolicy ReplacementPolicy::image_mean() {
  ReplacementPolicy p;
  p.kind = Kind::image_mean;
  return p;
}

Image ReplacementPolicy::fill_image(const Image& like) const {
  Image out(like.channels, like.height, like.width);
  for (int c = 0; c < like.channels; ++c) {
    float v = 0.0f;
    if (kind == Kind::image_mean) {
      double s = 0.0;
      for (std::size_t j = 0; j < like.plane(); ++j) s += like.data[c * like.plane() + j];
      v = static_cast<float>(s / static_cast<double>(like.plane()));
    } else {
      if (values.empty()) throw std::invalid_argument("fill policy has no channel values");
      v = values.size() == 1 ? values[0] : values.at(c);
    }
    std::fill_n(out.data.begin() + c * like.plane(), like.plane(), v);
  }
  return out;
}

ScoreFn ClassOracle::bind(int target_class) const {
  return [fn = score, target_class](std::span<const Image> imgs) { return fn(imgs, target_class); };
}

ClassOracle model_oracle(const Model& model) {
  ClassOracle o;
  o.score = [&model](std::span<const Image> imgs, int cls) { return score_oracle(model, imgs, cls); };
  o.top_class = [&model](const Image& img) {
    const auto p = predict_proba(model, std::span<const Image>(&img, 1)).front();
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  };
  return o;
}

ScoreCurve perturbation_curve(CurveMode mode, const ScoreFn& oracle, const Image& image, const GridRanking& ranking,
                              const ReplacementPolicy& fill, int stride) {
  const GridLayout& g = ranking.layout;
  if (image.height != g.height || image.width != g.width)
    throw std::invalid_argument("ranking does not match the image dimensions");
  const int total = static_cast<int>(ranking.order.size());
  const std::vector<int> steps = evaluated_steps(total, stride);
  const Image blank = fill.fill_image(image);

  // Batch: every evaluated step, then the unperturbed image as the anchor.
  std::vector<Image> batch;
  batch.reserve(steps.size() + 1);
  Image current = mode == CurveMode::deletion ? image : blank;
  const Image& source = mode == CurveMode::deletion ? blank : image;
  int applied = 0;
  for (int t : steps) {
    for (; applied < t; ++applied) copy_cell(source, current, g.cells[ranking.order[applied]]);
    batch.push_back(current);
  }
  batch.push_back(image);

  std::vector<float> scores;
  try {
    scores = oracle(batch);
  } catch (const OracleFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw OracleFailure(0, e.what());
  }
  if (scores.size() != batch.size()) throw OracleFailure(0, "oracle returned the wrong number of scores");
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (!std::isfinite(scores[i])) throw OracleFailure(steps[i], "non-finite score");
  const double anchor = scores.back();
  if (!std::isfinite(anchor)) throw OracleFailure(0, "non-finite score on the unperturbed image");

  ScoreCurve c;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    c.x.push_back(total > 0 ? static_cast<double>(steps[i]) / total : 0.0);
    const double y = anchor > 0.0 ? scores[i] / anchor : 0.0;
    c.y.push_back(std::clamp(y, 0.0, 1.0));
  }
  // These steps are the unperturbed image itself.
  if (mode == CurveMode::deletion) c.y.front() = anchor > 0.0 ? 1.0 : 0.0;
  else c.y.back() = anchor > 0.0 ? 1.0 : 0.0;
  return c;
}

ScoreCurve deletion_curve(const ScoreFn& oracle, const Image& image, const GridRanking& ranking,
                          const ReplacementPolicy& fill, int stride) {
  return perturbation_curve(CurveMode::deletion, oracle, image, ranking, fill, stride);
}

ScoreCurve insertion_curve(const ScoreFn& oracle, const Image& image, const GridRanking& ranking,
                           const ReplacementPolicy& fill, int stride) {
  return perturbation_curve(CurveMode::insertion, oracle, image, ranking, fill, stride);
}

ScoreCurve rao_mean_curve(const ScoreFn& oracle, const Image& image, const GridLayout& layout, int n_orders,
                          SeededRandom& rng, const ReplacementPolicy& fill, CurveMode mode, int stride) {
  if (n_orders < 1) throw std::invalid_argument("n_orders must be >= 1");
  const Map2d dummy(layout.height, layout.width);
  CurveAccumulator acc;
  std::vector<double> x;
  for (int k = 0; k < n_orders; ++k) {
    const GridRanking r = rank_grids(dummy, layout, Ordering::rao, &rng);
    const ScoreCurve c = perturbation_curve(mode, oracle, image, r, fill, stride);
    x = c.x;
    acc.add(c.y);
  }
  return acc.finish(x);
}

GridLayout FaithfulnessSettings::layout(int height, int width) const {
  return partition > 0 ? GridLayout::partition(height, width, partition)
                       : GridLayout::pixel_cells(height, width, cell_px);
}

std::vector<ScoreCurve> rao_curves(const ClassOracle& oracle, std::span<const Image> images, CurveMode mode,
                                   const FaithfulnessSettings& settings) {
  std::vector<ScoreCurve> out;
  out.reserve(images.size());
  const SeededRandom root(settings.rao_seed);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    SeededRandom rng = root.fork(i);
    const ScoreFn fn = oracle.bind(oracle.top_class(img));
    out.push_back(rao_mean_curve(fn, img, settings.layout(img.height, img.width), settings.n_orders, rng,
                                 settings.fill, mode, settings.stride));
  }
  return out;
}

double trapezoid_auc(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("curve axes differ in length");
  double a = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) a += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return a;
}

FaithfulnessResult inter_model_score(const ClassOracle& oracle, std::span<const Image> images,
                                     std::span<const AttributionMap> maps, CurveMode mode,
                                     const FaithfulnessSettings& settings, const std::vector<ScoreCurve>* rao_cache) {
  if (images.size() != maps.size()) throw std::invalid_argument("one attribution map per sample is required");
  if (images.empty()) throw std::invalid_argument("no samples to score");
  if (rao_cache != nullptr && rao_cache->size() != images.size())
    throw std::invalid_argument("cached random-order curves do not match the samples");
  std::vector<ScoreCurve> computed;
  if (rao_cache == nullptr) {
    computed = rao_curves(oracle, images, mode, settings);
    rao_cache = &computed;
  }
  const Ordering ordering = mode == CurveMode::deletion ? Ordering::lerf : Ordering::morf;
  CurveAccumulator primary, rao, diff;
  std::vector<double> x;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    const ScoreFn fn = oracle.bind(oracle.top_class(img));
    const GridRanking r = rank_grids(maps[i].values, settings.layout(img.height, img.width), ordering);
    const ScoreCurve p = perturbation_curve(mode, fn, img, r, settings.fill, settings.stride);
    const ScoreCurve& q = (*rao_cache)[i];
    if (q.y.size() != p.y.size()) throw std::invalid_argument("random-order curve has a different step grid");
    std::vector<double> d(p.y.size());
    for (std::size_t t = 0; t < d.size(); ++t) d[t] = p.y[t] - q.y[t];
    primary.add(p.y);
    rao.add(q.y);
    diff.add(d);
    x = p.x;
  }
  FaithfulnessResult res;
  res.mode = mode;
  res.primary = primary.finish(x);
  res.rao = rao.finish(x);
  res.difference = diff.finish(x);
  res.auc = 100.0 * trapezoid_auc(x, res.difference.y);
  double se = 0.0;
  for (double s : res.difference.se) se += s;
  res.se = 100.0 * se / static_cast<double>(res.difference.se.size());
  return res;
}

}  // namespace mixinterp
