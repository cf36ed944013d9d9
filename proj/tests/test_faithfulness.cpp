#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>

#include "mixinterp/errors.hpp"
#include "mixinterp/faithfulness.hpp"
#include "support.hpp"

using namespace mixinterp;
using testsupport::random_image;

namespace {

// Sum of pixel values / 64: exact in float for small integer images.
std::vector<float> linear_score(std::span<const Image> imgs) {
  std::vector<float> out;
  for (const auto& im : imgs) out.push_back(std::accumulate(im.data.begin(), im.data.end(), 0.0f) / 64.0f);
  return out;
}

// 4x4 single-channel image made of four 2x2 cells with the given values.
Image four_cells(float a, float b, float c, float d) {
  Image im(1, 4, 4);
  const float v[4] = {a, b, c, d};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) im.at(0, y, x) = v[(y / 2) * 2 + x / 2];
  return im;
}

Map2d cell_map(float a, float b, float c, float d) {
  const Image im = four_cells(a, b, c, d);
  Map2d m(4, 4);
  m.values = im.data;
  return m;
}

ClassOracle constant_oracle(float v) {
  ClassOracle o;
  o.score = [v](std::span<const Image> imgs, int) { return std::vector<float>(imgs.size(), v); };
  o.top_class = [](const Image&) { return 0; };
  return o;
}

ClassOracle linear_oracle() {
  ClassOracle o;
  o.score = [](std::span<const Image> imgs, int) { return linear_score(imgs); };
  o.top_class = [](const Image&) { return 0; };
  return o;
}

}  // namespace

TEST_CASE("grid layouts") {
  const GridLayout g = GridLayout::pixel_cells(32, 32, 4);
  CHECK(g.size() == 64);
  CHECK_FALSE(g.partial);
  CHECK(g.cells[9] == Rect{4, 4, 8, 8});

  const GridLayout p = GridLayout::pixel_cells(10, 10, 4);
  CHECK(p.partial);
  CHECK(p.size() == 9);
  CHECK(p.cells.back() == Rect{8, 8, 10, 10});

  const GridLayout k = GridLayout::partition(32, 32, 7);
  CHECK(k.size() == 49);
  long area = 0;
  for (const auto& r : k.cells) area += r.area();
  CHECK(area == 32 * 32);

  CHECK_THROWS_AS(GridLayout::pixel_cells(8, 8, 0), std::invalid_argument);
  CHECK_THROWS_AS(rank_grids(Map2d(4, 4), -2, Ordering::lerf), std::invalid_argument);
}

TEST_CASE("ranking by cell sums") {
  const Map2d m = cell_map(0.25f, 0.5f, 0.75f, 1.0f);  // sums 1, 2, 3, 4
  const GridRanking lerf = rank_grids(m, 2, Ordering::lerf);
  CHECK(lerf.order == std::vector<int>{0, 1, 2, 3});
  CHECK(lerf.cell_sums == std::vector<double>{1, 2, 3, 4});
  CHECK(rank_grids(m, 2, Ordering::morf).order == std::vector<int>{3, 2, 1, 0});

  const Map2d tied = cell_map(0.5f, 0.25f, 0.5f, 0.25f);
  CHECK(rank_grids(tied, 2, Ordering::lerf).order == std::vector<int>{1, 3, 0, 2});
  CHECK(rank_grids(tied, 2, Ordering::morf).order == std::vector<int>{0, 2, 1, 3});

  SeededRandom a(5), b(5);
  const GridRanking ra = rank_grids(Map2d(32, 32), 4, Ordering::rao, &a);
  const GridRanking rb = rank_grids(Map2d(32, 32), 4, Ordering::rao, &b);
  CHECK(ra.order == rb.order);
  std::vector<int> sorted = ra.order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> all(64);
  std::iota(all.begin(), all.end(), 0);
  CHECK(sorted == all);
  CHECK_THROWS_AS(rank_grids(Map2d(4, 4), 2, Ordering::rao), std::invalid_argument);
}

TEST_CASE("deletion and insertion on a 2x2-cell toy match hand-computed curves") {
  // cells hold 1, 2, 3, 4; each cell is 4 pixels, so the cell sums are
  // 4, 8, 12, 16 and the image sum is 40. Fill is zero.
  const Image img = four_cells(1, 2, 3, 4);
  const ReplacementPolicy zero = ReplacementPolicy::constant({0.0f});
  // attribution sums rank the cells 2, 0, 3, 1 from least to most relevant
  const Map2d attr = cell_map(0.2f, 0.9f, 0.1f, 0.5f);
  const GridRanking lerf = rank_grids(attr, 2, Ordering::lerf);
  const GridRanking morf = rank_grids(attr, 2, Ordering::morf);
  REQUIRE(lerf.order == std::vector<int>{2, 0, 3, 1});

  const std::vector<double> x{0.0, 0.25, 0.5, 0.75, 1.0};
  const ScoreCurve del = deletion_curve(linear_score, img, lerf, zero);
  CHECK(del.x == x);
  // removes 12, 4, 16, 8 in turn: 40, 28, 24, 8, 0 over 40
  CHECK(del.y == std::vector<double>{1.0, 28.0 / 40, 24.0 / 40, 8.0 / 40, 0.0});

  const ScoreCurve del_m = deletion_curve(linear_score, img, morf, zero);
  CHECK(del_m.y == std::vector<double>{1.0, 32.0 / 40, 16.0 / 40, 12.0 / 40, 0.0});

  const ScoreCurve ins = insertion_curve(linear_score, img, morf, zero);
  // restores 8, 16, 4, 12 in turn
  CHECK(ins.x == x);
  CHECK(ins.y == std::vector<double>{0.0, 8.0 / 40, 24.0 / 40, 28.0 / 40, 1.0});

  // a fill above zero raises the blank score; clipping keeps y in [0, 1]
  const ReplacementPolicy five = ReplacementPolicy::constant({5.0f});
  const ScoreCurve over = deletion_curve(linear_score, img, lerf, five);
  // 40 -> 28 + 20 = 48 -> clipped to 1
  CHECK(over.y[1] == 1.0);
  CHECK(over.y.back() == 1.0);
}

TEST_CASE("endpoints: deletion ends at the fill image, insertion starts there") {
  SeededRandom rng(2);
  const Image img = random_image(rng, 8);
  const ReplacementPolicy fill = ReplacementPolicy::constant({0.1f, 0.2f, 0.3f});
  std::vector<Image> seen;
  const ScoreFn recorder = [&](std::span<const Image> b) {
    seen.assign(b.begin(), b.end());
    return std::vector<float>(b.size(), 0.5f);
  };
  for (Ordering o : {Ordering::lerf, Ordering::morf, Ordering::rao}) {
    SeededRandom r(7);
    Map2d m(8, 8);
    for (auto& v : m.values) v = static_cast<float>(rng.uniform());
    const GridRanking g = rank_grids(m, 2, o, &r);
    deletion_curve(recorder, img, g, fill);
    CHECK(seen[seen.size() - 2] == fill.fill_image(img));
    CHECK(seen.front() == img);
    CHECK(seen.back() == img);
    insertion_curve(recorder, img, g, fill);
    CHECK(seen.front() == fill.fill_image(img));
    CHECK(seen[seen.size() - 2] == img);
  }
  const ReplacementPolicy mean = ReplacementPolicy::image_mean();
  const Image blank = mean.fill_image(img);
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int i = 0; i < 64; ++i) s += img.data[c * 64 + i];
    CHECK(blank.at(c, 3, 5) == doctest::Approx(s / 64).epsilon(1e-6));
  }
}

TEST_CASE("LeRF and MoRF deletion meet at both endpoints") {
  const ModelCheckpoint& ck = testsupport::trained_small_model();
  const ClassOracle oracle = model_oracle(ck.model);
  const Dataset data = generate_dataset(SceneGenerator(testsupport::small_scenes()), 10, 5);
  const ReplacementPolicy fill = ReplacementPolicy::dataset_mean(data);
  SeededRandom rng(4);
  for (const Image& img : data.images) {
    Map2d m(16, 16);
    for (auto& v : m.values) v = static_cast<float>(rng.uniform());
    const ScoreFn fn = oracle.bind(oracle.top_class(img));
    const ScoreCurve a = deletion_curve(fn, img, rank_grids(m, 4, Ordering::lerf), fill);
    const ScoreCurve b = deletion_curve(fn, img, rank_grids(m, 4, Ordering::morf), fill);
    CHECK(a.y.front() == 1.0);
    CHECK(b.y.front() == 1.0);
    CHECK(a.y.back() == b.y.back());
    for (double y : a.y) {
      CHECK(y >= 0.0);
      CHECK(y <= 1.0);
    }
  }
}

TEST_CASE("stride evaluates a subsampled grid that always includes the last step") {
  const Image img = four_cells(1, 2, 3, 4);
  const GridRanking r = rank_grids(cell_map(1, 2, 3, 4), 1, Ordering::lerf);  // 16 cells
  const ScoreCurve c = deletion_curve(linear_score, img, r, ReplacementPolicy::constant({0.0f}), 5);
  CHECK(c.x == std::vector<double>{0.0, 5.0 / 16, 10.0 / 16, 15.0 / 16, 1.0});
  CHECK_THROWS_AS(deletion_curve(linear_score, img, r, ReplacementPolicy::constant({0.0f}), 0),
                  std::invalid_argument);
}

TEST_CASE("oracle failures carry the step index") {
  const Image img = four_cells(1, 2, 3, 4);
  const GridRanking r = rank_grids(cell_map(1, 2, 3, 4), 2, Ordering::lerf);
  const ScoreFn bad = [](std::span<const Image> b) {
    std::vector<float> s(b.size(), 0.5f);
    s[2] = std::nanf("");
    return s;
  };
  try {
    deletion_curve(bad, img, r, ReplacementPolicy::constant({0.0f}));
    FAIL("expected an oracle failure");
  } catch (const OracleFailure& e) {
    CHECK(e.step() == 2);
  }
}

TEST_CASE("random-order curves") {
  const Image img = four_cells(1, 2, 3, 4);
  const GridLayout g = GridLayout::pixel_cells(4, 4, 1);
  const ReplacementPolicy zero = ReplacementPolicy::constant({0.0f});

  SeededRandom a(3), b(3);
  const ScoreCurve one = rao_mean_curve(linear_score, img, g, 1, a, zero, CurveMode::deletion);
  const ScoreCurve single = deletion_curve(linear_score, img, rank_grids(Map2d(4, 4), g, Ordering::rao, &b), zero);
  CHECK(one.y == single.y);

  const ScoreFn flat = [](std::span<const Image> s) { return std::vector<float>(s.size(), 0.3f); };
  SeededRandom c(3);
  const ScoreCurve f = rao_mean_curve(flat, img, g, 5, c, zero, CurveMode::deletion);
  for (double y : f.y) CHECK(y == 1.0);

  SeededRandom d(1);
  CHECK_THROWS_AS(rao_mean_curve(linear_score, img, g, 0, d, zero, CurveMode::deletion), std::invalid_argument);
}

TEST_CASE("averaging more random orders shrinks the variance like 1/n") {
  SeededRandom src(8);
  Image img(1, 8, 8);
  for (auto& v : img.data) v = static_cast<float>(std::floor(src.uniform() * 8.0));
  const GridLayout g = GridLayout::pixel_cells(8, 8, 2);
  const ReplacementPolicy zero = ReplacementPolicy::constant({0.0f});
  auto auc_variance = [&](int n_orders) {
    std::vector<double> aucs;
    for (std::uint64_t s = 0; s < 400; ++s) {
      SeededRandom r = SeededRandom(1000).fork(s);
      const ScoreCurve c = rao_mean_curve(linear_score, img, g, n_orders, r, zero, CurveMode::deletion);
      aucs.push_back(trapezoid_auc(c.x, c.y));
    }
    const double mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / aucs.size();
    double v = 0.0;
    for (double a : aucs) v += (a - mean) * (a - mean);
    return v / (aucs.size() - 1);
  };
  const double ratio = auc_variance(1) / auc_variance(5);
  // F(399, 399) sampling spread around 5 is well inside [3.5, 7]
  CHECK(ratio > 3.5);
  CHECK(ratio < 7.0);
}

TEST_CASE("inter-model score") {
  SeededRandom rng(6);
  std::vector<Image> imgs;
  std::vector<AttributionMap> maps, other;
  for (int i = 0; i < 6; ++i) {
    imgs.push_back(random_image(rng, 8));
    AttributionMap m, n;
    m.values = n.values = Map2d(8, 8);
    for (auto& v : m.values.values) v = static_cast<float>(rng.uniform());
    for (auto& v : n.values.values) v = static_cast<float>(rng.uniform());
    maps.push_back(m);
    other.push_back(n);
  }
  FaithfulnessSettings s;
  s.cell_px = 2;
  s.fill = ReplacementPolicy::constant({0.5f, 0.5f, 0.5f});
  s.rao_seed = 11;

  const FaithfulnessResult flat = inter_model_score(constant_oracle(0.4f), imgs, maps, CurveMode::deletion, s);
  for (double d : flat.difference.y) CHECK(d == 0.0);
  CHECK(flat.auc == 0.0);
  CHECK(flat.se == 0.0);

  // Random orders do not look at the map.
  const FaithfulnessResult a = inter_model_score(linear_oracle(), imgs, maps, CurveMode::insertion, s);
  const FaithfulnessResult b = inter_model_score(linear_oracle(), imgs, other, CurveMode::insertion, s);
  CHECK(a.rao.y == b.rao.y);
  CHECK(a.primary.y != b.primary.y);
  CHECK(std::isfinite(a.auc));
  CHECK(a.se >= 0.0);
  CHECK(a.auc == doctest::Approx(100.0 * trapezoid_auc(a.difference.x, a.difference.y)));

  // cached random-order curves give the same answer
  const auto cache = rao_curves(linear_oracle(), imgs, CurveMode::insertion, s);
  const FaithfulnessResult c = inter_model_score(linear_oracle(), imgs, maps, CurveMode::insertion, s, &cache);
  CHECK(c.auc == a.auc);
  CHECK(c.se == a.se);

  CHECK_THROWS_AS(inter_model_score(linear_oracle(), imgs, std::span<const AttributionMap>(maps.data(), 3),
                                    CurveMode::deletion, s),
                  std::invalid_argument);
}

TEST_CASE("trapezoid") {
  CHECK(trapezoid_auc({0, 0.5, 1}, {1, 1, 0}) == 0.75);
  CHECK_THROWS_AS(trapezoid_auc({0, 1}, {1}), std::invalid_argument);
}
