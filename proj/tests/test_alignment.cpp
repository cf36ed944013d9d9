#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mixinterp/alignment.hpp"
#include "mixinterp/random.hpp"

using namespace mixinterp;

namespace {

Map2d box_indicator(int h, int w, const Rect& r) {
  Map2d m(h, w);
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) m.at(y, x) = 1.0f;
  return m;
}

Map2d random_map(SeededRandom& rng, int h, int w) {
  Map2d m(h, w);
  for (auto& v : m.values) v = static_cast<float>(rng.uniform());
  return m;
}

}  // namespace

TEST_CASE("box set validation and union") {
  CHECK_THROWS_AS(BoxSet({Rect{0, 0, 0, 4}}, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS(BoxSet({Rect{4, 4, 9, 6}}, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS(BoxSet({}, 8, 8), std::invalid_argument);
  const BoxSet overlap({Rect{0, 0, 4, 4}, Rect{2, 2, 6, 6}}, 8, 8);
  CHECK(overlap.union_fraction() == doctest::Approx((16 + 16 - 4) / 64.0));
}

TEST_CASE("threshold grid") {
  CHECK_THROWS_AS(ThresholdGrid({0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdGrid({0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdGrid({0.2, 1.0}), std::invalid_argument);
  const ThresholdGrid g = ThresholdGrid::standard();
  CHECK(g.values.size() == 100);
  CHECK(g.values.front() == 0.0);
  CHECK(g.values.back() == doctest::Approx(0.99));
}

TEST_CASE("energy pointing game") {
  const BoxSet quarter({Rect{0, 0, 4, 4}}, 8, 8);
  CHECK(std::abs(energy_pg(Map2d(8, 8, 1.0f), quarter) - 0.25) < 1e-6);
  CHECK(energy_pg(box_indicator(8, 8, Rect{1, 1, 3, 3}), quarter) == 1.0);
  CHECK(energy_pg(Map2d(8, 8, 0.0f), quarter) == 0.0);
  CHECK_THROWS_AS(energy_pg(Map2d(4, 8, 1.0f), quarter), std::invalid_argument);

  // overlapping boxes count a pixel once
  const BoxSet two({Rect{0, 0, 4, 4}, Rect{2, 2, 6, 6}}, 8, 8);
  CHECK(std::abs(energy_pg(Map2d(8, 8, 1.0f), two) - 28.0 / 64.0) < 1e-6);

  SeededRandom rng(3);
  for (int t = 0; t < 20; ++t) {
    const Map2d m = random_map(rng, 8, 8);
    Map2d scaled = m;
    for (auto& v : scaled.values) v *= 3.5f;
    const double e = energy_pg(m, two);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    CHECK(energy_pg(scaled, two) == doctest::Approx(e).epsilon(1e-6));
  }
}

TEST_CASE("EHR hand-enumerated 4x4 case") {
  Map2d m(4, 4, 0.0f);
  m.at(1, 1) = 0.9f;
  m.at(1, 2) = 0.9f;
  m.at(3, 0) = 0.4f;
  m.at(3, 3) = 0.4f;
  const BoxSet box({Rect{1, 1, 3, 2}}, 4, 4);
  const EhrResult r = ehr_detailed(m, box, ThresholdGrid({0.25, 0.5, 0.75}));
  REQUIRE(r.ratios.size() == 3);
  CHECK(r.ratios[0] == doctest::Approx(0.45).epsilon(1e-6));
  CHECK(r.ratios[1] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(r.ratios[2] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(std::abs(r.score - 0.7875) < 1e-6);
  CHECK(std::abs(r.raw_auc - 0.39375) < 1e-6);
}

TEST_CASE("EHR perfect and disjoint maps") {
  const Rect r{2, 3, 6, 7};
  const BoxSet box({r}, 10, 10);
  for (const auto& grid : {ThresholdGrid::standard(), ThresholdGrid({0.1, 0.2}), ThresholdGrid::linspace(0.3, 0.9, 7)})
    CHECK(ehr_detailed(box_indicator(10, 10, r), box, grid).score == doctest::Approx(1.0));
  CHECK(ehr_detailed(box_indicator(10, 10, Rect{7, 7, 10, 10}), box, ThresholdGrid::standard()).score == 0.0);
}

TEST_CASE("EHR ratios stay in [0,1] and empty thresholds carry forward") {
  SeededRandom rng(9);
  const BoxSet box({Rect{1, 1, 5, 4}}, 8, 8);
  for (int t = 0; t < 20; ++t) {
    const EhrResult r = ehr_detailed(random_map(rng, 8, 8), box, ThresholdGrid::standard());
    for (double v : r.ratios) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  Map2d low(4, 4, 0.0f);
  low.at(0, 0) = 0.3f;
  low.at(0, 1) = 0.3f;
  const EhrResult r = ehr_detailed(low, BoxSet({Rect{0, 0, 1, 1}}, 4, 4), ThresholdGrid({0.1, 0.5, 0.9}));
  CHECK(r.ratios[0] == doctest::Approx(0.15));
  CHECK(r.ratios[1] == r.ratios[0]);
  CHECK(r.ratios[2] == r.ratios[0]);

  // nothing above the first threshold: 0 carried forward
  const EhrResult z = ehr_detailed(Map2d(4, 4, 0.05f), BoxSet({Rect{0, 0, 2, 2}}, 4, 4), ThresholdGrid({0.1, 0.5}));
  CHECK(z.ratios == std::vector<double>{0.0, 0.0});
}

TEST_CASE("EHR printed-numerator variant") {
  // Inside the box: 0.9 and 0.2; outside: 0.6. At lambda = 0.5 the printed
  // form keeps the sub-threshold 0.2 in the numerator.
  Map2d m(1, 4, 0.0f);
  m.at(0, 0) = 0.9f;
  m.at(0, 1) = 0.2f;
  m.at(0, 3) = 0.6f;
  const BoxSet box({Rect{0, 0, 2, 1}}, 4, 1);
  const ThresholdGrid g({0.1, 0.5});
  const EhrResult t = ehr_detailed(m, box, g, EhrNumerator::thresholded);
  const EhrResult p = ehr_detailed(m, box, g, EhrNumerator::printed);
  CHECK(t.ratios[0] == doctest::Approx(1.1 / 3));
  CHECK(t.ratios[1] == doctest::Approx(0.9 / 2));
  CHECK(p.ratios[0] == doctest::Approx(1.1 / 3));
  CHECK(p.ratios[1] == doctest::Approx(1.1 / 2));
}

TEST_CASE("EHR rejects unnormalised maps") {
  Map2d m(4, 4, 0.5f);
  m.at(0, 0) = 1.5f;
  CHECK_THROWS_AS(ehr_detailed(m, BoxSet({Rect{0, 0, 2, 2}}, 4, 4), ThresholdGrid::standard()),
                  std::invalid_argument);
}

TEST_CASE("WSOL IoU") {
  const Rect r{2, 1, 6, 5};
  const BoxSet box({r}, 8, 8);
  const WsolResult exact = wsol_iou(box_indicator(8, 8, r), box);
  CHECK(exact.iou == 1.0);
  CHECK(*exact.estimated_box == r);

  Map2d dot(8, 8, 0.0f);
  dot.at(3, 3) = 0.7f;
  const WsolResult one = wsol_iou(dot, box);
  CHECK(*one.estimated_box == Rect{3, 3, 4, 4});
  CHECK(one.iou == doctest::Approx(1.0 / 16));

  const WsolResult none = wsol_iou(Map2d(8, 8, 0.1f), box);
  CHECK(none.iou == 0.0);
  CHECK_FALSE(none.estimated_box.has_value());

  // exactly at the threshold is not above it
  CHECK_FALSE(wsol_iou(Map2d(8, 8, 0.25f), box, 0.25).estimated_box.has_value());

  // best-matching box wins
  const BoxSet two({Rect{0, 0, 2, 2}, r}, 8, 8);
  CHECK(wsol_iou(box_indicator(8, 8, r), two).iou == 1.0);
}

TEST_CASE("WSOL cannot tell a map from its inverted-value twin") {
  // Same silhouette above the threshold, values inside mirrored: one peaks in
  // the centre of the object, the other on its rim.
  Map2d a(16, 16, 0.0f), b(16, 16, 0.0f);
  for (int y = 3; y < 12; ++y)
    for (int x = 4; x < 13; ++x) {
      const float d = static_cast<float>(std::max(std::abs(y - 7), std::abs(x - 8))) / 4.0f;
      a.at(y, x) = 1.0f - 0.8f * d;
      b.at(y, x) = 0.2f + 0.8f * d;
    }
  const BoxSet box({Rect{5, 4, 12, 11}}, 16, 16);
  const WsolResult wa = wsol_iou(a, box), wb = wsol_iou(b, box);
  CHECK(*wa.estimated_box == *wb.estimated_box);
  CHECK(wa.iou == wb.iou);
  // the energy-based metrics do tell them apart
  CHECK(energy_pg(a, box) != energy_pg(b, box));
}
