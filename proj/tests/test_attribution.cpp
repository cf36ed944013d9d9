#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>

#include "mixinterp/attribution.hpp"
#include "mixinterp/errors.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mixinterp;
using testsupport::random_image;
using testsupport::toy_conv_net;

using oracles::max_abs_diff;

TEST_CASE("gradcam matches the weighted-activation closed form on a toy net") {
  SeededRandom rng(3);
  for (std::uint64_t seed : {1, 2, 3}) {
    Model m = toy_conv_net(seed);
    const Image x = random_image(rng, 8);

    // identity head
    m.head().weight = {1, 0, 0, 1};
    m.head().bias = {0, 0};
    for (int cls : {0, 1}) {
      const AttributionMap g = gradcam(m, x, cls);
      CHECK(g.values.height == 8);
      CHECK(g.values.width == 8);
      CHECK(g.normalized);
      CHECK(max_abs_diff(g.values, oracles::gradcam(m, x, cls)) < 1e-5);
    }

    // mixed-sign head, where the outer ReLU matters
    m.head().weight = {0.7f, -1.3f, -0.4f, 0.9f};
    for (int cls : {0, 1}) CHECK(max_abs_diff(gradcam(m, x, cls).values, oracles::gradcam(m, x, cls)) < 1e-5);
  }
}

TEST_CASE("gradcam argmax survives a uniform logit scaling") {
  SeededRandom rng(8);
  Model m = toy_conv_net(5);
  const Image x = random_image(rng, 8);
  const Map2d a = gradcam_raw(m, x, 1);
  for (auto& w : m.head().weight) w *= 2.0f;
  for (auto& b : m.head().bias) b *= 2.0f;
  const Map2d b = gradcam_raw(m, x, 1);
  const auto ia = std::max_element(a.values.begin(), a.values.end()) - a.values.begin();
  const auto ib = std::max_element(b.values.begin(), b.values.end()) - b.values.begin();
  CHECK(ia == ib);
}

TEST_CASE("gradcam on a deeper net upsamples to the input") {
  SeededRandom rng(1);
  const Model m = Model::build(testsupport::small_arch(), 4);
  const Image x = random_image(rng);
  const AttributionMap g = gradcam(m, x, 2);
  CHECK(g.values.height == 16);
  CHECK(g.values.width == 16);
  for (float v : g.values.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(gradcam_raw(m, x, 2).height == 8);
  CHECK_THROWS_AS(gradcam(m, x, 4), std::invalid_argument);
  CHECK_THROWS_AS(gradcam(m, x, -1), std::invalid_argument);
}

TEST_CASE("normalisation is idempotent and the map round-trips through a file") {
  AttributionMap m;
  m.values = Map2d(3, 4);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values.values[i] = static_cast<float>(i % 5) * 0.3f + 0.2f;
  m.target_class = 6;
  m.method = AttributionMethod::iba;
  const AttributionMap n1 = normalize(m);
  const AttributionMap n2 = normalize(n1);
  CHECK(n1.values == n2.values);
  CHECK(*std::max_element(n1.values.values.begin(), n1.values.values.end()) == 1.0f);
  CHECK(*std::min_element(n1.values.values.begin(), n1.values.values.end()) == 0.0f);

  const auto path = std::filesystem::temp_directory_path() / "mixinterp_attr_roundtrip.tensor";
  save_attribution(n1, path);
  const AttributionMap back = load_attribution(path);
  CHECK(back.values == n1.values);
  CHECK(back.target_class == 6);
  CHECK(back.method == AttributionMethod::iba);
  CHECK(back.normalized);
  CHECK_THROWS_AS(load_attribution(path.string() + ".absent"), MissingArtifact);
}

TEST_CASE("feature statistics") {
  SeededRandom rng(5);
  std::vector<Image> noise;
  for (int i = 0; i < 100; ++i) noise.push_back(random_image(rng));
  const Model m = Model::build(testsupport::small_arch(), 2);
  const int layer = default_iba_layer(m);
  CHECK(layer == m.stage_output_boundary(0));
  const FeatureStats s = iba_fit_statistics(m, layer, noise);
  CHECK(s.count == 100 * 16 * 16);
  for (std::size_t c = 0; c < s.mean.size(); ++c) {
    CHECK(std::isfinite(s.mean[c]));
    CHECK(std::isfinite(s.stddev[c]));
    CHECK(s.stddev[c] >= FeatureStats::kStdFloor);
  }

  // A zero network has constant activations everywhere.
  Model z = m;
  for (auto* p : z.parameters()) std::fill(p->begin(), p->end(), 0.0f);
  const FeatureStats zs = iba_fit_statistics(z, layer, noise);
  for (std::size_t c = 0; c < zs.stddev.size(); ++c) {
    CHECK(zs.floored[c]);
    CHECK(zs.stddev[c] == FeatureStats::kStdFloor);
  }

  CHECK_THROWS_AS(iba_fit_statistics(m, layer, std::span<const Image>{}), std::invalid_argument);
  CHECK_THROWS_AS(iba_fit_statistics(m, layer, std::span<const Image>(noise.data(), 10)), std::invalid_argument);
}

TEST_CASE("feature statistics are stable across calibration halves of a trained model") {
  // Compared as whole per-channel vectors: single channels that fire only for
  // rare colour/shape pairs wander by a few percent more.
  auto rel_l2 = [](const std::vector<float>& a, const std::vector<float>& b) {
    double d = 0.0, n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      d += (a[i] - b[i]) * (a[i] - b[i]);
      n += std::max(a[i] * a[i], b[i] * b[i]);
    }
    return std::sqrt(d / n);
  };
  const Model& m = testsupport::trained_small_model().model;
  const Dataset calib = generate_dataset(SceneGenerator(testsupport::small_scenes()), 1000, 77);
  const std::span<const Image> all(calib.images);
  const int layer = default_iba_layer(m);
  const FeatureStats a = iba_fit_statistics(m, layer, all.subspan(0, 500));
  const FeatureStats b = iba_fit_statistics(m, layer, all.subspan(500, 500));
  CHECK(rel_l2(a.mean, b.mean) < 0.05);
  CHECK(rel_l2(a.stddev, b.stddev) < 0.05);
}

TEST_CASE("iba keeps the mask open when compression is free") {
  // Positive stem and a head that rewards both channels: every position's
  // feature beats the calibration mean, so the CE gradient opens the mask.
  Model m = toy_conv_net(1);
  for (auto& w : m.stem().weight) w = 0.1f;
  std::fill(m.stem().bias.begin(), m.stem().bias.end(), 0.0f);
  m.head().weight = {1, 1, -1, -1};
  m.head().bias = {0, 0};
  SeededRandom rng(2);
  std::vector<Image> calib;
  for (int i = 0; i < 100; ++i) {
    Image im(3, 8, 8);
    for (auto& v : im.data) v = static_cast<float>(rng.uniform(0.0, 0.5));
    calib.push_back(im);
  }
  const FeatureStats stats = iba_fit_statistics(m, default_iba_layer(m), calib);
  IbaSettings s;
  s.beta = 1e-6;
  SeededRandom r(1);
  const IbaResult res = iba_detailed(m, Image(3, 8, 8, 1.0f), 0, s, stats, r);
  CHECK(res.mean_mask > 0.99);
}

TEST_CASE("iba compresses under a large beta") {
  const Model& m = testsupport::trained_small_model().model;
  const Dataset calib = generate_dataset(SceneGenerator(testsupport::small_scenes()), 200, 78);
  const FeatureStats stats = iba_fit_statistics(m, default_iba_layer(m), calib.images);
  const Dataset probe = generate_dataset(SceneGenerator(testsupport::small_scenes()), 5, 79);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Image& x = probe.images[i];
    const int cls = probe.labels[i];
    // Adam's steps do not scale with the loss, so ten unit steps from alpha = 5
    // leave ~1 nat whatever beta is; the comparison needs a longer run.
    IbaSettings s;
    s.steps = 100;
    SeededRandom r1(1), r2(1);
    s.beta = 10.0;
    const IbaResult mid = iba_detailed(m, x, cls, s, stats, r1);
    s.beta = 1e4;
    const IbaResult closed = iba_detailed(m, x, cls, s, stats, r2);
    CHECK(closed.total_information < 0.01 * mid.total_information);

    SeededRandom r3(1);
    const IbaResult dflt = iba_detailed(m, x, cls, {}, stats, r3);
    CHECK(dflt.map.values.height == 16);
    CHECK(dflt.map.method == AttributionMethod::iba);
    CHECK(dflt.map.normalized);
    for (float v : dflt.map.values.values) CHECK(v >= 0.0f);
    CHECK(dflt.loss.size() == 10);
  }
}

TEST_CASE("iba is deterministic for a fixed seed") {
  const Model& m = testsupport::trained_small_model().model;
  const Dataset calib = generate_dataset(SceneGenerator(testsupport::small_scenes()), 120, 80);
  const FeatureStats stats = iba_fit_statistics(m, default_iba_layer(m), calib.images);
  SeededRandom a(4), b(4);
  const AttributionMap x = iba(m, calib.images[0], calib.labels[0], {}, stats, a);
  const AttributionMap y = iba(m, calib.images[0], calib.labels[0], {}, stats, b);
  CHECK(x.values == y.values);
  CHECK(gradcam(m, calib.images[0], 1).values == gradcam(m, calib.images[0], 1).values);
}

TEST_CASE("iba rejects bad settings and mismatched statistics") {
  const Model m = Model::build(testsupport::small_arch(), 2);
  SeededRandom rng(5);
  std::vector<Image> imgs;
  for (int i = 0; i < 100; ++i) imgs.push_back(random_image(rng));
  const FeatureStats stats = iba_fit_statistics(m, default_iba_layer(m), imgs);
  IbaSettings s;
  s.beta = 0.0;
  CHECK_THROWS_AS(iba(m, imgs[0], 0, s, stats, rng), std::invalid_argument);
  s = {};
  s.steps = 0;
  CHECK_THROWS_AS(iba(m, imgs[0], 0, s, stats, rng), std::invalid_argument);
  FeatureStats other = stats;
  other.layer = m.last_conv_boundary();
  CHECK_THROWS_AS(iba(m, imgs[0], 0, {}, other, rng), std::invalid_argument);
}
