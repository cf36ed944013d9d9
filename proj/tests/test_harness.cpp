#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "mixinterp/errors.hpp"
#include "mixinterp/harness.hpp"
#include "oracles.hpp"

using namespace mixinterp;

namespace {

ArchConfig small_arch() {
  ArchConfig a;
  a.num_classes = 10;
  a.image_size = 16;
  a.stem_width = 4;
  a.stage_widths = {4, 8};
  a.stage_strides = {1, 2};
  return a;
}

Image random_image(SeededRandom& rng, int side = 16) {
  Image im(3, side, side);
  for (auto& v : im.data) v = static_cast<float>(rng.uniform());
  return im;
}

// Every weight zero, so the logits are the head bias and every image gets the
// same probabilities.
Model constant_model(const std::vector<double>& probs, int side = 16) {
  ArchConfig a = small_arch();
  a.image_size = side;
  a.num_classes = static_cast<int>(probs.size());
  Model m = Model::build(a, 0);
  for (auto* p : m.parameters()) std::fill(p->begin(), p->end(), 0.0f);
  for (std::size_t k = 0; k < probs.size(); ++k) m.head().bias[k] = static_cast<float>(std::log(probs[k]));
  return m;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mixinterp_test_harness";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("softmax output is a distribution over num_classes") {
  SeededRandom rng(1);
  const Model m = Model::build(small_arch(), 3);
  const std::vector<Image> imgs{random_image(rng), Image(3, 16, 16, 0.0f)};
  const auto rows = predict_proba(m, imgs);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.size() == 10);
    CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  const Tensor logits = m.logits(stack(std::span<const Image>(imgs.data() + 1, 1)));
  for (float v : logits.data) CHECK(std::isfinite(v));
}

TEST_CASE("build is deterministic in the seed") {
  const Model a = Model::build(small_arch(), 7), b = Model::build(small_arch(), 7), c = Model::build(small_arch(), 8);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool all_same = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    all_same = all_same && *pa[i] == *pb[i];
    any_diff = any_diff || *pa[i] != *pc[i];
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("invalid architecture is rejected") {
  ArchConfig a = small_arch();
  a.num_classes = 0;
  CHECK_THROWS_AS(Model::build(a, 0), std::invalid_argument);
  a = small_arch();
  a.stage_strides = {1};
  CHECK_THROWS_AS(Model::build(a, 0), std::invalid_argument);
}

TEST_CASE("mixed cross entropy with weight one is plain cross entropy") {
  Tensor logits(2, 3, 1, 1);
  logits.data = {1.0f, -0.5f, 2.0f, 0.0f, 0.3f, -1.0f};
  const std::vector<int> a{2, 0}, b{1, 1};
  const std::vector<float> w{1.0f, 1.0f};
  const double loss = mixed_cross_entropy(logits, a, b, w, nullptr);
  const auto p = softmax_rows(logits);
  CHECK(loss == doctest::Approx(-(std::log(p[0][2]) + std::log(p[1][0])) / 2).epsilon(1e-9));

  const std::vector<float> half{0.5f, 0.25f};
  const double mixed = mixed_cross_entropy(logits, a, b, half, nullptr);
  const double expect =
      (0.5 * -std::log(p[0][2]) + 0.5 * -std::log(p[0][1]) + 0.25 * -std::log(p[1][0]) + 0.75 * -std::log(p[1][1])) / 2;
  CHECK(mixed == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("input gradient matches central differences") {
  ArchConfig a = small_arch();
  a.stage_widths = {};
  a.stage_strides = {};
  a.batch_norm = false;
  const Model m = Model::build(a, 21);
  SeededRandom rng(4);
  const Image x = random_image(rng);
  const int cls = 3;
  const Image g = input_gradient(m, x, cls);

  // Evaluated on the double-precision reference so the differences are not
  // swamped by float rounding.
  auto score = [&](const std::vector<double>& in) { return oracles::logit(m, in, 3, 16, 16, cls); };
  const std::vector<double> base(x.data.begin(), x.data.end());
  std::vector<Image> one{x};
  CHECK(score(base) == doctest::Approx(m.logits(stack(one)).at(0, cls, 0, 0)).epsilon(1e-5));

  const double h = 1e-6;
  for (int t = 0; t < 20; ++t) {
    const int c = rng.uniform_int(0, 2), y = rng.uniform_int(0, 15), xx = rng.uniform_int(0, 15);
    std::vector<double> p = base, q = base;
    p[(c * 16 + y) * 16 + xx] += h;
    q[(c * 16 + y) * 16 + xx] -= h;
    const double fd = (score(p) - score(q)) / (2 * h);
    const double an = g.at(c, y, xx);
    CHECK(std::abs(an - fd) / std::max(std::abs(fd), 1e-12) < 1e-3);
  }
}

TEST_CASE("score oracle") {
  SeededRandom rng(2);
  const Model m = Model::build(small_arch(), 5);
  std::vector<Image> imgs{random_image(rng), random_image(rng), random_image(rng)};
  const auto s = score_oracle(m, imgs, 4);
  for (float v : s) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  std::vector<Image> swapped{imgs[2], imgs[0], imgs[1]};
  const auto t = score_oracle(m, swapped, 4);
  CHECK(t[0] == s[2]);
  CHECK(t[1] == s[0]);
  CHECK(t[2] == s[1]);
  std::vector<Image> dup{imgs[1], imgs[1]};
  const auto d = score_oracle(m, dup, 4);
  CHECK(d[0] == d[1]);
  CHECK(score_oracle(m, imgs, 4) == s);
  CHECK_THROWS_AS(score_oracle(m, imgs, 10), std::invalid_argument);
  CHECK_THROWS_AS(score_oracle(m, imgs, -1), std::invalid_argument);
}

TEST_CASE("short training run persists a loadable checkpoint and is reproducible") {
  SceneConfig sc;
  sc.image_size = 16;
  sc.min_object = 6;
  sc.max_object = 11;
  const SceneGenerator gen(sc);
  const Dataset data = generate_dataset(gen, 100, 3);
  ArchConfig a = small_arch();
  a.num_classes = sc.num_classes;
  TrainOptions opt;
  opt.augmentation = AugmentationKind::cutmix;
  opt.augment = AugmentParams::defaults_for(AugmentationKind::cutmix, 16);
  opt.hyper.epochs = 1;
  opt.hyper.batch_size = 32;
  opt.seed = 9;
  const ModelCheckpoint c1 = train(Model::build(a, 9), data, opt);
  const ModelCheckpoint c2 = train(Model::build(a, 9), data, opt);
  REQUIRE(c1.log.size() == 1);
  CHECK(c1.log[0].loss == c2.log[0].loss);
  CHECK(std::isfinite(c1.log[0].loss));

  const auto path = scratch("cutmix_s9.ckpt");
  save_checkpoint(c1, path);
  const ModelCheckpoint back = load_checkpoint(path);
  CHECK(back.augmentation == "cutmix");
  CHECK(back.seed == 9);
  CHECK(back.epochs == 1);
  CHECK(back.model.arch() == c1.model.arch());
  const std::span<const Image> some(data.images.data(), 10);
  CHECK(score_oracle(back.model, some, 2) == score_oracle(c1.model, some, 2));
  CHECK_THROWS_AS(load_checkpoint(scratch("absent.ckpt")), MissingArtifact);
}

TEST_CASE("divergent training reports the epoch") {
  SceneConfig sc;
  sc.image_size = 16;
  sc.min_object = 6;
  sc.max_object = 11;
  const Dataset data = generate_dataset(SceneGenerator(sc), 64, 3);
  ArchConfig a = small_arch();
  a.num_classes = sc.num_classes;
  TrainOptions opt;
  opt.hyper.epochs = 2;
  opt.hyper.batch_size = 32;
  opt.hyper.learning_rate = 1e30;
  try {
    train(Model::build(a, 1), data, opt);
    FAIL("expected a training failure");
  } catch (const TrainingFailure& e) {
    CHECK(e.epoch() >= 0);
  }
}

TEST_CASE("evaluation sample filter") {
  Dataset data;
  // 32x32 images: box area fraction 0.25 passes, 0.6 does not.
  for (int i = 0; i < 6; ++i) {
    data.images.emplace_back(3, 16, 16, 0.5f);
    data.labels.push_back(0);
    data.boxes.push_back({Rect{0, 0, 8, 8}});
  }
  data.boxes[5] = {Rect{0, 0, 16, 10}};  // 0.625 of the image
  CHECK(box_union_fraction(data.boxes[5], 16, 16) == doctest::Approx(0.625));

  const Model good = constant_model({0.7, 0.1, 0.1, 0.1});
  const Model weak = constant_model({0.55, 0.15, 0.15, 0.15});
  SeededRandom rng(0);
  const std::vector<const Model*> both_good{&good, &good};
  const auto picked = select_eval_samples(both_good, data, 5, rng);
  CHECK(picked.size() == 5);
  std::vector<std::size_t> idx;
  for (const auto& s : picked) {
    idx.push_back(s.source_index);
    CHECK(s.box_fraction == doctest::Approx(0.25));
    CHECK(s.scores.size() == 2);
  }
  std::sort(idx.begin(), idx.end());
  CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  CHECK(idx.back() < 5);

  CHECK_THROWS_AS(select_eval_samples(both_good, data, 6, rng), InsufficientSamples);
  const std::vector<const Model*> one_weak{&good, &weak};
  CHECK_THROWS_AS(select_eval_samples(one_weak, data, 1, rng), InsufficientSamples);
}
