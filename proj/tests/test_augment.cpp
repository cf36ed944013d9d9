#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mixinterp/augment.hpp"

using namespace mixinterp;

namespace {

int count_equal(const Image& img, float v) {
  int n = 0;
  for (float x : img.data) n += x == v;
  return n;
}

Image constant(float v, int side = 32, int channels = 3) { return Image(channels, side, side, v); }

}  // namespace

TEST_CASE("cutout zeroes a centred square") {
  const Image ones(1, 8, 8, 1.0f);
  const MixOutcome out = cutout_at(ones, 3, 4, 4, 4);
  CHECK(count_equal(out.image, 1.0f) == 48);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const bool inside = y >= 2 && y <= 5 && x >= 2 && x <= 5;
      CHECK(out.image.at(0, y, x) == (inside ? 0.0f : 1.0f));
    }
  CHECK(out.label_a == 3);
  CHECK_FALSE(out.label_b.has_value());
  CHECK(out.mix_weight == 1.0);
}

TEST_CASE("cutout at a corner is clipped") {
  const Image ones(1, 8, 8, 1.0f);
  const MixOutcome out = cutout_at(ones, 0, 4, 0, 0);
  CHECK(count_equal(out.image, 0.0f) == 4);
  CHECK(out.image.at(0, 1, 1) == 0.0f);
  CHECK(out.image.at(0, 2, 2) == 1.0f);
}

TEST_CASE("cutout rejects a non-positive side") {
  SeededRandom rng(1);
  CHECK_THROWS_AS(cutout(Image(1, 8, 8, 1.0f), 0, 0, rng), std::invalid_argument);
}

TEST_CASE("mixup interpolates") {
  const Image a = constant(0.2f), b = constant(0.6f);
  const MixOutcome id = mixup_with_lambda(a, b, 1, 2, 1.0);
  CHECK(id.image == a);
  CHECK(id.mix_weight == 1.0);
  const MixOutcome half = mixup_with_lambda(a, b, 1, 2, 0.5);
  for (float v : half.image.data) CHECK(v == doctest::Approx(0.4f).epsilon(1e-6));
  CHECK(*half.label_b == 2);
  CHECK_FALSE(half.box.has_value());
  CHECK_THROWS_AS(mixup_with_lambda(a, constant(0.1f, 16), 0, 1, 0.5), std::invalid_argument);
}

TEST_CASE("Beta(1,1) draws average one half") {
  SeededRandom rng(42);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += rng.beta(1.0, 1.0);
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("cut box arithmetic") {
  const CutBox none = cut_box_at(1.0, 32, 32, 10, 10);
  CHECK(none.box.area() == 0);
  CHECK(none.mix_weight == 1.0);

  const CutBox full = cut_box_at(0.0, 32, 32, 3, 29);
  CHECK(full.box == Rect{0, 0, 32, 32});
  CHECK(full.mix_weight == 0.0);

  const CutBox quarter = cut_box_at(0.75, 32, 32, 16, 16);
  CHECK(quarter.box.width() == 16);
  CHECK(quarter.box.height() == 16);
  CHECK(quarter.mix_weight == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("cutmix pastes the box from the second image") {
  const Image a = constant(0.0f), b = constant(1.0f);
  const MixOutcome out = paste_box(a, b, 0, 1, cut_box_at(0.75, 32, 32, 16, 16));
  CHECK(count_equal(out.image, 1.0f) == 3 * 256);
  CHECK(out.mix_weight == doctest::Approx(0.75));

  SeededRandom rng(3);
  const MixOutcome same = cutmix_with_lambda(a, b, 0, 1, 1.0, rng);
  CHECK(same.image == a);
  CHECK(same.mix_weight == 1.0);
}

TEST_CASE("cut-based mix weight equals the unmasked pixel fraction") {
  const Image a = constant(0.0f, 32, 1), b = constant(1.0f, 32, 1);
  SeededRandom rng(11);
  for (int i = 0; i < 1000; ++i) {
    const MixOutcome cm = cutmix(a, b, 0, 1, 1.0, rng);
    const MixOutcome sm = saliencymix(a, b, 0, 1, 1.0, rng);
    CHECK(cm.mix_weight == doctest::Approx(count_equal(cm.image, 0.0f) / 1024.0).epsilon(1e-12));
    CHECK(sm.mix_weight == doctest::Approx(count_equal(sm.image, 0.0f) / 1024.0).epsilon(1e-12));
  }
}

TEST_CASE("mixup stays within the input range and cut methods select pixels") {
  SeededRandom rng(5);
  Image a(3, 16, 16), b(3, 16, 16);
  for (auto& v : a.data) v = static_cast<float>(rng.uniform());
  for (auto& v : b.data) v = static_cast<float>(rng.uniform());
  for (int i = 0; i < 50; ++i) {
    const MixOutcome m = mixup(a, b, 0, 1, 0.2, rng);
    for (std::size_t k = 0; k < m.image.data.size(); ++k) {
      CHECK(m.image.data[k] >= std::min(a.data[k], b.data[k]) - 1e-6f);
      CHECK(m.image.data[k] <= std::max(a.data[k], b.data[k]) + 1e-6f);
    }
    const MixOutcome c = cutmix(a, b, 0, 1, 1.0, rng);
    for (std::size_t k = 0; k < c.image.data.size(); ++k)
      CHECK((c.image.data[k] == a.data[k] || c.image.data[k] == b.data[k]));
  }
}

TEST_CASE("saliency field") {
  const SaliencyField flat = fine_grained_saliency(constant(0.5f));
  for (float v : flat.values) CHECK(v == flat.values.front());
  CHECK(saliency_peak(flat) == std::pair{0, 0});

  Image dot(3, 32, 32, 0.0f);
  for (int c = 0; c < 3; ++c) dot.at(c, 10, 10) = 1.0f;
  const SaliencyField f = fine_grained_saliency(dot);
  for (float v : f.values) CHECK(v >= 0.0f);
  CHECK(saliency_peak(f) == std::pair{10, 10});
  CHECK(fine_grained_saliency(dot) == f);
}

TEST_CASE("saliencymix centres the patch on the saliency peak") {
  Image a(3, 32, 32, 0.0f), b(3, 32, 32, 0.25f);
  for (int c = 0; c < 3; ++c) b.at(c, 10, 10) = 1.0f;
  const MixOutcome out = saliencymix_with_lambda(a, b, 0, 1, 0.75);
  REQUIRE(out.box.has_value());
  CHECK(out.box->x0 == 2);
  CHECK(out.box->y0 == 2);
  CHECK(out.box->x1 == 18);
  CHECK(out.box->y1 == 18);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        CHECK(out.image.at(c, y, x) == (out.box->contains(x, y) ? b.at(c, y, x) : a.at(c, y, x)));
  CHECK(saliencymix_with_lambda(a, b, 0, 1, 1.0).image == a);
}

TEST_CASE("augmentation is reproducible for a fixed seed") {
  std::vector<Image> imgs;
  std::vector<int> labels;
  SeededRandom src(9);
  for (int i = 0; i < 6; ++i) {
    Image im(3, 16, 16);
    for (auto& v : im.data) v = static_cast<float>(src.uniform());
    imgs.push_back(im);
    labels.push_back(i % 3);
  }
  for (AugmentationKind kind : all_augmentations()) {
    const AugmentParams p = AugmentParams::defaults_for(kind, 16);
    SeededRandom r1(77), r2(77);
    const MixedBatch x = augment_batch(kind, p, imgs, labels, r1);
    const MixedBatch y = augment_batch(kind, p, imgs, labels, r2);
    CHECK(x.images == y.images);
    CHECK(x.label_b == y.label_b);
    CHECK(x.mix_weight == y.mix_weight);
  }
}

TEST_CASE("regime defaults") {
  CHECK(AugmentParams::defaults_for(AugmentationKind::mixup, 32).alpha == 0.2);
  CHECK(AugmentParams::defaults_for(AugmentationKind::cutmix, 32).alpha == 1.0);
  CHECK(AugmentParams::defaults_for(AugmentationKind::cutout, 32).patch_side == 16);
  CHECK(parse_augmentation("saliencymix") == AugmentationKind::saliencymix);
  CHECK_THROWS(parse_augmentation("puzzlemix"));
}
