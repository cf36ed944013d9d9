#pragma once

#include <cmath>
#include <filesystem>
#include <vector>

#include "mixinterp/harness.hpp"
#include "mixinterp/nn.hpp"
#include "mixinterp/random.hpp"
#include "mixinterp/scene.hpp"

namespace testsupport {

using namespace mixinterp;

inline Image random_image(SeededRandom& rng, int side = 16, int channels = 3) {
  Image im(channels, side, side);
  for (auto& v : im.data) v = static_cast<float>(rng.uniform());
  return im;
}

inline SceneConfig small_scenes() {
  SceneConfig sc;
  sc.image_size = 16;
  sc.num_classes = 4;
  sc.min_object = 6;
  sc.max_object = 11;
  return sc;
}

inline ArchConfig small_arch(int classes = 4) {
  ArchConfig a;
  a.image_size = 16;
  a.num_classes = classes;
  a.stem_width = 8;
  a.stage_widths = {8, 16};
  a.stage_strides = {1, 2};
  return a;
}

#ifndef MIXINTERP_TEST_CACHE
#define MIXINTERP_TEST_CACHE "mixinterp-test-cache"
#endif

// About 95% held-out accuracy on 16x16 scenes. Cached on disk between test
// binaries since training takes ~15 s.
inline const ModelCheckpoint& trained_small_model() {
  static const ModelCheckpoint ckpt = [] {
    const std::filesystem::path path = std::filesystem::path(MIXINTERP_TEST_CACHE) / "small_baseline_v1.ckpt";
    if (std::filesystem::exists(path)) return load_checkpoint(path);
    const Dataset data = generate_dataset(SceneGenerator(small_scenes()), 1500, 11);
    TrainOptions opt;
    opt.hyper.epochs = 30;
    opt.hyper.batch_size = 64;
    opt.hyper.learning_rate = 0.1;
    opt.seed = 1;
    ModelCheckpoint c = train(Model::build(small_arch(), 1), data, opt);
    std::filesystem::create_directories(path.parent_path());
    save_checkpoint(c, path);
    return c;
  }();
  return ckpt;
}

// Single conv layer with two output channels, no normalisation, identity-sized head.
inline Model toy_conv_net(std::uint64_t seed, int side = 8) {
  ArchConfig a;
  a.image_size = side;
  a.num_classes = 2;
  a.stem_width = 2;
  a.stage_widths = {};
  a.stage_strides = {};
  a.batch_norm = false;
  return Model::build(a, seed);
}

// Stem-only net whose unit 0 computes ReLU(R - G - B - 0.75) at the centre tap,
// so it fires on red pixels and nowhere else in the palette. Other units are
// left random.
inline Model planted_red_net(int side) {
  ArchConfig a;
  a.image_size = side;
  a.num_classes = 2;
  a.stem_width = 4;
  a.stage_widths = {};
  a.stage_strides = {};
  a.batch_norm = false;
  Model m = Model::build(a, 5);
  Conv2d& stem = m.stem();
  std::fill_n(stem.weight.begin(), 27, 0.0f);
  stem.weight[0 * 9 + 4] = 1.0f;
  stem.weight[1 * 9 + 4] = -1.0f;
  stem.weight[2 * 9 + 4] = -1.0f;
  stem.bias[0] = -0.75f;
  return m;
}

// Scenes in which red objects cover a little under 1% of the pixels.
inline SceneConfig rare_red_scenes() {
  SceneConfig sc;
  sc.image_size = 16;
  sc.num_classes = 4;
  sc.min_object = 3;
  sc.max_object = 7;
  sc.object_colors = {"red", "green", "blue", "cyan", "white", "yellow", "magenta", "orange",
                      "green", "blue", "cyan", "white"};
  return sc;
}

}  // namespace testsupport
