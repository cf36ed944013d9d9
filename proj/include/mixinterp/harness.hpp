#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixinterp/augment.hpp"
#include "mixinterp/nn.hpp"
#include "mixinterp/random.hpp"
#include "mixinterp/scene.hpp"

namespace mixinterp {

struct Hyperparams {
  int epochs = 30;
  int batch_size = 128;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Learning rate is multiplied by lr_decay at each of these fractions of training.
  std::vector<double> lr_milestones{0.5, 0.75};
  double lr_decay = 0.1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;      // against the dominant label of each (mixed) sample
  double learning_rate = 0.0;
};

struct ModelCheckpoint {
  Model model;
  std::string augmentation = "baseline";
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_accuracy = 0.0;  // clean top-1 on the validation set (or training set)
  std::vector<EpochLog> log;
};

// Persists as a text header (architecture descriptor + metadata), a "---"
// separator line and a little-endian float32 parameter payload.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

// Appends one JSON object per line.
void write_training_log(const std::vector<EpochLog>& log, const std::string& augmentation, std::uint64_t seed,
                        const std::filesystem::path& path);

struct TrainOptions {
  AugmentationKind augmentation = AugmentationKind::baseline;
  AugmentParams augment;
  Hyperparams hyper;
  std::uint64_t seed = 0;
  const Dataset* validation = nullptr;
  std::function<void(const EpochLog&)> on_epoch;
};

// SGD with momentum on the mixed-label cross entropy. Throws TrainingFailure
// if the loss becomes non-finite.
ModelCheckpoint train(Model model, const Dataset& data, const TrainOptions& options);

struct StepResult {
  double loss = 0.0;
  int correct = 0;  // argmax == dominant label, before the update
};

// One SGD step on an already mixed batch.
StepResult train_step(Model& model, Model& velocity, const MixedBatch& batch, const Hyperparams& hyper, double lr);

// Softmax probability of target_class per image.
std::vector<float> score_oracle(const Model& model, std::span<const Image> images, int target_class);
// Full probability rows per image.
std::vector<std::vector<double>> predict_proba(const Model& model, std::span<const Image> images);
double top1_accuracy(const Model& model, const Dataset& data);

// Input gradient of the pre-softmax score of target_class.
Image input_gradient(const Model& model, const Image& image, int target_class);

struct EvalSample {
  std::size_t source_index = 0;
  Image image;
  int label = 0;
  std::vector<Rect> boxes;
  double box_fraction = 0.0;
  std::vector<double> scores;  // per model, probability of the true class
};

struct SampleFilter {
  double min_score = 0.6;          // strict: every model must score above
  double min_box_fraction = 0.10;  // open interval
  double max_box_fraction = 0.50;
};

// Random n candidates passing the filter for every model. Throws
// InsufficientSamples when fewer than n pass.
std::vector<EvalSample> select_eval_samples(std::span<const Model* const> models, const Dataset& data, std::size_t n,
                                            SeededRandom& rng, const SampleFilter& filter = {});

}  // namespace mixinterp
