#include "mixinterp/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mixinterp/errors.hpp"

namespace mixinterp {

static_assert(std::endian::native == std::endian::little, "payload is written in host order");

namespace {

constexpr const char* kCheckpointMagic = "mixinterp-checkpoint/1";
constexpr int kInferenceBatch = 256;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void Hyperparams::validate() const {
  if (epochs < 0 || batch_size <= 0) throw std::invalid_argument("epochs must be >= 0 and batch_size > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << kCheckpointMagic << '\n'
      << ckpt.model.arch().descriptor() << "augmentation=" << ckpt.augmentation << '\n'
      << "seed=" << ckpt.seed << '\n'
      << "epochs=" << ckpt.epochs << '\n'
      << "final_accuracy=" << format_double(ckpt.final_accuracy) << '\n'
      << "parameter_count=" << ckpt.model.state_size() << '\n'
      << "---\n";
  for (const auto* p : ckpt.model.state())
    out.write(reinterpret_cast<const char*>(p->data()), static_cast<std::streamsize>(p->size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write on checkpoint " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("checkpoint not found: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kCheckpointMagic) throw std::invalid_argument("not a checkpoint file: " + path.string());
  std::string arch_text;
  ModelCheckpoint ckpt;
  std::size_t count = 0;
  while (std::getline(in, line) && line != "---") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("malformed checkpoint header line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "augmentation") ckpt.augmentation = val;
    else if (key == "seed") ckpt.seed = std::stoull(val);
    else if (key == "epochs") ckpt.epochs = std::stoi(val);
    else if (key == "final_accuracy") ckpt.final_accuracy = std::stod(val);
    else if (key == "parameter_count") count = std::stoull(val);
    else arch_text += line + '\n';
  }
  parse_augmentation(ckpt.augmentation);
  const ArchConfig arch = ArchConfig::parse_descriptor(arch_text);
  ckpt.model = Model::build(arch, 0);
  if (count != ckpt.model.state_size()) throw std::invalid_argument("checkpoint parameter count mismatch");
  for (auto* p : ckpt.model.state()) {
    in.read(reinterpret_cast<char*>(p->data()), static_cast<std::streamsize>(p->size() * sizeof(float)));
    if (!in) throw std::invalid_argument("truncated checkpoint payload: " + path.string());
  }
  return ckpt;
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& augmentation, std::uint64_t seed,
                        const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write training log " + path.string());
  for (const auto& e : log) {
    nlohmann::json j{{"augmentation", augmentation}, {"seed", seed},          {"epoch", e.epoch},
                     {"loss", e.loss},                {"accuracy", e.accuracy}, {"learning_rate", e.learning_rate}};
    out << j.dump() << '\n';
  }
}

StepResult train_step(Model& model, Model& velocity, const MixedBatch& batch, const Hyperparams& hyper, double lr) {
  const Tensor x = stack(batch.images);
  const ForwardTrace trace = model.forward(x, 0, Mode::training);
  Tensor dlogits;
  StepResult result;
  result.loss = mixed_cross_entropy(trace.logits, batch.label_a, batch.label_b, batch.mix_weight, &dlogits);
  for (int i = 0; i < trace.logits.n; ++i) {
    const float* z = trace.logits.sample(i);
    const int pred = static_cast<int>(std::max_element(z, z + trace.logits.c) - z);
    const int dominant = batch.mix_weight[i] >= 0.5f ? batch.label_a[i] : batch.label_b[i];
    result.correct += pred == dominant;
  }
  if (!std::isfinite(result.loss)) return result;
  Model grads = model.zeros_like();
  model.backward(trace, dlogits, &grads, 1);
  model.update_running_stats(trace);
  auto params = model.parameters();
  auto vel = velocity.parameters();
  auto g = grads.parameters();
  const float wd = static_cast<float>(hyper.weight_decay);
  const float mom = static_cast<float>(hyper.momentum);
  const float step = static_cast<float>(lr);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = *params[k];
    auto& v = *vel[k];
    const auto& gk = *g[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = mom * v[i] + gk[i] + wd * w[i];
      w[i] -= step * v[i];
    }
  }
  return result;
}

ModelCheckpoint train(Model model, const Dataset& data, const TrainOptions& options) {
  if (data.size() == 0) throw std::invalid_argument("training dataset is empty");
  options.hyper.validate();
  const Hyperparams& hyper = options.hyper;
  const SeededRandom root(options.seed);
  Model velocity = model.zeros_like();
  ModelCheckpoint ckpt;
  ckpt.augmentation = std::string(to_string(options.augmentation));
  ckpt.seed = options.seed;
  ckpt.epochs = hyper.epochs;
  const int n = static_cast<int>(data.size());

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double lr = hyper.learning_rate;
    for (double m : hyper.lr_milestones)
      if (epoch >= static_cast<int>(std::lround(m * hyper.epochs))) lr *= hyper.lr_decay;
    SeededRandom order_rng = root.fork(2 * static_cast<std::uint64_t>(epoch));
    SeededRandom aug_rng = root.fork(2 * static_cast<std::uint64_t>(epoch) + 1);
    const std::vector<int> order = order_rng.permutation(n);
    double loss_sum = 0.0;
    long correct = 0;
    for (int start = 0; start < n; start += hyper.batch_size) {
      const int stop = std::min(n, start + hyper.batch_size);
      std::vector<Image> imgs;
      std::vector<int> labels;
      for (int i = start; i < stop; ++i) {
        imgs.push_back(data.images[order[i]]);
        labels.push_back(data.labels[order[i]]);
      }
      const MixedBatch batch = augment_batch(options.augmentation, options.augment, imgs, labels, aug_rng);
      const StepResult step = train_step(model, velocity, batch, hyper, lr);
      if (!std::isfinite(step.loss)) throw TrainingFailure(epoch, "non-finite loss");
      loss_sum += step.loss * (stop - start);
      correct += step.correct;
    }
    EpochLog e{epoch, loss_sum / n, static_cast<double>(correct) / n, lr};
    ckpt.log.push_back(e);
    if (options.on_epoch) options.on_epoch(e);
  }
  ckpt.model = std::move(model);
  ckpt.final_accuracy = top1_accuracy(ckpt.model, options.validation != nullptr ? *options.validation : data);
  return ckpt;
}

std::vector<std::vector<double>> predict_proba(const Model& model, std::span<const Image> images) {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kInferenceBatch) {
    const std::size_t stop = std::min(images.size(), start + kInferenceBatch);
    const Tensor x = stack(images.subspan(start, stop - start));
    if (x.h != model.arch().image_size || x.w != model.arch().image_size || x.c != model.arch().in_channels)
      throw std::invalid_argument("images do not match the model resolution");
    auto rows = softmax_rows(model.logits(x));
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

std::vector<float> score_oracle(const Model& model, std::span<const Image> images, int target_class) {
  if (target_class < 0 || target_class >= model.arch().num_classes)
    throw std::invalid_argument("target class out of range");
  const auto probs = predict_proba(model, images);
  std::vector<float> scores(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) scores[i] = static_cast<float>(probs[i][target_class]);
  return scores;
}

double top1_accuracy(const Model& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const auto probs = predict_proba(model, data.images);
  long correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int pred = static_cast<int>(std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
    correct += pred == data.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Image input_gradient(const Model& model, const Image& image, int target_class) {
  if (target_class < 0 || target_class >= model.arch().num_classes)
    throw std::invalid_argument("target class out of range");
  const Tensor x = stack(std::span<const Image>(&image, 1));
  const ForwardTrace trace = model.forward(x);
  Tensor dl(1, model.arch().num_classes, 1, 1);
  dl.data[target_class] = 1.0f;
  const auto g = model.backward(trace, dl, nullptr, 0);
  return unstack(g[0], 0);
}

std::vector<EvalSample> select_eval_samples(std::span<const Model* const> models, const Dataset& data, std::size_t n,
                                            SeededRandom& rng, const SampleFilter& filter) {
  std::vector<std::vector<std::vector<double>>> probs;
  probs.reserve(models.size());
  for (const Model* m : models) probs.push_back(predict_proba(*m, data.images));
  std::vector<std::size_t> passed;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Image& img = data.images[i];
    const double frac = box_union_fraction(data.boxes[i], img.width, img.height);
    if (!(frac > filter.min_box_fraction && frac < filter.max_box_fraction)) continue;
    bool ok = true;
    for (const auto& p : probs) ok = ok && p[i][data.labels[i]] > filter.min_score;
    if (ok) passed.push_back(i);
  }
  if (passed.size() < n) throw InsufficientSamples(passed.size(), n);
  const std::vector<int> perm = rng.permutation(static_cast<int>(passed.size()));
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < n; ++k) chosen.push_back(passed[perm[k]]);
  std::sort(chosen.begin(), chosen.end());
  std::vector<EvalSample> out;
  for (std::size_t i : chosen) {
    EvalSample s;
    s.source_index = i;
    s.image = data.images[i];
    s.label = data.labels[i];
    s.boxes = data.boxes[i];
    s.box_fraction = box_union_fraction(s.boxes, s.image.width, s.image.height);
    for (const auto& p : probs) s.scores.push_back(p[i][s.label]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mixinterp
