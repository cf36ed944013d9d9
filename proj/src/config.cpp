#include "mixinterp/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mixinterp/errors.hpp"

namespace mixinterp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("'" + s + "' is not a valid number");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigError("'" + s + "' is not a boolean (use 0/1 or true/false)");
}

template <typename T>
std::vector<T> parse_number_list(const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) out.push_back(parse_number<T>(item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  return join<int>(v, [](const int& x) { return std::to_string(x); });
}
std::string join_doubles(const std::vector<double>& v) { return join<double>(v, [](const double& x) { return fmt(x); }); }
std::string join_strings(const std::vector<std::string>& v) {
  return join<std::string>(v, [](const std::string& x) { return x; });
}

struct KeyDef {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

void add_int(std::vector<KeyDef>& t, std::string name, std::string help, int ExperimentConfig::*field) {
  t.push_back({std::move(name), std::move(help),
               [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_number<int>(v); },
               [field](const ExperimentConfig& c) { return std::to_string(c.*field); }});
}

void add_double(std::vector<KeyDef>& t, std::string name, std::string help, double ExperimentConfig::*field) {
  t.push_back({std::move(name), std::move(help),
               [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_number<double>(v); },
               [field](const ExperimentConfig& c) { return fmt(c.*field); }});
}

void add_u64(std::vector<KeyDef>& t, std::string name, std::string help, std::uint64_t ExperimentConfig::*field) {
  t.push_back({std::move(name), std::move(help),
               [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_number<std::uint64_t>(v); },
               [field](const ExperimentConfig& c) { return std::to_string(c.*field); }});
}

std::vector<KeyDef> build_table() {
  using C = ExperimentConfig;
  std::vector<KeyDef> t;
  t.push_back({"run_id", "run identifier; empty derives it from the config hash",
               [](C& c, const std::string& v) { c.run_id = trim(v); }, [](const C& c) { return c.run_id; }});
  t.push_back({"output_dir", "root directory for checkpoints and runs",
               [](C& c, const std::string& v) { c.output_dir = trim(v); },
               [](const C& c) { return c.output_dir.string(); }});
  t.push_back({"seeds", "comma-separated training seeds",
               [](C& c, const std::string& v) { c.seeds = parse_number_list<std::uint64_t>(v); },
               [](const C& c) {
                 return join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
               }});
  t.push_back({"models", "augmentation regimes to train and evaluate",
               [](C& c, const std::string& v) {
                 c.models.clear();
                 for (const auto& n : split_list(v)) c.models.push_back(parse_augmentation(n));
               },
               [](const C& c) {
                 return join<AugmentationKind>(c.models,
                                               [](const AugmentationKind& k) { return std::string(to_string(k)); });
               }});
  t.push_back({"methods", "attribution methods (gradcam, iba)",
               [](C& c, const std::string& v) {
                 c.methods.clear();
                 for (const auto& n : split_list(v)) c.methods.push_back(parse_method(n));
               },
               [](const C& c) {
                 return join<AttributionMethod>(c.methods,
                                                [](const AttributionMethod& m) { return std::string(to_string(m)); });
               }});

  add_int(t, "data.train_size", "training images", &C::train_size);
  add_int(t, "data.val_size", "validation images", &C::val_size);
  add_int(t, "data.eval_pool_size", "candidate images for evaluation sampling", &C::eval_pool_size);
  add_u64(t, "data.seed", "seed of the synthetic scene streams", &C::data_seed);
  t.push_back({"data.image_size", "image side in pixels",
               [](C& c, const std::string& v) { c.scene.image_size = c.arch.image_size = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.scene.image_size); }});
  t.push_back({"data.num_classes", "object shapes (classes), 2..8",
               [](C& c, const std::string& v) { c.scene.num_classes = c.arch.num_classes = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.scene.num_classes); }});
  t.push_back({"data.min_object", "smallest object side",
               [](C& c, const std::string& v) { c.scene.min_object = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.scene.min_object); }});
  t.push_back({"data.max_object", "largest object side",
               [](C& c, const std::string& v) { c.scene.max_object = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.scene.max_object); }});
  t.push_back({"data.max_objects", "objects per scene",
               [](C& c, const std::string& v) { c.scene.max_objects = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.scene.max_objects); }});
  t.push_back({"data.noise_std", "pixel noise standard deviation",
               [](C& c, const std::string& v) { c.scene.noise_std = parse_number<float>(v); },
               [](const C& c) { return fmt(c.scene.noise_std); }});
  t.push_back({"data.object_colors", "palette names for objects",
               [](C& c, const std::string& v) { c.scene.object_colors = split_list(v); },
               [](const C& c) { return join_strings(c.scene.object_colors); }});
  t.push_back({"data.background_colors", "palette names for backgrounds",
               [](C& c, const std::string& v) { c.scene.background_colors = split_list(v); },
               [](const C& c) { return join_strings(c.scene.background_colors); }});
  t.push_back({"data.textures", "background textures",
               [](C& c, const std::string& v) { c.scene.textures = split_list(v); },
               [](const C& c) { return join_strings(c.scene.textures); }});

  t.push_back({"arch.stem_width", "stem convolution width",
               [](C& c, const std::string& v) { c.arch.stem_width = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.arch.stem_width); }});
  t.push_back({"arch.stage_widths", "residual stage widths",
               [](C& c, const std::string& v) { c.arch.stage_widths = parse_number_list<int>(v); },
               [](const C& c) { return join_ints(c.arch.stage_widths); }});
  t.push_back({"arch.stage_strides", "residual stage strides (1 or 2)",
               [](C& c, const std::string& v) { c.arch.stage_strides = parse_number_list<int>(v); },
               [](const C& c) { return join_ints(c.arch.stage_strides); }});
  t.push_back({"arch.blocks_per_stage", "residual blocks per stage",
               [](C& c, const std::string& v) { c.arch.blocks_per_stage = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.arch.blocks_per_stage); }});
  t.push_back({"arch.batch_norm", "batch normalisation after each conv",
               [](C& c, const std::string& v) { c.arch.batch_norm = parse_bool(v); },
               [](const C& c) { return std::string(c.arch.batch_norm ? "1" : "0"); }});

  t.push_back({"train.epochs", "training epochs",
               [](C& c, const std::string& v) { c.hyper.epochs = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.hyper.epochs); }});
  t.push_back({"train.batch_size", "minibatch size",
               [](C& c, const std::string& v) { c.hyper.batch_size = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.hyper.batch_size); }});
  t.push_back({"train.learning_rate", "initial SGD learning rate",
               [](C& c, const std::string& v) { c.hyper.learning_rate = parse_number<double>(v); },
               [](const C& c) { return fmt(c.hyper.learning_rate); }});
  t.push_back({"train.momentum", "SGD momentum",
               [](C& c, const std::string& v) { c.hyper.momentum = parse_number<double>(v); },
               [](const C& c) { return fmt(c.hyper.momentum); }});
  t.push_back({"train.weight_decay", "L2 weight decay",
               [](C& c, const std::string& v) { c.hyper.weight_decay = parse_number<double>(v); },
               [](const C& c) { return fmt(c.hyper.weight_decay); }});
  t.push_back({"train.lr_milestones", "fractions of training where the rate decays",
               [](C& c, const std::string& v) { c.hyper.lr_milestones = parse_number_list<double>(v); },
               [](const C& c) { return join_doubles(c.hyper.lr_milestones); }});
  t.push_back({"train.lr_decay", "decay factor at each milestone",
               [](C& c, const std::string& v) { c.hyper.lr_decay = parse_number<double>(v); },
               [](const C& c) { return fmt(c.hyper.lr_decay); }});

  for (AugmentationKind k : all_augmentations()) {
    const std::string p = std::string(to_string(k)) + ".";
    t.push_back({p + "alpha", "Beta(alpha, alpha) mixing parameter",
                 [k](C& c, const std::string& v) { c.augment_params(k).alpha = parse_number<double>(v); },
                 [k](const C& c) { return fmt(c.augment_params(k).alpha); }});
    t.push_back({p + "patch_side", "Cutout square side in pixels",
                 [k](C& c, const std::string& v) { c.augment_params(k).patch_side = parse_number<int>(v); },
                 [k](const C& c) { return std::to_string(c.augment_params(k).patch_side); }});
    t.push_back({p + "probability", "probability a batch is mixed",
                 [k](C& c, const std::string& v) { c.augment_params(k).probability = parse_number<double>(v); },
                 [k](const C& c) { return fmt(c.augment_params(k).probability); }});
    t.push_back({p + "flip", "random horizontal flip",
                 [k](C& c, const std::string& v) { c.augment_params(k).flip = parse_bool(v); },
                 [k](const C& c) { return std::string(c.augment_params(k).flip ? "1" : "0"); }});
    t.push_back({p + "crop", "random resized crop",
                 [k](C& c, const std::string& v) { c.augment_params(k).crop = parse_bool(v); },
                 [k](const C& c) { return std::string(c.augment_params(k).crop ? "1" : "0"); }});
    t.push_back({p + "crop_min_scale", "smallest crop area fraction",
                 [k](C& c, const std::string& v) { c.augment_params(k).crop_min_scale = parse_number<double>(v); },
                 [k](const C& c) { return fmt(c.augment_params(k).crop_min_scale); }});
  }

  t.push_back({"iba.beta", "information penalty weight",
               [](C& c, const std::string& v) { c.iba.beta = parse_number<double>(v); },
               [](const C& c) { return fmt(c.iba.beta); }});
  t.push_back({"iba.steps", "optimisation steps",
               [](C& c, const std::string& v) { c.iba.steps = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.iba.steps); }});
  t.push_back({"iba.learning_rate", "Adam learning rate",
               [](C& c, const std::string& v) { c.iba.learning_rate = parse_number<double>(v); },
               [](const C& c) { return fmt(c.iba.learning_rate); }});
  t.push_back({"iba.noise_samples", "noise draws per step",
               [](C& c, const std::string& v) { c.iba.noise_samples = parse_number<int>(v); },
               [](const C& c) { return std::to_string(c.iba.noise_samples); }});
  t.push_back({"iba.initial_alpha", "initial mask logit",
               [](C& c, const std::string& v) { c.iba.initial_alpha = parse_number<double>(v); },
               [](const C& c) { return fmt(c.iba.initial_alpha); }});
  add_int(t, "iba.layer", "bottleneck boundary; -1 = output of the penultimate stage", &C::iba_layer);
  add_int(t, "iba.calibration_images", "images used to estimate feature statistics", &C::iba_calibration_images);

  add_int(t, "eval.samples", "evaluation images per seed", &C::eval_samples);
  t.push_back({"eval.min_score", "every model must score the true class above this",
               [](C& c, const std::string& v) { c.filter.min_score = parse_number<double>(v); },
               [](const C& c) { return fmt(c.filter.min_score); }});
  t.push_back({"eval.min_box_fraction", "box union must cover more than this",
               [](C& c, const std::string& v) { c.filter.min_box_fraction = parse_number<double>(v); },
               [](const C& c) { return fmt(c.filter.min_box_fraction); }});
  t.push_back({"eval.max_box_fraction", "box union must cover less than this",
               [](C& c, const std::string& v) { c.filter.max_box_fraction = parse_number<double>(v); },
               [](const C& c) { return fmt(c.filter.max_box_fraction); }});

  add_int(t, "ehr.points", "thresholds in the EHR grid", &C::ehr_points);
  add_double(t, "ehr.min", "smallest EHR threshold", &C::ehr_min);
  add_double(t, "ehr.max", "largest EHR threshold", &C::ehr_max);
  t.push_back({"ehr.numerator", "thresholded or printed",
               [](C& c, const std::string& v) {
                 const std::string s = trim(v);
                 if (s == "thresholded") c.ehr_numerator = EhrNumerator::thresholded;
                 else if (s == "printed") c.ehr_numerator = EhrNumerator::printed;
                 else throw ConfigError("ehr.numerator must be thresholded or printed");
               },
               [](const C& c) {
                 return std::string(c.ehr_numerator == EhrNumerator::thresholded ? "thresholded" : "printed");
               }});
  add_double(t, "wsol.threshold", "binarisation threshold for the WSOL box", &C::wsol_threshold);

  add_int(t, "faith.cell_px", "grid cell side in pixels", &C::cell_px);
  add_int(t, "faith.partition", "k > 0 uses a k x k partition instead of pixel cells", &C::partition);
  add_int(t, "faith.n_orders", "random orders per image", &C::n_orders);
  add_int(t, "faith.stride", "evaluate every stride-th step", &C::stride);
  t.push_back({"faith.fill", "dataset_mean or image_mean",
               [](C& c, const std::string& v) {
                 const std::string s = trim(v);
                 if (s == "dataset_mean") c.fill = FillKind::dataset_mean;
                 else if (s == "image_mean") c.fill = FillKind::image_mean;
                 else throw ConfigError("faith.fill must be dataset_mean or image_mean");
               },
               [](const C& c) { return std::string(c.fill == FillKind::dataset_mean ? "dataset_mean" : "image_mean"); }});

  add_int(t, "dissect.corpus_size", "concept corpus images", &C::corpus_size);
  add_u64(t, "dissect.corpus_seed", "concept corpus seed", &C::corpus_seed);
  add_double(t, "dissect.iou_threshold", "detector IoU threshold", &C::iou_threshold);
  t.push_back({"dissect.mode", "best (one concept per unit) or multi",
               [](C& c, const std::string& v) {
                 const std::string s = trim(v);
                 if (s == "best") c.detector_mode = DetectorMode::best;
                 else if (s == "multi") c.detector_mode = DetectorMode::multi;
                 else throw ConfigError("dissect.mode must be best or multi");
               },
               [](const C& c) { return std::string(c.detector_mode == DetectorMode::best ? "best" : "multi"); }});
  return t;
}

const std::vector<KeyDef>& table() {
  static const std::vector<KeyDef> t = build_table();
  return t;
}

const KeyDef& lookup(const std::string& key) {
  for (const auto& k : table())
    if (k.name == key) return k;
  throw ConfigError("unknown config key '" + key + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

const AugmentParams& ExperimentConfig::augment_params(AugmentationKind k) const {
  switch (k) {
    case AugmentationKind::baseline: return baseline;
    case AugmentationKind::cutout: return cutout;
    case AugmentationKind::mixup: return mixup;
    case AugmentationKind::cutmix: return cutmix;
    case AugmentationKind::saliencymix: return saliencymix;
  }
  throw std::invalid_argument("unknown augmentation");
}

AugmentParams& ExperimentConfig::augment_params(AugmentationKind k) {
  return const_cast<AugmentParams&>(std::as_const(*this).augment_params(k));
}

ThresholdGrid ExperimentConfig::threshold_grid() const { return ThresholdGrid::linspace(ehr_min, ehr_max, ehr_points); }

void ExperimentConfig::validate() const {
  try {
    scene.validate();
    arch.validate();
    hyper.validate();
    threshold_grid();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(arch.image_size == scene.image_size && arch.num_classes == scene.num_classes,
          "architecture and data disagree on image size or class count");
  require(!seeds.empty(), "seeds must not be empty");
  require(!models.empty(), "models must not be empty");
  require(!methods.empty(), "methods must not be empty");
  require(std::set<AugmentationKind>(models.begin(), models.end()).size() == models.size(), "models repeat");
  require(train_size > 0 && val_size > 0 && eval_pool_size > 0, "dataset sizes must be positive");
  for (AugmentationKind k : all_augmentations()) {
    const AugmentParams& p = augment_params(k);
    const std::string n(to_string(k));
    require(p.alpha > 0.0, n + ".alpha must be positive");
    require(p.patch_side > 0, n + ".patch_side must be positive");
    require(p.probability >= 0.0 && p.probability <= 1.0, n + ".probability must lie in [0, 1]");
    require(p.crop_min_scale > 0.0 && p.crop_min_scale <= 1.0, n + ".crop_min_scale must lie in (0, 1]");
  }
  require(iba.beta > 0.0, "iba.beta must be positive");
  require(iba.steps >= 1 && iba.noise_samples >= 1, "iba.steps and iba.noise_samples must be >= 1");
  require(iba.learning_rate > 0.0, "iba.learning_rate must be positive");
  require(iba_layer < 0 || (iba_layer >= 1 && iba_layer <= arch.num_blocks() + 1), "iba.layer out of range");
  require(iba_calibration_images >= 1, "iba.calibration_images must be positive");
  require(eval_samples >= 1 && eval_samples <= eval_pool_size, "eval.samples must lie in [1, data.eval_pool_size]");
  require(filter.min_score >= 0.0 && filter.min_score < 1.0, "eval.min_score must lie in [0, 1)");
  require(filter.min_box_fraction >= 0.0 && filter.min_box_fraction < filter.max_box_fraction &&
              filter.max_box_fraction <= 1.0,
          "eval box fractions must satisfy 0 <= min < max <= 1");
  require(wsol_threshold >= 0.0 && wsol_threshold < 1.0, "wsol.threshold must lie in [0, 1)");
  require(cell_px >= 1 && cell_px <= scene.image_size, "faith.cell_px must lie in [1, image size]");
  require(partition >= 0 && partition <= scene.image_size, "faith.partition must lie in [0, image size]");
  require(n_orders >= 1, "faith.n_orders must be >= 1");
  require(stride >= 1, "faith.stride must be >= 1");
  require(corpus_size >= 1, "dissect.corpus_size must be positive");
  require(iou_threshold >= 0.0, "dissect.iou_threshold must be non-negative");
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  for (const auto& k : table()) kv[k.name] = k.get(*this);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

namespace {

std::string fnv_hex(const std::string& canonical, const std::function<bool(const std::string&)>& keep) {
  std::uint64_t h = 1469598103934665603ull;
  std::istringstream in(canonical);
  std::string line;
  while (std::getline(in, line)) {
    if (!keep(line)) continue;
    for (unsigned char ch : line + "\n") {
      h ^= ch;
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string ExperimentConfig::hash() const {
  return fnv_hex(canonical(), [](const std::string& line) {
    return line.rfind("output_dir=", 0) != 0 && line.rfind("run_id=", 0) != 0;
  });
}

std::string ExperimentConfig::training_hash() const {
  return fnv_hex(canonical(), [](const std::string& line) {
    if (line.rfind("data.eval_pool_size=", 0) == 0) return false;
    for (const char* p : {"data.", "arch.", "train.", "baseline.", "cutout.", "mixup.", "cutmix.", "saliencymix."})
      if (line.rfind(p, 0) == 0) return true;
    return false;
  });
}

std::string ExperimentConfig::effective_run_id() const { return run_id.empty() ? "run-" + hash().substr(0, 12) : run_id; }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& k : table()) out.push_back({k.name, k.help});
    return out;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  try {
    lookup(key).set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      apply_setting(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mixinterp
