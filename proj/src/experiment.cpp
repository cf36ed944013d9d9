#include "mixinterp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <tuple>
#include <sstream>

#include "json.hpp"
#include "mixinterp/errors.hpp"
#include "mixinterp/tensor_io.hpp"

namespace mixinterp {

namespace {

constexpr std::uint64_t kValStream = 1000003;
constexpr std::uint64_t kPoolStream = 2000003;

std::string boxes_text(const std::vector<Rect>& boxes) {
  std::string s;
  for (const auto& b : boxes) {
    if (!s.empty()) s += ';';
    s += std::to_string(b.x0) + ' ' + std::to_string(b.y0) + ' ' + std::to_string(b.x1) + ' ' + std::to_string(b.y1);
  }
  return s;
}

std::string regime_dir(AugmentationKind kind, std::uint64_t seed) {
  return std::string(to_string(kind)) + "_s" + std::to_string(seed);
}

void append_json_lines(const std::vector<nlohmann::ordered_json>& lines, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  for (const auto& j : lines) out << j.dump() << '\n';
}

nlohmann::ordered_json curve_json(const ScoreCurve& c) {
  nlohmann::ordered_json j;
  j["x"] = c.x;
  j["y"] = c.y;
  j["se"] = c.se;
  return j;
}

}  // namespace

Experiment::Experiment(ExperimentConfig config, std::ostream* log) : cfg_(std::move(config)), log_(log) {
  cfg_.validate();
}

void Experiment::say(const std::string& line) {
  if (log_ != nullptr) *log_ << line << std::endl;
}

std::filesystem::path Experiment::run_dir() const { return cfg_.output_dir / "runs" / run_id(); }

std::filesystem::path Experiment::checkpoint_path(AugmentationKind kind, std::uint64_t seed) const {
  return cfg_.output_dir / "checkpoints" / cfg_.training_hash() / (regime_dir(kind, seed) + ".ckpt");
}

void Experiment::ensure_run_dir() {
  const auto dir = run_dir();
  std::filesystem::create_directories(dir);
  const auto cfg_path = dir / "config.txt";
  if (!std::filesystem::exists(cfg_path)) {
    std::ofstream out(cfg_path);
    out << "# config hash " << cfg_.hash() << '\n' << cfg_.canonical();
  }
}

const Dataset& Experiment::train_data() {
  if (!train_) train_ = generate_dataset(SceneGenerator(cfg_.scene), cfg_.train_size, cfg_.data_seed);
  return *train_;
}

const Dataset& Experiment::val_data() {
  if (!val_) val_ = generate_dataset(SceneGenerator(cfg_.scene), cfg_.val_size, cfg_.data_seed + kValStream);
  return *val_;
}

const Dataset& Experiment::eval_pool() {
  if (!pool_) pool_ = generate_dataset(SceneGenerator(cfg_.scene), cfg_.eval_pool_size, cfg_.data_seed + kPoolStream);
  return *pool_;
}

std::vector<std::filesystem::path> Experiment::train(bool overwrite) {
  std::vector<std::filesystem::path> out;
  for (std::uint64_t seed : cfg_.seeds) {
    for (AugmentationKind kind : cfg_.models) {
      const auto path = checkpoint_path(kind, seed);
      out.push_back(path);
      if (!overwrite && std::filesystem::exists(path)) {
        say("checkpoint exists, skipping: " + path.string());
        continue;
      }
      TrainOptions opt;
      opt.augmentation = kind;
      opt.augment = cfg_.augment_params(kind);
      opt.hyper = cfg_.hyper;
      opt.seed = seed;
      opt.validation = &val_data();
      const std::string name(to_string(kind));
      say("training " + name + " seed " + std::to_string(seed));
      ModelCheckpoint ckpt;
      try {
        ckpt = mixinterp::train(Model::build(cfg_.arch, seed), train_data(), opt);
      } catch (const TrainingFailure& e) {
        throw TrainingFailure(e.epoch(), "regime " + name + ": " + e.what());
      }
      save_checkpoint(ckpt, path);
      std::filesystem::path log_path = path;
      log_path.replace_extension(".log.jsonl");
      std::filesystem::remove(log_path);
      write_training_log(ckpt.log, name, seed, log_path);
      say("  top-1 " + std::to_string(ckpt.final_accuracy) + " -> " + path.string());
      models_[{static_cast<int>(kind), seed}] = std::move(ckpt);
    }
  }
  return out;
}

const ModelCheckpoint& Experiment::checkpoint(AugmentationKind kind, std::uint64_t seed) {
  const auto key = std::make_pair(static_cast<int>(kind), seed);
  auto it = models_.find(key);
  if (it != models_.end()) return it->second;
  const auto path = checkpoint_path(kind, seed);
  if (!std::filesystem::exists(path))
    throw MissingArtifact("missing checkpoint " + path.string() + " (run `mixinterp train` with this config first)");
  ModelCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.augmentation != to_string(kind) || !(ckpt.model.arch() == cfg_.arch))
    throw MissingArtifact("checkpoint " + path.string() + " does not match the configuration; retrain it");
  return models_.emplace(key, std::move(ckpt)).first->second;
}

const std::vector<EvalSample>& Experiment::samples(std::uint64_t seed) {
  auto it = samples_.find(seed);
  if (it != samples_.end()) return it->second;
  std::vector<const Model*> models;
  for (AugmentationKind k : cfg_.models) models.push_back(&checkpoint(k, seed).model);
  SeededRandom rng = SeededRandom(seed).fork(0xE7A1);
  std::vector<EvalSample> chosen = select_eval_samples(models, eval_pool(), cfg_.eval_samples, rng, cfg_.filter);
  ensure_run_dir();
  const auto dir = run_dir() / "eval" / ("s" + std::to_string(seed));
  for (const auto& s : chosen) {
    const auto path = dir / (std::to_string(s.source_index) + ".tensor");
    if (std::filesystem::exists(path)) continue;
    TensorFile f = to_tensor_file(s.image);
    f.meta["label"] = std::to_string(s.label);
    f.meta["boxes"] = boxes_text(s.boxes);
    f.meta["source_index"] = std::to_string(s.source_index);
    write_tensor_file(f, path);
  }
  return samples_.emplace(seed, std::move(chosen)).first->second;
}

std::vector<AttributionMap> Experiment::attributions(AugmentationKind kind, std::uint64_t seed,
                                                     AttributionMethod method) {
  const auto& evals = samples(seed);
  const Model& model = checkpoint(kind, seed).model;
  const auto dir = run_dir() / "attributions" / regime_dir(kind, seed) / std::string(to_string(method));
  std::vector<AttributionMap> out;
  out.reserve(evals.size());
  const FeatureStats* stats = nullptr;
  for (const auto& s : evals) {
    const auto path = dir / (std::to_string(s.source_index) + ".tensor");
    if (std::filesystem::exists(path)) {
      out.push_back(load_attribution(path));
      continue;
    }
    AttributionMap m;
    if (method == AttributionMethod::gradcam) {
      m = gradcam(model, s.image, s.label);
    } else {
      if (stats == nullptr) {
        const auto key = std::make_pair(static_cast<int>(kind), seed);
        auto it = iba_stats_.find(key);
        if (it == iba_stats_.end()) {
          const auto& val = val_data().images;
          const std::size_t n = std::min<std::size_t>(val.size(), cfg_.iba_calibration_images);
          const int layer = cfg_.iba_layer >= 0 ? cfg_.iba_layer : default_iba_layer(model);
          it = iba_stats_
                   .emplace(key, iba_fit_statistics(model, layer, std::span<const Image>(val.data(), n),
                                                    std::min<std::size_t>(n, 100)))
                   .first;
        }
        stats = &it->second;
      }
      SeededRandom rng = SeededRandom(seed).fork(0x1BA000000ull + s.source_index);
      m = iba(model, s.image, s.label, cfg_.iba, *stats, rng);
    }
    save_attribution(m, path);
    out.push_back(std::move(m));
  }
  return out;
}

std::size_t Experiment::attribute() {
  std::size_t n = 0;
  for (std::uint64_t seed : cfg_.seeds)
    for (AugmentationKind kind : cfg_.models)
      for (AttributionMethod method : cfg_.methods) {
        say("attributing " + std::string(to_string(kind)) + " seed " + std::to_string(seed) + " with " +
            std::string(to_string(method)));
        n += attributions(kind, seed, method).size();
      }
  return n;
}

ResultRecord Experiment::base_record(AugmentationKind kind, std::uint64_t seed, const std::string& method) const {
  ResultRecord r;
  r.run_id = run_id();
  r.config_hash = cfg_.hash();
  r.augmentation = std::string(to_string(kind));
  r.seed = seed;
  r.model_id = model_id(r.augmentation, seed);
  r.method = method;
  return r;
}

void Experiment::emit(const std::vector<ResultRecord>& records) {
  ensure_run_dir();
  std::vector<ResultRecord> stamped = records;
  const std::string ts = utc_timestamp();
  for (auto& r : stamped) r.timestamp = ts;
  append_records(stamped, run_dir() / "records.jsonl");
}

std::vector<ResultRecord> Experiment::evaluate_alignment() {
  std::vector<ResultRecord> records;
  const ThresholdGrid grid = cfg_.threshold_grid();
  for (std::uint64_t seed : cfg_.seeds) {
    const auto& evals = samples(seed);
    for (AugmentationKind kind : cfg_.models) {
      for (AttributionMethod method : cfg_.methods) {
        say("alignment " + std::string(to_string(kind)) + " seed " + std::to_string(seed) + " " +
            std::string(to_string(method)));
        const auto maps = attributions(kind, seed, method);
        std::vector<double> epg, ehr_v, ehr_raw, wsol;
        long empty = 0;
        std::vector<nlohmann::ordered_json> lines;
        for (std::size_t i = 0; i < evals.size(); ++i) {
          const auto& s = evals[i];
          const BoxSet boxes(s.boxes, s.image.width, s.image.height);
          const double e = energy_pg(maps[i], boxes);
          const EhrResult h = ehr_detailed(maps[i].values, boxes, grid, cfg_.ehr_numerator);
          const WsolResult w = wsol_iou(maps[i], boxes, cfg_.wsol_threshold);
          epg.push_back(e);
          ehr_v.push_back(h.score);
          ehr_raw.push_back(h.raw_auc);
          wsol.push_back(w.iou);
          empty += !w.estimated_box.has_value();
          nlohmann::ordered_json j;
          j["run_id"] = run_id();
          j["config_hash"] = cfg_.hash();
          j["model_id"] = model_id(std::string(to_string(kind)), seed);
          j["method"] = std::string(to_string(method));
          j["sample"] = s.source_index;
          j["energy_pg"] = e;
          j["ehr"] = h.score;
          j["ehr_raw_auc"] = h.raw_auc;
          j["wsol_iou"] = w.iou;
          lines.push_back(std::move(j));
        }
        ensure_run_dir();
        append_json_lines(lines, run_dir() / "samples.jsonl");
        const std::string m(to_string(method));
        const long n = static_cast<long>(evals.size());
        auto add = [&](const std::string& metric, const std::vector<double>& v) {
          ResultRecord r = base_record(kind, seed, m);
          r.metric = metric;
          const MeanSe ms = mean_se(v);
          r.value = ms.mean;
          r.se = ms.se;
          r.n = n;
          records.push_back(r);
          return records.size() - 1;
        };
        add("energy_pg", epg);
        const auto ehr_idx = add("ehr", ehr_v);
        const MeanSe raw = mean_se(ehr_raw);
        records[ehr_idx].extra["raw_auc"] = raw.mean;
        records[ehr_idx].extra["raw_auc_se"] = raw.se;
        const auto wsol_idx = add("wsol_iou", wsol);
        records[wsol_idx].extra["empty_masks"] = static_cast<double>(empty);
      }
    }
  }
  emit(records);
  return records;
}

FaithfulnessSettings Experiment::faithfulness_settings(std::uint64_t seed) {
  FaithfulnessSettings s;
  s.cell_px = cfg_.cell_px;
  s.partition = cfg_.partition;
  s.n_orders = cfg_.n_orders;
  s.stride = cfg_.stride;
  s.rao_seed = splitmix64(seed ^ 0xFA17FA17ull);
  s.fill = cfg_.fill == FillKind::dataset_mean ? ReplacementPolicy::dataset_mean(train_data())
                                               : ReplacementPolicy::image_mean();
  return s;
}

std::vector<ResultRecord> Experiment::evaluate_faithfulness() {
  std::vector<ResultRecord> records;
  for (std::uint64_t seed : cfg_.seeds) {
    const auto& evals = samples(seed);
    std::vector<Image> images;
    for (const auto& s : evals) images.push_back(s.image);
    const FaithfulnessSettings settings = faithfulness_settings(seed);
    for (AugmentationKind kind : cfg_.models) {
      const Model& model = checkpoint(kind, seed).model;
      const ClassOracle oracle = model_oracle(model);
      std::vector<std::vector<AttributionMap>> maps;
      for (AttributionMethod method : cfg_.methods) maps.push_back(attributions(kind, seed, method));
      for (CurveMode mode : {CurveMode::deletion, CurveMode::insertion}) {
        say("faithfulness " + std::string(to_string(kind)) + " seed " + std::to_string(seed) + " " +
            std::string(to_string(mode)));
        const std::vector<ScoreCurve> rao = rao_curves(oracle, images, mode, settings);
        for (std::size_t mi = 0; mi < cfg_.methods.size(); ++mi) {
          const std::string m(to_string(cfg_.methods[mi]));
          const FaithfulnessResult fr = inter_model_score(oracle, images, maps[mi], mode, settings, &rao);
          ResultRecord r = base_record(kind, seed, m);
          r.metric = mode == CurveMode::deletion ? "inter_model_deletion" : "inter_model_insertion";
          r.value = fr.auc;
          r.se = fr.se;
          r.n = static_cast<long>(images.size());
          r.extra["primary_auc"] = 100.0 * trapezoid_auc(fr.primary.x, fr.primary.y);
          r.extra["rao_auc"] = 100.0 * trapezoid_auc(fr.rao.x, fr.rao.y);
          records.push_back(r);

          std::vector<nlohmann::ordered_json> lines;
          const char* primary_name = mode == CurveMode::deletion ? "lerf" : "morf";
          for (const auto& [name, curve] : {std::pair<std::string, const ScoreCurve*>{primary_name, &fr.primary},
                                            {"rao", &fr.rao},
                                            {"difference", &fr.difference}}) {
            nlohmann::ordered_json j;
            j["run_id"] = run_id();
            j["config_hash"] = cfg_.hash();
            j["model_id"] = r.model_id;
            j["augmentation"] = r.augmentation;
            j["seed"] = seed;
            j["method"] = m;
            j["mode"] = std::string(to_string(mode));
            j["curve"] = name;
            j.update(curve_json(*curve));
            lines.push_back(std::move(j));
          }
          ensure_run_dir();
          append_json_lines(lines, run_dir() / "curves.jsonl");
        }
      }
    }
  }
  emit(records);
  return records;
}

std::vector<ResultRecord> Experiment::evaluate_dissection() {
  if (!corpus_) corpus_ = generate_concept_corpus(cfg_.scene, cfg_.corpus_size, cfg_.corpus_seed);
  std::vector<ResultRecord> records;
  for (std::uint64_t seed : cfg_.seeds) {
    for (AugmentationKind kind : cfg_.models) {
      say("dissection " + std::string(to_string(kind)) + " seed " + std::to_string(seed));
      const Model& model = checkpoint(kind, seed).model;
      const DissectionResult d = dissect(model, model.last_conv_boundary(), *corpus_, cfg_.iou_threshold,
                                         cfg_.detector_mode);
      long degenerate = 0;
      for (const auto& p : d.profiles) degenerate += p.degenerate;
      std::vector<nlohmann::ordered_json> lines;
      for (const auto& det : d.detectors) {
        nlohmann::ordered_json j;
        j["run_id"] = run_id();
        j["config_hash"] = cfg_.hash();
        j["model_id"] = model_id(std::string(to_string(kind)), seed);
        j["unit"] = det.unit;
        j["concept"] = det.concept_name;
        j["category"] = std::string(to_string(det.category));
        j["iou"] = det.iou;
        lines.push_back(std::move(j));
      }
      ensure_run_dir();
      append_json_lines(lines, run_dir() / "detectors.jsonl");
      ResultRecord units = base_record(kind, seed, "-");
      units.metric = "detector_units";
      std::set<int> distinct_units;
      for (const auto& det : d.detectors) distinct_units.insert(det.unit);
      units.value = static_cast<double>(distinct_units.size());
      units.n = static_cast<long>(d.profiles.size());
      units.extra["degenerate_units"] = static_cast<double>(degenerate);
      records.push_back(units);
      for (const auto& [cat, count] : count_unique_concepts(d.detectors)) {
        ResultRecord r = base_record(kind, seed, "-");
        r.metric = "unique_" + std::string(to_string(cat));
        r.value = count;
        r.n = static_cast<long>(d.profiles.size());
        records.push_back(r);
      }
    }
  }
  emit(records);
  return records;
}

std::vector<ResultRecord> Experiment::evaluate(const std::vector<Criterion>& criteria) {
  std::vector<ResultRecord> all;
  for (Criterion c : criteria) {
    std::vector<ResultRecord> r;
    switch (c) {
      case Criterion::alignment: r = evaluate_alignment(); break;
      case Criterion::faithfulness: r = evaluate_faithfulness(); break;
      case Criterion::dissection: r = evaluate_dissection(); break;
    }
    all.insert(all.end(), r.begin(), r.end());
  }
  return all;
}

std::vector<DirectionCheck> direction_checks(const std::vector<ResultRecord>& records) {
  const auto latest = latest_records(records);
  std::set<std::uint64_t> seeds;
  for (const auto& r : latest) seeds.insert(r.seed);
  std::vector<DirectionCheck> out;
  const std::vector<std::tuple<std::string, std::string, std::string>> checks{
      {"cutout_first_inter_model_deletion", "inter_model_deletion", "cutout"},
      {"baseline_first_energy_pg", "energy_pg", "baseline"}};
  for (const auto& [name, metric, expected] : checks) {
    for (std::uint64_t seed : seeds) {
      const ResultRecord* best = nullptr;
      for (const auto& r : latest) {
        if (r.seed != seed || r.metric != metric || r.method != "gradcam") continue;
        if (best == nullptr || r.value > best->value) best = &r;
      }
      if (best == nullptr) continue;
      out.push_back({name, seed, expected, best->augmentation, best->augmentation == expected});
    }
  }
  return out;
}

}  // namespace mixinterp
