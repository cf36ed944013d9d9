#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixinterp/config.hpp"
#include "mixinterp/records.hpp"

namespace mixinterp {

enum class Criterion { alignment, faithfulness, dissection };

// Owns the generated datasets and the on-disk layout of one configuration:
//
//   <out>/checkpoints/<training hash>/<regime>_s<seed>.ckpt (+ .log.jsonl)
//   <out>/runs/<run id>/config.txt
//   <out>/runs/<run id>/records.jsonl    aggregate ResultRecords
//   <out>/runs/<run id>/samples.jsonl    per-sample alignment values
//   <out>/runs/<run id>/curves.jsonl     mean deletion/insertion curves
//   <out>/runs/<run id>/detectors.jsonl  dissection detector rows
//   <out>/runs/<run id>/attributions/<regime>_s<seed>/<method>/<index>.tensor
//   <out>/runs/<run id>/eval/s<seed>/<index>.tensor  selected evaluation images
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config, std::ostream* log = nullptr);

  const ExperimentConfig& config() const { return cfg_; }
  std::string run_id() const { return cfg_.effective_run_id(); }
  std::filesystem::path run_dir() const;
  std::filesystem::path checkpoint_path(AugmentationKind kind, std::uint64_t seed) const;

  const Dataset& train_data();
  const Dataset& val_data();
  const Dataset& eval_pool();

  // Trains every configured (regime, seed) pair whose checkpoint is absent.
  std::vector<std::filesystem::path> train(bool overwrite = false);
  // Throws MissingArtifact naming the command that produces the checkpoint.
  const ModelCheckpoint& checkpoint(AugmentationKind kind, std::uint64_t seed);

  // Evaluation samples for a seed, filtered against every configured model.
  const std::vector<EvalSample>& samples(std::uint64_t seed);

  // Maps for the seed's samples; read from disk when present, otherwise
  // computed and saved.
  std::vector<AttributionMap> attributions(AugmentationKind kind, std::uint64_t seed, AttributionMethod method);

  // Computes and stores every configured attribution map; returns the number of maps.
  std::size_t attribute();
  std::vector<ResultRecord> evaluate_alignment();
  std::vector<ResultRecord> evaluate_faithfulness();
  std::vector<ResultRecord> evaluate_dissection();
  std::vector<ResultRecord> evaluate(const std::vector<Criterion>& criteria);

 private:
  void ensure_run_dir();
  ResultRecord base_record(AugmentationKind kind, std::uint64_t seed, const std::string& method) const;
  void emit(const std::vector<ResultRecord>& records);
  FaithfulnessSettings faithfulness_settings(std::uint64_t seed);
  void say(const std::string& line);

  ExperimentConfig cfg_;
  std::ostream* log_;
  std::optional<Dataset> train_, val_, pool_;
  std::map<std::pair<int, std::uint64_t>, ModelCheckpoint> models_;
  std::map<std::uint64_t, std::vector<EvalSample>> samples_;
  std::map<std::pair<int, std::uint64_t>, FeatureStats> iba_stats_;
  std::optional<ConceptCorpus> corpus_;
};

struct DirectionCheck {
  std::string name;
  std::uint64_t seed = 0;
  std::string expected;  // regime expected to rank first
  std::string observed;  // regime that ranked first
  bool holds = false;
};

// The two directional checks, per seed: Cutout first in GradCAM inter-model
// deletion and Baseline first in GradCAM EnergyPG.
std::vector<DirectionCheck> direction_checks(const std::vector<ResultRecord>& records);

struct ReportFiles {
  std::vector<std::filesystem::path> tables;
  std::vector<std::filesystem::path> plots;
};

// Regenerates tables and plots of a run from its record files.
ReportFiles write_report(const std::filesystem::path& run_dir);

}  // namespace mixinterp
