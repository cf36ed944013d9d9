#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mixinterp {

struct ResultRecord {
  std::string run_id;
  std::string config_hash;
  std::string model_id;      // "<augmentation>/s<seed>"
  std::string augmentation;
  std::uint64_t seed = 0;
  std::string method;        // gradcam, iba, or "-" when not applicable
  std::string metric;
  double value = 0.0;
  double se = 0.0;
  long n = 0;                // samples aggregated
  std::map<std::string, double> extra;
  std::string timestamp;     // UTC, ISO 8601; excluded from comparisons

  // Equality on every field except the timestamp.
  bool same_result(const ResultRecord& o) const;
};

std::string utc_timestamp();
std::string model_id(const std::string& augmentation, std::uint64_t seed);

// One JSON object per line, appended.
void append_records(const std::vector<ResultRecord>& records, const std::filesystem::path& path);
std::vector<ResultRecord> read_records(const std::filesystem::path& path);

// Keeps the last record per (model, method, metric), preserving first-seen order.
std::vector<ResultRecord> latest_records(const std::vector<ResultRecord>& records);

// Mean and standard error of the mean (sample standard deviation / sqrt(n)).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

}  // namespace mixinterp
