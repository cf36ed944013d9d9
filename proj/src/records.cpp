#include "mixinterp/records.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mixinterp/errors.hpp"

namespace mixinterp {

bool ResultRecord::same_result(const ResultRecord& o) const {
  return run_id == o.run_id && config_hash == o.config_hash && model_id == o.model_id &&
         augmentation == o.augmentation && seed == o.seed && method == o.method && metric == o.metric &&
         value == o.value && se == o.se && n == o.n && extra == o.extra;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string model_id(const std::string& augmentation, std::uint64_t seed) {
  return augmentation + "/s" + std::to_string(seed);
}

void append_records(const std::vector<ResultRecord>& records, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["run_id"] = r.run_id;
    j["config_hash"] = r.config_hash;
    j["model_id"] = r.model_id;
    j["augmentation"] = r.augmentation;
    j["seed"] = r.seed;
    j["method"] = r.method;
    j["metric"] = r.metric;
    j["value"] = r.value;
    j["se"] = r.se;
    j["n"] = r.n;
    j["extra"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.extra) j["extra"][k] = v;
    j["timestamp"] = r.timestamp;
    out << j.dump() << '\n';
  }
}

std::vector<ResultRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("result records not found: " + path.string());
  std::vector<ResultRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ResultRecord r;
      r.run_id = j.at("run_id").get<std::string>();
      r.config_hash = j.at("config_hash").get<std::string>();
      r.model_id = j.at("model_id").get<std::string>();
      r.augmentation = j.at("augmentation").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.method = j.at("method").get<std::string>();
      r.metric = j.at("metric").get<std::string>();
      r.value = j.at("value").get<double>();
      r.se = j.at("se").get<double>();
      r.n = j.at("n").get<long>();
      for (const auto& [k, v] : j.at("extra").items()) r.extra[k] = v.get<double>();
      r.timestamp = j.at("timestamp").get<std::string>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ResultRecord> latest_records(const std::vector<ResultRecord>& records) {
  std::vector<ResultRecord> out;
  for (const auto& r : records) {
    bool replaced = false;
    for (auto& o : out) {
      if (o.model_id == r.model_id && o.method == r.method && o.metric == r.metric) {
        o = r;
        replaced = true;
        break;
      }
    }
    if (!replaced) out.push_back(r);
  }
  return out;
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe m;
  if (values.empty()) return m;
  double s = 0.0;
  for (double v : values) s += v;
  m.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return m;
}

}  // namespace mixinterp
