#include "mixinterp/dissection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mixinterp/errors.hpp"
#include "mixinterp/tensor_io.hpp"

namespace mixinterp {

namespace {

constexpr int kBatch = 128;

std::string index_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

// Per unit, the upsampled activation field of every corpus image, concatenated.
std::vector<std::vector<float>> unit_fields(const Model& model, int layer, const ConceptCorpus& corpus) {
  if (corpus.size() == 0) throw std::invalid_argument("concept corpus is empty");
  if (layer < 1 || layer >= model.num_boundaries()) throw std::invalid_argument("layer is not a conv boundary");
  const int H = corpus.images.front().height;
  const int W = corpus.images.front().width;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<std::vector<float>> fields;
  const std::span<const Image> all(corpus.images);
  for (std::size_t start = 0; start < corpus.size(); start += kBatch) {
    const std::size_t stop = std::min(corpus.size(), start + kBatch);
    const ForwardTrace t = model.forward(stack(all.subspan(start, stop - start)));
    const Tensor& a = t.boundary[layer];
    if (fields.empty()) {
      fields.resize(a.c);
      for (auto& f : fields) f.reserve(corpus.size() * plane);
    }
    for (int i = 0; i < a.n; ++i)
      for (int k = 0; k < a.c; ++k) {
        Map2d m(a.h, a.w);
        std::copy_n(a.sample(i) + k * a.plane(), a.plane(), m.values.begin());
        const Map2d up = (a.h == H && a.w == W) ? m : resize_bilinear(m, H, W);
        fields[k].insert(fields[k].end(), up.values.begin(), up.values.end());
      }
  }
  return fields;
}

UnitActivationProfile profile_of(int unit, const std::vector<float>& field, double q) {
  UnitActivationProfile p;
  p.unit = unit;
  p.sample_count = static_cast<long>(field.size());
  p.threshold = top_quantile_threshold(field, q);
  long above = 0;
  for (float v : field) above += v > p.threshold;
  p.coverage = static_cast<double>(above) / static_cast<double>(field.size());
  p.degenerate = p.coverage < 0.5 * q;
  return p;
}

struct IouCounts {
  std::vector<double> mask_total;                 // per unit
  std::vector<double> concept_total;              // per concept
  std::vector<std::vector<double>> intersection;  // unit x concept
};

IouCounts count_overlaps(const std::vector<std::vector<float>>& fields,
                         const std::vector<UnitActivationProfile>& profiles, const ConceptCorpus& corpus) {
  const std::size_t plane = corpus.images.front().plane();
  const std::size_t nc = corpus.concepts.size();
  IouCounts c;
  c.mask_total.assign(fields.size(), 0.0);
  c.concept_total.assign(nc, 0.0);
  c.intersection.assign(fields.size(), std::vector<double>(nc, 0.0));
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (const auto& [id, mask] : corpus.masks[i]) c.concept_total[id] += static_cast<double>(mask.count());
  std::vector<std::uint8_t> m(plane);
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const float t = profiles[k].threshold;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const float* f = fields[k].data() + i * plane;
      long on = 0;
      for (std::size_t j = 0; j < plane; ++j) {
        m[j] = f[j] > t;
        on += m[j];
      }
      c.mask_total[k] += static_cast<double>(on);
      if (on == 0) continue;
      for (const auto& [id, mask] : corpus.masks[i]) {
        long inter = 0;
        for (std::size_t j = 0; j < plane; ++j) inter += m[j] & mask.bits[j];
        c.intersection[k][id] += static_cast<double>(inter);
      }
    }
  }
  return c;
}

double iou_from(const IouCounts& c, std::size_t unit, std::size_t concept_id) {
  const double inter = c.intersection[unit][concept_id];
  const double uni = c.mask_total[unit] + c.concept_total[concept_id] - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace

const Concept& ConceptCorpus::concept_by_id(int id) const {
  for (const auto& c : concepts)
    if (c.id == id) return c;
  throw std::invalid_argument("unknown concept id " + std::to_string(id));
}

void ConceptCorpus::validate() const {
  if (images.size() != masks.size()) throw std::invalid_argument("corpus needs one mask set per image");
  for (std::size_t i = 0; i < concepts.size(); ++i)
    if (concepts[i].id != static_cast<int>(i)) throw std::invalid_argument("concept ids must be 0..n-1 in order");
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (const auto& [id, mask] : masks[i]) {
      concept_by_id(id);
      if (mask.height != images[i].height || mask.width != images[i].width)
        throw std::invalid_argument("concept mask does not match its image");
      for (auto b : mask.bits)
        if (b > 1) throw std::invalid_argument("concept mask is not binary");
    }
  }
}

ConceptCorpus generate_concept_corpus(const SceneConfig& config, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("corpus size must be positive");
  const SceneGenerator gen(config);
  ConceptCorpus c;
  c.concepts = gen.concepts();
  for (std::size_t i = 0; i < count; ++i) {
    Scene s = gen.generate_indexed(seed, i, true);
    c.images.push_back(std::move(s.image));
    c.masks.push_back(std::move(s.concept_masks));
  }
  return c;
}

void save_corpus(const ConceptCorpus& corpus, const std::filesystem::path& dir) {
  corpus.validate();
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  {
    std::ofstream out(dir / "concepts.txt", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "concepts.txt").string());
    for (const auto& c : corpus.concepts) out << c.id << '\t' << c.name << '\t' << to_string(c.category) << '\n';
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    TensorFile img = to_tensor_file(corpus.images[i]);
    img.meta["index"] = std::to_string(i);
    write_tensor_file(img, dir / "images" / (index_name(i) + ".tensor"));
    for (const auto& [id, mask] : corpus.masks[i]) {
      TensorFile f;
      f.height = mask.height;
      f.width = mask.width;
      f.data.assign(mask.bits.begin(), mask.bits.end());
      f.meta["image"] = std::to_string(i);
      f.meta["concept"] = std::to_string(id);
      write_tensor_file(f, dir / "masks" / (index_name(i) + "_" + std::to_string(id) + ".tensor"));
    }
  }
}

ConceptCorpus load_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "concepts.txt");
  if (!in) throw MissingArtifact("concept table not found in " + dir.string());
  ConceptCorpus c;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Concept k;
    std::string cat;
    if (!(ls >> k.id) || !(ls >> k.name) || !(ls >> cat)) throw std::invalid_argument("malformed concept line: " + line);
    k.category = parse_category(cat);
    c.concepts.push_back(std::move(k));
  }
  std::vector<std::filesystem::path> image_files;
  for (const auto& e : std::filesystem::directory_iterator(dir / "images")) image_files.push_back(e.path());
  std::sort(image_files.begin(), image_files.end());
  c.masks.resize(image_files.size());
  for (const auto& p : image_files) c.images.push_back(image_from_tensor_file(read_tensor_file(p)));
  for (const auto& e : std::filesystem::directory_iterator(dir / "masks")) {
    const TensorFile f = read_tensor_file(e.path());
    const std::size_t i = std::stoull(f.meta.at("image"));
    const int id = std::stoi(f.meta.at("concept"));
    if (i >= c.images.size()) throw std::invalid_argument("mask refers to a missing image: " + e.path().string());
    BinaryMask m(f.height, f.width);
    for (std::size_t j = 0; j < f.data.size(); ++j) m.bits[j] = f.data[j] > 0.5f ? 1 : 0;
    c.masks[i][id] = std::move(m);
  }
  c.validate();
  return c;
}

float top_quantile_threshold(std::vector<float> values, double q) {
  if (values.empty()) throw std::invalid_argument("no activations to take a quantile of");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile must lie in (0, 1)");
  const std::size_t n = values.size();
  const auto m = static_cast<std::size_t>(std::llround(q * static_cast<double>(n)));
  if (m == 0) return *std::max_element(values.begin(), values.end());
  const auto kth = values.begin() + static_cast<std::ptrdiff_t>(n - m - 1);
  std::nth_element(values.begin(), kth, values.end());
  return *kth;
}

std::vector<UnitActivationProfile> collect_profiles(const Model& model, int layer, const ConceptCorpus& corpus,
                                                    double q) {
  const auto fields = unit_fields(model, layer, corpus);
  std::vector<UnitActivationProfile> out;
  for (std::size_t k = 0; k < fields.size(); ++k) out.push_back(profile_of(static_cast<int>(k), fields[k], q));
  return out;
}

double unit_concept_iou(const Model& model, int layer, const UnitActivationProfile& profile,
                        const ConceptCorpus& corpus, int concept_id) {
  corpus.concept_by_id(concept_id);
  auto fields = unit_fields(model, layer, corpus);
  if (profile.unit < 0 || profile.unit >= static_cast<int>(fields.size()))
    throw std::invalid_argument("unit index out of range");
  std::vector<std::vector<float>> one{std::move(fields[profile.unit])};
  UnitActivationProfile p = profile;
  p.unit = 0;
  const IouCounts c = count_overlaps(one, {p}, corpus);
  return iou_from(c, 0, static_cast<std::size_t>(concept_id));
}

std::vector<DetectorRecord> select_detectors(const std::vector<std::vector<double>>& iou,
                                             const std::vector<Concept>& concepts, double iou_threshold,
                                             DetectorMode mode) {
  std::vector<DetectorRecord> out;
  for (std::size_t k = 0; k < iou.size(); ++k) {
    if (mode == DetectorMode::multi) {
      for (std::size_t c = 0; c < iou[k].size(); ++c)
        if (iou[k][c] > iou_threshold)
          out.push_back({static_cast<int>(k), concepts[c].id, concepts[c].name, concepts[c].category, iou[k][c]});
      continue;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < iou[k].size(); ++c)
      if (iou[k][c] > iou[k][best]) best = c;
    if (!iou[k].empty() && iou[k][best] > iou_threshold)
      out.push_back({static_cast<int>(k), concepts[best].id, concepts[best].name, concepts[best].category,
                     iou[k][best]});
  }
  return out;
}

DissectionResult dissect(const Model& model, int layer, const ConceptCorpus& corpus, double iou_threshold,
                         DetectorMode mode) {
  corpus.validate();
  const auto fields = unit_fields(model, layer, corpus);
  DissectionResult r;
  for (std::size_t k = 0; k < fields.size(); ++k) r.profiles.push_back(profile_of(static_cast<int>(k), fields[k], kTopQuantile));
  const IouCounts c = count_overlaps(fields, r.profiles, corpus);
  r.iou.assign(fields.size(), std::vector<double>(corpus.concepts.size(), 0.0));
  for (std::size_t k = 0; k < fields.size(); ++k)
    for (std::size_t id = 0; id < corpus.concepts.size(); ++id) r.iou[k][id] = iou_from(c, k, id);
  r.detectors = select_detectors(r.iou, corpus.concepts, iou_threshold, mode);
  return r;
}

std::vector<DetectorRecord> find_detectors(const Model& model, int layer, const ConceptCorpus& corpus,
                                           double iou_threshold, DetectorMode mode) {
  return dissect(model, layer, corpus, iou_threshold, mode).detectors;
}

std::map<ConceptCategory, int> count_unique_concepts(const std::vector<DetectorRecord>& records) {
  std::map<ConceptCategory, std::set<int>> seen;
  for (const auto& r : records) seen[r.category].insert(r.concept_id);
  std::map<ConceptCategory, int> out;
  for (auto cat : {ConceptCategory::object, ConceptCategory::part, ConceptCategory::material, ConceptCategory::color})
    out[cat] = static_cast<int>(seen[cat].size());
  return out;
}

}  // namespace mixinterp
