#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mixinterp/errors.hpp"
#include "mixinterp/experiment.hpp"
#include "mixinterp/tensor_io.hpp"

namespace mixinterp {

namespace {

const std::vector<std::string> kRegimeOrder{"baseline", "cutout", "mixup", "cutmix", "saliencymix"};
const std::map<std::string, std::string> kDisplay{{"baseline", "Baseline"}, {"cutout", "Cutout"}, {"mixup", "Mixup"},
                                                  {"cutmix", "CutMix"},     {"saliencymix", "SaliencyMix"}};
const std::map<std::string, std::string> kColor{{"baseline", "#1f77b4"}, {"cutout", "#ff7f0e"}, {"mixup", "#2ca02c"},
                                                {"cutmix", "#d62728"},   {"saliencymix", "#9467bd"}};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none",
            double stroke_width = 1.0) {
    body_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h << "\" fill=\"" << fill
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << stroke_width << "\"/>\n";
  }
  void line(double x0, double y0, double x1, double y1, const std::string& stroke, double width = 1.0) {
    body_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y1 << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << width << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << x << ',' << y << ' ';
    body_ << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 12, const std::string& anchor = "start",
            double rotate = 0.0) {
    body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size << "\" font-family=\"sans-serif\" text-anchor=\""
          << anchor << "\"";
    if (rotate != 0.0) body_ << " transform=\"rotate(" << rotate << ' ' << x << ' ' << y << ")\"";
    body_ << '>' << s << "</text>\n";
  }
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_ << "\" viewBox=\"0 0 "
        << w_ << ' ' << h_ << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
  }

 private:
  double w_, h_;
  std::ostringstream body_;
};

std::string rgb_hex(double r, double g, double b) {
  auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
  return buf;
}

// Blue-to-red heat colours.
std::array<double, 3> heat(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const double r = std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0);
  const double g = std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0);
  const double b = std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0);
  return {r, g, b};
}

std::vector<std::string> present_regimes(const std::vector<ResultRecord>& recs) {
  std::set<std::string> have;
  for (const auto& r : recs) have.insert(r.augmentation);
  std::vector<std::string> out;
  for (const auto& k : kRegimeOrder)
    if (have.count(k)) out.push_back(k);
  return out;
}

// Across seeds: mean of the per-seed values; SE of that mean from the per-seed SEs.
std::optional<MeanSe> pooled(const std::vector<ResultRecord>& recs, const std::string& regime,
                             const std::string& method, const std::string& metric) {
  std::vector<const ResultRecord*> hits;
  for (const auto& r : recs)
    if (r.augmentation == regime && r.method == method && r.metric == metric) hits.push_back(&r);
  if (hits.empty()) return std::nullopt;
  MeanSe m;
  double var = 0.0;
  for (const auto* r : hits) {
    m.mean += r->value;
    var += r->se * r->se;
  }
  const double k = static_cast<double>(hits.size());
  m.mean /= k;
  m.se = std::sqrt(var) / k;
  return m;
}

std::string cell(const std::optional<MeanSe>& v, const char* mean_fmt, const char* se_fmt) {
  if (!v) return "n/a";
  return fmt(mean_fmt, v->mean) + " ± " + fmt(se_fmt, v->se);
}

std::filesystem::path write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "\t" : "") << r[i];
    out << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return path;
}

struct CurveRow {
  std::string augmentation;
  std::string method;
  std::string mode;
  std::string curve;
  std::vector<double> x, y;
};

std::vector<CurveRow> read_curves(const std::filesystem::path& path) {
  std::vector<CurveRow> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("augmentation"), j.at("method"), j.at("mode"), j.at("curve"),
                   j.at("x").get<std::vector<double>>(), j.at("y").get<std::vector<double>>()});
  }
  return out;
}

// Mean curve over seeds (the last record per seed wins).
std::optional<std::pair<std::vector<double>, std::vector<double>>> seed_mean_curve(const std::vector<CurveRow>& rows,
                                                                                   const std::string& regime,
                                                                                   const std::string& method,
                                                                                   const std::string& mode,
                                                                                   const std::string& curve) {
  std::vector<const CurveRow*> hits;
  for (const auto& r : rows)
    if (r.augmentation == regime && r.method == method && r.mode == mode && r.curve == curve) hits.push_back(&r);
  if (hits.empty()) return std::nullopt;
  std::vector<double> y(hits.front()->y.size(), 0.0);
  std::size_t used = 0;
  for (const auto* h : hits) {
    if (h->y.size() != y.size()) continue;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h->y[i];
    ++used;
  }
  for (double& v : y) v /= static_cast<double>(used);
  return std::make_pair(hits.front()->x, y);
}

std::filesystem::path plot_curves(const std::filesystem::path& path, const std::vector<CurveRow>& rows,
                                  const std::vector<std::string>& regimes, const std::string& method) {
  const double pw = 260, ph = 200, ml = 60, mt = 40, gap_x = 50, gap_y = 70;
  Svg svg(ml + 3 * pw + 2 * gap_x + 140, mt + 2 * ph + gap_y + 60);
  struct Panel {
    std::string label, mode, curve, xlabel;
    bool difference;
  };
  const std::vector<Panel> panels{{"(a) LeRF", "deletion", "lerf", "fraction removed", false},
                                  {"(b) RaO", "deletion", "rao", "fraction removed", false},
                                  {"(c) LeRF - RaO", "deletion", "difference", "fraction removed", true},
                                  {"(d) MoRF", "insertion", "morf", "fraction inserted", false},
                                  {"(e) RaO", "insertion", "rao", "fraction inserted", false},
                                  {"(f) MoRF - RaO", "insertion", "difference", "fraction inserted", true}};
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& pn = panels[p];
    const double x0 = ml + static_cast<double>(p % 3) * (pw + gap_x);
    const double y0 = mt + static_cast<double>(p / 3) * (ph + gap_y);
    const double ylo = pn.difference ? -0.5 : 0.0, yhi = pn.difference ? 0.5 : 1.0;
    auto sx = [&](double x) { return x0 + x * pw; };
    auto sy = [&](double y) { return y0 + ph - (std::clamp(y, ylo, yhi) - ylo) / (yhi - ylo) * ph; };
    svg.rect(x0, y0, pw, ph, "none", "black");
    for (double t : {0.0, 0.5, 1.0}) {
      svg.text(sx(t), y0 + ph + 14, fmt("%.1f", t), 10, "middle");
      const double yv = ylo + t * (yhi - ylo);
      svg.text(x0 - 4, sy(yv) + 4, fmt("%.1f", yv), 10, "end");
    }
    if (pn.difference) svg.line(x0, sy(0.0), x0 + pw, sy(0.0), "#999999");
    svg.text(x0 + pw / 2, y0 - 8, pn.label, 13, "middle");
    svg.text(x0 + pw / 2, y0 + ph + 32, pn.xlabel, 11, "middle");
    svg.text(x0 - 38, y0 + ph / 2, "normalized model score", 11, "middle", -90);
    for (const auto& reg : regimes) {
      const auto c = seed_mean_curve(rows, reg, method, pn.mode, pn.curve);
      if (!c) continue;
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < c->first.size(); ++i) pts.emplace_back(sx(c->first[i]), sy(c->second[i]));
      svg.polyline(pts, kColor.at(reg));
    }
  }
  const double lx = ml + 3 * pw + 2 * gap_x + 10;
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    svg.line(lx, mt + 20 + 18 * i, lx + 20, mt + 20 + 18 * i, kColor.at(regimes[i]), 3);
    svg.text(lx + 26, mt + 24 + 18 * i, kDisplay.at(regimes[i]), 11);
  }
  svg.text(ml, 20, "Deletion / insertion curves (" + method + ")", 14);
  svg.save(path);
  return path;
}

std::filesystem::path plot_concepts(const std::filesystem::path& path, const std::vector<ResultRecord>& recs,
                                    const std::vector<std::string>& regimes) {
  const std::vector<std::string> cats{"object", "part", "material", "color"};
  double ymax = 1.0;
  std::map<std::pair<std::string, std::string>, double> v;
  for (const auto& reg : regimes)
    for (const auto& c : cats) {
      const auto m = pooled(recs, reg, "-", "unique_" + c);
      v[{reg, c}] = m ? m->mean : 0.0;
      ymax = std::max(ymax, v[{reg, c}]);
    }
  const double ml = 60, mt = 40, ph = 260, group = 170, bar = 26;
  Svg svg(ml + group * cats.size() + 150, mt + ph + 70);
  svg.rect(ml, mt, group * cats.size(), ph, "none", "black");
  for (int t = 0; t <= 4; ++t) {
    const double yv = ymax * t / 4.0;
    const double y = mt + ph - yv / ymax * ph;
    svg.line(ml - 4, y, ml, y, "black");
    svg.text(ml - 6, y + 4, fmt("%.1f", yv), 10, "end");
  }
  for (std::size_t ci = 0; ci < cats.size(); ++ci) {
    const double gx = ml + group * ci + (group - bar * regimes.size()) / 2;
    for (std::size_t ri = 0; ri < regimes.size(); ++ri) {
      const double h = v[{regimes[ri], cats[ci]}] / ymax * ph;
      svg.rect(gx + bar * ri, mt + ph - h, bar - 4, h, kColor.at(regimes[ri]));
    }
    svg.text(ml + group * ci + group / 2, mt + ph + 18, cats[ci], 12, "middle");
  }
  svg.text(ml - 40, mt + ph / 2, "unique concepts", 12, "middle", -90);
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    const double lx = ml + group * cats.size() + 15;
    svg.rect(lx, mt + 10 + 18 * i, 14, 12, kColor.at(regimes[i]));
    svg.text(lx + 20, mt + 21 + 18 * i, kDisplay.at(regimes[i]), 11);
  }
  svg.text(ml, 20, "Unique concepts per category (detector IoU above threshold)", 14);
  svg.save(path);
  return path;
}

std::vector<Rect> parse_boxes(const std::string& s) {
  std::vector<Rect> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ';')) {
    std::istringstream b(item);
    Rect r;
    if (b >> r.x0 >> r.y0 >> r.x1 >> r.y1) out.push_back(r);
  }
  return out;
}

std::optional<std::filesystem::path> plot_heatmaps(const std::filesystem::path& run_dir,
                                                   const std::filesystem::path& path, const std::string& method,
                                                   const std::vector<std::string>& regimes, std::uint64_t seed,
                                                   std::size_t rows) {
  const auto eval_dir = run_dir / "eval" / ("s" + std::to_string(seed));
  if (!std::filesystem::exists(eval_dir)) return std::nullopt;
  std::vector<std::pair<std::size_t, std::filesystem::path>> files;
  for (const auto& e : std::filesystem::directory_iterator(eval_dir))
    files.emplace_back(std::stoull(e.path().stem().string()), e.path());
  std::sort(files.begin(), files.end());
  if (files.size() > rows) files.resize(rows);
  const double px = 4.0, tile = 32 * px, gap = 10, ml = 10, mt = 40;
  Svg svg(ml + (tile + gap) * (regimes.size() + 1), mt + (tile + gap) * files.size() + 10);
  bool any = false;
  for (std::size_t r = 0; r < files.size(); ++r) {
    const TensorFile f = read_tensor_file(files[r].second);
    const Image img = image_from_tensor_file(f);
    const auto boxes = parse_boxes(f.meta.count("boxes") ? f.meta.at("boxes") : "");
    const double scale = tile / img.width;
    const double y0 = mt + r * (tile + gap);
    auto draw_boxes = [&](double x0) {
      for (const auto& b : boxes)
        svg.rect(x0 + b.x0 * scale, y0 + b.y0 * scale, b.width() * scale, b.height() * scale, "none", "red", 2);
    };
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        svg.rect(ml + x * scale, y0 + y * scale, scale, scale,
                 rgb_hex(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)));
    draw_boxes(ml);
    for (std::size_t c = 0; c < regimes.size(); ++c) {
      const double x0 = ml + (c + 1) * (tile + gap);
      const auto map_path = run_dir / "attributions" / (regimes[c] + "_s" + std::to_string(seed)) / method /
                            (std::to_string(files[r].first) + ".tensor");
      if (!std::filesystem::exists(map_path)) continue;
      const AttributionMap m = load_attribution(map_path);
      any = true;
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const auto h = heat(m.values.at(y, x));
          const double a = 0.55;
          svg.rect(x0 + x * scale, y0 + y * scale, scale, scale,
                   rgb_hex(a * h[0] + (1 - a) * img.at(0, y, x), a * h[1] + (1 - a) * img.at(1, y, x),
                           a * h[2] + (1 - a) * img.at(2, y, x)));
        }
      draw_boxes(x0);
    }
  }
  if (!any) return std::nullopt;
  svg.text(ml + tile / 2, mt - 8, "input", 12, "middle");
  for (std::size_t c = 0; c < regimes.size(); ++c)
    svg.text(ml + (c + 1) * (tile + gap) + tile / 2, mt - 8, kDisplay.at(regimes[c]), 12, "middle");
  svg.text(ml, 16, method + " attribution maps; ground-truth boxes in red", 13);
  svg.save(path);
  return path;
}

}  // namespace

ReportFiles write_report(const std::filesystem::path& run_dir) {
  const auto records_path = run_dir / "records.jsonl";
  if (!std::filesystem::exists(records_path)) throw MissingArtifact("no records for run at " + run_dir.string());
  const auto recs = latest_records(read_records(records_path));
  if (recs.empty()) throw MissingArtifact("run at " + run_dir.string() + " has no data");
  const auto out_dir = run_dir / "report";
  std::filesystem::create_directories(out_dir);
  const auto regimes = present_regimes(recs);
  ReportFiles files;

  std::vector<std::vector<std::string>> t1, tw, t2, t3, t4;
  for (const auto& reg : regimes) {
    const std::string name = kDisplay.at(reg);
    t1.push_back({name, cell(pooled(recs, reg, "gradcam", "energy_pg"), "%.3f", "%.3f"),
                  cell(pooled(recs, reg, "gradcam", "ehr"), "%.3f", "%.3f"),
                  cell(pooled(recs, reg, "iba", "energy_pg"), "%.3f", "%.3f"),
                  cell(pooled(recs, reg, "iba", "ehr"), "%.3f", "%.3f")});
    tw.push_back({name, cell(pooled(recs, reg, "gradcam", "wsol_iou"), "%.3f", "%.3f"),
                  cell(pooled(recs, reg, "iba", "wsol_iou"), "%.3f", "%.3f")});
    t2.push_back({name, cell(pooled(recs, reg, "gradcam", "inter_model_deletion"), "%.3f", "%.4f"),
                  cell(pooled(recs, reg, "iba", "inter_model_deletion"), "%.3f", "%.4f")});
    t3.push_back({name, cell(pooled(recs, reg, "gradcam", "inter_model_insertion"), "%.3f", "%.4f"),
                  cell(pooled(recs, reg, "iba", "inter_model_insertion"), "%.3f", "%.4f")});
    std::vector<std::string> row{name};
    for (const char* c : {"object", "part", "material", "color"}) {
      const auto m = pooled(recs, reg, "-", std::string("unique_") + c);
      row.push_back(m ? fmt("%.2f", m->mean) : "n/a");
    }
    t4.push_back(row);
  }
  files.tables.push_back(write_table(out_dir / "alignment.tsv",
                                     {"model", "GradCAM EnergyPG", "GradCAM EHR", "IBA EnergyPG", "IBA EHR"}, t1));
  files.tables.push_back(write_table(out_dir / "wsol.tsv", {"model", "GradCAM WSOL IoU", "IBA WSOL IoU"}, tw));
  files.tables.push_back(write_table(out_dir / "inter_model_deletion.tsv", {"model", "GradCAM", "IBA"}, t2));
  files.tables.push_back(write_table(out_dir / "inter_model_insertion.tsv", {"model", "GradCAM", "IBA"}, t3));
  files.tables.push_back(
      write_table(out_dir / "unique_concepts.tsv", {"model", "object", "part", "material", "color"}, t4));

  std::vector<std::vector<std::string>> det_rows;
  if (std::ifstream in(run_dir / "detectors.jsonl"); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      det_rows.push_back({j.at("model_id").get<std::string>(), std::to_string(j.at("unit").get<int>()),
                          j.at("concept").get<std::string>(), j.at("category").get<std::string>(),
                          fmt("%.4f", j.at("iou").get<double>())});
    }
  }
  files.tables.push_back(write_table(out_dir / "detectors.tsv", {"model", "unit", "concept", "category", "iou"}, det_rows));

  std::vector<std::vector<std::string>> dir_rows;
  for (const auto& d : direction_checks(recs))
    dir_rows.push_back({d.name, std::to_string(d.seed), d.expected, d.observed, d.holds ? "yes" : "no"});
  files.tables.push_back(
      write_table(out_dir / "directions.tsv", {"check", "seed", "expected", "observed", "holds"}, dir_rows));

  const auto curves = read_curves(run_dir / "curves.jsonl");
  std::set<std::string> methods;
  for (const auto& c : curves) methods.insert(c.method);
  for (const auto& m : methods) files.plots.push_back(plot_curves(out_dir / ("curves_" + m + ".svg"), curves, regimes, m));
  bool have_concepts = false;
  for (const auto& r : recs) have_concepts = have_concepts || r.metric.rfind("unique_", 0) == 0;
  if (have_concepts) files.plots.push_back(plot_concepts(out_dir / "unique_concepts.svg", recs, regimes));
  std::set<std::uint64_t> seeds;
  for (const auto& r : recs) seeds.insert(r.seed);
  std::set<std::string> map_methods;
  for (const auto& r : recs)
    if (r.method != "-") map_methods.insert(r.method);
  if (!seeds.empty())
    for (const auto& m : map_methods)
      if (auto p = plot_heatmaps(run_dir, out_dir / ("heatmaps_" + m + ".svg"), m, regimes, *seeds.begin(), 4))
        files.plots.push_back(*p);
  return files;
}

}  // namespace mixinterp
