#include "mixinterp/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mixinterp/errors.hpp"
#include "mixinterp/tensor_io.hpp"

namespace mixinterp {

namespace {

constexpr int kCalibrationBatch = 128;

void check_class(const Model& model, int target_class) {
  if (target_class < 0 || target_class >= model.arch().num_classes)
    throw std::invalid_argument("target class " + std::to_string(target_class) + " out of range");
}

void check_image(const Model& model, const Image& image) {
  const ArchConfig& a = model.arch();
  if (image.channels != a.in_channels || image.height != a.image_size || image.width != a.image_size)
    throw std::invalid_argument("image does not match the model resolution");
}

int resolve_layer(const Model& model, int layer) {
  if (layer < 0) return model.last_conv_boundary();
  if (layer < 1 || layer >= model.num_boundaries()) throw std::invalid_argument("layer is not a conv boundary");
  return layer;
}

double sigmoid(double a) { return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a)); }

// log(1 + exp(a)) without overflow.
double softplus(double a) { return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }

}  // namespace

std::string_view to_string(AttributionMethod m) { return m == AttributionMethod::gradcam ? "gradcam" : "iba"; }

AttributionMethod parse_method(std::string_view name) {
  if (name == "gradcam") return AttributionMethod::gradcam;
  if (name == "iba") return AttributionMethod::iba;
  throw std::invalid_argument("unknown attribution method '" + std::string(name) + "'");
}

AttributionMap normalize(const AttributionMap& map) {
  AttributionMap out = map;
  out.values = normalize_minmax(map.values);
  out.normalized = true;
  return out;
}

void save_attribution(const AttributionMap& map, const std::filesystem::path& path) {
  TensorFile f = to_tensor_file(map.values);
  f.meta["method"] = std::string(to_string(map.method));
  f.meta["class"] = std::to_string(map.target_class);
  f.meta["normalized"] = map.normalized ? "1" : "0";
  write_tensor_file(f, path);
}

AttributionMap load_attribution(const std::filesystem::path& path) {
  const TensorFile f = read_tensor_file(path);
  AttributionMap m;
  m.values = map_from_tensor_file(f);
  try {
    m.method = parse_method(f.meta.at("method"));
    m.target_class = std::stoi(f.meta.at("class"));
    m.normalized = f.meta.at("normalized") == "1";
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("attribution file lacks method/class/normalized: " + path.string());
  }
  return m;
}

Map2d gradcam_raw(const Model& model, const Image& image, int target_class, int layer) {
  check_class(model, target_class);
  check_image(model, image);
  layer = resolve_layer(model, layer);
  const Tensor x = stack(std::span<const Image>(&image, 1));
  const ForwardTrace trace = model.forward(x);
  Tensor dl(1, model.arch().num_classes, 1, 1);
  dl.data[target_class] = 1.0f;
  const auto grads = model.backward(trace, dl, nullptr, layer);
  const Tensor& act = trace.boundary[layer];
  const Tensor& g = grads[layer];
  const std::size_t plane = act.plane();
  std::vector<double> cam(plane, 0.0);
  for (int c = 0; c < act.c; ++c) {
    const float* gp = g.sample(0) + c * plane;
    const float* ap = act.sample(0) + c * plane;
    double w = 0.0;
    for (std::size_t j = 0; j < plane; ++j) w += gp[j];
    w /= static_cast<double>(plane);
    for (std::size_t j = 0; j < plane; ++j) cam[j] += w * ap[j];
  }
  Map2d out(act.h, act.w);
  for (std::size_t j = 0; j < plane; ++j) out.values[j] = static_cast<float>(std::max(0.0, cam[j]));
  return out;
}

AttributionMap gradcam(const Model& model, const Image& image, int target_class, int layer) {
  const Map2d raw = gradcam_raw(model, image, target_class, layer);
  Map2d up = resize_bilinear(raw, image.height, image.width);
  for (float& v : up.values) v = std::max(0.0f, v);
  AttributionMap m{std::move(up), target_class, AttributionMethod::gradcam, false};
  return normalize(m);
}

int default_iba_layer(const Model& model) {
  const int stages = static_cast<int>(model.arch().stage_widths.size());
  return model.stage_output_boundary(stages >= 2 ? stages - 2 : -1);
}

FeatureStats iba_fit_statistics(const Model& model, int layer, std::span<const Image> calibration,
                                std::size_t min_images) {
  if (calibration.empty()) throw std::invalid_argument("calibration set is empty");
  if (calibration.size() < min_images)
    throw std::invalid_argument("calibration set has " + std::to_string(calibration.size()) + " images, " +
                                std::to_string(min_images) + " required");
  layer = resolve_layer(model, layer);
  std::vector<double> sum;
  std::vector<double> sumsq;
  long count = 0;
  for (std::size_t start = 0; start < calibration.size(); start += kCalibrationBatch) {
    const std::size_t stop = std::min(calibration.size(), start + kCalibrationBatch);
    for (std::size_t i = start; i < stop; ++i) check_image(model, calibration[i]);
    const ForwardTrace t = model.forward(stack(calibration.subspan(start, stop - start)));
    const Tensor& a = t.boundary[layer];
    if (sum.empty()) {
      sum.assign(a.c, 0.0);
      sumsq.assign(a.c, 0.0);
    }
    for (int i = 0; i < a.n; ++i)
      for (int c = 0; c < a.c; ++c) {
        const float* p = a.sample(i) + c * a.plane();
        for (std::size_t j = 0; j < a.plane(); ++j) {
          sum[c] += p[j];
          sumsq[c] += static_cast<double>(p[j]) * p[j];
        }
      }
    count += static_cast<long>(a.n) * static_cast<long>(a.plane());
  }
  FeatureStats s;
  s.layer = layer;
  s.count = count;
  for (std::size_t c = 0; c < sum.size(); ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sumsq[c] / count - mean * mean);
    const double sd = std::sqrt(var);
    const bool low = !(sd >= FeatureStats::kStdFloor);
    s.mean.push_back(static_cast<float>(mean));
    s.stddev.push_back(low ? FeatureStats::kStdFloor : static_cast<float>(sd));
    s.floored.push_back(low);
  }
  return s;
}

IbaResult iba_detailed(const Model& model, const Image& image, int target_class, const IbaSettings& settings,
                       const FeatureStats& stats, SeededRandom& rng) {
  check_class(model, target_class);
  check_image(model, image);
  if (!(settings.beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (settings.steps < 1 || settings.noise_samples < 1) throw std::invalid_argument("steps and noise samples must be >= 1");
  const int layer = stats.layer;
  if (layer < 1 || layer >= model.num_boundaries()) throw std::invalid_argument("statistics come from an invalid layer");

  const ForwardTrace clean = model.forward(stack(std::span<const Image>(&image, 1)), 0);
  const Tensor& f = clean.boundary[layer];
  if (static_cast<int>(stats.mean.size()) != f.c) throw std::invalid_argument("statistics do not match the layer width");
  const int C = f.c;
  const std::size_t P = f.plane();
  const int S = settings.noise_samples;
  const double kl_scale = 1.0 / (static_cast<double>(C) * static_cast<double>(P));

  // Standardised feature r = (f - mu) / sigma, used by the closed-form KL.
  std::vector<double> r(static_cast<std::size_t>(C) * P);
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P; ++p)
      r[c * P + p] = (f.data[c * P + p] - stats.mean[c]) / static_cast<double>(stats.stddev[c]);

  std::vector<double> alpha(P, settings.initial_alpha);
  std::vector<double> adam_m(P, 0.0);
  std::vector<double> adam_v(P, 0.0);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  IbaResult result;
  Tensor z(S, C, f.h, f.w);
  std::vector<float> noise(z.size());
  for (int step = 1; step <= settings.steps; ++step) {
    std::vector<double> m(P);
    for (std::size_t p = 0; p < P; ++p) m[p] = sigmoid(alpha[p]);
    for (auto& e : noise) e = static_cast<float>(rng.normal());
    for (int s = 0; s < S; ++s)
      for (int c = 0; c < C; ++c)
        for (std::size_t p = 0; p < P; ++p) {
          const std::size_t k = (static_cast<std::size_t>(s) * C + c) * P + p;
          const double prior = stats.mean[c] + static_cast<double>(stats.stddev[c]) * noise[k];
          z.data[k] = static_cast<float>(m[p] * f.data[c * P + p] + (1.0 - m[p]) * prior);
        }
    const ForwardTrace t = model.forward(z, layer);
    std::vector<int> la(S, target_class);
    std::vector<float> wa(S, 1.0f);
    Tensor dlogits;
    const double ce = mixed_cross_entropy(t.logits, la, la, wa, &dlogits);
    const auto g = model.backward(t, dlogits, nullptr, layer);
    const Tensor& gz = g[layer];

    double kl = 0.0;
    std::vector<double> dalpha(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      const double mp = m[p];
      const double om = sigmoid(-alpha[p]);  // 1 - m, accurate near m = 1
      const double log_om = -softplus(alpha[p]);
      double dm_ce = 0.0;
      for (int s = 0; s < S; ++s)
        for (int c = 0; c < C; ++c) {
          const std::size_t k = (static_cast<std::size_t>(s) * C + c) * P + p;
          const double prior = stats.mean[c] + static_cast<double>(stats.stddev[c]) * noise[k];
          dm_ce += gz.data[k] * (f.data[c * P + p] - prior);
        }
      double dkl_dalpha = 0.0;
      for (int c = 0; c < C; ++c) {
        const double rr = r[c * P + p] * r[c * P + p];
        kl += 0.5 * (om * om + mp * mp * rr - 1.0) - log_om;
        // d/dalpha of the KL; the 1/(1-m) term cancels against dm/dalpha = m(1-m).
        dkl_dalpha += mp * om * (mp * rr - om) + mp;
      }
      dalpha[p] = dm_ce * mp * om + settings.beta * kl_scale * dkl_dalpha;
    }
    const double loss = ce + settings.beta * kl * kl_scale;
    if (!std::isfinite(loss)) throw AttributionFailure("IBA loss became non-finite at step " + std::to_string(step));
    result.loss.push_back(loss);
    const double c1 = 1.0 - std::pow(b1, step);
    const double c2 = 1.0 - std::pow(b2, step);
    for (std::size_t p = 0; p < P; ++p) {
      adam_m[p] = b1 * adam_m[p] + (1 - b1) * dalpha[p];
      adam_v[p] = b2 * adam_v[p] + (1 - b2) * dalpha[p] * dalpha[p];
      alpha[p] -= settings.learning_rate * (adam_m[p] / c1) / (std::sqrt(adam_v[p] / c2) + eps);
    }
  }

  result.information = Map2d(f.h, f.w);
  result.mask = Map2d(f.h, f.w);
  double mask_sum = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    const double mp = sigmoid(alpha[p]);
    const double om = sigmoid(-alpha[p]);
    const double log_om = -softplus(alpha[p]);
    double info = 0.0;
    for (int c = 0; c < C; ++c) {
      const double rr = r[c * P + p] * r[c * P + p];
      info += 0.5 * (om * om + mp * mp * rr - 1.0) - log_om;
    }
    info = std::max(0.0, info);
    if (!std::isfinite(info)) throw AttributionFailure("IBA information term is non-finite");
    result.information.values[p] = static_cast<float>(info);
    result.mask.values[p] = static_cast<float>(mp);
    result.total_information += info;
    mask_sum += mp;
  }
  result.mean_mask = mask_sum / static_cast<double>(P);
  Map2d up = resize_bilinear(result.information, image.height, image.width);
  for (float& v : up.values) v = std::max(0.0f, v);
  result.map = normalize(AttributionMap{std::move(up), target_class, AttributionMethod::iba, false});
  return result;
}

AttributionMap iba(const Model& model, const Image& image, int target_class, const IbaSettings& settings,
                   const FeatureStats& stats, SeededRandom& rng) {
  return iba_detailed(model, image, target_class, settings, stats, rng).map;
}

}  // namespace mixinterp
