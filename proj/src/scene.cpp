#include "mixinterp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mixinterp {

namespace {

const NamedColor& find_color(std::string_view name) {
  for (const auto& c : palette())
    if (c.name == name) return c;
  throw std::invalid_argument("unknown colour '" + std::string(name) + "'");
}

bool shape_contains(int shape, double u, double v) {
  const double du = u - 0.5;
  const double dv = v - 0.5;
  const double r2 = du * du + dv * dv;
  switch (shape) {
    case 0: return true;                                               // square
    case 1: return r2 <= 0.25;                                         // disk
    case 2: return std::abs(du) <= v / 2.0;                            // triangle, apex up
    case 3: return std::abs(du) + std::abs(dv) <= 0.5;                 // diamond
    case 4: return std::abs(du) <= 1.0 / 6.0 || std::abs(dv) <= 1.0 / 6.0;  // cross
    case 5: return r2 <= 0.25 && r2 >= 0.3 * 0.3;                      // ring
    case 6: return !(u > 0.25 && u < 0.75 && v > 0.25 && v < 0.75);    // frame
    case 7: return v <= 0.3 || v >= 0.7;                               // bars
    default: throw std::invalid_argument("unknown shape index");
  }
}

float texture_shade(const std::string& texture, int x, int y, int period, int phase, SeededRandom* grain) {
  if (texture == "flat") return 1.0f;
  if (texture == "stripes") return ((y + phase) / period) % 2 == 0 ? 1.0f : 0.6f;
  if (texture == "checker") return (((x + phase) / period) + ((y + phase) / period)) % 2 == 0 ? 1.0f : 0.6f;
  if (texture == "dots") {
    const int mx = (x + phase) % (period + 1);
    const int my = (y + phase) % (period + 1);
    return (mx == 0 && my == 0) ? 1.0f : 0.6f;
  }
  if (texture == "grain") return grain != nullptr ? static_cast<float>(0.6 + 0.4 * grain->uniform()) : 0.8f;
  throw std::invalid_argument("unknown texture '" + texture + "'");
}

}  // namespace

std::string_view to_string(ConceptCategory c) {
  switch (c) {
    case ConceptCategory::object: return "object";
    case ConceptCategory::part: return "part";
    case ConceptCategory::material: return "material";
    case ConceptCategory::color: return "color";
  }
  return "unknown";
}

ConceptCategory parse_category(std::string_view s) {
  if (s == "object") return ConceptCategory::object;
  if (s == "part") return ConceptCategory::part;
  if (s == "material") return ConceptCategory::material;
  if (s == "color") return ConceptCategory::color;
  throw std::invalid_argument("unknown concept category '" + std::string(s) + "'");
}

long BinaryMask::count() const {
  long n = 0;
  for (auto b : bits) n += b;
  return n;
}

const std::vector<NamedColor>& palette() {
  static const std::vector<NamedColor> colors{
      {"red", {1.0f, 0.0f, 0.0f}},     {"green", {0.0f, 0.8f, 0.0f}},   {"blue", {0.0f, 0.0f, 1.0f}},
      {"yellow", {1.0f, 1.0f, 0.0f}},  {"cyan", {0.0f, 1.0f, 1.0f}},    {"magenta", {1.0f, 0.0f, 1.0f}},
      {"orange", {1.0f, 0.5f, 0.0f}},  {"white", {1.0f, 1.0f, 1.0f}},   {"gray", {0.5f, 0.5f, 0.5f}},
      {"brown", {0.55f, 0.3f, 0.1f}},  {"purple", {0.5f, 0.0f, 0.5f}},
  };
  return colors;
}

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names{"square", "disk", "triangle", "diamond",
                                              "cross",  "ring", "frame",    "bars"};
  return names;
}

const std::vector<std::string>& texture_names() {
  static const std::vector<std::string> names{"stripes", "checker", "dots", "grain"};
  return names;
}

const std::vector<std::string>& part_names() {
  static const std::vector<std::string> names{"object-top", "object-bottom", "object-edge", "object-interior"};
  return names;
}

void SceneConfig::validate() const {
  if (image_size < 8) throw std::invalid_argument("scene image_size must be at least 8");
  if (num_classes < 2 || num_classes > static_cast<int>(shape_names().size()))
    throw std::invalid_argument("scene num_classes must be in [2, 8]");
  if (min_object < 3 || max_object < min_object || max_object > image_size)
    throw std::invalid_argument("object size range invalid");
  if (max_objects < 1) throw std::invalid_argument("max_objects must be positive");
  if (noise_std < 0.0f) throw std::invalid_argument("noise_std must be non-negative");
  if (object_colors.empty() || background_colors.empty() || textures.empty())
    throw std::invalid_argument("colour and texture lists must be nonempty");
  for (const auto& c : object_colors) find_color(c);
  for (const auto& c : background_colors) find_color(c);
  for (const auto& t : textures)
    if (std::find(texture_names().begin(), texture_names().end(), t) == texture_names().end())
      throw std::invalid_argument("unknown texture '" + t + "'");
  bool distinct = false;
  for (const auto& o : object_colors)
    for (const auto& b : background_colors) distinct = distinct || o != b;
  if (!distinct) throw std::invalid_argument("object and background colours must not coincide");
}

std::vector<Concept> concept_table(const SceneConfig& config) {
  std::vector<Concept> t;
  int id = 0;
  for (int s = 0; s < config.num_classes; ++s) t.push_back({id++, shape_names()[s], ConceptCategory::object});
  for (const auto& p : part_names()) t.push_back({id++, p, ConceptCategory::part});
  t.push_back({id++, "flat", ConceptCategory::material});
  for (const auto& m : texture_names()) t.push_back({id++, m, ConceptCategory::material});
  for (const auto& c : palette()) t.push_back({id++, c.name, ConceptCategory::color});
  return t;
}

int concept_id(const std::vector<Concept>& table, std::string_view name) {
  for (const auto& c : table)
    if (c.name == name) return c.id;
  throw std::invalid_argument("unknown concept '" + std::string(name) + "'");
}

SceneGenerator::SceneGenerator(SceneConfig config) : config_(std::move(config)) {
  config_.validate();
  concepts_ = concept_table(config_);
}

Scene SceneGenerator::render(int shape, const std::vector<std::pair<Rect, std::string>>& objects,
                             const std::string& background, const std::string& texture, int period, int phase,
                             SeededRandom* noise_rng, bool with_masks) const {
  const int n = config_.image_size;
  Scene scene;
  scene.label = shape;
  scene.image = Image(3, n, n);
  BinaryMask object_mask(n, n);
  BinaryMask top(n, n), bottom(n, n);
  std::vector<std::string> pixel_color(static_cast<std::size_t>(n) * n, background);

  for (const auto& [box, color] : objects) {
    const double side_w = box.width();
    const double side_h = box.height();
    Rect tight{n, n, 0, 0};
    for (int y = box.y0; y < box.y1; ++y) {
      for (int x = box.x0; x < box.x1; ++x) {
        const double u = (x + 0.5 - box.x0) / side_w;
        const double v = (y + 0.5 - box.y0) / side_h;
        if (!shape_contains(shape, u, v)) continue;
        object_mask.at(y, x) = 1;
        bottom.at(y, x) = v < 0.5 ? 0 : 1;
        top.at(y, x) = v < 0.5 ? 1 : 0;
        pixel_color[static_cast<std::size_t>(y) * n + x] = color;
        tight = Rect{std::min(tight.x0, x), std::min(tight.y0, y), std::max(tight.x1, x + 1),
                     std::max(tight.y1, y + 1)};
      }
    }
    if (!tight.empty()) scene.boxes.push_back(tight);
  }

  const NamedColor& bg = find_color(background);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      std::array<float, 3> rgb;
      if (object_mask.at(y, x)) {
        rgb = find_color(pixel_color[static_cast<std::size_t>(y) * n + x]).rgb;
      } else {
        const float shade = texture_shade(texture, x, y, period, phase, noise_rng);
        rgb = {bg.rgb[0] * shade, bg.rgb[1] * shade, bg.rgb[2] * shade};
      }
      for (int c = 0; c < 3; ++c) {
        float v = rgb[c];
        if (noise_rng != nullptr && config_.noise_std > 0.0f)
          v += static_cast<float>(noise_rng->normal(0.0, config_.noise_std));
        scene.image.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  }

  if (!with_masks) return scene;

  auto put = [&](std::string_view name, BinaryMask mask) {
    if (mask.count() > 0) scene.concept_masks[concept_id(concepts_, name)] = std::move(mask);
  };
  put(shape_names()[shape], object_mask);
  BinaryMask edge(n, n), interior(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!object_mask.at(y, x)) continue;
      const bool border = y == 0 || x == 0 || y == n - 1 || x == n - 1 || !object_mask.at(y - 1, x) ||
                          !object_mask.at(y + 1, x) || !object_mask.at(y, x - 1) || !object_mask.at(y, x + 1);
      (border ? edge : interior).at(y, x) = 1;
    }
  }
  put("object-top", top);
  put("object-bottom", bottom);
  put("object-edge", edge);
  put("object-interior", interior);
  put("flat", object_mask);
  BinaryMask background_mask(n, n);
  for (std::size_t i = 0; i < background_mask.bits.size(); ++i) background_mask.bits[i] = object_mask.bits[i] ? 0 : 1;
  put(texture, background_mask);
  for (const auto& c : palette()) {
    BinaryMask m(n, n);
    for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = pixel_color[i] == c.name ? 1 : 0;
    put(c.name, std::move(m));
  }
  return scene;
}

Scene SceneGenerator::generate(SeededRandom& rng, bool with_masks) const {
  const int n = config_.image_size;
  const int shape = rng.uniform_int(0, config_.num_classes - 1);
  const std::string& background =
      config_.background_colors[rng.uniform_int(0, static_cast<int>(config_.background_colors.size()) - 1)];
  const std::string& texture = config_.textures[rng.uniform_int(0, static_cast<int>(config_.textures.size()) - 1)];
  const int period = rng.uniform_int(2, 4);
  const int phase = rng.uniform_int(0, 7);
  const int count = rng.uniform_int(1, config_.max_objects);
  std::vector<std::pair<Rect, std::string>> objects;
  for (int i = 0; i < count; ++i) {
    std::string color;
    do {
      color = config_.object_colors[rng.uniform_int(0, static_cast<int>(config_.object_colors.size()) - 1)];
    } while (color == background);
    const int side = rng.uniform_int(config_.min_object, config_.max_object);
    const int x0 = rng.uniform_int(0, n - side);
    const int y0 = rng.uniform_int(0, n - side);
    objects.emplace_back(Rect{x0, y0, x0 + side, y0 + side}, color);
  }
  return render(shape, objects, background, texture, period, phase, &rng, with_masks);
}

Scene SceneGenerator::generate_indexed(std::uint64_t seed, std::uint64_t index, bool with_masks) const {
  SeededRandom rng = SeededRandom(seed).fork(index);
  return generate(rng, with_masks);
}

Scene SceneGenerator::render_single(int shape, const std::string& color, const Rect& box,
                                    const std::string& background, const std::string& texture) const {
  if (shape < 0 || shape >= config_.num_classes) throw std::invalid_argument("shape index out of range");
  const Rect r = box.clipped(config_.image_size, config_.image_size);
  if (r.empty()) throw std::invalid_argument("object box empty after clipping");
  return render(shape, {{r, color}}, background, texture, 3, 0, nullptr, true);
}

Dataset generate_dataset(const SceneGenerator& gen, std::size_t count, std::uint64_t seed) {
  Dataset d;
  d.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Scene s = gen.generate_indexed(seed, i, false);
    d.images.push_back(std::move(s.image));
    d.labels.push_back(s.label);
    d.boxes.push_back(std::move(s.boxes));
  }
  return d;
}

double box_union_fraction(const std::vector<Rect>& boxes, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  long covered = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (const auto& b : boxes)
        if (b.contains(x, y)) {
          ++covered;
          break;
        }
  return static_cast<double>(covered) / (static_cast<double>(width) * height);
}

}  // namespace mixinterp
