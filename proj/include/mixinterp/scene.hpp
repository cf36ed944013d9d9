#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixinterp/random.hpp"
#include "mixinterp/tensor.hpp"

namespace mixinterp {

// Procedural object-on-background scenes with exact boxes and concept masks.
// The class label is the object's shape; colours and background textures are
// nuisance factors and double as dissection concepts.

enum class ConceptCategory { object, part, material, color };

std::string_view to_string(ConceptCategory c);
ConceptCategory parse_category(std::string_view s);

struct Concept {
  int id = 0;
  std::string name;
  ConceptCategory category = ConceptCategory::object;
  bool operator==(const Concept&) const = default;
};

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}
  std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  long count() const;
  bool operator==(const BinaryMask&) const = default;
};

struct NamedColor {
  std::string name;
  std::array<float, 3> rgb;
};

const std::vector<NamedColor>& palette();
const std::vector<std::string>& shape_names();
const std::vector<std::string>& texture_names();  // background materials
const std::vector<std::string>& part_names();

struct SceneConfig {
  int image_size = 32;
  int num_classes = 8;  // shapes used, at most shape_names().size()
  int min_object = 11;
  int max_object = 22;
  int max_objects = 1;  // objects per scene, all of the scene's class
  float noise_std = 0.02f;
  std::vector<std::string> object_colors{"red",  "green", "blue",   "yellow", "cyan",
                                         "magenta", "orange", "white"};
  std::vector<std::string> background_colors{"gray", "brown", "purple", "green", "blue", "yellow"};
  std::vector<std::string> textures{"stripes", "checker", "dots", "grain"};

  void validate() const;
};

struct Scene {
  Image image;
  int label = 0;
  std::vector<Rect> boxes;
  std::map<int, BinaryMask> concept_masks;  // only concepts present in the scene
};

// Concept table: objects (one per shape), parts, materials (flat + textures), colours.
std::vector<Concept> concept_table(const SceneConfig& config);
int concept_id(const std::vector<Concept>& table, std::string_view name);

class SceneGenerator {
 public:
  explicit SceneGenerator(SceneConfig config);
  const SceneConfig& config() const { return config_; }
  const std::vector<Concept>& concepts() const { return concepts_; }

  Scene generate(SeededRandom& rng, bool with_masks) const;
  // Scene i of a seeded stream; independent of how many others are drawn.
  Scene generate_indexed(std::uint64_t seed, std::uint64_t index, bool with_masks) const;

  // Renders a single object of the given shape/colour at a fixed place on a
  // flat background; used for construction checks.
  Scene render_single(int shape, const std::string& color, const Rect& box, const std::string& background,
                      const std::string& texture) const;

 private:
  Scene render(int shape, const std::vector<std::pair<Rect, std::string>>& objects, const std::string& background,
               const std::string& texture, int period, int phase, SeededRandom* noise_rng, bool with_masks) const;

  SceneConfig config_;
  std::vector<Concept> concepts_;
};

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::vector<Rect>> boxes;

  std::size_t size() const { return images.size(); }
};

Dataset generate_dataset(const SceneGenerator& gen, std::size_t count, std::uint64_t seed);

// Fraction of the image covered by the union of boxes.
double box_union_fraction(const std::vector<Rect>& boxes, int width, int height);

}  // namespace mixinterp
