#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mixinterp/alignment.hpp"
#include "mixinterp/attribution.hpp"
#include "mixinterp/augment.hpp"
#include "mixinterp/config.hpp"
#include "mixinterp/dissection.hpp"
#include "mixinterp/errors.hpp"
#include "mixinterp/faithfulness.hpp"
#include "mixinterp/harness.hpp"
#include "mixinterp/records.hpp"
#include "mixinterp/scene.hpp"

namespace py = pybind11;
using namespace mixinterp;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Map2d to_map(const FloatArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("map must be a 2-d array");
  Map2d m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy_n(a.data(), m.values.size(), m.values.begin());
  return m;
}

FloatArray from_map(const Map2d& m) {
  FloatArray out({m.height, m.width});
  std::copy(m.values.begin(), m.values.end(), out.mutable_data());
  return out;
}

Image to_image(const FloatArray& a) {
  if (a.ndim() != 3) throw std::invalid_argument("image must be a channels x height x width array");
  Image im(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy_n(a.data(), im.data.size(), im.data.begin());
  return im;
}

FloatArray from_image(const Image& im) {
  FloatArray out({im.channels, im.height, im.width});
  std::copy(im.data.begin(), im.data.end(), out.mutable_data());
  return out;
}

std::vector<Image> to_images(const FloatArray& a) {
  if (a.ndim() != 4) throw std::invalid_argument("batch must be an n x channels x height x width array");
  std::vector<Image> out;
  const std::size_t each = static_cast<std::size_t>(a.shape(1) * a.shape(2) * a.shape(3));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    Image im(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3)));
    std::copy_n(a.data() + i * each, each, im.data.begin());
    out.push_back(std::move(im));
  }
  return out;
}

FloatArray from_images(std::span<const Image> ims) {
  const Image& f = ims.front();
  FloatArray out({static_cast<py::ssize_t>(ims.size()), static_cast<py::ssize_t>(f.channels),
                  static_cast<py::ssize_t>(f.height), static_cast<py::ssize_t>(f.width)});
  float* p = out.mutable_data();
  for (const auto& im : ims) p = std::copy(im.data.begin(), im.data.end(), p);
  return out;
}

using Box = std::tuple<int, int, int, int>;

BoxSet to_boxes(const std::vector<Box>& boxes, int width, int height) {
  std::vector<Rect> r;
  for (const auto& [x0, y0, x1, y1] : boxes) r.push_back({x0, y0, x1, y1});
  return BoxSet(std::move(r), width, height);
}

Ordering parse_ordering(const std::string& s) {
  if (s == "lerf") return Ordering::lerf;
  if (s == "morf") return Ordering::morf;
  if (s == "rao") return Ordering::rao;
  throw std::invalid_argument("ordering must be lerf, morf or rao");
}

// Wraps a Python callable taking an n x c x h x w array and returning n scores.
ScoreFn wrap_score(py::function fn) {
  return [fn](std::span<const Image> batch) {
    py::gil_scoped_acquire gil;
    const auto scores = fn(from_images(batch)).cast<std::vector<float>>();
    if (scores.size() != batch.size()) throw std::invalid_argument("score function returned the wrong count");
    return scores;
  };
}

py::dict curve_dict(const ScoreCurve& c) {
  py::dict d;
  d["x"] = c.x;
  d["y"] = c.y;
  return d;
}

py::dict record_dict(const ResultRecord& r) {
  py::dict d;
  d["run_id"] = r.run_id;
  d["config_hash"] = r.config_hash;
  d["model_id"] = r.model_id;
  d["augmentation"] = r.augmentation;
  d["seed"] = r.seed;
  d["method"] = r.method;
  d["metric"] = r.metric;
  d["value"] = r.value;
  d["se"] = r.se;
  d["n"] = r.n;
  d["extra"] = r.extra;
  d["timestamp"] = r.timestamp;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Interpretability metrics for models trained with mixed-sample augmentation.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MissingArtifact>(m, "MissingArtifact", PyExc_FileNotFoundError);
  py::register_exception<OracleFailure>(m, "OracleFailure", PyExc_RuntimeError);

  // alignment
  m.def(
      "energy_pg",
      [](const FloatArray& map, const std::vector<Box>& boxes) {
        const Map2d s = to_map(map);
        return energy_pg(s, to_boxes(boxes, s.width, s.height));
      },
      py::arg("map"), py::arg("boxes"), "Share of attribution energy inside the union of boxes (x0, y0, x1, y1).");
  m.def(
      "ehr",
      [](const FloatArray& map, const std::vector<Box>& boxes, std::optional<std::vector<double>> thresholds,
         const std::string& numerator) {
        const Map2d s = to_map(map);
        const ThresholdGrid g = thresholds ? ThresholdGrid(*thresholds) : ThresholdGrid::standard();
        EhrNumerator n = EhrNumerator::thresholded;
        if (numerator == "printed") n = EhrNumerator::printed;
        else if (numerator != "thresholded") throw std::invalid_argument("numerator must be thresholded or printed");
        const EhrResult r = ehr_detailed(s, to_boxes(boxes, s.width, s.height), g, n);
        py::dict d;
        d["score"] = r.score;
        d["raw_auc"] = r.raw_auc;
        d["ratios"] = r.ratios;
        return d;
      },
      py::arg("map"), py::arg("boxes"), py::arg("thresholds") = py::none(), py::arg("numerator") = "thresholded");
  m.def(
      "wsol_iou",
      [](const FloatArray& map, const std::vector<Box>& boxes, double threshold) {
        const Map2d s = to_map(map);
        const WsolResult r = wsol_iou(s, to_boxes(boxes, s.width, s.height), threshold);
        std::optional<Box> box;
        if (r.estimated_box) box = Box{r.estimated_box->x0, r.estimated_box->y0, r.estimated_box->x1, r.estimated_box->y1};
        return py::make_tuple(r.iou, box);
      },
      py::arg("map"), py::arg("boxes"), py::arg("threshold") = kWsolThreshold);

  // faithfulness
  m.def(
      "perturbation_curve",
      [](py::function score, const FloatArray& image, const FloatArray& map, const std::string& mode,
         const std::string& ordering, int cell_px, std::vector<float> fill, std::uint64_t seed) {
        const Image im = to_image(image);
        SeededRandom rng(seed);
        const GridRanking g = rank_grids(to_map(map), cell_px, parse_ordering(ordering), &rng);
        if (fill.empty()) fill.assign(static_cast<std::size_t>(im.channels), 0.0f);
        const ReplacementPolicy p = ReplacementPolicy::constant(fill);
        const ScoreFn fn = wrap_score(std::move(score));
        if (mode == "deletion") return curve_dict(deletion_curve(fn, im, g, p));
        if (mode == "insertion") return curve_dict(insertion_curve(fn, im, g, p));
        throw std::invalid_argument("mode must be deletion or insertion");
      },
      py::arg("score"), py::arg("image"), py::arg("map"), py::arg("mode") = "deletion", py::arg("ordering") = "lerf",
      py::arg("cell_px") = 4, py::arg("fill") = std::vector<float>{}, py::arg("seed") = 0,
      "Normalised score curve while cells are removed (deletion) or restored (insertion).");
  m.def("trapezoid_auc", &trapezoid_auc, py::arg("x"), py::arg("y"));

  // dissection
  m.def(
      "top_quantile_threshold",
      [](const FloatArray& values, double q) {
        return top_quantile_threshold(std::vector<float>(values.data(), values.data() + values.size()), q);
      },
      py::arg("values"), py::arg("q") = kTopQuantile);

  // augmentation
  m.def(
      "cut_box",
      [](double lam, int width, int height, int cx, int cy) {
        const CutBox c = cut_box_at(lam, width, height, cx, cy);
        return py::make_tuple(Box{c.box.x0, c.box.y0, c.box.x1, c.box.y1}, c.mix_weight);
      },
      py::arg("lam"), py::arg("width"), py::arg("height"), py::arg("cx"), py::arg("cy"),
      "Box of a cut-and-paste mix centred at (cx, cy) and the pixel fraction it leaves.");

  // scenes
  m.def(
      "generate_scenes",
      [](std::size_t count, std::uint64_t seed, int image_size, int num_classes) {
        SceneConfig sc;
        sc.image_size = image_size;
        sc.num_classes = num_classes;
        sc.min_object = std::max(3, image_size / 3);
        sc.max_object = std::max(sc.min_object, image_size * 2 / 3);
        const Dataset d = generate_dataset(SceneGenerator(sc), count, seed);
        std::vector<std::vector<Box>> boxes;
        for (const auto& bs : d.boxes) {
          std::vector<Box> b;
          for (const auto& r : bs) b.emplace_back(r.x0, r.y0, r.x1, r.y1);
          boxes.push_back(std::move(b));
        }
        return py::make_tuple(from_images(d.images), d.labels, boxes);
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("image_size") = 32, py::arg("num_classes") = 8,
      "Synthetic object-on-background scenes: (images, labels, boxes).");

  // models
  py::class_<ModelCheckpoint>(m, "Checkpoint")
      .def_readonly("augmentation", &ModelCheckpoint::augmentation)
      .def_readonly("seed", &ModelCheckpoint::seed)
      .def_readonly("epochs", &ModelCheckpoint::epochs)
      .def_readonly("accuracy", &ModelCheckpoint::final_accuracy)
      .def("predict_proba",
           [](const ModelCheckpoint& c, const FloatArray& batch) { return predict_proba(c.model, to_images(batch)); })
      .def("gradcam",
           [](const ModelCheckpoint& c, const FloatArray& image, int target) {
             return from_map(gradcam(c.model, to_image(image), target).values);
           })
      .def("input_gradient", [](const ModelCheckpoint& c, const FloatArray& image, int target) {
        return from_image(input_gradient(c.model, to_image(image), target));
      });
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // configuration and records
  m.def(
      "config_hash", [](const std::string& text) { return parse_config(text).hash(); }, py::arg("text"),
      "Hash of a configuration given as key = value text.");
  m.def("config_keys", [] {
    std::vector<std::string> out;
    for (const auto& k : config_keys()) out.push_back(k.name);
    return out;
  });
  m.def(
      "read_records",
      [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& r : read_records(path)) out.append(record_dict(r));
        return out;
      },
      py::arg("path"));
}
