#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fovex/attribution.hpp"
#include "fovex/config.hpp"
#include "fovex/dataset.hpp"
#include "fovex/error.hpp"
#include "fovex/image_io.hpp"
#include "fovex/metrics.hpp"
#include "fovex/predictor.hpp"
#include "fovex/scanpath.hpp"

namespace fovex {

enum class Method { fovex, random_cam };

inline const char* method_name(Method m) { return m == Method::fovex ? "fovex" : "random_cam"; }

inline Method parse_method(const std::string& s) {
  if (s == "fovex") return Method::fovex;
  if (s == "random_cam") return Method::random_cam;
  throw ConfigError("method", "must be 'fovex' or 'random_cam', got '" + s + "'");
}

struct EvalImage {
  std::string id;
  Tensor image;
  std::size_t label = 0;
  std::vector<BoundingBox> boxes;
  std::vector<Pixel> fixations;
};

// Loads every manifest entry, checking labels against `classes` and that the
// annotations needed by `cfg.metrics` are present.
inline std::vector<EvalImage> load_eval_images(const DatasetManifest& manifest, std::size_t classes,
                                               const RunConfig& cfg) {
  std::vector<EvalImage> out;
  std::vector<std::string> problems;
  for (const auto& e : manifest.entries) {
    EvalImage img;
    img.id = e.image;
    img.label = e.label;
    if (e.label >= classes) {
      problems.push_back(e.image + ": label " + std::to_string(e.label) + " >= class count " + std::to_string(classes));
    }
    if (cfg.wants("ebpg") && !e.boxes) problems.push_back(e.image + ": ebpg requested but no bounding-box file");
    if ((cfg.wants("nss") || cfg.wants("aucj")) && !e.fixations) {
      problems.push_back(e.image + ": nss/aucj requested but no fixation file");
    }
    if (!problems.empty()) continue;
    img.image = load_image(e.image);
    if (e.boxes) img.boxes = read_boxes(*e.boxes);
    if (e.fixations) img.fixations = read_fixations(*e.fixations);
    out.push_back(std::move(img));
  }
  if (!problems.empty()) {
    std::string msg = "manifest '" + manifest.path + "' has " + std::to_string(problems.size()) + " problem(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return out;
}

struct ImageRecord {
  std::size_t index = 0;  // position in the input list
  std::string id;
  std::size_t label = 0;
  std::size_t target = 0;
  std::vector<double> values;  // aligned with EvaluationReport::columns
  bool degenerate_map = false;
};

struct EvaluationReport {
  std::string method;
  std::string dataset;
  std::string config;
  std::size_t images_total = 0;
  std::size_t images_misclassified = 0;
  std::vector<std::string> columns;
  std::vector<ImageRecord> images;
  std::vector<double> aggregate;  // mean per column over finite values
  std::size_t drop_excluded = 0;
  std::size_t degenerate_maps = 0;

  // NaN when the column is absent.
  double mean(const std::string& column) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == column) return aggregate[i];
    }
    return std::nan("");
  }
};

inline std::vector<std::string> report_columns(const RunConfig& cfg) {
  std::vector<std::string> cols;
  for (const auto& m : known_metrics()) {
    if (!cfg.wants(m)) continue;
    if (m == "drop_increase") {
      cols.emplace_back("drop");
      cols.emplace_back("increase");
    } else {
      cols.push_back(m);
    }
  }
  return cols;
}

template <Classifier M>
AttributionMap explain_image(const M& model, const Tensor& image, std::size_t label, Method method, const RunConfig& cfg,
                             std::uint64_t index, Scanpath* path_out = nullptr) {
  const std::size_t H = image.shape()[1], W = image.shape()[2];
  if (method == Method::random_cam) return random_cam(cfg.seed, H, W, cfg.random_cam(W), index);
  Scanpath path = generate_scanpath(model, image, cfg.scanpath(), cfg.foveation(W), label, index);
  AttributionMap map = build_map(path, cfg.weighting, cfg.map_sigma(W), H, W);
  map.provenance = "fixations=" + std::to_string(path.size()) + " target=" + std::to_string(path.target);
  if (path_out) *path_out = std::move(path);
  return map;
}

namespace evaluate_detail {

template <Classifier M>
ImageRecord evaluate_one(const M& model, const EvalImage& img, std::size_t index, Method method, const RunConfig& cfg) {
  ImageRecord rec;
  rec.index = index;
  rec.id = img.id;
  rec.label = img.label;
  const std::size_t W = img.image.shape()[2];
  Scanpath path;
  const AttributionMap map = explain_image(model, img.image, img.label, method, cfg, index, &path);
  rec.target = method == Method::fovex ? path.target
               : cfg.target == TargetPolicy::label ? img.label
                                                   : predict_class(model, img.image);
  const auto fov = cfg.foveation(W);
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  rec.degenerate_map = *lo == *hi;

  for (const auto& m : known_metrics()) {
    if (!cfg.wants(m)) continue;
    if (m == "drop_increase") {
      const auto r = avg_drop_increase(model, std::span(&img.image, 1), std::span(&map, 1), std::span(&rec.target, 1));
      rec.values.push_back(r.per_image_drop[0]);
      rec.values.push_back(r.per_image_increase[0]);
    } else if (m == "deletion") {
      rec.values.push_back(
          delete_insert_auc(model, img.image, map, rec.target, cfg.step_fraction, CurveMode::deletion, fov).auc);
    } else if (m == "insertion") {
      rec.values.push_back(
          delete_insert_auc(model, img.image, map, rec.target, cfg.step_fraction, CurveMode::insertion, fov).auc);
    } else if (m == "ebpg") {
      rec.values.push_back(ebpg(map, img.boxes));
    } else if (m == "nss") {
      rec.values.push_back(nss(map, img.fixations));
    } else if (m == "aucj") {
      rec.values.push_back(aucj(map, img.fixations));
    }
  }
  return rec;
}

}  // namespace evaluate_detail

// Keeps images the model classifies correctly (up to cfg.max_images, in input
// order), explains each with `method` and scores the requested metrics.
// Output order and values do not depend on cfg.threads.
template <Classifier M>
EvaluationReport evaluate_batch(const M& model, const std::vector<EvalImage>& images, Method method,
                                const RunConfig& cfg, const std::string& dataset_id) {
  cfg.validate();
  EvaluationReport report;
  report.method = method_name(method);
  report.dataset = dataset_id;
  report.images_total = images.size();
  report.columns = report_columns(cfg);

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (predict_class(model, images[i].image) == images[i].label) {
      if (cfg.max_images == 0 || keep.size() < cfg.max_images) keep.push_back(i);
    } else {
      ++report.images_misclassified;
    }
  }
  if (keep.empty()) throw DataError("no correctly classified images to evaluate in '" + dataset_id + "'");
  report.config = config_snapshot(cfg, images[keep.front()].image.shape()[2]);

  report.images.resize(keep.size());
  std::vector<std::exception_ptr> errors(keep.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < keep.size();) {
      try {
        report.images[k] = evaluate_detail::evaluate_one(model, images[keep[k]], keep[k], method, cfg);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(cfg.threads, keep.size()); ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  report.aggregate.assign(report.columns.size(), 0.0);
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& rec : report.images) {
      if (std::isfinite(rec.values[c])) {
        total += rec.values[c];
        ++n;
      } else if (report.columns[c] == "drop") {
        ++report.drop_excluded;
      }
    }
    report.aggregate[c] = n ? total / double(n) : std::nan("");
  }
  for (const auto& rec : report.images) report.degenerate_maps += rec.degenerate_map ? 1 : 0;
  return report;
}

inline std::string format_report(const EvaluationReport& r) {
  std::ostringstream os;
  os << "# fovex evaluation report v1\n"
     << "method = " << r.method << "\n"
     << "dataset = " << r.dataset << "\n"
     << "images_total = " << r.images_total << "\n"
     << "images_misclassified = " << r.images_misclassified << "\n"
     << "images_evaluated = " << r.images.size() << "\n"
     << "columns = index,id,label,target";
  for (const auto& c : r.columns) os << ',' << c;
  os << "\n";
  for (const auto& rec : r.images) {
    os << "image = " << rec.index << ',' << rec.id << ',' << rec.label << ',' << rec.target;
    for (double v : rec.values) os << ',' << format_double(v);
    os << "\n";
  }
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    os << "aggregate." << r.columns[c] << " = " << format_double(r.aggregate[c]) << "\n";
  }
  os << "warnings.drop_excluded = " << r.drop_excluded << "\n"
     << "warnings.degenerate_maps = " << r.degenerate_maps << "\n"
     << "[config]\n"
     << r.config;
  return os.str();
}

}  // namespace fovex
