#pragma once

// Flat `key = value` run configuration. Every key has a default, so an empty
// file is a valid configuration. Keys marked "auto" derive from image width.
//
//   key                      unit / values                    default
//   seed                     integer                          0
//   threads                  worker threads for evaluation    1
//   foveation.sigma_fovea    px                               auto: width / 8
//   foveation.sigma_blur     px                               auto: width / 2
//   foveation.blur_radius    px                               auto: ceil(3 sigma_blur)
//   foveation.beta           [0, 1]                           0.5
//   scanpath.fixations       count                            10
//   scanpath.step_size       px per unit gradient             auto: 5 x width
//   scanpath.inner_steps     gradient steps per fixation      1
//   scanpath.init            center | random                  center
//   scanpath.target          predicted | label                predicted
//   attribution.sigma        px                               auto: sigma_fovea
//   attribution.weighting    uniform | confidence_gain        uniform
//   metrics.step_fraction    share of pixels per AUC step     0.01
//   metrics.list             comma list of drop_increase, deletion, insertion, ebpg, nss, aucj
//                                                             all six
//   metrics.max_images       images evaluated, 0 = all        0
//   random_cam.min_blobs     count                            1
//   random_cam.max_blobs     count                            5
//   random_cam.min_sigma     px                               auto: width / 16
//   random_cam.max_sigma     px                               auto: width / 5
//   data.manifest            path, empty = synthetic data     (empty)
//   data.image_size          px (synthetic)                   64
//   data.classes             2 | 4 (synthetic)                4
//   data.train_count         samples (synthetic)              2000
//   data.test_count          samples (synthetic)              500
//   train.epochs             count                            6
//   train.batch_size         count                            16
//   train.learning_rate      SGD step                         0.02
//   train.momentum           [0, 1)                           0.9

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "fovex/attribution.hpp"
#include "fovex/error.hpp"
#include "fovex/foveation.hpp"
#include "fovex/scanpath.hpp"
#include "fovex/train.hpp"

namespace fovex {

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names{"drop_increase", "deletion", "insertion", "ebpg", "nss", "aucj"};
  return names;
}

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  std::optional<double> sigma_fovea;
  std::optional<double> sigma_blur;
  std::optional<std::size_t> blur_radius;
  double beta = 0.5;

  std::size_t fixations = 10;
  std::optional<double> step_size;
  std::size_t inner_steps = 1;
  InitPolicy init = InitPolicy::center;
  TargetPolicy target = TargetPolicy::predicted;

  std::optional<double> attribution_sigma;
  Weighting weighting = Weighting::uniform;

  double step_fraction = 0.01;
  std::vector<std::string> metrics = known_metrics();
  std::size_t max_images = 0;

  std::size_t cam_min_blobs = 1;
  std::size_t cam_max_blobs = 5;
  std::optional<double> cam_min_sigma;
  std::optional<double> cam_max_sigma;

  std::string manifest;
  std::size_t image_size = 64;
  std::size_t classes = 4;
  std::size_t train_count = 2000;
  std::size_t test_count = 500;

  std::size_t epochs = 6;
  std::size_t batch_size = 16;
  double learning_rate = 0.02;
  double momentum = 0.9;

  FoveationConfig foveation(std::size_t width) const {
    FoveationConfig f = FoveationConfig::for_width(width);
    if (sigma_fovea) f.sigma_fovea = *sigma_fovea;
    if (sigma_blur) {
      f.sigma_blur = *sigma_blur;
      f.blur_radius = static_cast<std::size_t>(std::ceil(3.0 * f.sigma_blur));
    }
    if (blur_radius) f.blur_radius = *blur_radius;
    f.beta = beta;
    return f;
  }

  ScanpathConfig scanpath() const {
    ScanpathConfig s;
    s.fixations = fixations;
    s.step_size = step_size;
    s.inner_steps = inner_steps;
    s.init = init;
    s.target = target;
    s.seed = seed;
    return s;
  }

  double map_sigma(std::size_t width) const { return attribution_sigma.value_or(foveation(width).sigma_fovea); }

  RandomCamConfig random_cam(std::size_t width) const {
    RandomCamConfig c;
    c.min_blobs = cam_min_blobs;
    c.max_blobs = cam_max_blobs;
    c.min_sigma = cam_min_sigma.value_or(double(width) / 16.0);
    c.max_sigma = cam_max_sigma.value_or(double(width) / 5.0);
    return c;
  }

  TrainConfig training() const { return {epochs, batch_size, learning_rate, momentum, seed}; }

  bool wants(const std::string& metric) const {
    return std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
  }

  // Re-checks every module constraint, naming the offending key.
  void validate() const {
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
    if (image_size < 16) throw ConfigError("data.image_size", "must be >= 16");
    foveation(image_size).validate();
    scanpath().validate();
    if (attribution_sigma && !(*attribution_sigma > 0.0)) throw ConfigError("attribution.sigma", "must be > 0");
    if (!(step_fraction > 0.0 && step_fraction <= 1.0)) throw ConfigError("metrics.step_fraction", "must lie in (0, 1]");
    random_cam(image_size).validate();
    if (classes != 2 && classes != 4) throw ConfigError("data.classes", "must be 2 or 4");
    if (train_count < 1) throw ConfigError("data.train_count", "must be >= 1");
    if (test_count < 1) throw ConfigError("data.test_count", "must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate", "must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum", "must lie in [0, 1)");
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline std::optional<double> to_auto_double(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return to_double(key, v);
}

}  // namespace config_detail

inline RunConfig parse_config(const std::string& text) {
  using namespace config_detail;
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));

    if (key == "seed") cfg.seed = to_uint(key, v);
    else if (key == "threads") cfg.threads = to_uint(key, v);
    else if (key == "foveation.sigma_fovea") cfg.sigma_fovea = to_auto_double(key, v);
    else if (key == "foveation.sigma_blur") cfg.sigma_blur = to_auto_double(key, v);
    else if (key == "foveation.blur_radius") {
      if (v == "auto") cfg.blur_radius.reset();
      else cfg.blur_radius = to_uint(key, v);
    } else if (key == "foveation.beta") cfg.beta = to_double(key, v);
    else if (key == "scanpath.fixations") cfg.fixations = to_uint(key, v);
    else if (key == "scanpath.step_size") cfg.step_size = to_auto_double(key, v);
    else if (key == "scanpath.inner_steps") cfg.inner_steps = to_uint(key, v);
    else if (key == "scanpath.init") {
      if (v == "center") cfg.init = InitPolicy::center;
      else if (v == "random") cfg.init = InitPolicy::random;
      else throw ConfigError(key, "must be 'center' or 'random'");
    } else if (key == "scanpath.target") {
      if (v == "predicted") cfg.target = TargetPolicy::predicted;
      else if (v == "label") cfg.target = TargetPolicy::label;
      else throw ConfigError(key, "must be 'predicted' or 'label'");
    } else if (key == "attribution.sigma") cfg.attribution_sigma = to_auto_double(key, v);
    else if (key == "attribution.weighting") {
      if (v == "uniform") cfg.weighting = Weighting::uniform;
      else if (v == "confidence_gain") cfg.weighting = Weighting::confidence_gain;
      else throw ConfigError(key, "must be 'uniform' or 'confidence_gain'");
    } else if (key == "metrics.step_fraction") cfg.step_fraction = to_double(key, v);
    else if (key == "metrics.list") {
      cfg.metrics.clear();
      std::istringstream items(v);
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (std::find(known_metrics().begin(), known_metrics().end(), item) == known_metrics().end()) {
          throw ConfigError(key, "unknown metric '" + item + "'");
        }
        cfg.metrics.push_back(item);
      }
    } else if (key == "metrics.max_images") cfg.max_images = to_uint(key, v);
    else if (key == "random_cam.min_blobs") cfg.cam_min_blobs = to_uint(key, v);
    else if (key == "random_cam.max_blobs") cfg.cam_max_blobs = to_uint(key, v);
    else if (key == "random_cam.min_sigma") cfg.cam_min_sigma = to_auto_double(key, v);
    else if (key == "random_cam.max_sigma") cfg.cam_max_sigma = to_auto_double(key, v);
    else if (key == "data.manifest") cfg.manifest = v;
    else if (key == "data.image_size") cfg.image_size = to_uint(key, v);
    else if (key == "data.classes") cfg.classes = to_uint(key, v);
    else if (key == "data.train_count") cfg.train_count = to_uint(key, v);
    else if (key == "data.test_count") cfg.test_count = to_uint(key, v);
    else if (key == "train.epochs") cfg.epochs = to_uint(key, v);
    else if (key == "train.batch_size") cfg.batch_size = to_uint(key, v);
    else if (key == "train.learning_rate") cfg.learning_rate = to_double(key, v);
    else if (key == "train.momentum") cfg.momentum = to_double(key, v);
    else throw ConfigError(key, "unknown key");
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// Shortest round-trip decimal for a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Resolved configuration for `width`-pixel images, one key per line.
inline std::string config_snapshot(const RunConfig& c, std::size_t width) {
  const auto fov = c.foveation(width);
  const auto cam = c.random_cam(width);
  std::ostringstream os;
  os << "seed = " << c.seed << "\n"
     << "foveation.sigma_fovea = " << format_double(fov.sigma_fovea) << "\n"
     << "foveation.sigma_blur = " << format_double(fov.sigma_blur) << "\n"
     << "foveation.blur_radius = " << fov.blur_radius << "\n"
     << "foveation.beta = " << format_double(fov.beta) << "\n"
     << "scanpath.fixations = " << c.fixations << "\n"
     << "scanpath.step_size = " << format_double(c.scanpath().step_size_for(width)) << "\n"
     << "scanpath.inner_steps = " << c.inner_steps << "\n"
     << "scanpath.init = " << (c.init == InitPolicy::center ? "center" : "random") << "\n"
     << "scanpath.target = " << (c.target == TargetPolicy::predicted ? "predicted" : "label") << "\n"
     << "attribution.sigma = " << format_double(c.map_sigma(width)) << "\n"
     << "attribution.weighting = " << (c.weighting == Weighting::uniform ? "uniform" : "confidence_gain") << "\n"
     << "metrics.step_fraction = " << format_double(c.step_fraction) << "\n"
     << "random_cam.blobs = " << cam.min_blobs << ".." << cam.max_blobs << "\n"
     << "random_cam.sigma = " << format_double(cam.min_sigma) << ".." << format_double(cam.max_sigma) << "\n";
  return os.str();
}

}  // namespace fovex
