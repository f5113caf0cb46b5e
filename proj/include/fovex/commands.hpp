#pragma once

// The command-line workflows as plain functions. Each is a pure function of
// its input files, configuration and seed.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fovex/attribution.hpp"
#include "fovex/config.hpp"
#include "fovex/dataset.hpp"
#include "fovex/error.hpp"
#include "fovex/evaluate.hpp"
#include "fovex/image_io.hpp"
#include "fovex/scanpath_io.hpp"
#include "fovex/synthetic.hpp"
#include "fovex/train.hpp"
#include "fovex/weights.hpp"

namespace fovex {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numerical = 3 };

// Maps an in-flight exception to the documented process exit code.
inline int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return exit_usage;
  } catch (const NumericalError&) {
    return exit_numerical;
  } catch (const Error&) {
    return exit_data;
  } catch (const std::filesystem::filesystem_error&) {
    return exit_data;
  } catch (...) {
    return exit_data;
  }
}

struct CommonOptions {
  std::string config;  // empty = defaults
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

inline RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
}

inline SyntheticDataset synthetic_split(const RunConfig& cfg, bool test) {
  return test ? generate_synthetic(cfg.seed + stream::test_data, cfg.test_count, cfg.image_size, cfg.classes)
              : generate_synthetic(cfg.seed + stream::train_data, cfg.train_count, cfg.image_size, cfg.classes);
}

struct TrainOutcome {
  TrainResult result;
  std::optional<double> test_accuracy;
};

// Trains on `data.manifest` when set, otherwise on the synthetic training
// split (and reports accuracy on the synthetic test split). Writes the weight
// file and `train_log.txt` into the output directory.
inline TrainOutcome cmd_train(const CommonOptions& o, const std::string& weights_path) {
  const RunConfig cfg = resolve_config(o);
  const auto out = prepare_out_dir(o.out_dir);
  TrainOutcome outcome{TrainResult{Predictor::toy({1, 16, 16}, 2, 0), {}}, std::nullopt};

  if (!cfg.manifest.empty()) {
    if (!std::filesystem::exists(cfg.manifest)) {
      throw DataError("data.manifest '" + cfg.manifest + "' does not exist (generate one with `fovex dataset`)");
    }
    const auto manifest = load_manifest(cfg.manifest);
    std::vector<Sample> samples;
    for (const auto& e : manifest.entries) {
      if (e.label >= cfg.classes) {
        throw DataError(e.image + ": label " + std::to_string(e.label) + " >= data.classes " +
                        std::to_string(cfg.classes));
      }
      Sample s;
      s.image = load_image(e.image);
      s.label = e.label;
      samples.push_back(std::move(s));
    }
    const Predictor init = Predictor::toy(samples.front().image.shape(), cfg.classes, cfg.seed);
    outcome.result = train(init, cfg.training(), samples);
  } else {
    outcome.result = train_toy(cfg.training(), synthetic_split(cfg, false));
    outcome.test_accuracy = accuracy(outcome.result.predictor, synthetic_split(cfg, true).samples);
  }

  save_weights(outcome.result.predictor, weights_path);
  std::ostringstream log;
  log << "# epoch,mean_loss\n";
  for (std::size_t i = 0; i < outcome.result.epoch_losses.size(); ++i) {
    log << (i + 1) << ',' << format_double(outcome.result.epoch_losses[i]) << '\n';
  }
  if (outcome.test_accuracy) log << "# test_accuracy = " << format_double(*outcome.test_accuracy) << '\n';
  write_text(out / "train_log.txt", log.str());
  return outcome;
}

// Exports the synthetic test split as images plus `manifest.csv`.
inline std::string cmd_dataset(const CommonOptions& o, bool test_split = true) {
  const RunConfig cfg = resolve_config(o);
  prepare_out_dir(o.out_dir);
  return export_dataset(synthetic_split(cfg, test_split), o.out_dir);
}

struct ExplainOutcome {
  Scanpath scanpath;
  AttributionMap map;
  std::size_t predicted = 0;
};

inline ExplainOutcome cmd_explain(const CommonOptions& o, const std::string& weights_path, const std::string& image_path,
                                  std::optional<std::size_t> label = std::nullopt) {
  const RunConfig cfg = resolve_config(o);
  const Predictor model = load_weights(weights_path);
  const Tensor image = load_image(image_path);
  if (image.shape() != model.input_shape()) {
    throw ShapeError("image '" + image_path + "' has shape " + to_string(image.shape()) + " but the predictor expects " +
                     to_string(model.input_shape()));
  }
  if (label && *label >= model.num_classes()) {
    throw ConfigError("label", "class " + std::to_string(*label) + " out of range");
  }
  const auto out = prepare_out_dir(o.out_dir);
  const std::size_t W = image.shape()[2];

  ExplainOutcome r;
  r.predicted = predict_class(model, image);
  r.scanpath = generate_scanpath(model, image, cfg.scanpath(), cfg.foveation(W), label);
  r.map = build_map(r.scanpath, cfg.weighting, cfg.map_sigma(W), image.shape()[1], W);
  r.map.provenance = "fixations=" + std::to_string(r.scanpath.size()) + " target=" + std::to_string(r.scanpath.target);

  write_scanpath((out / "scanpath.txt").string(), r.scanpath);
  render_heatmap(r.map, (out / "heatmap.pgm").string(), &image, (out / "overlay.ppm").string());

  std::ostringstream meta;
  meta << "# fovex explanation\n"
       << "image = " << image_path << "\n"
       << "weights = " << weights_path << "\n"
       << "predicted_class = " << r.predicted << "\n"
       << "target_class = " << r.scanpath.target << "\n"
       << "base_confidence = " << format_double(r.scanpath.base_confidence) << "\n";
  for (std::size_t i = 0; i < r.scanpath.size(); ++i) {
    meta << "fixation." << (i + 1) << " = " << format_double(r.scanpath.fixations[i].row) << ','
         << format_double(r.scanpath.fixations[i].col) << " loss=" << format_double(r.scanpath.losses[i])
         << " confidence=" << format_double(r.scanpath.confidences[i]) << "\n";
  }
  meta << "[config]\n" << config_snapshot(cfg, W);
  write_text(out / "metadata.txt", meta.str());
  return r;
}

inline EvaluationReport cmd_evaluate(const CommonOptions& o, const std::string& weights_path,
                                     const std::string& manifest_path, const std::string& method) {
  const Method m = parse_method(method);
  const RunConfig cfg = resolve_config(o);
  const Predictor model = load_weights(weights_path);
  const auto manifest = load_manifest(manifest_path);
  const auto images = load_eval_images(manifest, model.num_classes(), cfg);
  for (const auto& img : images) {
    if (img.image.shape() != model.input_shape()) {
      throw ShapeError("image '" + img.id + "' has shape " + to_string(img.image.shape()) +
                       " but the predictor expects " + to_string(model.input_shape()));
    }
  }
  const auto out = prepare_out_dir(o.out_dir);
  EvaluationReport report = evaluate_batch(model, images, m, cfg, manifest_path);
  write_text(out / "report.txt", format_report(report));
  return report;
}

// Rebuilds the attribution map from a saved scanpath (uniform weights, since
// the file carries no confidences) and writes heatmap and overlay.
inline AttributionMap cmd_render(const CommonOptions& o, const std::string& scanpath_path, const std::string& image_path) {
  const RunConfig cfg = resolve_config(o);
  const Scanpath path = read_scanpath(scanpath_path);
  const Tensor image = load_image(image_path);
  const auto out = prepare_out_dir(o.out_dir);
  const std::size_t H = image.shape()[1], W = image.shape()[2];
  AttributionMap map = build_map(path, Weighting::uniform, cfg.map_sigma(W), H, W);
  map.provenance = "fixations=" + std::to_string(path.size()) + " rendered_from=" + scanpath_path;
  render_heatmap(map, (out / "heatmap.pgm").string(), &image, (out / "overlay.ppm").string());
  return map;
}

}  // namespace fovex
