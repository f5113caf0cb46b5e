// fovex command-line entry point.
//
//   fovex train    --weights W [--config C] [--out-dir D] [--seed S]
//   fovex dataset  [--config C] [--out-dir D] [--seed S] [--train-split]
//   fovex explain  --weights W --image I [--config C] [--out-dir D] [--seed S] [--label L]
//   fovex evaluate --weights W --manifest M --method fovex|random_cam [--config C] [--out-dir D] [--seed S]
//   fovex render   --scanpath P --image I [--config C] [--out-dir D]
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fovex/commands.hpp"

namespace {

void add_common(CLI::App* cmd, fovex::CommonOptions& o, bool with_seed = true) {
  cmd->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", o.out_dir, "output directory (created if missing)");
  if (with_seed) cmd->add_option("--seed", o.seed, "overrides the configured seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foveation-based visual explanations for a toy classifier"};
  app.require_subcommand(1);

  fovex::CommonOptions common;
  std::string weights, image, manifest, method, scanpath;
  std::optional<std::size_t> label;
  bool train_split = false;

  auto* train = app.add_subcommand("train", "train the toy predictor and write its weights");
  add_common(train, common);
  train->add_option("--weights", weights, "output weight file")->required();

  auto* dataset = app.add_subcommand("dataset", "export the synthetic test split with a manifest");
  add_common(dataset, common);
  dataset->add_flag("--train-split", train_split, "export the training split instead");

  auto* explain = app.add_subcommand("explain", "generate a scanpath and attribution map for one image");
  add_common(explain, common);
  explain->add_option("--weights", weights, "weight file")->required();
  explain->add_option("--image", image, "PGM/PPM input image")->required();
  explain->add_option("--label", label, "explain this class instead of the prediction");

  auto* evaluate = app.add_subcommand("evaluate", "score explanations over a manifest");
  add_common(evaluate, common);
  evaluate->add_option("--weights", weights, "weight file")->required();
  evaluate->add_option("--manifest", manifest, "dataset manifest (CSV)")->required();
  evaluate->add_option("--method", method, "explanation method")
      ->required()
      ->check(CLI::IsMember({"fovex", "random_cam"}));

  auto* render = app.add_subcommand("render", "redraw heatmap and overlay from a scanpath file");
  add_common(render, common, false);
  render->add_option("--scanpath", scanpath, "scanpath text file")->required();
  render->add_option("--image", image, "PGM/PPM input image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? fovex::exit_ok : fovex::exit_usage;
  }

  try {
    if (train->parsed()) {
      const auto r = fovex::cmd_train(common, weights);
      std::printf("trained %zu epochs, final loss %s", r.result.epoch_losses.size(),
                  fovex::format_double(r.result.epoch_losses.back()).c_str());
      if (r.test_accuracy) std::printf(", test accuracy %s", fovex::format_double(*r.test_accuracy).c_str());
      std::printf("\n");
    } else if (dataset->parsed()) {
      std::printf("%s\n", fovex::cmd_dataset(common, !train_split).c_str());
    } else if (explain->parsed()) {
      const auto r = fovex::cmd_explain(common, weights, image, label);
      std::printf("predicted class %zu, %zu fixations, final loss %s\n", r.predicted, r.scanpath.size(),
                  fovex::format_double(r.scanpath.losses.back()).c_str());
    } else if (evaluate->parsed()) {
      const auto r = fovex::cmd_evaluate(common, weights, manifest, method);
      std::printf("%s: %zu images evaluated (%zu misclassified skipped)\n", r.method.c_str(), r.images.size(),
                  r.images_misclassified);
      for (std::size_t c = 0; c < r.columns.size(); ++c) {
        std::printf("  %-10s %s\n", r.columns[c].c_str(), fovex::format_double(r.aggregate[c]).c_str());
      }
    } else if (render->parsed()) {
      fovex::cmd_render(common, scanpath, image);
    }
  } catch (const fovex::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return fovex::exit_usage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return fovex::exit_code_for(std::current_exception());
  }
  return fovex::exit_ok;
}
