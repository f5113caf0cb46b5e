#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/foveation.hpp"
#include "fovex/geometry.hpp"
#include "fovex/predictor.hpp"
#include "fovex/random.hpp"
#include "fovex/tensor.hpp"

namespace fovex {

enum class InitPolicy { center, random };
enum class TargetPolicy { predicted, label };

struct ScanpathConfig {
  std::size_t fixations = 10;
  // Pixels moved per unit of gradient; nullopt means 5 x image width.
  std::optional<double> step_size;
  std::size_t inner_steps = 1;
  InitPolicy init = InitPolicy::center;
  TargetPolicy target = TargetPolicy::predicted;
  std::uint64_t seed = 0;

  double step_size_for(std::size_t width) const { return step_size.value_or(5.0 * double(width)); }

  void validate() const {
    if (fixations < 1) throw ConfigError("scanpath.fixations", "must be >= 1");
    if (step_size && !(*step_size > 0.0)) throw ConfigError("scanpath.step_size", "must be > 0");
    if (inner_steps < 1) throw ConfigError("scanpath.inner_steps", "must be >= 1");
  }
};

struct Scanpath {
  std::vector<Point> fixations;
  std::vector<double> losses;       // loss with the committed fixation revealed
  std::vector<double> confidences;  // target probability after each fixation
  double base_confidence = 0.0;     // target probability on the coarse image
  std::size_t target = 0;

  std::size_t size() const { return fixations.size(); }
};

// Loss of a rendered state image; `focus` is passed for objectives that
// depend on the fixation directly.
template <class F>
concept FixationObjective = requires(const F& f, const Tensor& state_image, const Tensor& focus) {
  { f(state_image, focus) } -> std::convertible_to<Tensor>;
};

template <Classifier M>
auto cross_entropy_objective(const M& model, std::size_t target) {
  return [&model, target](const Tensor& state_image, const Tensor&) {
    return softmax_cross_entropy(model.logits(state_image), target);
  };
}

inline Point clamp_to_image(Point f, std::size_t H, std::size_t W) {
  return {std::clamp(f.row, 0.0, double(H) - 1.0), std::clamp(f.col, 0.0, double(W) - 1.0)};
}

struct StepResult {
  Point focus;     // updated, clamped fixation
  double loss = 0.0;  // loss at the incoming fixation
  Point gradient;
};

// One gradient step f' = clamp(f - step_size * dL/df) on the state that would
// result from committing a fixation at f.
template <FixationObjective Obj>
StepResult fixation_step(const Obj& objective, const Tensor& x, const Tensor& x_coarse, const FoveationState& state,
                         Point f, const FoveationConfig& fov, double step_size) {
  const std::size_t H = x.shape()[1], W = x.shape()[2];
  if (!(f.row >= 0.0 && f.row <= double(H) - 1.0 && f.col >= 0.0 && f.col <= double(W) - 1.0)) {
    throw Error("fixation (" + std::to_string(f.row) + ", " + std::to_string(f.col) + ") outside image bounds");
  }
  Tensor focus = focus_tensor(f, true);
  const Tensor visibility = next_visibility(state, focus, fov.sigma_fovea, fov.beta);
  const Tensor loss = objective(render_state(x, x_coarse, visibility), focus);
  loss.backward();
  const auto g = focus.grad();
  if (!std::isfinite(g[0]) || !std::isfinite(g[1]) || !std::isfinite(loss.item())) {
    throw NumericalError("non-finite loss or fixation gradient at (" + std::to_string(f.row) + ", " +
                         std::to_string(f.col) + ")");
  }
  const Point next = clamp_to_image({f.row - step_size * g[0], f.col - step_size * g[1]}, H, W);
  return {next, loss.item(), {g[0], g[1]}};
}

template <Classifier M>
StepResult fixation_step(const M& model, const Tensor& x, const Tensor& x_coarse, const FoveationState& state, Point f,
                         std::size_t target, const FoveationConfig& fov, double step_size) {
  return fixation_step(cross_entropy_objective(model, target), x, x_coarse, state, f, fov, step_size);
}

// Runs `cfg.fixations` rounds of `cfg.inner_steps` gradient steps, committing
// each round's final location into the foveation state. `image_index` selects
// the random-init stream so batch runs stay reproducible per image.
template <Classifier M>
Scanpath generate_scanpath(const M& model, const Tensor& x, const ScanpathConfig& cfg, const FoveationConfig& fov,
                           std::optional<std::size_t> label = std::nullopt, std::uint64_t image_index = 0) {
  cfg.validate();
  fov.validate();
  if (x.rank() != 3) throw ShapeError("scanpath input must be [C,H,W], got " + to_string(x.shape()));
  const std::size_t H = x.shape()[1], W = x.shape()[2];

  Scanpath path;
  if (cfg.target == TargetPolicy::label) {
    if (!label) throw ConfigError("scanpath.target", "'label' policy needs a ground-truth label");
    path.target = *label;
  } else {
    path.target = predict_class(model, x);
  }

  const Tensor x_coarse = coarse(x, fov);
  const double step = cfg.step_size_for(W);

  Point f{(double(H) - 1.0) / 2.0, (double(W) - 1.0) / 2.0};
  if (cfg.init == InitPolicy::random) {
    auto rng = make_engine(cfg.seed, stream::scanpath_init + image_index);
    std::uniform_real_distribution<double> rows(0.0, double(H) - 1.0), cols(0.0, double(W) - 1.0);
    f.row = rows(rng);
    f.col = cols(rng);
  }

  auto objective = cross_entropy_objective(model, path.target);
  FoveationState state = FoveationState::initial(H, W);
  path.base_confidence = class_probabilities(model, render_state(x, x_coarse, state))[path.target];

  for (std::size_t i = 0; i < cfg.fixations; ++i) {
    try {
      for (std::size_t k = 0; k < cfg.inner_steps; ++k) {
        f = fixation_step(objective, x, x_coarse, state, f, fov, step).focus;
      }
    } catch (const NumericalError& e) {
      throw NumericalError("fixation " + std::to_string(i + 1) + ": " + e.what());
    }
    state = update_state(state, f, fov.sigma_fovea, fov.beta);
    NoGradGuard guard;
    const Tensor logits = model.logits(render_state(x, x_coarse, state));
    path.fixations.push_back(f);
    path.losses.push_back(softmax_cross_entropy(logits, path.target).item());
    path.confidences.push_back(softmax(logits.data())[path.target]);
  }
  return path;
}

}  // namespace fovex
