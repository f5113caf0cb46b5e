#pragma once

// Faithfulness (avg % drop / increase, deletion and insertion AUC),
// localization (energy-based pointing game) and gaze agreement (NSS, AUC-Judd).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fovex/attribution.hpp"
#include "fovex/error.hpp"
#include "fovex/foveation.hpp"
#include "fovex/geometry.hpp"
#include "fovex/predictor.hpp"
#include "fovex/tensor.hpp"

namespace fovex {

struct FixationGroundTruth {
  std::vector<Pixel> pixels;
  std::string image_id;
};

template <Classifier M>
double target_score(const M& model, const Tensor& x, std::size_t target) {
  const auto p = class_probabilities(model, x);
  if (target >= p.size()) throw ShapeError("target class " + std::to_string(target) + " out of range");
  return p[target];
}

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0, carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

inline void check_map_matches(const AttributionMap& map, const Tensor& image) {
  if (image.rank() != 3 || image.shape()[1] != map.height || image.shape()[2] != map.width ||
      map.values.size() != map.height * map.width) {
    throw ShapeError("attribution map " + std::to_string(map.height) + "x" + std::to_string(map.width) +
                     " does not cover image " + to_string(image.shape()));
  }
}

// Image multiplied per pixel by the map, broadcast over channels.
inline Tensor masked_image(const Tensor& image, const AttributionMap& map) {
  check_map_matches(map, image);
  const std::size_t C = image.shape()[0], HW = map.values.size();
  std::vector<double> out(image.data().begin(), image.data().end());
  for (std::size_t ch = 0; ch < C; ++ch) {
    for (std::size_t i = 0; i < HW; ++i) out[ch * HW + i] *= map.values[i];
  }
  return Tensor(image.shape(), std::move(out));
}

struct DropIncrease {
  double drop = 0.0;      // percent
  double increase = 0.0;  // percent
  std::size_t excluded = 0;  // images whose unmasked score was 0
  std::vector<double> per_image_drop;      // NaN for excluded images
  std::vector<double> per_image_increase;  // NaN for excluded images
};

// Y = target score on the image, O = score on image * map.
// drop = 100 * mean(max(0, Y - O) / Y), increase = 100 * fraction(O > Y).
template <Classifier M>
DropIncrease avg_drop_increase(const M& model, std::span<const Tensor> images, std::span<const AttributionMap> maps,
                               std::span<const std::size_t> targets) {
  if (images.size() != maps.size() || images.size() != targets.size()) {
    throw Error("avg_drop_increase needs aligned image, map and target lists");
  }
  DropIncrease out;
  double drop_sum = 0.0, inc_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const double y = target_score(model, images[i], targets[i]);
    const double o = target_score(model, masked_image(images[i], maps[i]), targets[i]);
    if (!(y > 0.0)) {
      ++out.excluded;
      out.per_image_drop.push_back(std::nan(""));
      out.per_image_increase.push_back(std::nan(""));
      continue;
    }
    const double d = 100.0 * std::max(0.0, y - o) / y;
    const double inc = o > y ? 100.0 : 0.0;
    out.per_image_drop.push_back(d);
    out.per_image_increase.push_back(inc);
    drop_sum += d;
    inc_sum += inc;
    ++used;
  }
  if (used > 0) {
    out.drop = drop_sum / double(used);
    out.increase = inc_sum / double(used);
  }
  return out;
}

// Pixel indices by descending saliency; ties keep row-major order.
inline std::vector<std::size_t> saliency_order(const AttributionMap& map) {
  std::vector<std::size_t> order(map.values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&map](std::size_t a, std::size_t b) { return map.values[a] > map.values[b]; });
  return order;
}

enum class CurveMode { deletion, insertion };

struct CurveResult {
  double auc = 0.0;
  std::vector<double> fractions;  // share of pixels removed / inserted
  std::vector<double> scores;     // target probability at each fraction
  bool degenerate_map = false;    // every map value equal; ranking is pure tie-break
};

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

// Deletion starts from the image and overwrites ranked pixels with zeros.
// Insertion starts from `insert_baseline` and restores ranked pixels. Each
// step moves max(1, round(step_fraction * pixels)) pixels.
template <Classifier M>
CurveResult delete_insert_auc(const M& model, const Tensor& image, const AttributionMap& map, std::size_t target,
                              double step_fraction, CurveMode mode, const Tensor& insert_baseline) {
  check_map_matches(map, image);
  if (!(step_fraction > 0.0 && step_fraction <= 1.0)) throw ConfigError("metrics.step_fraction", "must lie in (0, 1]");
  if (mode == CurveMode::insertion && insert_baseline.shape() != image.shape()) {
    throw ShapeError("insertion baseline " + to_string(insert_baseline.shape()) + " does not match image " +
                     to_string(image.shape()));
  }
  const std::size_t C = image.shape()[0], HW = map.values.size();
  const std::size_t per_step =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(step_fraction * double(HW))));

  CurveResult out;
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  out.degenerate_map = *lo == *hi;
  const auto order = saliency_order(map);

  auto src = image.data();
  std::vector<double> canvas;
  if (mode == CurveMode::deletion) canvas.assign(src.begin(), src.end());
  else canvas.assign(insert_baseline.data().begin(), insert_baseline.data().end());

  auto score = [&] { return target_score(model, Tensor(image.shape(), canvas), target); };
  out.fractions.push_back(0.0);
  out.scores.push_back(score());
  for (std::size_t done = 0; done < HW;) {
    const std::size_t next = std::min(HW, done + per_step);
    for (std::size_t k = done; k < next; ++k) {
      const std::size_t px = order[k];
      for (std::size_t ch = 0; ch < C; ++ch) {
        canvas[ch * HW + px] = mode == CurveMode::deletion ? 0.0 : src[ch * HW + px];
      }
    }
    done = next;
    out.fractions.push_back(double(done) / double(HW));
    out.scores.push_back(score());
  }
  out.auc = trapezoid(out.fractions, out.scores);
  return out;
}

// Insertion baseline is the foveation blur of the image.
template <Classifier M>
CurveResult delete_insert_auc(const M& model, const Tensor& image, const AttributionMap& map, std::size_t target,
                              double step_fraction, CurveMode mode, const FoveationConfig& fov) {
  const Tensor baseline = mode == CurveMode::insertion ? coarse(image, fov) : Tensor::zeros(image.shape());
  return delete_insert_auc(model, image, map, target, step_fraction, mode, baseline);
}

// Share of map energy inside the union of boxes; 0 when the map sums to 0.
inline double ebpg(const AttributionMap& map, std::span<const BoundingBox> boxes) {
  if (boxes.empty()) throw DataError("EBPG needs at least one bounding box");
  for (const auto& b : boxes) {
    if (!b.fits(map.height, map.width)) {
      throw DataError("bounding box (" + std::to_string(b.top) + "," + std::to_string(b.left) + "," +
                      std::to_string(b.height) + "," + std::to_string(b.width) + ") outside " +
                      std::to_string(map.height) + "x" + std::to_string(map.width) + " map");
    }
  }
  CompensatedSum inside, total;
  for (std::size_t r = 0; r < map.height; ++r) {
    for (std::size_t c = 0; c < map.width; ++c) {
      const double v = map.at(r, c);
      total.add(v);
      if (std::any_of(boxes.begin(), boxes.end(), [r, c](const BoundingBox& b) { return b.contains(r, c); })) {
        inside.add(v);
      }
    }
  }
  return total.value() > 0.0 ? inside.value() / total.value() : 0.0;
}

inline void check_fixations(const AttributionMap& map, std::span<const Pixel> fixations) {
  if (fixations.empty()) throw DataError("fixation list is empty");
  for (const auto& p : fixations) {
    if (p.row >= map.height || p.col >= map.width) {
      throw DataError("fixation (" + std::to_string(p.row) + "," + std::to_string(p.col) + ") outside map");
    }
  }
}

// Mean z-scored saliency at fixated pixels (population standard deviation).
// A constant map scores 0.
inline double nss(const AttributionMap& map, std::span<const Pixel> fixations) {
  check_fixations(map, fixations);
  const double n = double(map.values.size());
  const double mean = std::accumulate(map.values.begin(), map.values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : map.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) return 0.0;
  double acc = 0.0;
  for (const auto& p : fixations) acc += (map.at(p.row, p.col) - mean) / sd;
  return acc / double(fixations.size());
}

// AUC-Judd: thresholds are the distinct saliency values at fixations. At each
// threshold TPR is the share of fixations at or above it and FPR the share of
// all pixels at or above it; the curve is closed with (0,0) and (1,1).
inline double aucj(const AttributionMap& map, std::span<const Pixel> fixations) {
  check_fixations(map, fixations);
  std::vector<double> fix_vals;
  fix_vals.reserve(fixations.size());
  for (const auto& p : fixations) fix_vals.push_back(map.at(p.row, p.col));
  std::sort(fix_vals.begin(), fix_vals.end(), std::greater<>());

  std::vector<double> all = map.values;
  std::sort(all.begin(), all.end(), std::greater<>());

  std::vector<double> fpr{0.0}, tpr{0.0};
  std::size_t fi = 0, ai = 0;
  for (std::size_t i = 0; i < fix_vals.size();) {
    const double t = fix_vals[i];
    while (i < fix_vals.size() && fix_vals[i] == t) ++i;
    fi = i;
    while (ai < all.size() && all[ai] >= t) ++ai;
    tpr.push_back(double(fi) / double(fix_vals.size()));
    fpr.push_back(double(ai) / double(all.size()));
  }
  fpr.push_back(1.0);
  tpr.push_back(1.0);
  return trapezoid(fpr, tpr);
}

}  // namespace fovex
