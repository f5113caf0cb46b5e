#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/geometry.hpp"
#include "fovex/image_io.hpp"
#include "fovex/random.hpp"
#include "fovex/scanpath.hpp"
#include "fovex/tensor.hpp"

namespace fovex {

// Per-pixel relevance grid in [0,1], row-major.
struct AttributionMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::string source;      // "fovex" or "random_cam"
  std::string provenance;  // free-form config snapshot

  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
};

// Min-max normalization; a constant input maps to all zeros.
inline std::vector<double> normalize_min_max(std::vector<double> v) {
  if (v.empty()) return v;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mn = *lo, range = *hi - *lo;
  if (!(range > 0.0)) {
    std::fill(v.begin(), v.end(), 0.0);
    return v;
  }
  for (double& x : v) x = (x - mn) / range;
  return v;
}

enum class Weighting { uniform, confidence_gain };

// alpha_i = max(0, p_i - p_{i-1}) with p_0 the coarse-image confidence.
// Falls back to uniform weights when no fixation raised the confidence.
inline std::vector<double> fixation_weights(const Scanpath& path, Weighting mode) {
  std::vector<double> w(path.size(), 1.0);
  if (mode == Weighting::uniform) return w;
  double prev = path.base_confidence;
  bool any = false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    w[i] = std::max(0.0, path.confidences[i] - prev);
    any = any || w[i] > 0.0;
    prev = path.confidences[i];
  }
  if (!any) std::fill(w.begin(), w.end(), 1.0);
  return w;
}

// Min-max normalized sum of weighted unnormalized Gaussians, one per fixation.
inline AttributionMap build_map(std::span<const Point> fixations, std::span<const double> weights, double sigma,
                                std::size_t H, std::size_t W) {
  if (fixations.empty()) throw Error("cannot build an attribution map from an empty scanpath");
  if (weights.size() != fixations.size()) {
    throw Error("got " + std::to_string(weights.size()) + " weights for " + std::to_string(fixations.size()) +
                " fixations");
  }
  if (!(sigma > 0.0)) throw ConfigError("attribution.sigma", "must be > 0");
  if (std::any_of(weights.begin(), weights.end(), [](double a) { return !(a >= 0.0); })) {
    throw ConfigError("attribution weights", "must be non-negative");
  }
  if (std::all_of(weights.begin(), weights.end(), [](double a) { return a == 0.0; })) {
    throw ConfigError("attribution weights", "must not all be zero");
  }

  std::vector<double> acc(H * W, 0.0);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < fixations.size(); ++i) {
    const Point f = fixations[i];
    for (std::size_t r = 0; r < H; ++r) {
      const double dr = double(r) - f.row;
      for (std::size_t c = 0; c < W; ++c) {
        const double dc = double(c) - f.col;
        acc[r * W + c] += weights[i] * std::exp(-(dr * dr + dc * dc) * inv2s2);
      }
    }
  }
  return {H, W, normalize_min_max(std::move(acc)), "fovex", {}};
}

inline AttributionMap build_map(const Scanpath& path, Weighting mode, double sigma, std::size_t H, std::size_t W) {
  const auto w = fixation_weights(path, mode);
  return build_map(path.fixations, w, sigma, H, W);
}

struct RandomCamConfig {
  std::size_t min_blobs = 1;
  std::size_t max_blobs = 5;
  double min_sigma = 4.0;
  double max_sigma = 12.0;

  void validate() const {
    if (min_blobs < 1 || max_blobs < min_blobs) throw ConfigError("random_cam.blobs", "need 1 <= min <= max");
    if (!(min_sigma > 0.0) || max_sigma < min_sigma) throw ConfigError("random_cam.sigma", "need 0 < min <= max");
  }
};

// Sanity-check baseline: Gaussians at uniform positions with uniform sigma.
inline AttributionMap random_cam(std::uint64_t seed, std::size_t H, std::size_t W, const RandomCamConfig& cfg,
                                 std::uint64_t image_index = 0) {
  cfg.validate();
  auto rng = make_engine(seed, stream::random_cam + image_index);
  std::uniform_int_distribution<std::size_t> count(cfg.min_blobs, cfg.max_blobs);
  std::uniform_real_distribution<double> rows(0.0, double(H) - 1.0), cols(0.0, double(W) - 1.0);
  std::uniform_real_distribution<double> sigmas(cfg.min_sigma, cfg.max_sigma);

  const std::size_t n = count(rng);
  std::vector<double> acc(H * W, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double fr = rows(rng), fc = cols(rng), s = sigmas(rng);
    const double inv2s2 = 1.0 / (2.0 * s * s);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        const double dr = double(r) - fr, dc = double(c) - fc;
        acc[r * W + c] += std::exp(-(dr * dr + dc * dc) * inv2s2);
      }
    }
  }
  return {H, W, normalize_min_max(std::move(acc)), "random_cam", "seed=" + std::to_string(seed)};
}

inline PnmImage heatmap_graymap(const AttributionMap& map) {
  PnmImage img;
  img.width = map.width;
  img.height = map.height;
  img.channels = 1;
  img.samples.reserve(map.values.size());
  for (double v : map.values) img.samples.push_back(quantize(v));
  return img;
}

// Red-tinted overlay: every channel keeps 40% of the image, red adds 60% of
// the map value, green and blue add 60% of the image scaled by the map.
inline PnmImage heatmap_overlay(const AttributionMap& map, const Tensor& image) {
  if (image.rank() != 3 || image.shape()[1] != map.height || image.shape()[2] != map.width) {
    throw ShapeError("overlay image " + to_string(image.shape()) + " does not match map " +
                     std::to_string(map.height) + "x" + std::to_string(map.width));
  }
  const std::size_t C = image.shape()[0], H = map.height, W = map.width;
  auto d = image.data();
  PnmImage img;
  img.width = W;
  img.height = H;
  img.channels = 3;
  img.samples.resize(H * W * 3);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const double e = map.at(r, c);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = d[((C == 3 ? ch : 0) * H + r) * W + c];
        const double out = ch == 0 ? 0.4 * v + 0.6 * e : 0.4 * v + 0.6 * v * e;
        img.samples[(r * W + c) * 3 + ch] = quantize(out);
      }
    }
  }
  return img;
}

inline std::string heatmap_comment(const AttributionMap& map) {
  std::string c = "fovex attribution source=" + map.source;
  if (!map.provenance.empty()) c += " " + map.provenance;
  return c;
}

// Writes the map as a binary graymap; with `overlay_image`, also writes a
// pixmap overlay to `overlay_path`.
inline void render_heatmap(const AttributionMap& map, const std::string& path, const Tensor* overlay_image = nullptr,
                           const std::string& overlay_path = {}) {
  write_pnm(path, heatmap_graymap(map), heatmap_comment(map));
  if (overlay_image) write_pnm(overlay_path, heatmap_overlay(map, *overlay_image), heatmap_comment(map));
}

}  // namespace fovex
