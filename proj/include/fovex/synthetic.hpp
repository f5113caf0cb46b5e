#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/geometry.hpp"
#include "fovex/random.hpp"
#include "fovex/tensor.hpp"

namespace fovex {

struct Sample {
  Tensor image;  // [1,S,S] in [0,1]
  std::size_t label = 0;
  BoundingBox box;   // tight box around the blob's 2-sigma disc
  Point blob_center;
  double blob_sigma = 0.0;
};

struct SyntheticDataset {
  std::size_t image_size = 0;
  std::size_t classes = 0;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;
};

// Quadrant (0 TL, 1 TR, 2 BL, 3 BR) holding the blob for a class. Four
// classes use one quadrant each; two classes use the diagonal pair TL/BR.
inline std::size_t quadrant_for_class(std::size_t label, std::size_t classes) {
  if (classes == 4) return label;
  return label == 0 ? 0 : 3;
}

// Blob-quadrant task: a bright Gaussian blob on smoothed noise texture; the
// label says which quadrant holds the blob. Class counts differ by at most
// one. Pure function of its arguments.
inline SyntheticDataset generate_synthetic(std::uint64_t seed, std::size_t n, std::size_t size,
                                           std::size_t classes = 4) {
  if (n == 0) throw DataError("synthetic dataset needs at least one sample");
  if (classes != 2 && classes != 4) throw DataError("blob-quadrant task supports 2 or 4 classes");
  if (size < 16) throw DataError("synthetic images must be at least 16 pixels wide");

  auto rng = make_engine(seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Balanced labels in shuffled order.
  std::vector<std::size_t> labels(n);
  for (std::size_t k = 0; k < n; ++k) labels[k] = k % classes;
  std::shuffle(labels.begin(), labels.end(), rng);

  SyntheticDataset ds{size, classes, seed, {}};
  ds.samples.reserve(n);
  const double S = static_cast<double>(size);
  const double half = S / 2.0;
  std::vector<double> noise(size * size);

  for (std::size_t k = 0; k < n; ++k) {
    Sample s;
    s.label = labels[k];
    const std::size_t q = quadrant_for_class(s.label, classes);
    s.blob_sigma = S / 20.0 + unit(rng) * (S / 12.0 - S / 20.0);
    const double margin = 2.0 * s.blob_sigma;
    const double r0 = (q / 2) * half, c0 = (q % 2) * half;
    s.blob_center.row = r0 + margin + unit(rng) * (half - 1.0 - 2.0 * margin);
    s.blob_center.col = c0 + margin + unit(rng) * (half - 1.0 - 2.0 * margin);
    const double amplitude = 0.5 + 0.2 * unit(rng);

    for (double& v : noise) v = unit(rng);
    std::vector<double> img(size * size);
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        // 3x3 box smoothing with clamped borders gives a mottled texture.
        double acc = 0.0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const auto rr = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(r) + dr, 0, size - 1);
            const auto cc = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(c) + dc, 0, size - 1);
            acc += noise[static_cast<std::size_t>(rr) * size + static_cast<std::size_t>(cc)];
          }
        }
        const double dr = double(r) - s.blob_center.row, dc = double(c) - s.blob_center.col;
        const double blob = std::exp(-(dr * dr + dc * dc) / (2.0 * s.blob_sigma * s.blob_sigma));
        img[r * size + c] = std::clamp(0.1 + 0.35 * (acc / 9.0) + amplitude * blob, 0.0, 1.0);
      }
    }
    s.image = Tensor({1, size, size}, std::move(img));

    const auto lo = [](double v) { return static_cast<std::size_t>(std::max(0.0, std::floor(v))); };
    const auto hi = [size](double v) { return std::min(size - 1, static_cast<std::size_t>(std::ceil(v))); };
    const std::size_t top = lo(s.blob_center.row - margin), bottom = hi(s.blob_center.row + margin);
    const std::size_t left = lo(s.blob_center.col - margin), right = hi(s.blob_center.col + margin);
    s.box = BoundingBox{top, left, bottom - top + 1, right - left + 1};
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace fovex
