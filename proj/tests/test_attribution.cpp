#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fovex/attribution.hpp"
#include "fovex/image_io.hpp"
#include "fovex/metrics.hpp"
#include "support.hpp"

using namespace fovex;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n, std::size_t H, std::size_t W) {
  std::uniform_real_distribution<double> rr(0.0, double(H) - 1.0), cc(0.0, double(W) - 1.0);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = {rr(rng), cc(rng)};
  return pts;
}

}  // namespace

TEST(BuildMap, SingleFixationPeaksAtOne) {
  const std::vector<Point> f{{3, 5}};
  const std::vector<double> w{0.7};
  const auto m = build_map(f, w, 1.5, 8, 9);
  EXPECT_EQ(m.at(3, 5), 1.0);
  EXPECT_EQ(*std::min_element(m.values.begin(), m.values.end()), 0.0);
  EXPECT_EQ(*std::max_element(m.values.begin(), m.values.end()), 1.0);
}

TEST(BuildMap, RepeatedFixationEqualsSingle) {
  const std::vector<Point> one{{4.2, 2.9}}, two{{4.2, 2.9}, {4.2, 2.9}};
  const std::vector<double> w1{1.0}, w2{0.3, 2.0};
  const auto a = build_map(one, w1, 2.0, 10, 10), b = build_map(two, w2, 2.0, 10, 10);
  EXPECT_LE(max_abs_diff(a.values, b.values), 1e-15);
}

TEST(BuildMap, OppositeCornersScalarOracle) {
  const std::vector<Point> f{{0, 0}, {8, 8}};
  const std::vector<double> w{1.0, 0.5};
  const double sigma = 2.0;
  const auto m = build_map(f, w, sigma, 9, 9);
  std::vector<double> raw;
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      double v = 0.0;
      v += 1.0 * std::exp(-(r * r + c * c) / (2 * sigma * sigma));
      v += 0.5 * std::exp(-((r - 8) * (r - 8) + (c - 8) * (c - 8)) / (2 * sigma * sigma));
      raw.push_back(v);
    }
  }
  const double lo = *std::min_element(raw.begin(), raw.end()), hi = *std::max_element(raw.begin(), raw.end());
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(m.values[i], (raw[i] - lo) / (hi - lo), 1e-15);
}

TEST(BuildMap, ScaleInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = random_points(rng, 6, 12, 15);
    std::vector<double> w(6), w2(6);
    for (auto& a : w) a = u(rng);
    const double k = u(rng) * 10;
    for (std::size_t i = 0; i < 6; ++i) w2[i] = w[i] * k;
    EXPECT_LE(max_abs_diff(build_map(pts, w, 2.0, 12, 15).values, build_map(pts, w2, 2.0, 12, 15).values), 1e-12);
  }
}

TEST(BuildMap, MirrorEquivariance) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t H = 11, W = 14;
    auto pts = random_points(rng, 5, H, W);
    const std::vector<double> w{1, 0.5, 2, 0.1, 1};
    const auto m = build_map(pts, w, 1.7, H, W);
    for (auto& p : pts) p.col = double(W) - 1.0 - p.col;
    const auto mm = build_map(pts, w, 1.7, H, W);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) EXPECT_NEAR(mm.at(r, c), m.at(r, W - 1 - c), 1e-12);
    }
  }
}

TEST(BuildMap, NormalizationIdempotent) {
  std::mt19937_64 rng(3);
  const auto pts = random_points(rng, 7, 16, 16);
  const std::vector<double> w(7, 1.0);
  const auto m = build_map(pts, w, 3.0, 16, 16);
  EXPECT_LE(max_abs_diff(normalize_min_max(m.values), m.values), 1e-12);
}

TEST(BuildMap, Errors) {
  const std::vector<Point> none, one{{1, 1}};
  const std::vector<double> w0, w1{1.0}, w2{1.0, 1.0}, zero{0.0}, neg{-1.0};
  EXPECT_THROW(build_map(none, w0, 1.0, 4, 4), Error);
  EXPECT_THROW(build_map(one, w2, 1.0, 4, 4), Error);
  EXPECT_THROW(build_map(one, w1, 0.0, 4, 4), ConfigError);
  EXPECT_THROW(build_map(one, zero, 1.0, 4, 4), ConfigError);
  EXPECT_THROW(build_map(one, neg, 1.0, 4, 4), ConfigError);
}

TEST(Normalize, ConstantMapsToZeros) {
  for (double v : normalize_min_max({0.3, 0.3, 0.3})) EXPECT_EQ(v, 0.0);
}

TEST(FixationWeights, ConfidenceGain) {
  Scanpath p;
  p.fixations = {{0, 0}, {1, 1}, {2, 2}};
  p.confidences = {0.4, 0.3, 0.9};
  p.base_confidence = 0.1;
  const auto w = fixation_weights(p, Weighting::confidence_gain);
  EXPECT_NEAR(w[0], 0.3, 1e-15);
  EXPECT_EQ(w[1], 0.0);
  EXPECT_NEAR(w[2], 0.6, 1e-15);
  EXPECT_EQ(fixation_weights(p, Weighting::uniform), (std::vector<double>{1, 1, 1}));
  p.confidences = {0.05, 0.04, 0.03};
  EXPECT_EQ(fixation_weights(p, Weighting::confidence_gain), (std::vector<double>{1, 1, 1}));
}

TEST(RandomCam, DeterministicAndNormalized) {
  const RandomCamConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_cam(seed, 20, 24, cfg, 3), b = random_cam(seed, 20, 24, cfg, 3);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(*std::min_element(a.values.begin(), a.values.end()), 0.0);
    EXPECT_EQ(*std::max_element(a.values.begin(), a.values.end()), 1.0);
    EXPECT_EQ(a.source, "random_cam");
  }
  EXPECT_NE(random_cam(0, 20, 24, cfg, 0).values, random_cam(0, 20, 24, cfg, 1).values);
}

TEST(RandomCam, ExpectedEbpgMatchesBoxArea) {
  const std::size_t S = 32;
  const std::vector<BoundingBox> box{{8, 8, 16, 16}};  // centred, a quarter of the area
  RandomCamConfig cfg{1, 5, 2.0, 6.4};
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) total += ebpg(random_cam(seed, S, S, cfg), box);
  EXPECT_NEAR(total / 100.0, 0.25, 0.1);
}

TEST(RandomCam, InvalidRanges) {
  EXPECT_THROW(random_cam(0, 8, 8, RandomCamConfig{0, 2, 1, 2}), ConfigError);
  EXPECT_THROW(random_cam(0, 8, 8, RandomCamConfig{3, 2, 1, 2}), ConfigError);
  EXPECT_THROW(random_cam(0, 8, 8, RandomCamConfig{1, 2, 3, 2}), ConfigError);
}

TEST(RenderHeatmap, ZeroMapIsBlack) {
  AttributionMap m{3, 4, std::vector<double>(12, 0.0), "fovex", {}};
  const auto dir = fovex::testing::scratch_dir("heat_zero");
  render_heatmap(m, (dir / "h.pgm").string());
  const auto img = read_pnm((dir / "h.pgm").string());
  EXPECT_EQ(img.channels, 1u);
  for (auto s : img.samples) EXPECT_EQ(s, 0);
}

TEST(RenderHeatmap, QuantizationRoundsHalfUp) {
  EXPECT_EQ(quantize(1.0), 255);
  EXPECT_EQ(quantize(0.0), 0);
  EXPECT_EQ(quantize(0.5 / 255.0), 1);
  EXPECT_EQ(quantize(0.49 / 255.0), 0);
  EXPECT_EQ(quantize(2.0), 255);
}

TEST(RenderHeatmap, RereadReproducesQuantizedValues) {
  std::mt19937_64 rng(5);
  const auto pts = random_points(rng, 3, 13, 17);
  const std::vector<double> w{1, 1, 1};
  AttributionMap m = build_map(pts, w, 2.5, 13, 17);
  m.provenance = "fixations=3";
  std::mt19937_64 rng2(6);
  const Tensor image = fovex::testing::random_tensor({3, 13, 17}, rng2, 0, 1);
  const auto dir = fovex::testing::scratch_dir("heat_rt");
  render_heatmap(m, (dir / "h.pgm").string(), &image, (dir / "o.ppm").string());
  const auto gray = read_pnm((dir / "h.pgm").string());
  ASSERT_EQ(gray.samples.size(), m.values.size());
  for (std::size_t i = 0; i < m.values.size(); ++i) EXPECT_EQ(gray.samples[i], quantize(m.values[i]));
  const auto overlay = read_pnm((dir / "o.ppm").string());
  EXPECT_EQ(overlay.channels, 3u);
  EXPECT_EQ(overlay.samples, heatmap_overlay(m, image).samples);
  const auto bytes = fovex::testing::file_bytes(dir / "h.pgm");
  const std::string head(bytes.begin(), bytes.begin() + 80);
  EXPECT_NE(head.find("# fovex attribution source=fovex fixations=3"), std::string::npos);
}
