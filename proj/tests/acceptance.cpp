// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>

#include "fovex/commands.hpp"
#include "fovex/evaluate.hpp"
#include "fovex/foveation.hpp"
#include "fovex/scanpath.hpp"
#include "fovex/synthetic.hpp"
#include "fovex/train.hpp"
#include "fovex/weights.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fovex;
using namespace fovex::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Outcome gradient_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fov = FoveationConfig::for_width(32);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Predictor model = Predictor::toy({1, 32, 32}, 4, seed);
    std::mt19937_64 rng(1000 + seed);
    const Tensor x = random_tensor({1, 32, 32}, rng, 0, 1);
    const Tensor xc = coarse(x, fov);
    std::uniform_real_distribution<double> u(2.0, 29.0);
    const auto state = update_state(FoveationState::initial(32, 32), {u(rng), u(rng)}, fov.sigma_fovea, fov.beta);
    const Point f{u(rng), u(rng)};
    const std::size_t target = seed % 4;
    const auto r = fixation_step(model, x, xc, state, f, target, fov, 1.0);
    Tensor focus = focus_tensor(f);
    const auto numeric = numeric_grad(focus, [&] {
      NoGradGuard guard;
      const Tensor g = next_visibility(state, focus, fov.sigma_fovea, fov.beta);
      return softmax_cross_entropy(model.logits(render_state(x, xc, g)), target).item();
    });
    worst = std::max(worst, max_rel_error({r.gradient.row, r.gradient.col}, numeric));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 60.0, "max rel error " + fmt("%.3g", worst) + " (< 1e-4), " + fmt("%.2f", t) + " s (< 60 s)"};
}

Outcome foveation_identities() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t H = 8 + trial % 9, W = 8 + trial % 13, C = trial % 2 ? 3 : 1;
    const Tensor x = random_tensor({C, H, W}, rng, 0, 1);
    const auto fov = FoveationConfig::for_width(W);
    const Tensor xc = coarse(x, fov);
    const Tensor focus = focus_tensor({u(rng) * double(H - 1), u(rng) * double(W - 1)});
    worst = std::max(worst, max_abs_diff(foveate(x, x, focus, fov.sigma_fovea).data(), x.data()));
    worst = std::max(worst, max_abs_diff(render_state(x, xc, Tensor::zeros({H, W})).data(), xc.data()));
    worst = std::max(worst, max_abs_diff(render_state(x, xc, Tensor::ones({H, W})).data(), x.data()));
    const Tensor g = random_tensor({H, W}, rng, 0, 1);
    const Tensor blended = render_state(x, xc, g);
    const auto s = blended.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double lo = std::min(x.data()[i], xc.data()[i]), hi = std::max(x.data()[i], xc.data()[i]);
      worst = std::max({worst, lo - s[i], s[i] - hi});
    }
  }
  return {worst <= 1e-12, "max violation " + fmt("%.3g", worst) + " over 100 images (<= 1e-12)"};
}

Outcome attribution_invariances() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0), k(0.1, 20.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t H = 10 + trial % 7, W = 12 + trial % 5, n = 1 + trial % 8;
    std::vector<Point> pts(n);
    std::vector<double> w(n), w2(n);
    for (auto& p : pts) p = {u(rng) * double(H - 1), u(rng) * double(W - 1)};
    const double scale = k(rng);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.05 + u(rng);
      w2[i] = w[i] * scale;
    }
    const double sigma = 1.0 + 3.0 * u(rng);
    const auto m = build_map(pts, w, sigma, H, W);
    worst = std::max(worst, max_abs_diff(m.values, build_map(pts, w2, sigma, H, W).values));
    auto mirrored = pts;
    for (auto& p : mirrored) p.col = double(W) - 1.0 - p.col;
    const auto mm = build_map(mirrored, w, sigma, H, W);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) worst = std::max(worst, std::abs(mm.at(r, c) - m.at(r, W - 1 - c)));
    }
    worst = std::max(worst, max_abs_diff(normalize_min_max(m.values), m.values));
  }
  return {worst <= 1e-12, "max deviation " + fmt("%.3g", worst) + " over 50 scanpaths (<= 1e-12)"};
}

Outcome metric_oracles() {
  double auc_err = 0.0, aucj_err = 0.0;
  {
    LinearModel m{{2.0, 0, 0, 0}, {0, 0, 0, 0.5}};
    const Tensor img({1, 2, 2}, {0.9, 0.3, 0.6, 0.8});
    const Tensor base({1, 2, 2}, {0.1, 0.2, 0.3, 0.4});
    std::vector<double> ranks{0.1, 0.4, 0.7, 1.0};
    do {
      const auto map = map_of(2, 2, ranks);
      auc_err = std::max(auc_err, std::abs(delete_insert_auc(m, img, map, 0, 0.25, CurveMode::deletion, base).auc -
                                           stepwise_auc(m, img, img, ranks, true)));
      auc_err = std::max(auc_err, std::abs(delete_insert_auc(m, img, map, 0, 0.25, CurveMode::insertion, base).auc -
                                           stepwise_auc(m, img, base, ranks, false)));
    } while (std::next_permutation(ranks.begin(), ranks.end()));
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    LinearModel m{std::vector<double>(16), std::vector<double>(16)};
    for (auto& w : m.w0) w = u(rng);
    for (auto& w : m.w1) w = u(rng);
    const Tensor img = random_tensor({1, 4, 4}, rng, 0, 1), base = random_tensor({1, 4, 4}, rng, 0, 1);
    auto map = random_map(rng, 4, 4);
    map.values[3] = map.values[12];
    auc_err = std::max(auc_err, std::abs(delete_insert_auc(m, img, map, 0, 1.0 / 16, CurveMode::deletion, base).auc -
                                         stepwise_auc(m, img, img, map.values, true)));
    auc_err = std::max(auc_err, std::abs(delete_insert_auc(m, img, map, 0, 1.0 / 16, CurveMode::insertion, base).auc -
                                         stepwise_auc(m, img, base, map.values, false)));
  }
  std::uniform_int_distribution<std::size_t> px(0, 63);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_map(rng, 8, 8);
    m.values[px(rng)] = m.values[px(rng)];
    std::vector<Pixel> f;
    std::vector<std::size_t> flat;
    for (int k = 0; k < 6; ++k) {
      const std::size_t i = px(rng);
      f.push_back({i / 8, i % 8});
      flat.push_back(i);
    }
    aucj_err = std::max(aucj_err, std::abs(aucj(m, f) - aucj_oracle(m.values, flat)));
  }
  const std::vector<Pixel> fix{{0, 0}};
  const double nss_value = nss(map_of(2, 2, {1, 0, 0, 0}), fix);
  const std::vector<BoundingBox> quarter{{0, 0, 4, 4}};
  const double ebpg_value = ebpg(map_of(8, 8, std::vector<double>(64, 0.7)), quarter);
  const bool pass = auc_err <= 1e-12 && aucj_err <= 1e-12 && std::abs(nss_value - 1.7321) <= 1e-4 &&
                    std::abs(nss_value - 0.75 / std::sqrt(0.1875)) <= 1e-6 && ebpg_value == 0.25;
  return {pass, "del/ins err " + fmt("%.3g", auc_err) + ", aucj err " + fmt("%.3g", aucj_err) + ", nss " +
                    fmt("%.6f", nss_value) + ", ebpg " + fmt("%.17g", ebpg_value)};
}

Outcome metric_invariances() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1), a(0.1, 5), b(-3, 3), s(0.01, 100);
  LinearModel model{std::vector<double>(16), std::vector<double>(16)};
  for (auto& w : model.w0) w = u(rng);
  for (auto& w : model.w1) w = u(rng);
  std::uniform_int_distribution<std::size_t> px(0, 15);
  const std::vector<BoundingBox> box{{1, 0, 2, 3}};
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_map(rng, 4, 4);
    auto mono = m, affine = m, scaled = m;
    const double sa = a(rng), ob = b(rng), k = s(rng);
    for (double& v : mono.values) v = std::exp(3.0 * v) + 0.5 * v * v * v;
    for (double& v : affine.values) v = sa * v + ob;
    for (double& v : scaled.values) v *= k;
    const Tensor img = random_tensor({1, 4, 4}, rng, 0, 1), base = Tensor::zeros({1, 4, 4});
    for (auto mode : {CurveMode::deletion, CurveMode::insertion}) {
      worst = std::max(worst, std::abs(delete_insert_auc(model, img, m, 1, 0.125, mode, base).auc -
                                       delete_insert_auc(model, img, mono, 1, 0.125, mode, base).auc));
    }
    const std::vector<Pixel> f{{px(rng) / 4, px(rng) % 4}, {px(rng) / 4, px(rng) % 4}, {3, 1}};
    worst = std::max(worst, std::abs(aucj(m, f) - aucj(mono, f)));
    worst = std::max(worst, std::abs(nss(m, f) - nss(affine, f)));
    worst = std::max(worst, std::abs(ebpg(m, box) - ebpg(scaled, box)));
  }
  return {worst <= 1e-9, "max deviation " + fmt("%.3g", worst) + " over 50 maps (<= 1e-9)"};
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  const auto train_set = synthetic_split(cfg, false), test_set = synthetic_split(cfg, true);
  const Predictor model = train_toy(cfg.training(), train_set).predictor;
  const double acc = accuracy(model, test_set.samples);

  std::vector<EvalImage> images;
  for (std::size_t i = 0; i < test_set.samples.size(); ++i) {
    const auto& s = test_set.samples[i];
    images.push_back({"test_" + std::to_string(i), s.image, s.label, {s.box}, {}});
  }
  cfg.metrics = {"drop_increase", "ebpg"};
  cfg.max_images = 100;
  const auto fx = evaluate_batch(model, images, Method::fovex, cfg, "synthetic_test");
  const auto rc = evaluate_batch(model, images, Method::random_cam, cfg, "synthetic_test");
  const double gap = fx.mean("ebpg") - rc.mean("ebpg");
  const double t = seconds_since(t0);
  const bool pass = acc >= 0.9 && fx.images.size() == 100 && gap >= 0.15 && fx.mean("drop") < rc.mean("drop") &&
                    t < 900.0;
  return {pass, "accuracy " + fmt("%.3f", acc) + ", images " + std::to_string(fx.images.size()) + ", ebpg fovex " +
                    fmt("%.4f", fx.mean("ebpg")) + " vs random_cam " + fmt("%.4f", rc.mean("ebpg")) + " (gap " +
                    fmt("%.4f", gap) + " >= 0.15), drop fovex " + fmt("%.3f", fx.mean("drop")) + " vs random_cam " +
                    fmt("%.3f", rc.mean("drop")) + ", " + fmt("%.1f", t) + " s (< 900 s)"};
}

Outcome determinism() {
  const fs::path dir = scratch_dir("acceptance_determinism");
  std::ofstream(dir / "run.cfg") << "data.image_size = 32\n"
                                    "data.train_count = 400\n"
                                    "data.test_count = 8\n"
                                    "train.epochs = 2\n"
                                    "scanpath.fixations = 5\n"
                                    "metrics.step_fraction = 0.05\n";
  CommonOptions o{(dir / "run.cfg").string(), (dir / "setup").string(), 17};
  const std::string weights = (dir / "w.bin").string();
  cmd_train(o, weights);
  o.out_dir = (dir / "data").string();
  const std::string manifest = cmd_dataset(o);
  const std::string image = (dir / "data" / "img_00002.pgm").string();

  std::vector<std::string> differing;
  auto compare = [&](const std::string& a, const std::string& b, std::initializer_list<const char*> files) {
    for (const char* f : files) {
      const auto x = file_bytes(dir / a / f);
      if (x.empty() || x != file_bytes(dir / b / f)) differing.push_back(a + "/" + f);
    }
  };
  for (const char* run : {"explain_1", "explain_2"}) {
    o.out_dir = (dir / run).string();
    cmd_explain(o, weights, image);
  }
  compare("explain_1", "explain_2", {"scanpath.txt", "heatmap.pgm", "overlay.ppm", "metadata.txt"});
  for (const char* method : {"fovex", "random_cam"}) {
    for (const char* run : {"_1", "_2"}) {
      o.out_dir = (dir / (std::string("evaluate_") + method + run)).string();
      cmd_evaluate(o, weights, manifest, method);
    }
    compare(std::string("evaluate_") + method + "_1", std::string("evaluate_") + method + "_2", {"report.txt"});
  }
  std::string detail = "explain (4 files) and evaluate fovex/random_cam reports compared";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

Outcome round_trips() {
  const fs::path dir = scratch_dir("acceptance_round_trip");
  std::mt19937_64 rng(8);
  std::size_t weight_mismatch = 0, pixel_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Shape in{seed % 2 ? 3u : 1u, 32, 32};
    const Predictor p = Predictor::toy(in, seed % 2 ? 2 : 4, seed);
    const std::string path = (dir / ("w" + std::to_string(seed) + ".bin")).string();
    save_weights(p, path);
    const Predictor q = load_weights(path);
    for (int k = 0; k < 5; ++k) {
      const Tensor x = random_tensor(in, rng, 0, 1);
      const Tensor za = p.logits(x), zb = q.logits(x);
      const auto a = za.data(), b = zb.data();
      if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) ++weight_mismatch;
    }
    const Tensor img = random_tensor(in, rng, 0, 1);
    const std::string ipath = (dir / (seed % 2 ? "i.ppm" : "i.pgm")).string();
    save_image(ipath, img);
    const Tensor back = load_image(ipath);
    if (back.shape() != img.shape()) ++pixel_mismatch;
    for (std::size_t i = 0; i < img.size() && back.shape() == img.shape(); ++i) {
      if (back.data()[i] != double(quantize(img.data()[i])) / 255.0) ++pixel_mismatch;
    }
  }
  return {weight_mismatch == 0 && pixel_mismatch == 0,
          std::to_string(weight_mismatch) + " forward-pass mismatches over 25 inputs, " +
              std::to_string(pixel_mismatch) + " pixel mismatches over 5 images"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient integrity", gradient_integrity},
      {"foveation identities", foveation_identities},
      {"attribution invariances", attribution_invariances},
      {"metric oracles", metric_oracles},
      {"metric invariances", metric_invariances},
      {"end-to-end localization", end_to_end},
      {"determinism", determinism},
      {"weight and image round trips", round_trips},
  };
  int failures = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    if (!r.pass) ++failures;
    std::printf("criterion %zu: %s %s: %s\n", i + 1, r.pass ? "PASS" : "FAIL", criteria[i].first, r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
