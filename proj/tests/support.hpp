#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "fovex/predictor.hpp"
#include "fovex/tensor.hpp"

namespace fovex::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0, bool rg = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), rg);
}

// Max over components of |a - n| / max(1e-8, |a|, |n|).
inline double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({1e-8, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

// Central differences of a scalar function of `x`'s values, perturbing x in place.
inline std::vector<double> numeric_grad(Tensor& x, const std::function<double()>& f, double h = 1e-5) {
  auto d = x.mutable_data();
  std::vector<double> g(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double keep = d[i];
    d[i] = keep + h;
    const double up = f();
    d[i] = keep - h;
    const double down = f();
    d[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Copy of `p` whose final dense layer is zeroed: constant logits, and an
// exactly zero gradient with respect to the input.
inline Predictor zero_head(const Predictor& p) {
  Predictor q = p.clone();
  auto params = q.parameters();
  for (std::size_t i = params.size() - 2; i < params.size(); ++i) {
    for (double& v : params[i].mutable_data()) v = 0.0;
  }
  return q;
}

// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fovex_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fovex::testing
