#pragma once

// Differentiable foveation: a blurred copy of the image stands in for the
// periphery, Gaussian visibility blobs mark where full detail is shown, and
// the rendered state mixes the two per pixel.

#include <cmath>
#include <cstddef>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/geometry.hpp"
#include "fovex/tensor.hpp"

namespace fovex {

struct FoveationConfig {
  double sigma_fovea = 8.0;   // px, visibility blob standard deviation
  double sigma_blur = 32.0;   // px, periphery blur standard deviation
  double beta = 0.5;          // forgetting factor applied to past visibility
  std::size_t blur_radius = 96;  // px, blur kernel half-width

  // sigma_blur = width/2, radius = ceil(3 sigma_blur), sigma_fovea = width/8.
  // The periphery must be blurred enough that the coarse image alone does not
  // reveal the class; otherwise the loss is flat in the fixation.
  static FoveationConfig for_width(std::size_t width) {
    FoveationConfig cfg;
    cfg.sigma_fovea = double(width) / 8.0;
    cfg.sigma_blur = double(width) / 2.0;
    cfg.blur_radius = static_cast<std::size_t>(std::ceil(3.0 * cfg.sigma_blur));
    return cfg;
  }

  void validate() const {
    if (!(sigma_fovea > 0.0)) throw ConfigError("foveation.sigma_fovea", "must be > 0");
    if (!(sigma_blur > 0.0)) throw ConfigError("foveation.sigma_blur", "must be > 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("foveation.beta", "must lie in [0, 1]");
    if (blur_radius < 1) throw ConfigError("foveation.blur_radius", "must be >= 1");
  }
};

// Normalized Gaussian taps for offsets -radius..radius.
inline std::vector<double> gaussian_kernel(double sigma, std::size_t radius) {
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double d = double(i) - double(radius);
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

// Mirror index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto len = static_cast<std::ptrdiff_t>(n);
  const std::ptrdiff_t period = 2 * (len - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < len ? i : period - i);
}

// Per-channel separable Gaussian blur with reflective borders. The result is
// a constant: gradients never flow into the coarse image.
inline Tensor coarse(const Tensor& x, double sigma_blur, std::size_t radius) {
  if (x.rank() != 3) throw ShapeError("coarse expects [C,H,W], got " + to_string(x.shape()));
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const auto k = gaussian_kernel(sigma_blur, radius);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  auto in = x.data();
  std::vector<double> tmp(in.size()), out(in.size());
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t base = c * H * W;
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t d = -r; d <= r; ++d) {
          acc += k[static_cast<std::size_t>(d + r)] * in[base + i * W + reflect_index(std::ptrdiff_t(j) + d, W)];
        }
        tmp[base + i * W + j] = acc;
      }
    }
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t d = -r; d <= r; ++d) {
          acc += k[static_cast<std::size_t>(d + r)] * tmp[base + reflect_index(std::ptrdiff_t(i) + d, H) * W + j];
        }
        out[base + i * W + j] = acc;
      }
    }
  }
  return Tensor(x.shape(), std::move(out));
}

inline Tensor coarse(const Tensor& x, const FoveationConfig& cfg) {
  return coarse(x, cfg.sigma_blur, cfg.blur_radius);
}

// Unnormalized Gaussian visibility blob [H,W] centred at `focus` = [row, col];
// differentiable with respect to both coordinates.
inline Tensor blob(const Tensor& focus, double sigma, std::size_t H, std::size_t W) {
  if (focus.size() != 2) throw ShapeError("blob focus must hold (row, col), got " + to_string(focus.shape()));
  const double fr = focus.data()[0], fc = focus.data()[1];
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> out(H * W);
  for (std::size_t r = 0; r < H; ++r) {
    const double dr = double(r) - fr;
    for (std::size_t c = 0; c < W; ++c) {
      const double dc = double(c) - fc;
      out[r * W + c] = std::exp(-(dr * dr + dc * dc) * inv2s2);
    }
  }
  std::vector<double> values = out;
  return Tensor::make_op("blob", Shape{H, W}, std::move(out), {focus},
                         [values = std::move(values), fr, fc, sigma, H, W](std::span<const double> g,
                                                                          std::span<const std::span<double>> gin) {
                           const double inv_s2 = 1.0 / (sigma * sigma);
                           double grow = 0.0, gcol = 0.0;
                           for (std::size_t r = 0; r < H; ++r) {
                             for (std::size_t c = 0; c < W; ++c) {
                               const double t = g[r * W + c] * values[r * W + c] * inv_s2;
                               grow += t * (double(r) - fr);
                               gcol += t * (double(c) - fc);
                             }
                           }
                           gin[0][0] += grow;
                           gin[0][1] += gcol;
                         });
}

inline Tensor blob(Point focus, double sigma, std::size_t H, std::size_t W) {
  return blob(Tensor({2}, {focus.row, focus.col}), sigma, H, W);
}

inline Tensor focus_tensor(Point f, bool requires_grad = false) {
  return Tensor({2}, {f.row, f.col}, requires_grad);
}

// weight * x + (1 - weight) * x_coarse with an [H,W] weight shared by all channels.
inline Tensor blend(const Tensor& x, const Tensor& x_coarse, const Tensor& weight) {
  if (x.shape() != x_coarse.shape()) {
    throw ShapeError("blend shape mismatch: " + to_string(x.shape()) + " vs " + to_string(x_coarse.shape()));
  }
  if (x.rank() != 3 || weight.rank() != 2 || weight.shape()[0] != x.shape()[1] || weight.shape()[1] != x.shape()[2]) {
    throw ShapeError("blend weight " + to_string(weight.shape()) + " does not match image " + to_string(x.shape()));
  }
  const Tensor w = broadcast_channels(weight, x.shape()[0]);
  return w * x + (1.0 - w) * x_coarse;
}

// Single-fixation foveated image.
inline Tensor foveate(const Tensor& x, const Tensor& x_coarse, const Tensor& focus, double sigma_fovea) {
  if (x.rank() != 3) throw ShapeError("foveate expects [C,H,W], got " + to_string(x.shape()));
  return blend(x, x_coarse, blob(focus, sigma_fovea, x.shape()[1], x.shape()[2]));
}

// Accumulated visibility mask G_t (constant) and the step index t.
struct FoveationState {
  Tensor visibility;
  std::size_t step = 0;

  static FoveationState initial(std::size_t H, std::size_t W) { return {Tensor::zeros({H, W}), 0}; }
};

// clamp(beta * G_prev + blob(focus), 0, 1). The past term is a constant, so
// only the newest blob carries a gradient back to `focus`.
inline Tensor next_visibility(const FoveationState& s, const Tensor& focus, double sigma_fovea, double beta) {
  const std::size_t H = s.visibility.shape()[0], W = s.visibility.shape()[1];
  return clamp(scale(s.visibility.detach(), beta) + blob(focus, sigma_fovea, H, W), 0.0, 1.0);
}

inline FoveationState update_state(const FoveationState& s, Point focus, double sigma_fovea, double beta) {
  NoGradGuard guard;
  return {next_visibility(s, focus_tensor(focus), sigma_fovea, beta).detach(), s.step + 1};
}

// s_t = G * x + (1 - G) * x_coarse.
inline Tensor render_state(const Tensor& x, const Tensor& x_coarse, const Tensor& visibility) {
  return blend(x, x_coarse, visibility);
}

inline Tensor render_state(const Tensor& x, const Tensor& x_coarse, const FoveationState& s) {
  return blend(x, x_coarse, s.visibility);
}

}  // namespace fovex
