#pragma once

// Dense double-precision tensors with a tape-free reverse-mode autodiff graph.
//
// Every Tensor is a shared handle to a graph node. Operations whose inputs
// require gradients record their inputs and a backward rule; everything else
// produces constant leaves. Graph construction is thread-local: distinct
// threads may build and differentiate distinct graphs that share constant
// (non-requires_grad) leaves such as predictor weights at inference time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fovex/error.hpp"

namespace fovex {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// Receives the gradient of the op output and one writable span per input.
// A span is empty when the corresponding input does not require a gradient.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<const std::span<double>> grad_in)>;

namespace detail {

inline thread_local bool grad_mode = true;

struct Node {
  std::string op;
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  bool is_leaf() const { return inputs.empty(); }

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode) { detail::grad_mode = false; }
  ~NoGradGuard() { detail::grad_mode = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode; }

class Tensor {
 public:
  Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (numel(shape) != data.size()) {
      throw ShapeError("tensor shape " + to_string(shape) + " holds " + std::to_string(numel(shape)) +
                       " values but " + std::to_string(data.size()) + " were given");
    }
    node_->op = "leaf";
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 0.0, requires_grad);
  }
  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 1.0, requires_grad);
  }
  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor(Shape{}, {value}, requires_grad);
  }

  // Builds the result of a custom differentiable operation. When no input
  // requires a gradient (or recording is disabled) the result is a constant.
  static Tensor make_op(std::string op, Shape shape, std::vector<double> data,
                        const std::vector<Tensor>& inputs, BackwardFn backward) {
    Tensor out(std::move(shape), std::move(data));
    out.node_->op = std::move(op);
    const bool track = grad_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                                     [](const Tensor& t) { return t.requires_grad(); });
    if (track) {
      out.node_->requires_grad = true;
      out.node_->backward = std::move(backward);
      out.node_->inputs.reserve(inputs.size());
      for (const auto& in : inputs) out.node_->inputs.push_back(in.node_);
    }
    return out;
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::span<const double> data() const { return node_->data; }
  const std::string& op() const { return node_->op; }

  // Writable view of a leaf's values (parameter updates, image construction).
  std::span<double> mutable_data() {
    if (!node_->is_leaf()) throw Error("mutable_data() on non-leaf tensor produced by '" + node_->op + "'");
    return node_->data;
  }

  double item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->data[0];
  }

  double at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw ShapeError("index rank mismatch for shape " + to_string(shape()));
    std::size_t flat = 0;
    std::size_t d = 0;
    for (std::size_t i : index) {
      if (i >= node_->shape[d]) throw ShapeError("index out of range for shape " + to_string(shape()));
      flat = flat * node_->shape[d] + i;
      ++d;
    }
    return node_->data[flat];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }

  Tensor& set_requires_grad(bool value) {
    if (!node_->is_leaf()) throw Error("requires_grad can only be set on leaf tensors");
    node_->requires_grad = value;
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }

  // Accumulated gradient; zeros when none has been propagated yet.
  std::vector<double> grad() const {
    if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
    return node_->grad;
  }

  void zero_grad() { node_->grad.clear(); }

  Tensor detach() const { return Tensor(shape(), node_->data); }

  // Propagates d(this)/d(leaf) into every reachable requires_grad leaf.
  // Leaf gradients accumulate across calls until zero_grad().
  void backward() const;

 private:
  std::shared_ptr<detail::Node> node_;

  friend bool same_node(const Tensor& a, const Tensor& b) { return a.node_ == b.node_; }
};

inline void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() requires a scalar loss, got shape " + to_string(shape()));
  if (!node_->requires_grad) return;

  // Reverse topological order via iterative post-order DFS.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  node_->ensure_grad()[0] += 1.0;

  std::vector<std::span<double>> sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf() || !n->backward) continue;
    sinks.clear();
    for (auto& in : n->inputs) {
      if (in->requires_grad) sinks.emplace_back(in->ensure_grad());
      else sinks.emplace_back();
    }
    n->backward(n->grad, sinks);
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Operands must have equal shapes, or one of them must
// hold a single value, which is broadcast.

namespace detail {

enum class BinaryKind { add, sub, mul };

inline Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool b_scalar = !same && b.size() == 1;
  const bool a_scalar = !same && !b_scalar && a.size() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw ShapeError("elementwise shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = numel(out_shape);
  auto av = a.data();
  auto bv = b.data();
  auto ai = [a_scalar](std::size_t i) { return a_scalar ? std::size_t{0} : i; };
  auto bi = [b_scalar](std::size_t i) { return b_scalar ? std::size_t{0} : i; };

  std::vector<double> out(n);
  const char* name = "add";
  switch (kind) {
    case BinaryKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[ai(i)] + bv[bi(i)];
      break;
    case BinaryKind::sub:
      name = "sub";
      for (std::size_t i = 0; i < n; ++i) out[i] = av[ai(i)] - bv[bi(i)];
      break;
    case BinaryKind::mul:
      name = "mul";
      for (std::size_t i = 0; i < n; ++i) out[i] = av[ai(i)] * bv[bi(i)];
      break;
  }

  return Tensor::make_op(name, out_shape, std::move(out), {a, b},
                         [kind, a, b, n, ai, bi](std::span<const double> g, std::span<const std::span<double>> gin) {
                           auto av = a.data();
                           auto bv = b.data();
                           if (!gin[0].empty()) {
                             for (std::size_t i = 0; i < n; ++i) {
                               const double d = kind == BinaryKind::mul ? bv[bi(i)] : 1.0;
                               gin[0][ai(i)] += g[i] * d;
                             }
                           }
                           if (!gin[1].empty()) {
                             for (std::size_t i = 0; i < n; ++i) {
                               const double d = kind == BinaryKind::mul ? av[ai(i)]
                                                : kind == BinaryKind::sub ? -1.0
                                                                          : 1.0;
                               gin[1][bi(i)] += g[i] * d;
                             }
                           }
                         });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary(detail::BinaryKind::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary(detail::BinaryKind::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary(detail::BinaryKind::mul, a, b); }

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  return Tensor::make_op("scale", a.shape(), std::move(out), {a},
                         [factor](std::span<const double> g, std::span<const std::span<double>> gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += factor * g[i];
                         });
}

inline Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v += offset;
  return Tensor::make_op("add_scalar", a.shape(), std::move(out), {a},
                         [](std::span<const double> g, std::span<const std::span<double>> gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                         });
}

// Gradient passes only where lo < a < hi.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = std::clamp(v, lo, hi);
  return Tensor::make_op("clamp", a.shape(), std::move(out), {a},
                         [a, lo, hi](std::span<const double> g, std::span<const std::span<double>> gin) {
                           auto av = a.data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (av[i] > lo && av[i] < hi) gin[0][i] += g[i];
                           }
                         });
}

inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::make_op("sum", Shape{}, {total}, {a},
                         [](std::span<const double> g, std::span<const std::span<double>> gin) {
                           for (double& v : gin[0]) v += g[0];
                         });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("cannot reshape " + to_string(a.shape()) + " to " + to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_op("reshape", std::move(shape), std::move(out), {a},
                         [](std::span<const double> g, std::span<const std::span<double>> gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                         });
}

inline Tensor flatten(const Tensor& a) { return reshape(a, Shape{a.size()}); }

// Repeats an [H,W] plane into [channels,H,W].
inline Tensor broadcast_channels(const Tensor& plane, std::size_t channels) {
  if (plane.rank() != 2) throw ShapeError("broadcast_channels expects [H,W], got " + to_string(plane.shape()));
  const std::size_t hw = plane.size();
  std::vector<double> out(channels * hw);
  for (std::size_t c = 0; c < channels; ++c) {
    std::copy(plane.data().begin(), plane.data().end(), out.begin() + static_cast<std::ptrdiff_t>(c * hw));
  }
  return Tensor::make_op("broadcast_channels", Shape{channels, plane.shape()[0], plane.shape()[1]}, std::move(out),
                         {plane}, [channels, hw](std::span<const double> g, std::span<const std::span<double>> gin) {
                           for (std::size_t c = 0; c < channels; ++c) {
                             for (std::size_t i = 0; i < hw; ++i) gin[0][i] += g[c * hw + i];
                           }
                         });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(scale(a, -1.0), s); }

// ---------------------------------------------------------------------------
// Network layers.

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation with zero padding: input [C,H,W], kernel [K,C,kh,kw],
// optional bias [K]; output [K,H',W'].
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias, Conv2dOptions opt = {}) {
  if (input.rank() != 3) throw ShapeError("conv2d input must be [C,H,W], got " + to_string(input.shape()));
  if (kernel.rank() != 4) throw ShapeError("conv2d kernel must be [K,C,kh,kw], got " + to_string(kernel.shape()));
  const std::size_t C = input.shape()[0], H = input.shape()[1], W = input.shape()[2];
  const std::size_t K = kernel.shape()[0], kh = kernel.shape()[2], kw = kernel.shape()[3];
  if (kernel.shape()[1] != C) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(input.shape()) + " vs kernel " +
                     to_string(kernel.shape()));
  }
  if (opt.stride == 0) throw ShapeError("conv2d stride must be positive");
  if (kh > H + 2 * opt.padding || kw > W + 2 * opt.padding) {
    throw ShapeError("conv2d kernel " + to_string(kernel.shape()) + " larger than padded input " +
                     to_string(input.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->shape()[0] != K)) {
    throw ShapeError("conv2d bias must be [" + std::to_string(K) + "], got " + to_string(bias->shape()));
  }
  const std::size_t s = opt.stride;
  const auto p = static_cast<std::ptrdiff_t>(opt.padding);
  const std::size_t OH = (H + 2 * opt.padding - kh) / s + 1;
  const std::size_t OW = (W + 2 * opt.padding - kw) / s + 1;

  // Valid output column range [lo, hi) for a kernel column offset kj.
  auto col_range = [=](std::size_t kj) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kj) - p;
    std::ptrdiff_t lo = 0;
    while (lo < static_cast<std::ptrdiff_t>(OW) && lo * static_cast<std::ptrdiff_t>(s) + off < 0) ++lo;
    std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(OW);
    while (hi > lo && (hi - 1) * static_cast<std::ptrdiff_t>(s) + off >= static_cast<std::ptrdiff_t>(W)) --hi;
    return std::pair{lo, hi};
  };

  auto in = input.data();
  auto ker = kernel.data();
  std::vector<double> out(K * OH * OW, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double* o = out.data() + k * OH * OW;
    if (bias) std::fill(o, o + OH * OW, bias->data()[k]);
    for (std::size_t c = 0; c < C; ++c) {
      const double* ip = in.data() + c * H * W;
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj) {
          const double w = ker[((k * C + c) * kh + ki) * kw + kj];
          const auto [lo, hi] = col_range(kj);
          const std::ptrdiff_t coff = static_cast<std::ptrdiff_t>(kj) - p;
          for (std::size_t oh = 0; oh < OH; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * s + ki) - p;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
            const double* row = ip + static_cast<std::size_t>(ih) * W;
            double* orow = o + oh * OW;
            for (std::ptrdiff_t ow = lo; ow < hi; ++ow) {
              orow[ow] += w * row[ow * static_cast<std::ptrdiff_t>(s) + coff];
            }
          }
        }
      }
    }
  }

  std::vector<Tensor> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  return Tensor::make_op(
      "conv2d", Shape{K, OH, OW}, std::move(out), inputs,
      [=](std::span<const double> g, std::span<const std::span<double>> gin) {
        auto in = input.data();
        auto ker = kernel.data();
        const bool want_in = !gin[0].empty();
        const bool want_ker = !gin[1].empty();
        for (std::size_t k = 0; k < K; ++k) {
          const double* go = g.data() + k * OH * OW;
          if (gin.size() > 2 && !gin[2].empty()) {
            double acc = 0.0;
            for (std::size_t i = 0; i < OH * OW; ++i) acc += go[i];
            gin[2][k] += acc;
          }
          for (std::size_t c = 0; c < C; ++c) {
            const double* ip = in.data() + c * H * W;
            for (std::size_t ki = 0; ki < kh; ++ki) {
              for (std::size_t kj = 0; kj < kw; ++kj) {
                const std::size_t widx = ((k * C + c) * kh + ki) * kw + kj;
                const double w = ker[widx];
                const auto [lo, hi] = col_range(kj);
                const std::ptrdiff_t coff = static_cast<std::ptrdiff_t>(kj) - p;
                double wacc = 0.0;
                for (std::size_t oh = 0; oh < OH; ++oh) {
                  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * s + ki) - p;
                  if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                  const std::size_t rbase = c * H * W + static_cast<std::size_t>(ih) * W;
                  const double* grow = go + oh * OW;
                  for (std::ptrdiff_t ow = lo; ow < hi; ++ow) {
                    const std::size_t iidx = rbase + static_cast<std::size_t>(ow * static_cast<std::ptrdiff_t>(s) + coff);
                    if (want_in) gin[0][iidx] += w * grow[ow];
                    wacc += ip[iidx - c * H * W] * grow[ow];
                  }
                }
                if (want_ker) gin[1][widx] += wacc;
              }
            }
          }
        }
      });
}

inline Tensor conv2d(const Tensor& input, const Tensor& kernel, Conv2dOptions opt = {}) {
  return conv2d(input, kernel, nullptr, opt);
}

inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Conv2dOptions opt = {}) {
  return conv2d(input, kernel, &bias, opt);
}

// Affine map weight[m,n] * input[n] + bias[m].
inline Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 1 || weight.rank() != 2 || bias.rank() != 1 || weight.shape()[1] != input.shape()[0] ||
      weight.shape()[0] != bias.shape()[0]) {
    throw ShapeError("dense dimension mismatch: input " + to_string(input.shape()) + ", weight " +
                     to_string(weight.shape()) + ", bias " + to_string(bias.shape()));
  }
  const std::size_t m = weight.shape()[0], n = weight.shape()[1];
  auto x = input.data();
  auto w = weight.data();
  std::vector<double> out(bias.data().begin(), bias.data().end());
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = w.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    out[i] += acc;
  }
  return Tensor::make_op("dense", Shape{m}, std::move(out), {input, weight, bias},
                         [input, weight, m, n](std::span<const double> g, std::span<const std::span<double>> gin) {
                           auto x = input.data();
                           auto w = weight.data();
                           for (std::size_t i = 0; i < m; ++i) {
                             if (!gin[0].empty()) {
                               for (std::size_t j = 0; j < n; ++j) gin[0][j] += w[i * n + j] * g[i];
                             }
                             if (!gin[1].empty()) {
                               for (std::size_t j = 0; j < n; ++j) gin[1][i * n + j] += x[j] * g[i];
                             }
                             if (!gin[2].empty()) gin[2][i] += g[i];
                           }
                         });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::make_op("relu", a.shape(), std::move(out), {a},
                         [a](std::span<const double> g, std::span<const std::span<double>> gin) {
                           auto av = a.data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (av[i] > 0.0) gin[0][i] += g[i];
                           }
                         });
}

// Non-overlapping window x window max pooling over [C,H,W]. Ties route the
// gradient to the first maximal element in row-major order.
inline Tensor maxpool2d(const Tensor& a, std::size_t window) {
  if (a.rank() != 3) throw ShapeError("maxpool2d expects [C,H,W], got " + to_string(a.shape()));
  const std::size_t C = a.shape()[0], H = a.shape()[1], W = a.shape()[2];
  if (window == 0 || window > H || window > W) {
    throw ShapeError("maxpool2d window " + std::to_string(window) + " does not fit input " + to_string(a.shape()));
  }
  const std::size_t OH = H / window, OW = W / window;
  auto av = a.data();
  std::vector<double> out(C * OH * OW);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow) {
        std::size_t best = c * H * W + oh * window * W + ow * window;
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = c * H * W + (oh * window + i) * W + ow * window + j;
            if (av[idx] > av[best]) best = idx;
          }
        }
        const std::size_t o = (c * OH + oh) * OW + ow;
        out[o] = av[best];
        argmax[o] = best;
      }
    }
  }
  return Tensor::make_op("maxpool2d", Shape{C, OH, OW}, std::move(out), {a},
                         [argmax = std::move(argmax)](std::span<const double> g,
                                                      std::span<const std::span<double>> gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) gin[0][argmax[i]] += g[i];
                         });
}

// ---------------------------------------------------------------------------
// Classification loss.

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

// Max-subtracted cross-entropy of logits against a class index.
inline Tensor softmax_cross_entropy(const Tensor& logits, std::size_t target) {
  if (logits.size() == 0) throw ShapeError("softmax_cross_entropy on empty logits");
  if (target >= logits.size()) {
    throw ShapeError("target class " + std::to_string(target) + " out of range for " +
                     std::to_string(logits.size()) + " logits");
  }
  auto z = logits.data();
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  const double loss = std::log(total) - (z[target] - mx);
  return Tensor::make_op("softmax_cross_entropy", Shape{}, {loss}, {logits},
                         [logits, target](std::span<const double> g, std::span<const std::span<double>> gin) {
                           const auto p = softmax(logits.data());
                           for (std::size_t i = 0; i < p.size(); ++i) {
                             gin[0][i] += g[0] * (p[i] - (i == target ? 1.0 : 0.0));
                           }
                         });
}

}  // namespace fovex
