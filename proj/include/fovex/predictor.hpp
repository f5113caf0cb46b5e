#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/random.hpp"
#include "fovex/tensor.hpp"

namespace fovex {

// Anything that maps an image tensor [C,H,W] to class logits. Explanations and
// metrics only ever see a model through this interface.
template <class M>
concept Classifier = requires(const M& m, const Tensor& x) {
  { m.logits(x) } -> std::convertible_to<Tensor>;
};

template <Classifier M>
std::vector<double> class_probabilities(const M& model, const Tensor& x) {
  NoGradGuard guard;
  return softmax(model.logits(x).data());
}

template <Classifier M>
std::size_t predict_class(const M& model, const Tensor& x) {
  const auto p = class_probabilities(model, x);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct ConvLayer {
  Tensor kernel;  // [K,C,kh,kw]
  Tensor bias;    // [K]
  std::size_t padding = 1;
};
struct ReluLayer {};
struct MaxPoolLayer {
  std::size_t window = 2;
};
struct FlattenLayer {};
struct DenseLayer {
  Tensor weight;  // [m,n]
  Tensor bias;    // [m]
};

using Layer = std::variant<ConvLayer, ReluLayer, MaxPoolLayer, FlattenLayer, DenseLayer>;

// The black-box classifier: an ordered layer stack over a fixed input shape.
// Parameters do not require gradients, so a Predictor can be shared read-only
// across threads; training works on a private copy.
class Predictor {
 public:
  Predictor(Shape input_shape, std::size_t classes, std::vector<Layer> layers)
      : input_shape_(std::move(input_shape)), classes_(classes), layers_(std::move(layers)) {
    validate();
  }

  // conv(8,3x3) relu pool2 conv(16,3x3) relu pool2 flatten dense, He-initialized.
  static Predictor toy(Shape input_shape, std::size_t classes, std::uint64_t seed) {
    if (input_shape.size() != 3) throw ShapeError("toy predictor input must be [C,H,W]");
    auto rng = make_engine(seed, stream::model_init);
    auto normal = [&rng](Shape shape, double stddev) {
      std::normal_distribution<double> dist(0.0, stddev);
      std::vector<double> v(numel(shape));
      for (double& x : v) x = dist(rng);
      return Tensor(std::move(shape), std::move(v));
    };
    const std::size_t C = input_shape[0], H = input_shape[1], W = input_shape[2];
    const std::size_t flat = 16 * ((H / 2) / 2) * ((W / 2) / 2);
    std::vector<Layer> layers;
    layers.emplace_back(ConvLayer{normal({8, C, 3, 3}, std::sqrt(2.0 / double(C * 9))), Tensor::zeros({8}), 1});
    layers.emplace_back(ReluLayer{});
    layers.emplace_back(MaxPoolLayer{2});
    layers.emplace_back(ConvLayer{normal({16, 8, 3, 3}, std::sqrt(2.0 / 72.0)), Tensor::zeros({16}), 1});
    layers.emplace_back(ReluLayer{});
    layers.emplace_back(MaxPoolLayer{2});
    layers.emplace_back(FlattenLayer{});
    layers.emplace_back(DenseLayer{normal({classes, flat}, std::sqrt(1.0 / double(flat))), Tensor::zeros({classes})});
    return Predictor(std::move(input_shape), classes, std::move(layers));
  }

  const Shape& input_shape() const { return input_shape_; }
  std::size_t num_classes() const { return classes_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Tensor logits(const Tensor& x) const {
    if (x.shape() != input_shape_) {
      throw ShapeError("predictor expects input " + to_string(input_shape_) + ", got " + to_string(x.shape()));
    }
    Tensor h = x;
    for (const auto& layer : layers_) h = apply(layer, h);
    return h;
  }

  // Parameter handles in layer order (kernel, bias, ..., weight, bias).
  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (const auto& layer : layers_) {
      if (const auto* c = std::get_if<ConvLayer>(&layer)) {
        out.push_back(c->kernel);
        out.push_back(c->bias);
      } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        out.push_back(d->weight);
        out.push_back(d->bias);
      }
    }
    return out;
  }

  // Deep copy; the copy shares no parameter storage with this predictor.
  Predictor clone() const {
    std::vector<Layer> layers;
    for (const auto& layer : layers_) {
      std::visit(
          [&layers](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvLayer>) {
              layers.emplace_back(ConvLayer{l.kernel.detach(), l.bias.detach(), l.padding});
            } else if constexpr (std::is_same_v<L, DenseLayer>) {
              layers.emplace_back(DenseLayer{l.weight.detach(), l.bias.detach()});
            } else {
              layers.emplace_back(l);
            }
          },
          layer);
    }
    return Predictor(input_shape_, classes_, std::move(layers));
  }

 private:
  static Tensor apply(const Layer& layer, const Tensor& h) {
    return std::visit(
        [&h](const auto& l) -> Tensor {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, ConvLayer>) {
            return conv2d(h, l.kernel, l.bias, {1, l.padding});
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            return relu(h);
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            return maxpool2d(h, l.window);
          } else if constexpr (std::is_same_v<L, FlattenLayer>) {
            return flatten(h);
          } else {
            return dense(h, l.weight, l.bias);
          }
        },
        layer);
  }

  // Dry run on zeros checks that consecutive layer shapes chain.
  void validate() const {
    if (classes_ == 0) throw ArchitectureMismatch("predictor needs at least one class");
    Tensor out;
    try {
      NoGradGuard guard;
      out = logits(Tensor::zeros(input_shape_));
    } catch (const ShapeError& e) {
      throw ArchitectureMismatch(std::string("inconsistent layer stack: ") + e.what());
    }
    if (out.rank() != 1 || out.size() != classes_) {
      throw ArchitectureMismatch("layer stack produces " + to_string(out.shape()) + " outputs but " +
                                 std::to_string(classes_) + " classes were declared");
    }
  }

  Shape input_shape_;
  std::size_t classes_;
  std::vector<Layer> layers_;
};

}  // namespace fovex
