#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/predictor.hpp"
#include "fovex/random.hpp"
#include "fovex/synthetic.hpp"

namespace fovex {

struct TrainConfig {
  std::size_t epochs = 6;
  std::size_t batch_size = 16;
  double learning_rate = 0.02;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Predictor predictor;
  std::vector<double> epoch_losses;  // mean cross-entropy per epoch
};

// Minibatch SGD with momentum on mean cross-entropy, starting from `initial`.
// `initial` is left untouched.
inline TrainResult train(const Predictor& initial, const TrainConfig& cfg, const std::vector<Sample>& data) {
  if (data.empty()) throw DataError("training set is empty");
  if (cfg.batch_size == 0) throw ConfigError("train.batch_size", "must be >= 1");

  Predictor model = initial.clone();
  auto params = model.parameters();
  for (auto& p : params) p.set_requires_grad(true);
  std::vector<std::vector<double>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.size(), 0.0);

  auto rng = make_engine(cfg.seed, stream::train_shuffle);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> trace;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / double(end - start);
      for (auto& p : params) p.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = data[order[i]];
        Tensor loss = softmax_cross_entropy(model.logits(s.image), s.label) * inv;
        if (!std::isfinite(loss.item())) {
          throw NumericalError("training diverged: loss is " + std::to_string(loss.item()) + " in epoch " +
                               std::to_string(epoch) + " (lower train.learning_rate)");
        }
        epoch_loss += loss.item() / inv;
        loss.backward();
      }
      for (std::size_t k = 0; k < params.size(); ++k) {
        const auto g = params[k].grad();
        auto w = params[k].mutable_data();
        for (std::size_t j = 0; j < w.size(); ++j) {
          velocity[k][j] = cfg.momentum * velocity[k][j] + g[j];
          w[j] -= cfg.learning_rate * velocity[k][j];
          if (!std::isfinite(w[j])) {
            throw NumericalError("training diverged: parameters became non-finite in epoch " + std::to_string(epoch) +
                                 " (lower train.learning_rate)");
          }
        }
      }
    }
    trace.push_back(epoch_loss / double(data.size()));
  }

  for (auto& p : params) {
    p.zero_grad();
    p.set_requires_grad(false);
  }
  return {std::move(model), std::move(trace)};
}

// Fresh toy architecture sized for the dataset, then trained.
inline TrainResult train_toy(const TrainConfig& cfg, const SyntheticDataset& data) {
  if (data.samples.empty()) throw DataError("training set is empty");
  const Predictor init = Predictor::toy(data.samples.front().image.shape(), data.classes, cfg.seed);
  return train(init, cfg, data.samples);
}

template <Classifier M>
double accuracy(const M& model, const std::vector<Sample>& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : data) hits += predict_class(model, s.image) == s.label ? 1 : 0;
  return double(hits) / double(data.size());
}

}  // namespace fovex
