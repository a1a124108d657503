// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "descnet/model/dual_channel.hpp"
#include "descnet/numerics/optim.hpp"

namespace descnet {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_metric = 0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  double first_batch_loss = 0;
  std::size_t best_epoch = 0;
  double best_metric = 0;

  /// `epoch,train_loss,val_metric` with a header row.
  std::string to_csv() const {
    std::string out = "epoch,train_loss,val_metric\n";
    char buf[128];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_metric);
      out += buf;
    }
    return out;
  }
};

/// Accuracy for multi-class, macro AUC for multi-label (0 when no label has
/// both outcomes in the validation set).
template <std::floating_point T>
double validation_metric(DualChannelModel<T>& model, std::span<const EncodedExample> examples) {
  if (examples.empty()) throw InputError("empty validation set");
  const auto probs = model.predict_proba(examples);
  std::vector<LabelSet> gold;
  for (const auto& ex : examples) gold.push_back(ex.labels);
  if (model.config().mode == TaskMode::multi_class) {
    std::vector<std::size_t> predicted, truth;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      predicted.push_back(decide_labels(probs.row(i), TaskMode::multi_class, std::nullopt).front());
      truth.push_back(gold[i].empty() ? model.num_classes() : gold[i].front());
    }
    return accuracy(predicted, truth);
  }
  return macro_auc(probs, gold).value_or(0.0);
}

/// Mean loss over `examples` in inference mode.
template <std::floating_point T>
double mean_loss(DualChannelModel<T>& model, std::span<const EncodedExample> examples, std::size_t batch_size = 64) {
  double total = 0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    const auto batch = make_batch<T>(examples.subspan(start, end - start));
    numerics::Tape<T> tape;
    const auto loss = model.loss(model.forward(tape, batch, false), batch);
    total += static_cast<double>(loss.value()[0]) * static_cast<double>(end - start);
  }
  return total / static_cast<double>(examples.size());
}

struct TrainOptions {
  numerics::AdamOptions adam;  // learning_rate is taken from the model config
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Mini-batch Adam with per-epoch validation. Keeps the parameters of the best
/// validation epoch and stops once `patience` consecutive epochs fail to
/// improve on it, or after max_epochs.
template <std::floating_point T>
TrainingHistory train(DualChannelModel<T>& model, std::span<const EncodedExample> train_set,
                      std::span<const EncodedExample> validation_set, TrainOptions options = {}) {
  if (train_set.empty()) throw InputError("empty training set");
  if (validation_set.empty()) throw InputError("empty validation set");
  const ModelConfig& cfg = model.config();
  options.adam.learning_rate = cfg.learning_rate;
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  auto params = model.params();
  std::vector<numerics::Tensor<T>> best_values;
  TrainingHistory history;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long step_count = 0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const EncodedExample*> members;
      for (std::size_t i = start; i < end; ++i) members.push_back(&train_set[order[i]]);
      const auto batch = make_batch<T>(std::span<const EncodedExample* const>(members));

      for (auto* p : params) p->zero_grad();
      numerics::Tape<T> tape;
      const auto loss = model.loss(model.forward(tape, batch, true, &rng), batch);
      const double value = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      }
      if (epoch == 1 && batch_index == 0) history.first_batch_loss = value;
      tape.backward(loss);
      try {
        numerics::adam_step<T>(params, options.adam, ++step_count);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      }
      loss_sum += value * static_cast<double>(end - start);
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(order.size()), validation_metric(model, validation_set)};
    history.epochs.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
    if (epoch == 1 || record.val_metric > history.best_metric) {
      history.best_metric = record.val_metric;
      history.best_epoch = epoch;
      best_values.clear();
      for (auto* p : params) best_values.push_back(p->value);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  return history;
}

}  // namespace descnet
