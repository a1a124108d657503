// SPDX-License-Identifier: Apache-2.0
#pragma once

// The two-channel classifier:
//
//   text ids -> embedding -> BiGRU -> [max-pool ; avg-pool] --------+
//                                                                    +-> dense -> softmax | sigmoid
//   descriptor ids -> embedding -> BiGRU -> attention context ------+

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "descnet/metrics.hpp"
#include "descnet/model/config.hpp"
#include "descnet/model/encoding.hpp"
#include "descnet/nn/attention.hpp"
#include "descnet/nn/dense.hpp"
#include "descnet/nn/dropout.hpp"
#include "descnet/nn/embedding.hpp"
#include "descnet/nn/gru.hpp"
#include "descnet/nn/loss.hpp"

namespace descnet {

template <std::floating_point T>
class DualChannelModel {
 public:
  using Param = numerics::Parameter<T>;

  DualChannelModel(const ModelConfig& config, std::size_t vocab_size, std::size_t num_classes)
      : config_((config.validate(), config)), vocab_size_(vocab_size), num_classes_(num_classes), init_rng_(config.seed) {
    if (vocab_size < 3) throw InputError("model needs a vocabulary of at least 3 ids");
    if (num_classes < 1) throw InputError("model needs at least one class");
    const std::size_t h = config_.gru_units;
    text_embedding_ = std::make_unique<nn::EmbeddingLayer<T>>("embedding.text", vocab_size, config_.d_embed, init_rng_);
    if (!config_.share_embeddings) {
      descriptor_embedding_ =
          std::make_unique<nn::EmbeddingLayer<T>>("embedding.descriptor", vocab_size, config_.d_embed, init_rng_);
    }
    text_rnn_ = std::make_unique<nn::BiGRU<T>>("text_gru", config_.d_embed, h, init_rng_);
    descriptor_rnn_ = std::make_unique<nn::BiGRU<T>>("descriptor_gru", config_.d_embed, h, init_rng_);
    attention_ = std::make_unique<nn::AttentionLayer<T>>("attention", 2 * h, config_.effective_attention_units(), init_rng_);
    head_ = std::make_unique<nn::DenseLayer<T>>(
        "output", config_.feature_width(), num_classes,
        config_.mode == TaskMode::multi_class ? nn::Activation::softmax : nn::Activation::sigmoid, init_rng_);
  }

  const ModelConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t num_classes() const { return num_classes_; }

  nn::EmbeddingLayer<T>& text_embedding() { return *text_embedding_; }
  nn::EmbeddingLayer<T>& descriptor_embedding() { return descriptor_embedding_ ? *descriptor_embedding_ : *text_embedding_; }
  nn::DenseLayer<T>& head() { return *head_; }

  /// Every parameter, in a fixed order with unique names.
  std::vector<Param*> params() {
    std::vector<Param*> out{&text_embedding_->table()};
    if (descriptor_embedding_) out.push_back(&descriptor_embedding_->table());
    for (auto* p : text_rnn_->params()) out.push_back(p);
    for (auto* p : descriptor_rnn_->params()) out.push_back(p);
    for (auto* p : attention_->params()) out.push_back(p);
    for (auto* p : head_->params()) out.push_back(p);
    return out;
  }

  /// Intermediate results of one forward pass, for inspection in tests.
  struct Trace {
    numerics::Var<T> text_features;      // (B, 4H)
    numerics::Var<T> attention_context;  // (B, 2H)
    numerics::Var<T> attention_weights;  // (L_desc, B)
    numerics::Var<T> probabilities;      // (B, C)
  };

  /// Class probabilities (B, C). `rng` drives dropout and is required only when training.
  Trace forward_trace(numerics::Tape<T>& tape, const Batch<T>& batch, bool training, Rng* rng = nullptr) {
    using namespace numerics;
    const std::size_t n = batch.size();
    const nn::RecurrentDropout rnn_dropout{config_.dropout_rate, config_.recurrent_dropout_rate, training, rng};

    const Var<T> text_table = tape.parameter(text_embedding_->table());
    const Var<T> desc_table = descriptor_embedding_ ? tape.parameter(descriptor_embedding_->table()) : text_table;

    const Var<T> text_in = text_embedding_->forward(text_table, batch.text.ids, batch.text.steps, n);
    const Var<T> text_states = nn::bigru_forward(tape, *text_rnn_, text_in, batch.text.lengths, rnn_dropout);
    Trace trace;
    trace.text_features = concat<T>(
        {nn::max_pool_time(text_states, batch.text.lengths), nn::avg_pool_time(text_states, batch.text.lengths)}, 1);

    const Var<T> desc_in = descriptor_embedding().forward(desc_table, batch.descriptors.ids, batch.descriptors.steps, n);
    const Var<T> desc_states = nn::bigru_forward(tape, *descriptor_rnn_, desc_in, batch.descriptors.lengths, rnn_dropout);
    auto attended = nn::attention_forward(tape, *attention_, desc_states, batch.descriptors.lengths);
    trace.attention_weights = attended.weights;
    trace.attention_context = config_.ablate_descriptor_channel ? tape.constant(Tensor<T>({n, 2 * config_.gru_units}))
                                                                : attended.context;

    Var<T> features = concat<T>({trace.text_features, trace.attention_context}, 1);
    if (config_.feature_dropout && training && rng != nullptr) {
      features = nn::dropout(features, config_.dropout_rate, true, *rng);
    }
    trace.probabilities = head_->forward(tape, features);
    return trace;
  }

  numerics::Var<T> forward(numerics::Tape<T>& tape, const Batch<T>& batch, bool training, Rng* rng = nullptr) {
    return forward_trace(tape, batch, training, rng).probabilities;
  }

  /// Categorical cross-entropy (multi-class) or binary cross-entropy (multi-label).
  numerics::Var<T> loss(const numerics::Var<T>& probs, const Batch<T>& batch) const {
    return config_.mode == TaskMode::multi_class ? nn::categorical_cross_entropy(probs, batch.targets)
                                                 : nn::binary_cross_entropy(probs, batch.targets);
  }

  /// Inference-mode probabilities for many examples.
  ProbabilityMatrix predict_proba(std::span<const EncodedExample> examples, std::size_t batch_size = 64) {
    ProbabilityMatrix out;
    out.rows = examples.size();
    out.cols = num_classes_;
    out.values.reserve(examples.size() * num_classes_);
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
      const std::size_t end = std::min(examples.size(), start + batch_size);
      const auto batch = make_batch<T>(examples.subspan(start, end - start));
      numerics::Tape<T> tape;
      const auto probs = forward(tape, batch, false);
      for (T p : probs.value().values()) out.values.push_back(static_cast<double>(p));
    }
    return out;
  }

 private:
  ModelConfig config_;
  std::size_t vocab_size_;
  std::size_t num_classes_;
  Rng init_rng_;
  std::unique_ptr<nn::EmbeddingLayer<T>> text_embedding_;
  std::unique_ptr<nn::EmbeddingLayer<T>> descriptor_embedding_;
  std::unique_ptr<nn::BiGRU<T>> text_rnn_;
  std::unique_ptr<nn::BiGRU<T>> descriptor_rnn_;
  std::unique_ptr<nn::AttentionLayer<T>> attention_;
  std::unique_ptr<nn::DenseLayer<T>> head_;
};

struct Prediction {
  LabelSet labels;
  std::vector<double> probabilities;
};

/// Labels from one probability row: argmax for multi-class, every class above
/// `threshold` for multi-label (threshold required there).
inline Prediction make_prediction(std::span<const double> probs, TaskMode mode, std::optional<double> threshold) {
  return {decide_labels(probs, mode, threshold), std::vector<double>(probs.begin(), probs.end())};
}

}  // namespace descnet
