// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "descnet/corpus.hpp"
#include "descnet/descriptors.hpp"
#include "descnet/metrics.hpp"
#include "descnet/numerics/tensor.hpp"

namespace descnet {

/// Both channel inputs and the target of one document.
struct EncodedExample {
  std::vector<std::int32_t> text_ids;
  std::vector<std::int32_t> descriptor_ids;
  std::vector<double> target;  // one-hot (multi-class) or multi-hot (multi-label)
  LabelSet labels;
};

/// Turns token lists into model inputs for a fixed vocabulary and descriptor set.
class ExampleEncoder {
 public:
  ExampleEncoder(const Vocabulary& vocab, const ClassDescriptorSet& descriptors, std::size_t num_classes,
                 std::size_t text_length, std::size_t descriptor_length)
      : vocab_(&vocab),
        descriptors_(&descriptors),
        num_classes_(num_classes),
        text_length_(text_length),
        descriptor_length_(descriptor_length) {}

  EncodedExample encode_tokens(std::span<const std::string> tokens, const LabelSet& labels = {}) const {
    EncodedExample ex;
    ex.text_ids = encode(tokens, *vocab_, text_length_);
    ex.descriptor_ids = build_descriptor_channel_input(tokens, *descriptors_, *vocab_, descriptor_length_);
    ex.target.assign(num_classes_, 0.0);
    for (std::size_t l : labels) ex.target.at(l) = 1.0;
    ex.labels = labels;
    return ex;
  }

  EncodedExample encode_document(const Document& doc) const { return encode_tokens(doc.tokens, doc.labels); }

  std::vector<EncodedExample> encode_corpus(std::span<const Document> corpus) const {
    std::vector<EncodedExample> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus) out.push_back(encode_document(doc));
    return out;
  }

  std::size_t num_classes() const { return num_classes_; }

 private:
  const Vocabulary* vocab_;
  const ClassDescriptorSet* descriptors_;
  std::size_t num_classes_;
  std::size_t text_length_;
  std::size_t descriptor_length_;
};

/// One channel of a batch in time-major layout, trimmed to its longest example.
struct ChannelBatch {
  std::vector<std::int32_t> ids;  // steps * batch, index t * batch + b
  std::vector<std::size_t> lengths;
  std::size_t steps = 1;
};

template <std::floating_point T>
struct Batch {
  ChannelBatch text;
  ChannelBatch descriptors;
  numerics::Tensor<T> targets;
  std::size_t size() const { return text.lengths.size(); }
};

namespace detail {

inline ChannelBatch make_channel(std::span<const EncodedExample* const> examples, bool descriptor_channel) {
  ChannelBatch ch;
  const std::size_t batch = examples.size();
  for (const auto* ex : examples) {
    const auto& ids = descriptor_channel ? ex->descriptor_ids : ex->text_ids;
    ch.lengths.push_back(valid_length(ids));
  }
  ch.steps = std::max<std::size_t>(1, *std::max_element(ch.lengths.begin(), ch.lengths.end()));
  ch.ids.assign(ch.steps * batch, Vocabulary::kPadId);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& ids = descriptor_channel ? examples[b]->descriptor_ids : examples[b]->text_ids;
    for (std::size_t t = 0; t < ch.lengths[b]; ++t) ch.ids[t * batch + b] = ids[t];
  }
  return ch;
}

}  // namespace detail

template <std::floating_point T>
Batch<T> make_batch(std::span<const EncodedExample* const> examples) {
  if (examples.empty()) throw InputError("empty batch");
  Batch<T> batch;
  batch.text = detail::make_channel(examples, false);
  batch.descriptors = detail::make_channel(examples, true);
  const std::size_t classes = examples[0]->target.size();
  batch.targets = numerics::Tensor<T>({examples.size(), std::max<std::size_t>(classes, 1)});
  for (std::size_t b = 0; b < examples.size(); ++b) {
    for (std::size_t c = 0; c < classes; ++c) batch.targets[b * classes + c] = static_cast<T>(examples[b]->target[c]);
  }
  return batch;
}

template <std::floating_point T>
Batch<T> make_batch(std::span<const EncodedExample> examples) {
  std::vector<const EncodedExample*> ptrs;
  for (const auto& ex : examples) ptrs.push_back(&ex);
  return make_batch<T>(std::span<const EncodedExample* const>(ptrs));
}

}  // namespace descnet
