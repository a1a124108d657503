// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "descnet/corpus.hpp"
#include "descnet/nn/init.hpp"
#include "descnet/numerics/ops.hpp"

namespace descnet::nn {

/// Token-id lookup table. Row `padding_id` is zero and never updated.
template <std::floating_point T>
class EmbeddingLayer {
 public:
  static constexpr std::int32_t padding_id = Vocabulary::kPadId;
  static constexpr double kInitLimit = 0.05;

  EmbeddingLayer(std::string name, std::size_t vocab_size, std::size_t dim, Rng& rng, bool trainable = true)
      : table_(std::move(name), uniform_tensor<T>({vocab_size, dim}, kInitLimit, rng), trainable) {
    clear_padding_row();
  }

  numerics::Parameter<T>& table() { return table_; }
  const numerics::Parameter<T>& table() const { return table_; }
  std::size_t vocab_size() const { return table_.value.dim(0); }
  std::size_t dim() const { return table_.value.dim(1); }

  void clear_padding_row() {
    std::fill_n(table_.value.data() + static_cast<std::size_t>(padding_id) * dim(), dim(), T(0));
  }

  /// Time-major ids (steps * batch) -> (steps, batch, dim).
  numerics::Var<T> forward(const numerics::Var<T>& bound_table, std::span<const std::int32_t> ids, std::size_t steps,
                           std::size_t batch) const {
    if (ids.size() != steps * batch) throw ShapeError("embedding: id count does not match steps * batch");
    auto rows = numerics::embedding_gather(bound_table, ids, padding_id);
    return numerics::reshape(rows, {steps, batch, dim()});
  }

 private:
  numerics::Parameter<T> table_;
};

/// Overwrites rows of tokens found in a `token v1 ... vd` text file. Returns
/// how many vocabulary tokens were covered; other rows keep their values.
template <std::floating_point T>
std::size_t load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab, EmbeddingLayer<T>& layer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open embedding file '" + path + "'");
  const std::size_t d = layer.dim();
  auto& table = layer.table().value;
  std::string line;
  std::size_t line_no = 0, covered = 0;
  std::vector<T> row(d);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos) throw InputError(path + ":" + std::to_string(line_no) + ": expected 'token v1 ... vd'");
    const std::string token = line.substr(0, space);
    const char* p = line.c_str() + space;
    std::size_t count = 0;
    while (true) {
      while (*p == ' ') ++p;
      if (*p == '\0') break;
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw InputError(path + ":" + std::to_string(line_no) + ": malformed number");
      if (count < d) row[count] = static_cast<T>(v);
      ++count;
      p = end;
    }
    if (count != d) {
      throw InputError(path + ":" + std::to_string(line_no) + ": vector has " + std::to_string(count) +
                       " components, expected " + std::to_string(d));
    }
    if (!vocab.contains(token)) continue;
    const auto id = static_cast<std::size_t>(vocab.id(token));
    if (id < 2) continue;
    std::copy(row.begin(), row.end(), table.data() + id * d);
    ++covered;
  }
  layer.clear_padding_row();
  return covered;
}

}  // namespace descnet::nn
