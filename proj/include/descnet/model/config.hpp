// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "descnet/corpus.hpp"
#include "descnet/descriptors.hpp"
#include "descnet/error.hpp"

namespace descnet {

/// Ordered `key = value` pairs. Blank lines and lines starting with '#' are ignored.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line = trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw InputError(origin + ":" + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(line).substr(eq + 1)));
  }
  return out;
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size() || x < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::logic_error&) {
    throw InputError("config '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw InputError("config '" + key + "': expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InputError("config '" + key + "': expected true or false, got '" + v + "'");
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Every hyperparameter of the dual-channel classifier.
struct ModelConfig {
  TaskMode mode = TaskMode::multi_class;
  std::size_t d_embed = 300;
  std::size_t gru_units = 128;
  std::size_t attention_units = 0;  // 0: same as the BiGRU output width
  double dropout_rate = 0.5;
  double recurrent_dropout_rate = 0.5;
  bool feature_dropout = true;  // dropout on the concatenated features before the head
  DescriptorTest descriptor_test = DescriptorTest::chi2;
  std::size_t descriptor_dimension = 100;
  std::int64_t min_doc_frequency = 2;
  std::size_t text_length = 80;
  std::size_t descriptor_length = 0;  // 0: same as text_length
  std::size_t vocabulary_max = 130000;
  bool drop_overlong = false;  // training documents longer than text_length are dropped instead of truncated
  bool share_embeddings = true;
  bool ablate_descriptor_channel = false;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::uint64_t seed = 1;

  std::size_t effective_descriptor_length() const { return descriptor_length == 0 ? text_length : descriptor_length; }
  std::size_t effective_attention_units() const { return attention_units == 0 ? 2 * gru_units : attention_units; }
  /// max-pool + avg-pool of the text BiGRU plus the attention context.
  std::size_t feature_width() const { return 2 * (2 * gru_units) + 2 * gru_units; }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v < 1) throw InputError(std::string("config '") + name + "' must be at least 1");
    };
    positive(d_embed, "d_embed");
    positive(gru_units, "gru_units");
    positive(descriptor_dimension, "descriptor_dimension");
    positive(text_length, "text_length");
    positive(batch_size, "batch_size");
    positive(max_epochs, "max_epochs");
    if (vocabulary_max < 3) throw InputError("config 'vocabulary_max' must be at least 3");
    if (!(dropout_rate >= 0 && dropout_rate < 1)) throw InputError("config 'dropout_rate' must lie in [0, 1)");
    if (!(recurrent_dropout_rate >= 0 && recurrent_dropout_rate < 1)) {
      throw InputError("config 'recurrent_dropout_rate' must lie in [0, 1)");
    }
    if (!(learning_rate > 0)) throw InputError("config 'learning_rate' must be positive");
  }

  /// Applies one key; returns false when the key is not a model setting.
  bool apply(const std::string& key, const std::string& v) {
    using namespace detail;
    if (key == "mode") mode = parse_task_mode(v);
    else if (key == "d_embed") d_embed = parse_size(key, v);
    else if (key == "gru_units") gru_units = parse_size(key, v);
    else if (key == "attention_units") attention_units = parse_size(key, v);
    else if (key == "dropout_rate") dropout_rate = parse_real(key, v);
    else if (key == "recurrent_dropout_rate") recurrent_dropout_rate = parse_real(key, v);
    else if (key == "feature_dropout") feature_dropout = parse_bool(key, v);
    else if (key == "descriptor_test") descriptor_test = parse_descriptor_test(v);
    else if (key == "descriptor_dimension") descriptor_dimension = parse_size(key, v);
    else if (key == "min_doc_frequency") min_doc_frequency = static_cast<std::int64_t>(parse_size(key, v));
    else if (key == "text_length") text_length = parse_size(key, v);
    else if (key == "descriptor_length") descriptor_length = parse_size(key, v);
    else if (key == "vocabulary_max") vocabulary_max = parse_size(key, v);
    else if (key == "drop_overlong") drop_overlong = parse_bool(key, v);
    else if (key == "share_embeddings") share_embeddings = parse_bool(key, v);
    else if (key == "ablate_descriptor_channel") ablate_descriptor_channel = parse_bool(key, v);
    else if (key == "learning_rate") learning_rate = parse_real(key, v);
    else if (key == "batch_size") batch_size = parse_size(key, v);
    else if (key == "max_epochs") max_epochs = parse_size(key, v);
    else if (key == "patience") patience = parse_size(key, v);
    else if (key == "seed") seed = parse_size(key, v);
    else return false;
    return true;
  }

  KeyValues to_key_values() const {
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    using detail::format_real;
    return {{"mode", to_string(mode)},
            {"d_embed", std::to_string(d_embed)},
            {"gru_units", std::to_string(gru_units)},
            {"attention_units", std::to_string(attention_units)},
            {"dropout_rate", format_real(dropout_rate)},
            {"recurrent_dropout_rate", format_real(recurrent_dropout_rate)},
            {"feature_dropout", b(feature_dropout)},
            {"descriptor_test", to_string(descriptor_test)},
            {"descriptor_dimension", std::to_string(descriptor_dimension)},
            {"min_doc_frequency", std::to_string(min_doc_frequency)},
            {"text_length", std::to_string(text_length)},
            {"descriptor_length", std::to_string(descriptor_length)},
            {"vocabulary_max", std::to_string(vocabulary_max)},
            {"drop_overlong", b(drop_overlong)},
            {"share_embeddings", b(share_embeddings)},
            {"ablate_descriptor_channel", b(ablate_descriptor_channel)},
            {"learning_rate", format_real(learning_rate)},
            {"batch_size", std::to_string(batch_size)},
            {"max_epochs", std::to_string(max_epochs)},
            {"patience", std::to_string(patience)},
            {"seed", std::to_string(seed)}};
  }
};

}  // namespace descnet
