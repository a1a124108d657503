// SPDX-License-Identifier: Apache-2.0
#pragma once

// Settings for one command-line run: every model hyperparameter plus file
// locations. Read from a flat `key = value` file, then overridden by flags.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "descnet/model/config.hpp"

namespace descnet::app {

struct RunConfig {
  ModelConfig model;
  std::string train;       // training dataset
  std::string validation;  // optional; split off the training file when empty
  std::string test;        // dataset scored by `evaluate`
  std::string input;       // one text per line, for `predict`
  std::string format;      // csv | tsv | jsonl; inferred from the extension when empty
  std::string labels;      // label names joined by '|'; read from the training file when empty
  std::string embeddings;  // optional `token v1 ... vd` file
  std::string descriptors; // descriptor file to use instead of extracting one
  bool auto_extract = true;
  double validation_fraction = 0.1;
  std::string out_dir = "out";
  std::string checkpoint;      // default: <out_dir>/model.ckpt
  std::string threshold_file;  // default: threshold.txt next to the checkpoint
  std::optional<double> threshold;
  std::size_t preview = 10;

  /// Applies one key; unknown keys are an input error.
  void apply(const std::string& key, const std::string& value) {
    if (model.apply(key, value)) return;
    if (key == "train") train = value;
    else if (key == "validation") validation = value;
    else if (key == "test") test = value;
    else if (key == "input") input = value;
    else if (key == "format") format = value;
    else if (key == "labels") labels = value;
    else if (key == "embeddings") embeddings = value;
    else if (key == "descriptors") descriptors = value;
    else if (key == "auto_extract") auto_extract = detail::parse_bool(key, value);
    else if (key == "validation_fraction") validation_fraction = detail::parse_real(key, value);
    else if (key == "out_dir") out_dir = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "threshold_file") threshold_file = value;
    else if (key == "threshold") threshold = value.empty() ? std::nullopt : std::optional(detail::parse_real(key, value));
    else if (key == "preview") preview = detail::parse_size(key, value);
    else throw InputError("unknown config key '" + key + "'");
  }

  void apply(const KeyValues& kv) {
    for (const auto& [k, v] : kv) apply(k, v);
  }

  std::string checkpoint_path() const {
    return checkpoint.empty() ? (std::filesystem::path(out_dir) / "model.ckpt").string() : checkpoint;
  }

  /// Files written next to a checkpoint.
  std::string sibling(const std::string& name) const {
    return (std::filesystem::path(checkpoint_path()).parent_path() / name).string();
  }

  std::string threshold_path() const { return threshold_file.empty() ? sibling("threshold.txt") : threshold_file; }

  KeyValues to_key_values() const {
    KeyValues kv = model.to_key_values();
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    kv.insert(kv.end(), {{"train", train},
                         {"validation", validation},
                         {"test", test},
                         {"input", input},
                         {"format", format},
                         {"labels", labels},
                         {"embeddings", embeddings},
                         {"descriptors", descriptors},
                         {"auto_extract", b(auto_extract)},
                         {"validation_fraction", detail::format_real(validation_fraction)},
                         {"out_dir", out_dir},
                         {"checkpoint", checkpoint},
                         {"threshold_file", threshold_file},
                         {"threshold", threshold ? detail::format_real(*threshold) : std::string()},
                         {"preview", std::to_string(preview)}});
    return kv;
  }

  void validate() const {
    model.validate();
    if (!(validation_fraction > 0 && validation_fraction < 1)) throw InputError("config 'validation_fraction' must lie in (0, 1)");
    if (threshold && !(*threshold > 0 && *threshold < 1)) throw InputError("config 'threshold' must lie in (0, 1)");
    if (!format.empty()) parse_dataset_format(format);
  }
};

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  const auto kv = parse_key_values(ss.str(), path);
  for (const auto& [k, v] : kv) {
    try {
      cfg.apply(k, v);
    } catch (const InputError& e) {
      throw InputError(path + ": " + e.what());
    }
  }
  return cfg;
}

/// `key  default` lines for --help.
inline std::string describe_defaults() {
  std::string out;
  for (const auto& [k, v] : RunConfig{}.to_key_values()) out += "  " + k + " = " + v + "\n";
  return out;
}

}  // namespace descnet::app
