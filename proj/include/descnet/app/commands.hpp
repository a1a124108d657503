// SPDX-License-Identifier: Apache-2.0
#pragma once

// The five command-line commands. Each takes a validated RunConfig and the
// process streams, writes its artifacts under `out_dir`, and either returns an
// exit status or throws a descnet::Error carrying one.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "descnet/app/run_config.hpp"
#include "descnet/corpus.hpp"
#include "descnet/descriptors.hpp"
#include "descnet/metrics.hpp"
#include "descnet/model/checkpoint.hpp"
#include "descnet/model/dual_channel.hpp"
#include "descnet/model/encoding.hpp"
#include "descnet/model/trainer.hpp"
#include "descnet/nn/embedding.hpp"
#include "descnet/verify/suite.hpp"

namespace descnet::app {

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

inline std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  write_file(dir / "config.effective", format_key_values(cfg.to_key_values()));
  return dir;
}

inline DatasetFormat format_of(const RunConfig& cfg, const std::string& path) {
  return cfg.format.empty() ? infer_dataset_format(path) : parse_dataset_format(cfg.format);
}

inline void require_file(const std::string& path, const std::string& key) {
  if (path.empty()) throw InputError("no " + key + " file given (set '" + key + "' in the config or pass --" + key + ")");
  if (!std::filesystem::is_regular_file(path)) throw InputError("cannot open " + key + " file '" + path + "'");
}

inline LabelSpace training_labels(const RunConfig& cfg) {
  std::vector<std::string> names;
  if (!cfg.labels.empty()) {
    names = descnet::detail::split_label_cell(cfg.labels);
  } else {
    names = scan_label_names(cfg.train, format_of(cfg, cfg.train));
  }
  if (names.empty()) throw InputError(cfg.train + ": no labels found");
  return LabelSpace(std::move(names), cfg.model.mode);
}

/// Moves a seeded random `fraction` of `corpus` into a second corpus; both keep file order.
inline std::pair<Corpus, Corpus> hold_out(const Corpus& corpus, double fraction, std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(fraction * static_cast<double>(corpus.size()));
  if (k == 0 || k == corpus.size()) {
    throw InputError("cannot hold out a validation fraction of " + descnet::detail::format_real(fraction) + " from " +
                     std::to_string(corpus.size()) + " documents; give a 'validation' file");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed ^ 0xA5A5A5A5ULL);
  rng.shuffle(order);
  std::vector<bool> held(corpus.size(), false);
  for (std::size_t i = 0; i < k; ++i) held[order[i]] = true;
  std::pair<Corpus, Corpus> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) (held[i] ? out.second : out.first).push_back(corpus[i]);
  return out;
}

struct TrainingData {
  LabelSpace labels;
  Corpus train;
  Corpus validation;
};

inline TrainingData load_training_data(const RunConfig& cfg) {
  require_file(cfg.train, "train");
  LabelSpace labels = training_labels(cfg);
  Corpus train = load_dataset(cfg.train, format_of(cfg, cfg.train), labels);
  if (train.empty()) throw InputError(cfg.train + ": no documents");
  Corpus validation;
  if (!cfg.validation.empty()) {
    require_file(cfg.validation, "validation");
    validation = load_dataset(cfg.validation, format_of(cfg, cfg.validation), labels);
  } else {
    std::tie(train, validation) = hold_out(train, cfg.validation_fraction, cfg.model.seed);
  }
  return {std::move(labels), std::move(train), std::move(validation)};
}

inline DescriptorOptions descriptor_options(const ModelConfig& m) {
  return {m.descriptor_test, m.descriptor_dimension, m.min_doc_frequency};
}

inline std::optional<double> read_threshold(const RunConfig& cfg) {
  if (cfg.threshold) return cfg.threshold;
  const std::string path = cfg.threshold_path();
  std::ifstream in(path);
  if (!in) {
    throw InputError("multi-label mode needs a decision threshold but '" + path +
                     "' is missing; run `train` to select one, or set 'threshold' or 'threshold_file'");
  }
  std::string text;
  std::getline(in, text);
  double t = 0;
  try {
    t = descnet::detail::parse_real("threshold", descnet::trim(text));
  } catch (const InputError&) {
    throw InputError(path + ": expected a single decimal threshold");
  }
  if (!(t > 0 && t < 1)) throw InputError(path + ": threshold must lie in (0, 1)");
  return t;
}

inline std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

}  // namespace detail

/// A trained model with the vocabulary and descriptors it was trained on.
struct ModelBundle {
  CheckpointData checkpoint;
  LabelSpace labels;
  Vocabulary vocabulary;
  ClassDescriptorSet descriptors;
  DualChannelModel<float> model;

  ExampleEncoder encoder() const {
    const auto& c = checkpoint.info.config;
    return ExampleEncoder(vocabulary, descriptors, labels.size(), c.text_length, c.effective_descriptor_length());
  }
};

/// Loads the checkpoint and its sibling vocab.tsv / descriptors.tsv (or the
/// configured descriptor file), checking both against the recorded hashes.
inline ModelBundle load_bundle(const RunConfig& cfg) {
  const std::string ckpt = cfg.checkpoint_path();
  if (!std::filesystem::is_regular_file(ckpt)) throw InputError("cannot open checkpoint '" + ckpt + "'");
  CheckpointData data = read_checkpoint(ckpt);
  const auto& info = data.info;

  auto checked = [&](const std::string& path, const std::string& expected, const char* what) {
    if (!std::filesystem::is_regular_file(path)) throw InputError(std::string("cannot open ") + what + " file '" + path + "'");
    std::string bytes = descnet::detail::read_file_bytes(path);
    const std::string actual = sha256_hex(bytes);
    if (actual != expected) {
      throw CompatibilityError(std::string(what) + " file '" + path + "' does not match the checkpoint (sha256 " + actual +
                               ", checkpoint expects " + expected + ")");
    }
    return bytes;
  };
  const std::string vocab_path = cfg.sibling("vocab.tsv");
  const std::string desc_path = cfg.descriptors.empty() ? cfg.sibling("descriptors.tsv") : cfg.descriptors;
  std::istringstream vocab_in(checked(vocab_path, info.vocabulary_sha256, "vocabulary"));
  std::istringstream desc_in(checked(desc_path, info.descriptors_sha256, "descriptor"));
  Vocabulary vocab = Vocabulary::parse(vocab_in, 0, vocab_path);
  ClassDescriptorSet desc = ClassDescriptorSet::parse(desc_in, desc_path);
  if (vocab.size() != info.vocab_size) {
    throw CompatibilityError(vocab_path + " has " + std::to_string(vocab.size()) + " entries, checkpoint expects " +
                             std::to_string(info.vocab_size));
  }
  LabelSpace labels(info.labels, info.config.mode);
  auto model = load_checkpoint_model<float>(data);
  return {std::move(data), std::move(labels), std::move(vocab), std::move(desc), std::move(model)};
}

// ---------------------------------------------------------------------------

inline int cmd_extract_descriptors(const RunConfig& cfg, Io io) {
  const auto data = detail::load_training_data(cfg);
  const Vocabulary vocab = build_vocabulary(data.train, cfg.model.vocabulary_max);
  const auto desc = extract_descriptors(data.train, vocab, data.labels, detail::descriptor_options(cfg.model));
  const auto dir = detail::prepare_out_dir(cfg);
  detail::write_file(dir / "descriptors.tsv", desc.serialize());
  detail::write_file(dir / "vocab.tsv", vocab.serialize());

  io.out << "top " << std::min(cfg.preview, desc.dimension()) << " " << to_string(desc.test()) << " words per class ("
         << data.train.size() << " training documents)\n";
  for (std::size_t c = 0; c < desc.num_classes(); ++c) {
    const auto& entries = desc.entries(c);
    io.out << desc.class_names()[c] << ":";
    for (std::size_t i = 0; i < std::min(cfg.preview, entries.size()); ++i) io.out << (i ? ", " : " ") << entries[i].token;
    io.out << "\n";
  }
  io.err << "wrote " << (dir / "descriptors.tsv").string() << "\n";
  return 0;
}

inline int cmd_train(const RunConfig& cfg, Io io) {
  auto data = detail::load_training_data(cfg);
  const ModelConfig& mc = cfg.model;
  if (mc.drop_overlong) {
    const std::size_t before = data.train.size();
    data.train = drop_overlong(data.train, mc.text_length);
    io.err << "dropped " << before - data.train.size() << " training documents longer than " << mc.text_length
           << " tokens\n";
    if (data.train.empty()) throw InputError("every training document is longer than text_length");
  }
  const Vocabulary vocab = build_vocabulary(data.train, mc.vocabulary_max);

  std::optional<ClassDescriptorSet> desc;
  if (!cfg.descriptors.empty()) {
    detail::require_file(cfg.descriptors, "descriptors");
    desc = ClassDescriptorSet::load(cfg.descriptors);
    if (desc->class_names() != data.labels.names()) {
      throw CompatibilityError(cfg.descriptors + ": descriptor classes do not match the training labels");
    }
  } else if (cfg.auto_extract) {
    desc = extract_descriptors(data.train, vocab, data.labels, detail::descriptor_options(mc));
  } else {
    throw InputError("no descriptor file; set 'descriptors' or 'auto_extract = true'");
  }

  const ExampleEncoder encoder(vocab, *desc, data.labels.size(), mc.text_length, mc.effective_descriptor_length());
  const auto train_set = encoder.encode_corpus(data.train);
  const auto validation_set = encoder.encode_corpus(data.validation);

  DualChannelModel<float> model(mc, vocab.size(), data.labels.size());
  if (!cfg.embeddings.empty()) {
    const auto covered = nn::load_pretrained_embeddings(cfg.embeddings, vocab, model.text_embedding());
    if (!mc.share_embeddings) nn::load_pretrained_embeddings(cfg.embeddings, vocab, model.descriptor_embedding());
    io.err << "embeddings cover " << covered << " of " << vocab.size() << " vocabulary entries\n";
  }

  const auto dir = detail::prepare_out_dir(cfg);
  io.out << "training on " << train_set.size() << " documents, validating on " << validation_set.size() << "\n";
  TrainOptions options;
  options.on_epoch = [&](const EpochRecord& r) {
    char line[128];
    std::snprintf(line, sizeof line, "epoch %zu train_loss %.6f val_metric %.6f\n", r.epoch, r.train_loss, r.val_metric);
    io.out << line << std::flush;
  };
  const auto history = train(model, train_set, validation_set, options);

  const std::string vocab_bytes = vocab.serialize();
  const std::string desc_bytes = desc->serialize();
  detail::write_file(dir / "vocab.tsv", vocab_bytes);
  detail::write_file(dir / "descriptors.tsv", desc_bytes);
  detail::write_file(dir / "history.csv", history.to_csv());

  CheckpointInfo info;
  info.config = mc;
  info.labels = data.labels.names();
  info.vocab_size = vocab.size();
  info.vocabulary_sha256 = sha256_hex(vocab_bytes);
  info.descriptors_sha256 = sha256_hex(desc_bytes);
  info.epoch = history.best_epoch;
  info.validation_metric = history.best_metric;
  save_checkpoint(model, info, (dir / "model.ckpt").string());

  if (mc.mode == TaskMode::multi_label) {
    const auto probs = model.predict_proba(validation_set);
    std::vector<LabelSet> gold;
    for (const auto& ex : validation_set) gold.push_back(ex.labels);
    const auto sel = select_threshold(probs, gold);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f\n", sel.threshold);
    detail::write_file(dir / "threshold.txt", buf);
    io.out << "threshold " << std::string(buf, 4) << " (validation macro F1 " << sel.macro_f1 << ")\n";
  }
  io.out << "best epoch " << history.best_epoch << " val_metric " << history.best_metric << "\n";
  return 0;
}

inline int cmd_evaluate(const RunConfig& cfg, Io io) {
  detail::require_file(cfg.test, "test");
  auto bundle = load_bundle(cfg);
  const Corpus corpus = load_dataset(cfg.test, detail::format_of(cfg, cfg.test), bundle.labels);
  if (corpus.empty()) throw InputError(cfg.test + ": no documents");
  const std::optional<double> threshold =
      bundle.labels.mode() == TaskMode::multi_label ? detail::read_threshold(cfg) : std::nullopt;

  const auto examples = bundle.encoder().encode_corpus(corpus);
  const auto probs = bundle.model.predict_proba(examples);
  std::vector<LabelSet> gold;
  for (const auto& ex : examples) gold.push_back(ex.labels);
  const auto report = evaluate_predictions(bundle.labels, probs, gold, threshold);

  const auto dir = detail::prepare_out_dir(cfg);
  const std::string tsv = report.to_tsv();
  detail::write_file(dir / "report.tsv", tsv);
  detail::write_file(dir / "report.json", report.to_json().dump(2) + "\n");
  io.out << tsv;
  return 0;
}

/// `texts` come from --text flags; otherwise `input` is read one text per line
/// ("-" reads standard input).
inline int cmd_predict(const RunConfig& cfg, const std::vector<std::string>& texts, Io io) {
  std::vector<std::string> inputs = texts;
  if (inputs.empty()) {
    if (cfg.input.empty()) throw InputError("nothing to predict; pass --text or set 'input'");
    std::ifstream file;
    std::istream* in = &io.in;
    if (cfg.input != "-") {
      file.open(cfg.input, std::ios::binary);
      if (!file) throw InputError("cannot open input file '" + cfg.input + "'");
      in = &file;
    }
    std::string line;
    while (std::getline(*in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      inputs.push_back(line);
    }
  }
  auto bundle = load_bundle(cfg);
  const TaskMode mode = bundle.labels.mode();
  const std::optional<double> threshold = mode == TaskMode::multi_label ? detail::read_threshold(cfg) : std::nullopt;

  const auto encoder = bundle.encoder();
  std::vector<EncodedExample> examples;
  for (const auto& text : inputs) examples.push_back(encoder.encode_tokens(preprocess_text(text)));
  if (examples.empty()) return 0;
  const auto probs = bundle.model.predict_proba(examples);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto p = make_prediction(probs.row(i), mode, threshold);
    std::string line;
    for (std::size_t k = 0; k < p.labels.size(); ++k) line += (k ? "|" : "") + bundle.labels.name(p.labels[k]);
    for (std::size_t c = 0; c < p.probabilities.size(); ++c) {
      line += "\t" + bundle.labels.name(c) + "=" + detail::format_probability(p.probabilities[c]);
    }
    io.out << line << "\n";
  }
  return 0;
}

/// Runs the built-in verification suite. Returns 1 when any check fails.
inline int cmd_verify(Io io, bool corrupt_tanh_adjoint = false, const verify::SuiteOptions& options = {}) {
  numerics::fault::corrupt_tanh_adjoint = corrupt_tanh_adjoint;
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suite(options);
  } catch (...) {
    numerics::fault::corrupt_tanh_adjoint = false;
    throw;
  }
  numerics::fault::corrupt_tanh_adjoint = false;
  std::size_t failed = 0;
  for (const auto& r : results) {
    io.out << verify::format_check(r) << "\n";
    failed += r.passed ? 0 : 1;
  }
  io.out << results.size() << " checks, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace descnet::app
