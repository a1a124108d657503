// SPDX-License-Identifier: Apache-2.0
// descnet: descriptor extraction, training, evaluation, prediction and
// self-verification for the dual-channel text classifier.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "descnet/app/commands.hpp"

namespace {

using descnet::app::RunConfig;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> sets;
  std::string train, validation, test, input, checkpoint, descriptors, embeddings;
  std::optional<double> threshold;
  std::vector<std::string> texts;
  bool corrupt_adjoint = false;
};

RunConfig build_config(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : descnet::app::load_run_config(f.config);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw descnet::InputError("--set expects key=value, got '" + s + "'");
    cfg.apply(descnet::trim(s.substr(0, eq)), descnet::trim(s.substr(eq + 1)));
  }
  auto put = [](std::string& field, const std::string& v) {
    if (!v.empty()) field = v;
  };
  put(cfg.out_dir, f.out_dir);
  put(cfg.train, f.train);
  put(cfg.validation, f.validation);
  put(cfg.test, f.test);
  put(cfg.input, f.input);
  put(cfg.checkpoint, f.checkpoint);
  put(cfg.descriptors, f.descriptors);
  put(cfg.embeddings, f.embeddings);
  if (f.seed) cfg.model.seed = *f.seed;
  if (f.threshold) cfg.threshold = f.threshold;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-channel text classification with statistically extracted class descriptors."};
  app.require_subcommand(1);
  app.footer("Config keys (flat `key = value` file, overridden by --set and flags) and defaults:\n" +
             descnet::app::describe_defaults() +
             "\nExit codes: 0 success, 1 verification failure, 2 input error, 3 numerical failure, "
             "4 artifact incompatibility.");

  Flags f;
  auto shared = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config, "flat key = value config file");
    cmd->add_option("--seed", f.seed, "random seed (overrides the config)");
    cmd->add_option("--out-dir", f.out_dir, "output directory (overrides the config)");
    cmd->add_option("--set", f.sets, "override one config key, key=value (repeatable)");
  };

  auto* extract = app.add_subcommand("extract-descriptors", "extract class descriptors from the training split");
  shared(extract);
  extract->add_option("--train", f.train, "training dataset");

  auto* train = app.add_subcommand("train", "train a model and write checkpoint, history and threshold");
  shared(train);
  train->add_option("--train", f.train, "training dataset");
  train->add_option("--validation", f.validation, "validation dataset (default: held out of --train)");
  train->add_option("--descriptors", f.descriptors, "descriptor file to use instead of extracting one");
  train->add_option("--embeddings", f.embeddings, "pretrained `token v1 ... vd` embedding file");

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a labelled dataset");
  shared(evaluate);
  evaluate->add_option("--test", f.test, "labelled dataset to score");
  evaluate->add_option("--checkpoint", f.checkpoint, "checkpoint (default: <out-dir>/model.ckpt)");
  evaluate->add_option("--threshold", f.threshold, "multi-label decision threshold (default: threshold file)");

  auto* predict = app.add_subcommand("predict", "print labels and class probabilities per input text");
  shared(predict);
  predict->add_option("--text", f.texts, "text to classify (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  predict->add_option("--input", f.input, "file with one text per line, - for standard input");
  predict->add_option("--checkpoint", f.checkpoint, "checkpoint (default: <out-dir>/model.ckpt)");
  predict->add_option("--threshold", f.threshold, "multi-label decision threshold (default: threshold file)");

  auto* verify = app.add_subcommand("verify", "run the built-in verification suite");
  verify->add_flag("--corrupt-tanh-adjoint", f.corrupt_adjoint, "test hook: break the tanh adjoint")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  descnet::app::Io io{std::cin, std::cout, std::cerr};
  try {
    if (verify->parsed()) return descnet::app::cmd_verify(io, f.corrupt_adjoint);
    const RunConfig cfg = build_config(f);
    if (extract->parsed()) return descnet::app::cmd_extract_descriptors(cfg, io);
    if (train->parsed()) return descnet::app::cmd_train(cfg, io);
    if (evaluate->parsed()) return descnet::app::cmd_evaluate(cfg, io);
    if (predict->parsed()) return descnet::app::cmd_predict(cfg, f.texts, io);
  } catch (const descnet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
