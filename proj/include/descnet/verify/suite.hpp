// SPDX-License-Identifier: Apache-2.0
#pragma once

// Built-in verification: statistical oracles, gradient checks, probability
// invariants and metric oracles. Each check reports the measured deviation
// next to the tolerance it was held to.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "descnet/descriptors.hpp"
#include "descnet/metrics.hpp"
#include "descnet/model/dual_channel.hpp"
#include "descnet/numerics/grad_check.hpp"
#include "descnet/verify/oracles.hpp"

namespace descnet::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0;
  double tolerance = 0;
  std::string detail;
};

inline CheckResult make_check(std::string name, double measured, double tolerance, std::string detail = {}) {
  return {std::move(name), measured <= tolerance, measured, tolerance, std::move(detail)};
}

inline std::string format_check(const CheckResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "measured=%.3g tolerance=%.3g", r.measured, r.tolerance);
  std::string line = std::string(r.passed ? "PASS " : "FAIL ") + r.name + " " + buf;
  if (!r.detail.empty()) line += " (" + r.detail + ")";
  return line;
}

// Statistical oracles

struct OracleComparison {
  double chi2_max_error = 0;
  double anova_max_error = 0;
  std::size_t pairs = 0;
};

/// Scores every (token, class) of `corpora` random corpora through the
/// production path and through the slow oracles.
inline OracleComparison compare_statistics(std::size_t corpora, std::uint64_t seed) {
  Rng rng(seed);
  OracleComparison out;
  for (std::size_t k = 0; k < corpora; ++k) {
    std::size_t classes = 0;
    const Corpus corpus = random_small_corpus(rng, classes);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
    const LabelSpace labels(names, TaskMode::multi_class);
    const Vocabulary vocab = build_vocabulary(corpus, 1000);
    const TokenClassStats stats(corpus, vocab, labels);
    for (std::size_t t = 2; t < vocab.size(); ++t) {
      const std::string& word = vocab.token(static_cast<std::int32_t>(t));
      for (std::size_t c = 0; c < classes; ++c) {
        double a = 0, b = 0, cc = 0, d = 0;
        std::vector<double> in, rest;
        for (const auto& doc : corpus) {
          const auto count = static_cast<double>(std::count(doc.tokens.begin(), doc.tokens.end(), word));
          const bool member = doc.labels.front() == c;
          (member ? in : rest).push_back(count);
          if (member) (count > 0 ? a : cc) += 1;
          else (count > 0 ? b : d) += 1;
        }
        const auto id = static_cast<std::int32_t>(t);
        out.chi2_max_error = std::max(out.chi2_max_error, relative_error(chi2_score(stats, id, c), chi2_by_cells(a, b, cc, d)));
        const double oracle = anova_by_definition(in, rest);
        out.anova_max_error = std::max({out.anova_max_error, relative_error(anova_score(stats, id, c), oracle),
                                        relative_error(anova_f_score(in, rest), oracle)});
        ++out.pairs;
      }
    }
  }
  return out;
}

/// The four-document corpus {cat cat: A, cat: A, dog: B, dog dog: B}.
inline Corpus worked_example_corpus() {
  return {make_document(0, "cat cat", {0}), make_document(1, "cat", {0}), make_document(2, "dog", {1}),
          make_document(3, "dog dog", {1})};
}

// Gradient checks

/// Central-difference step for every check: near the cube root of the f64
/// unit roundoff, which balances truncation and cancellation error.
inline constexpr double kGradCheckEpsilon = 3e-5;

struct GradientCheck {
  std::string name;
  numerics::GradCheckResult result;
  double tolerance = 0;
};

namespace detail {

using numerics::Parameter;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;
using D = double;

inline Tensor<D> random_tensor(numerics::Shape shape, Rng& rng, double limit = 1.0) {
  return nn::uniform_tensor<D>(std::move(shape), limit, rng);
}

/// sum(coefficients * y) with fixed random coefficients, so every output entry
/// contributes to the loss with its own weight.
inline Var<D> weighted_sum(Tape<D>& tape, const Var<D>& y, const Tensor<D>& coefficients) {
  return numerics::sum(numerics::mul(y, tape.constant(coefficients)));
}

struct CheckBuilder {
  Rng rng;
  std::vector<GradientCheck> results;
  double epsilon = kGradCheckEpsilon;

  void run(const std::string& name, const numerics::ScalarFunction& fn, const std::vector<Parameter<D>*>& params,
           double tolerance = 1e-6) {
    results.push_back({name, numerics::grad_check(fn, params, epsilon), tolerance});
  }
};

inline std::vector<std::size_t> example_lengths() { return {5, 3, 1}; }

}  // namespace detail

/// Every primitive op and layer, at f64 with dropout off, against central differences.
inline std::vector<GradientCheck> layer_gradient_checks(std::uint64_t seed) {
  using namespace detail;
  using namespace numerics;
  CheckBuilder cb{Rng(seed), {}};
  Rng& rng = cb.rng;

  {
    Parameter<D> a("a", random_tensor({3, 4}, rng)), b("b", random_tensor({4, 5}, rng)), bias("bias", random_tensor({5}, rng));
    const auto c = random_tensor({3, 5}, rng);
    cb.run("grad:matmul+add", [&](Tape<D>& t) {
      return weighted_sum(t, add(matmul(t.parameter(a), t.parameter(b)), t.parameter(bias)), c);
    }, {&a, &b, &bias});
  }
  {
    Parameter<D> a("a", random_tensor({2, 3}, rng)), b("b", random_tensor({2, 3}, rng));
    const auto c = random_tensor({2, 3}, rng);
    cb.run("grad:mul+sub+scale", [&](Tape<D>& t) {
      const auto va = t.parameter(a);
      return weighted_sum(t, scale(mul(va, sub(va, t.parameter(b))), 0.7), c);
    }, {&a, &b});
  }
  {
    Parameter<D> a("a", random_tensor({3, 4}, rng, 2.5));
    const auto c = random_tensor({3, 4}, rng);
    cb.run("grad:tanh", [&](Tape<D>& t) { return weighted_sum(t, numerics::tanh(t.parameter(a)), c); }, {&a});
    cb.run("grad:sigmoid", [&](Tape<D>& t) { return weighted_sum(t, sigmoid_fn(t.parameter(a)), c); }, {&a});
    cb.run("grad:softmax", [&](Tape<D>& t) {
      const auto va = t.parameter(a);
      return add(weighted_sum(t, softmax_fn(va, 1), c), weighted_sum(t, softmax_fn(va, 0), c));
    }, {&a});
  }
  {
    Parameter<D> a("a", random_tensor({2, 3}, rng)), b("b", random_tensor({2, 2}, rng));
    const auto c = random_tensor({2, 2, 5}, rng);
    cb.run("grad:concat+slice+stack+step+reshape", [&](Tape<D>& t) {
      const auto joined = concat<D>({t.parameter(a), t.parameter(b)}, 1);           // (2, 5)
      const auto stacked = stack<D>({joined, slice(concat<D>({joined, joined}, 1), 1, 3, 5)});  // (2, 2, 5)
      const auto flat = reshape(stacked, {4, 5});
      return add(weighted_sum(t, reshape(flat, {2, 2, 5}), c), sum(step(stacked, 1)));
    }, {&a, &b});
  }
  {
    Parameter<D> a("a", random_tensor({4, 3, 2}, rng));
    const auto c0 = random_tensor({3, 2}, rng), c1 = random_tensor({4, 2}, rng);
    cb.run("grad:max_over_axis+mean_over_axis", [&](Tape<D>& t) {
      const auto va = t.parameter(a);
      return add(weighted_sum(t, max_over_axis(va, 0), c0), weighted_sum(t, mean_over_axis(va, 1), c1));
    }, {&a});
  }
  {
    Parameter<D> table("table", random_tensor({6, 3}, rng));
    const std::vector<std::int32_t> ids{2, 5, 2, 0, 1};
    const auto c = random_tensor({5, 3}, rng);
    cb.run("grad:embedding_gather", [&](Tape<D>& t) {
      return weighted_sum(t, embedding_gather(t.parameter(table), ids, 0), c);
    }, {&table});
  }
  const auto lengths = example_lengths();
  {
    Parameter<D> x("x", random_tensor({5, 3, 2}, rng));
    const auto c0 = random_tensor({3, 2}, rng), c1 = random_tensor({3, 2}, rng), c2 = random_tensor({5, 3, 2}, rng);
    cb.run("grad:time_reverse+max_pool+avg_pool", [&](Tape<D>& t) {
      const auto vx = t.parameter(x);
      return add(add(weighted_sum(t, nn::max_pool_time(vx, lengths), c0), weighted_sum(t, nn::avg_pool_time(vx, lengths), c1)),
                 weighted_sum(t, nn::time_reverse(vx, lengths), c2));
    }, {&x});
  }
  {
    Parameter<D> s("scores", random_tensor({5, 3}, rng, 2.0)), x("x", random_tensor({5, 3, 2}, rng));
    const auto c = random_tensor({3, 2}, rng);
    cb.run("grad:masked_softmax+weighted_time_sum", [&](Tape<D>& t) {
      return weighted_sum(t, nn::weighted_time_sum(nn::masked_softmax_time(t.parameter(s), lengths), t.parameter(x)), c);
    }, {&s, &x});
  }
  {
    nn::GRUCell<D> cell("gru", 3, 4, rng);
    for (auto* p : cell.params()) p->value = random_tensor(p->value.shape(), rng);
    Parameter<D> x("x", random_tensor({2, 3}, rng)), h("h", random_tensor({2, 4}, rng, 0.9));
    const auto mask = nn::dropout_mask<D>({2, 4}, 0.3, rng);
    const auto c = random_tensor({2, 4}, rng);
    auto params = cell.params();
    params.push_back(&x);
    params.push_back(&h);
    cb.run("grad:gru_cell_step", [&](Tape<D>& t) {
      return weighted_sum(t, nn::gru_cell_step<D>(cell.bind(t), t.parameter(x), t.parameter(h)), c);
    }, params);
    cb.run("grad:gru_cell_step+recurrent_mask", [&](Tape<D>& t) {
      return weighted_sum(t, nn::gru_cell_step<D>(cell.bind(t), t.parameter(x), t.parameter(h), t.constant(mask)), c);
    }, params);
  }
  {
    nn::BiGRU<D> layer("bigru", 2, 3, rng);
    for (auto* p : layer.params()) p->value = random_tensor(p->value.shape(), rng);
    Parameter<D> x("x", random_tensor({5, 3, 2}, rng));
    const auto c = random_tensor({5, 3, 6}, rng);
    auto params = layer.params();
    params.push_back(&x);
    cb.run("grad:bigru_forward", [&](Tape<D>& t) {
      return weighted_sum(t, nn::bigru_forward(t, layer, t.parameter(x), lengths), c);
    }, params);
    cb.run("grad:bigru_forward+dropout_masks", [&](Tape<D>& t) {
      Rng masks(seed ^ 0x5bd1e995ULL);
      const nn::RecurrentDropout dropout{0.3, 0.3, true, &masks};
      return weighted_sum(t, nn::bigru_forward(t, layer, t.parameter(x), lengths, dropout), c);
    }, params);
  }
  {
    nn::AttentionLayer<D> layer("attention", 4, 3, rng);
    for (auto* p : layer.params()) p->value = random_tensor(p->value.shape(), rng);
    Parameter<D> h("h", random_tensor({5, 3, 4}, rng));
    const auto c = random_tensor({3, 4}, rng);
    auto params = layer.params();
    params.push_back(&h);
    cb.run("grad:attention_forward", [&](Tape<D>& t) {
      return weighted_sum(t, nn::attention_forward(t, layer, t.parameter(h), lengths).context, c);
    }, params);
  }
  {
    nn::DenseLayer<D> softmax_head("dense", 5, 3, nn::Activation::softmax, rng);
    nn::DenseLayer<D> sigmoid_head("dense", 5, 3, nn::Activation::sigmoid, rng);
    Parameter<D> x("x", random_tensor({4, 5}, rng));
    const Tensor<D> one_hot({4, 3}, std::vector<D>{1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0});
    const Tensor<D> multi_hot({4, 3}, std::vector<D>{1, 1, 0, 0, 0, 0, 1, 0, 1, 0, 1, 1});
    auto p1 = softmax_head.params();
    p1.push_back(&x);
    cb.run("grad:dense_softmax+categorical_cross_entropy", [&](Tape<D>& t) {
      return nn::categorical_cross_entropy(softmax_head.forward(t, t.parameter(x)), one_hot);
    }, p1);
    auto p2 = sigmoid_head.params();
    p2.push_back(&x);
    cb.run("grad:dense_sigmoid+binary_cross_entropy", [&](Tape<D>& t) {
      return nn::binary_cross_entropy(sigmoid_head.forward(t, t.parameter(x)), multi_hot);
    }, p2);
  }
  return cb.results;
}

/// Toy-size configuration for end-to-end checks: vocabulary 20, d_embed 8,
/// gru_units 4, sequence length 6, 3 classes.
inline ModelConfig toy_model_config(TaskMode mode, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.d_embed = 8;
  cfg.gru_units = 4;
  cfg.text_length = 6;
  cfg.descriptor_length = 6;
  cfg.dropout_rate = 0;
  cfg.recurrent_dropout_rate = 0;
  cfg.feature_dropout = false;
  cfg.vocabulary_max = 20;
  cfg.seed = seed;
  return cfg;
}

inline constexpr std::size_t kToyVocabulary = 20;
inline constexpr std::size_t kToyClasses = 3;

/// A random batch of toy examples: the first has a single token, the second an
/// empty descriptor channel, the rest 2..length tokens.
inline std::vector<EncodedExample> toy_examples(TaskMode mode, std::size_t count, std::size_t length, Rng& rng) {
  std::vector<EncodedExample> out;
  for (std::size_t i = 0; i < count; ++i) {
    EncodedExample ex;
    const std::size_t len = i == 0 ? 1 : 2 + rng.uniform_index(length - 1);
    ex.text_ids.assign(length, 0);
    ex.descriptor_ids.assign(length, 0);
    std::size_t kept = 0;
    for (std::size_t t = 0; t < len; ++t) {
      ex.text_ids[t] = static_cast<std::int32_t>(1 + rng.uniform_index(kToyVocabulary - 1));
      if (i != 1 && rng.bernoulli(0.8)) ex.descriptor_ids[kept++] = ex.text_ids[t];
    }
    ex.target.assign(kToyClasses, 0.0);
    if (mode == TaskMode::multi_class) {
      const std::size_t c = rng.uniform_index(kToyClasses);
      ex.target[c] = 1;
      ex.labels = {c};
    } else {
      for (std::size_t c = 0; c < kToyClasses; ++c) {
        if (rng.bernoulli(0.5)) {
          ex.target[c] = 1;
          ex.labels.push_back(c);
        }
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline GradientCheck full_model_gradient_check(TaskMode mode, std::uint64_t seed) {
  DualChannelModel<double> model(toy_model_config(mode, seed), kToyVocabulary, kToyClasses);
  Rng rng(seed + 17);
  // Glorot-scale weights leave the deeper gates with gradients near 1e-9,
  // below what a finite difference resolves; check at a wider random point.
  for (auto* p : model.params()) {
    for (auto& v : p->value.values()) v = rng.uniform(-1, 1);
  }
  model.text_embedding().clear_padding_row();
  const auto examples = toy_examples(mode, 4, 6, rng);
  const auto batch = make_batch<double>(std::span<const EncodedExample>(examples));
  auto fn = [&](numerics::Tape<double>& tape) { return model.loss(model.forward(tape, batch, false), batch); };
  return {std::string("grad:full_model_") + to_string(mode), numerics::grad_check(fn, model.params(), kGradCheckEpsilon), 1e-4};
}

// Probability invariants

struct ProbabilityFuzz {
  double softmax_row_error = 0;    // max |sum_j p_j - 1|, f32 model output
  double attention_sum_error = 0;  // max |sum_t a_t - 1| over non-empty examples
  double sigmoid_min = 1;          // smallest multi-label output
  double sigmoid_max = 0;          // largest multi-label output
  double sigmoid_symmetry_error = 0;  // max |s(z) + s(-z) - 1|, f64
  std::size_t runs = 0;
};

/// Runs `runs` freshly initialized toy f32 models in each mode on random inputs.
inline ProbabilityFuzz fuzz_probabilities(std::size_t runs, std::uint64_t seed) {
  ProbabilityFuzz out;
  Rng rng(seed);
  for (std::size_t r = 0; r < runs; ++r) {
    for (TaskMode mode : {TaskMode::multi_class, TaskMode::multi_label}) {
      ModelConfig cfg = toy_model_config(mode, rng.next());
      cfg.d_embed = 4 + rng.uniform_index(8);
      cfg.gru_units = 2 + rng.uniform_index(6);
      DualChannelModel<float> model(cfg, kToyVocabulary, kToyClasses);
      const auto examples = toy_examples(mode, 1 + rng.uniform_index(6), 6, rng);
      const auto batch = make_batch<float>(std::span<const EncodedExample>(examples));
      numerics::Tape<float> tape;
      const auto trace = model.forward_trace(tape, batch, false);
      const auto& p = trace.probabilities.value();
      const auto& a = trace.attention_weights.value();
      const std::size_t n = batch.size();
      for (std::size_t b = 0; b < n; ++b) {
        if (mode == TaskMode::multi_class) {
          double s = 0;
          for (std::size_t c = 0; c < kToyClasses; ++c) s += p[b * kToyClasses + c];
          out.softmax_row_error = std::max(out.softmax_row_error, std::abs(s - 1.0));
        } else {
          for (std::size_t c = 0; c < kToyClasses; ++c) {
            out.sigmoid_min = std::min<double>(out.sigmoid_min, p[b * kToyClasses + c]);
            out.sigmoid_max = std::max<double>(out.sigmoid_max, p[b * kToyClasses + c]);
          }
        }
        if (batch.descriptors.lengths[b] > 0) {
          double s = 0;
          for (std::size_t t = 0; t < batch.descriptors.steps; ++t) s += a[t * n + b];
          out.attention_sum_error = std::max(out.attention_sum_error, std::abs(s - 1.0));
        }
      }
    }
    const double z = rng.uniform(-30, 30);
    out.sigmoid_symmetry_error =
        std::max(out.sigmoid_symmetry_error, std::abs(numerics::stable_sigmoid(z) + numerics::stable_sigmoid(-z) - 1.0));
    ++out.runs;
  }
  return out;
}

// Metric oracles

struct MetricComparison {
  double auc_max_error = 0;
  double threshold_f1_gap = 0;  // grid maximum minus the selected threshold's macro-F1
  std::size_t instances = 0;
};

inline double macro_f1_by_counting(const ProbabilityMatrix& probs, std::span<const LabelSet> gold, double threshold) {
  double total = 0;
  for (std::size_t c = 0; c < probs.cols; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
      const bool predicted = probs.at(r, c) > threshold;
      const bool actual = std::find(gold[r].begin(), gold[r].end(), c) != gold[r].end();
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
    }
    total += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return total / static_cast<double>(probs.cols);
}

inline MetricComparison compare_metrics(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  MetricComparison out;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 2 + rng.uniform_index(199);
    const bool coarse = rng.bernoulli(0.5);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = coarse ? static_cast<double>(rng.uniform_index(10)) / 10 : rng.uniform();
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    out.auc_max_error = std::max(out.auc_max_error, std::abs(roc_auc(scores, labels) - auc_by_pairs(scores, labels)));

    ProbabilityMatrix probs{8 + rng.uniform_index(20), 1 + rng.uniform_index(4), {}};
    std::vector<LabelSet> gold(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) {
      for (std::size_t c = 0; c < probs.cols; ++c) {
        const bool positive = rng.bernoulli(0.4);
        if (positive) gold[r].push_back(c);
        probs.values.push_back(std::clamp(rng.uniform(-0.3, 0.7) + (positive ? 0.3 : 0.0), 0.0, 1.0));
      }
    }
    double best = 0;
    for (int i = 1; i < kThresholdGridSteps; ++i) {
      best = std::max(best, macro_f1_by_counting(probs, gold, static_cast<double>(i) / kThresholdGridSteps));
    }
    const auto chosen = select_threshold(probs, gold);
    out.threshold_f1_gap = std::max(
        {out.threshold_f1_gap, std::abs(best - chosen.macro_f1), std::abs(best - macro_f1_by_counting(probs, gold, chosen.threshold))});
    ++out.instances;
  }
  return out;
}

// The suite

inline std::string describe(const numerics::GradCheckResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu entries, worst %s[%zu] analytic=%.6g numeric=%.6g", r.entries_checked,
                r.worst_parameter.c_str(), r.worst_index, r.analytic, r.numeric);
  return buf;
}

struct SuiteOptions {
  std::size_t random_corpora = 1000;
  std::size_t metric_instances = 100;
  std::size_t fuzz_runs = 1000;
  std::uint64_t seed = 20190807;
};

inline std::vector<CheckResult> run_suite(const SuiteOptions& options = {}) {
  std::vector<CheckResult> out;
  char detail[96];

  const auto stats = compare_statistics(options.random_corpora, options.seed);
  std::snprintf(detail, sizeof detail, "%zu corpora, %zu token/class pairs", options.random_corpora, stats.pairs);
  out.push_back(make_check("chi2_vs_cell_sum", stats.chi2_max_error, 1e-9, detail));
  out.push_back(make_check("anova_vs_sums_of_squares", stats.anova_max_error, 1e-9, detail));

  {
    const Corpus corpus = worked_example_corpus();
    const LabelSpace labels({"A", "B"}, TaskMode::multi_class);
    const Vocabulary vocab = build_vocabulary(corpus, 10);
    const TokenClassStats ts(corpus, vocab, labels);
    out.push_back(make_check("chi2_worked_example", std::abs(chi2_score(ts, vocab.id("cat"), 0) - 4.0), 1e-12, "expected 4"));
    const std::vector<double> in{2, 1}, rest{0, 0};
    out.push_back(make_check("anova_worked_example", std::abs(anova_f_score(in, rest) - 9.0), 1e-12, "expected 9"));
  }

  for (const auto& g : layer_gradient_checks(options.seed)) {
    out.push_back(make_check(g.name, g.result.max_relative_error, g.tolerance,
                             describe(g.result)));
  }
  for (TaskMode mode : {TaskMode::multi_class, TaskMode::multi_label}) {
    const auto g = full_model_gradient_check(mode, options.seed);
    out.push_back(make_check(g.name, g.result.max_relative_error, g.tolerance,
                             describe(g.result)));
  }

  const auto fuzz = fuzz_probabilities(options.fuzz_runs, options.seed);
  const std::string runs = std::to_string(fuzz.runs) + " runs";
  out.push_back(make_check("softmax_rows_sum_to_one", fuzz.softmax_row_error, 1e-6, runs));
  out.push_back(make_check("attention_weights_sum_to_one", fuzz.attention_sum_error, 1e-6, runs));
  const bool inside = fuzz.sigmoid_min > 0 && fuzz.sigmoid_max < 1;
  std::snprintf(detail, sizeof detail, "range [%.3g, %.3g]", fuzz.sigmoid_min, fuzz.sigmoid_max);
  out.push_back({"sigmoid_outputs_inside_unit_interval", inside, inside ? 0.0 : 1.0, 0.0, detail});
  out.push_back(make_check("sigmoid_symmetry", fuzz.sigmoid_symmetry_error, 1e-12, runs));

  const auto metrics = compare_metrics(options.metric_instances, options.seed);
  const std::string inst = std::to_string(metrics.instances) + " instances";
  out.push_back(make_check("auc_vs_pair_count", metrics.auc_max_error, 1e-12, inst));
  const std::vector<double> s{0.9, 0.8, 0.4, 0.3};
  const std::vector<int> l{1, 0, 1, 0};
  const std::vector<double> sep{0.9, 0.8, 0.2, 0.1}, flat{0.5, 0.5, 0.5, 0.5};
  const std::vector<int> sep_l{1, 1, 0, 0};
  const double worked = std::abs(roc_auc(s, l) - 0.75) + std::abs(roc_auc(sep, sep_l) - 1.0) + std::abs(roc_auc(flat, l) - 0.5);
  out.push_back(make_check("auc_worked_examples", worked, 1e-12, "0.75, 1.0, 0.5"));
  out.push_back(make_check("threshold_is_grid_maximum", metrics.threshold_f1_gap, 1e-12, inst));
  return out;
}

}  // namespace descnet::verify
