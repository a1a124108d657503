// SPDX-License-Identifier: Apache-2.0
#pragma once

// Evaluation measures and multi-label threshold selection.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "descnet/corpus.hpp"
#include "descnet/error.hpp"

namespace descnet {

using LabelSet = std::vector<std::size_t>;

/// Probability that a random positive outscores a random negative, ties
/// counting one half (the normalized Mann-Whitney U).
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        positives += 1;
        rank_sum += mid_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0 || negatives == 0) throw InputError("AUC undefined: labels contain a single class");
  return (rank_sum - positives * (positives + 1) / 2) / (positives * negatives);
}

enum class Averaging { macro, micro, weighted };

inline std::string to_string(Averaging a) {
  switch (a) {
    case Averaging::macro:
      return "macro";
    case Averaging::micro:
      return "micro";
    case Averaging::weighted:
      return "weighted";
  }
  return "?";
}

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct ClassCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  std::size_t support() const { return true_positive + false_negative; }
};

namespace detail {

inline double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

inline PRF prf_from_counts(double tp, double fp, double fn) {
  PRF out;
  out.precision = ratio(tp, tp + fp);
  out.recall = ratio(tp, tp + fn);
  out.f1 = out.precision + out.recall == 0 ? 0.0 : 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

}  // namespace detail

struct PRFReport {
  std::vector<ClassCounts> counts;
  std::vector<PRF> per_class;
  PRF macro;
  PRF micro;
  PRF weighted;

  const PRF& aggregate(Averaging a) const {
    return a == Averaging::macro ? macro : a == Averaging::micro ? micro : weighted;
  }
};

/// Per-class precision/recall/F1 with all three aggregations. Classes with no
/// gold and no predicted instance score 0 and count in the macro mean.
inline PRFReport precision_recall_f1(std::span<const LabelSet> predicted, std::span<const LabelSet> gold,
                                     std::size_t num_classes) {
  if (predicted.size() != gold.size()) throw InputError("precision_recall_f1: prediction and gold counts differ");
  PRFReport r;
  r.counts.assign(num_classes, {});
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t c : predicted[i]) {
      if (c >= num_classes) throw InputError("precision_recall_f1: class index out of range");
      if (std::find(gold[i].begin(), gold[i].end(), c) != gold[i].end()) {
        ++r.counts[c].true_positive;
      } else {
        ++r.counts[c].false_positive;
      }
    }
    for (std::size_t c : gold[i]) {
      if (c >= num_classes) throw InputError("precision_recall_f1: class index out of range");
      if (std::find(predicted[i].begin(), predicted[i].end(), c) == predicted[i].end()) ++r.counts[c].false_negative;
    }
  }
  double tp = 0, fp = 0, fn = 0, total_support = 0;
  for (const auto& c : r.counts) {
    const PRF prf = detail::prf_from_counts(static_cast<double>(c.true_positive), static_cast<double>(c.false_positive),
                                            static_cast<double>(c.false_negative));
    r.per_class.push_back(prf);
    tp += static_cast<double>(c.true_positive);
    fp += static_cast<double>(c.false_positive);
    fn += static_cast<double>(c.false_negative);
    const auto s = static_cast<double>(c.support());
    total_support += s;
    r.macro.precision += prf.precision;
    r.macro.recall += prf.recall;
    r.macro.f1 += prf.f1;
    r.weighted.precision += s * prf.precision;
    r.weighted.recall += s * prf.recall;
    r.weighted.f1 += s * prf.f1;
  }
  const double k = static_cast<double>(std::max<std::size_t>(num_classes, 1));
  r.macro = {r.macro.precision / k, r.macro.recall / k, r.macro.f1 / k};
  r.weighted = {detail::ratio(r.weighted.precision, total_support), detail::ratio(r.weighted.recall, total_support),
                detail::ratio(r.weighted.f1, total_support)};
  r.micro = detail::prf_from_counts(tp, fp, fn);
  return r;
}

inline double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  if (predicted.size() != gold.size()) throw InputError("accuracy: prediction and gold counts differ");
  if (gold.empty()) throw InputError("no examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

/// Row-major (examples x classes) probabilities.
struct ProbabilityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// Argmax (lowest index on ties) for multi-class; every p > threshold for multi-label.
inline LabelSet decide_labels(std::span<const double> probs, TaskMode mode, std::optional<double> threshold) {
  LabelSet out;
  if (mode == TaskMode::multi_class) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.size(); ++j) {
      if (probs[j] > probs[best]) best = j;
    }
    out.push_back(best);
    return out;
  }
  if (!threshold) throw InputError("multi-label prediction requires a threshold");
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > *threshold) out.push_back(j);
  }
  return out;
}

inline std::vector<LabelSet> threshold_predictions(const ProbabilityMatrix& probs, double threshold) {
  std::vector<LabelSet> out(probs.rows);
  for (std::size_t r = 0; r < probs.rows; ++r) out[r] = decide_labels(probs.row(r), TaskMode::multi_label, threshold);
  return out;
}

inline constexpr int kThresholdGridSteps = 100;

struct ThresholdSelection {
  double threshold = 0.5;
  double macro_f1 = 0;
};

/// Scans 0.01, 0.02, ..., 0.99 and keeps the threshold with the best macro-F1
/// (the smaller one on ties). Labels are predicted when p > threshold.
inline ThresholdSelection select_threshold(const ProbabilityMatrix& probs, std::span<const LabelSet> gold) {
  if (probs.rows == 0 || probs.rows != gold.size()) throw InputError("select_threshold: empty or mismatched validation set");
  ThresholdSelection best;
  bool first = true;
  for (int i = 1; i < kThresholdGridSteps; ++i) {
    const double t = static_cast<double>(i) / kThresholdGridSteps;
    const double f1 = precision_recall_f1(threshold_predictions(probs, t), gold, probs.cols).macro.f1;
    if (first || f1 > best.macro_f1) {
      best = {t, f1};
      first = false;
    }
  }
  return best;
}

/// Per-class one-vs-rest AUC; nullopt where the class has no positive or no negative.
inline std::vector<std::optional<double>> per_class_auc(const ProbabilityMatrix& probs, std::span<const LabelSet> gold) {
  std::vector<std::optional<double>> out(probs.cols);
  std::vector<double> scores(probs.rows);
  std::vector<int> labels(probs.rows);
  for (std::size_t c = 0; c < probs.cols; ++c) {
    std::size_t pos = 0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
      scores[r] = probs.at(r, c);
      labels[r] = std::find(gold[r].begin(), gold[r].end(), c) != gold[r].end() ? 1 : 0;
      pos += static_cast<std::size_t>(labels[r]);
    }
    if (pos > 0 && pos < probs.rows) out[c] = roc_auc(scores, labels);
  }
  return out;
}

/// Unweighted mean over classes whose AUC is defined; nullopt when none is.
inline std::optional<double> macro_auc(const ProbabilityMatrix& probs, std::span<const LabelSet> gold) {
  double total = 0;
  std::size_t n = 0;
  for (const auto& a : per_class_auc(probs, gold)) {
    if (a) {
      total += *a;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

struct EvaluationReport {
  TaskMode mode = TaskMode::multi_class;
  std::vector<std::string> class_names;
  PRFReport prf;
  std::optional<double> accuracy;           // multi-class
  std::vector<std::optional<double>> auc;   // per class
  std::optional<double> macro_auc;
  std::optional<double> threshold;          // multi-label
  std::size_t examples = 0;

  /// `name<TAB>value`, one metric per line.
  std::string to_tsv() const {
    std::ostringstream out;
    char buf[64];
    auto line = [&](const std::string& name, double v) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << name << '\t' << buf << '\n';
    };
    out << "mode\t" << to_string(mode) << '\n';
    out << "examples\t" << examples << '\n';
    if (accuracy) line("accuracy", *accuracy);
    if (threshold) line("threshold", *threshold);
    if (macro_auc) line("auc_macro", *macro_auc);
    for (Averaging a : {Averaging::weighted, Averaging::macro, Averaging::micro}) {
      const PRF& p = prf.aggregate(a);
      line("precision_" + to_string(a), p.precision);
      line("recall_" + to_string(a), p.recall);
      line("f1_" + to_string(a), p.f1);
    }
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const std::string& n = class_names[c];
      line("precision[" + n + "]", prf.per_class[c].precision);
      line("recall[" + n + "]", prf.per_class[c].recall);
      line("f1[" + n + "]", prf.per_class[c].f1);
      out << "support[" << n << "]\t" << prf.counts[c].support() << '\n';
      if (auc[c]) line("auc[" + n + "]", *auc[c]);
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mode"] = to_string(mode);
    j["examples"] = examples;
    j["default_averaging"] = "weighted";
    if (accuracy) j["accuracy"] = *accuracy;
    if (threshold) j["threshold"] = *threshold;
    j["auc_macro"] = macro_auc ? nlohmann::json(*macro_auc) : nlohmann::json(nullptr);
    for (Averaging a : {Averaging::weighted, Averaging::macro, Averaging::micro}) {
      const PRF& p = prf.aggregate(a);
      j["aggregate"][to_string(a)] = {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
    }
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      nlohmann::json cls = {{"name", class_names[c]},
                            {"precision", prf.per_class[c].precision},
                            {"recall", prf.per_class[c].recall},
                            {"f1", prf.per_class[c].f1},
                            {"support", prf.counts[c].support()}};
      cls["auc"] = auc[c] ? nlohmann::json(*auc[c]) : nlohmann::json(nullptr);
      j["classes"].push_back(cls);
    }
    return j;
  }
};

inline EvaluationReport evaluate_predictions(const LabelSpace& labels, const ProbabilityMatrix& probs,
                                             std::span<const LabelSet> gold, std::optional<double> threshold) {
  if (probs.rows != gold.size()) throw InputError("evaluate: probability rows and gold sets differ");
  if (probs.rows == 0) throw InputError("no examples");
  EvaluationReport r;
  r.mode = labels.mode();
  r.class_names = labels.names();
  r.examples = probs.rows;
  std::vector<LabelSet> predicted(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) predicted[i] = decide_labels(probs.row(i), labels.mode(), threshold);
  r.prf = precision_recall_f1(predicted, gold, labels.size());
  if (labels.mode() == TaskMode::multi_class) {
    std::vector<std::size_t> p(probs.rows), g(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
      p[i] = predicted[i].front();
      g[i] = gold[i].empty() ? labels.size() : gold[i].front();
    }
    r.accuracy = accuracy(p, g);
  } else {
    r.threshold = threshold;
  }
  r.auc = per_class_auc(probs, gold);
  r.macro_auc = macro_auc(probs, gold);
  return r;
}

}  // namespace descnet
