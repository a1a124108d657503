// SPDX-License-Identifier: Apache-2.0
#pragma once

// Class descriptors: per-class word lists ranked by a chi-square or ANOVA F
// test of token/class dependence, and the filtered "descriptor channel" input
// built from them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "descnet/corpus.hpp"
#include "descnet/error.hpp"

namespace descnet {

enum class DescriptorTest { chi2, anova };

inline std::string to_string(DescriptorTest test) { return test == DescriptorTest::chi2 ? "chi2" : "anova"; }

inline DescriptorTest parse_descriptor_test(std::string_view s) {
  if (s == "chi2") return DescriptorTest::chi2;
  if (s == "anova") return DescriptorTest::anova;
  throw InputError("unknown descriptor test '" + std::string(s) + "' (expected chi2 or anova)");
}

/// Score given to a token whose ANOVA within-group variance is zero while its
/// group means differ: it separates the class perfectly.
inline constexpr double kUnboundedScore = std::numeric_limits<double>::max();

struct Contingency {
  std::int64_t a = 0;  // in class, token present
  std::int64_t b = 0;  // out of class, token present
  std::int64_t c = 0;  // in class, token absent
  std::int64_t d = 0;  // out of class, token absent
  std::int64_t n() const { return a + b + c + d; }
};

/// Count, sum and sum of squares of one group's per-document token counts.
struct GroupMoments {
  double n = 0;
  double sum = 0;
  double sum_sq = 0;
};

/// Pearson's statistic of a 2x2 table in closed form; 0 when a marginal is empty.
inline double chi2_statistic(const Contingency& t) {
  const double a = static_cast<double>(t.a), b = static_cast<double>(t.b);
  const double c = static_cast<double>(t.c), d = static_cast<double>(t.d);
  const double denom = (a + b) * (c + d) * (a + c) * (b + d);
  if (denom == 0) return 0.0;
  const double cross = a * d - b * c;
  return (a + b + c + d) * cross * cross / denom;
}

namespace detail {

inline double f_ratio(double ssb, double ssw, double total) {
  if (ssb <= 0) return 0.0;
  if (ssw <= 0) return kUnboundedScore;
  return ssb / (ssw / (total - 2.0));
}

}  // namespace detail

/// Two-group one-way ANOVA F from group moments (df 1 and N-2).
inline double anova_f_from_moments(const GroupMoments& in, const GroupMoments& out) {
  const double total = in.n + out.n;
  if (total < 3) throw InputError("insufficient degrees of freedom");
  if (in.n == 0 || out.n == 0) return 0.0;
  const double mean_in = in.sum / in.n;
  const double mean_out = out.sum / out.n;
  const double diff = mean_in - mean_out;
  const double ssb = in.n * out.n / total * diff * diff;
  const double ssw = std::max(0.0, in.sum_sq - in.sum * mean_in) + std::max(0.0, out.sum_sq - out.sum * mean_out);
  return detail::f_ratio(ssb, ssw, total);
}

/// Two-group one-way ANOVA F statistic.
inline double anova_f_score(std::span<const double> in_class, std::span<const double> out_class) {
  const double total = static_cast<double>(in_class.size() + out_class.size());
  if (total < 3) throw InputError("insufficient degrees of freedom");
  if (in_class.empty() || out_class.empty()) throw InputError("anova_f_score needs two non-empty groups");
  auto mean = [](std::span<const double> xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  const double m_in = mean(in_class), m_out = mean(out_class);
  double ssw = 0;
  for (double x : in_class) ssw += (x - m_in) * (x - m_in);
  for (double x : out_class) ssw += (x - m_out) * (x - m_out);
  const double diff = m_in - m_out;
  const double ssb = static_cast<double>(in_class.size()) * static_cast<double>(out_class.size()) / total * diff * diff;
  return detail::f_ratio(ssb, ssw, total);
}

/// Document-level token/class statistics for one corpus. Token ids follow the
/// vocabulary; padding and OOV are never counted.
class TokenClassStats {
 public:
  TokenClassStats(std::span<const Document> corpus, const Vocabulary& vocab, const LabelSpace& labels)
      : num_docs_(static_cast<std::int64_t>(corpus.size())),
        num_classes_(labels.size()),
        num_tokens_(vocab.size()),
        class_sizes_(labels.size(), 0),
        doc_frequency_(vocab.size(), 0),
        present_(vocab.size() * labels.size(), 0),
        sum_(vocab.size() * labels.size(), 0.0),
        sum_sq_(vocab.size() * labels.size(), 0.0),
        total_sum_(vocab.size(), 0.0),
        total_sum_sq_(vocab.size(), 0.0),
        occurrences_(vocab.size()) {
    if (corpus.empty()) throw InputError("empty corpus");
    doc_labels_.reserve(corpus.size());
    std::unordered_map<std::int32_t, std::int64_t> counts;
    for (std::size_t di = 0; di < corpus.size(); ++di) {
      const auto& doc = corpus[di];
      for (std::size_t label : doc.labels) {
        if (label >= num_classes_) throw InputError("document " + std::to_string(doc.id) + " has out-of-range label");
        ++class_sizes_[label];
      }
      doc_labels_.push_back(doc.labels);
      counts.clear();
      for (const auto& tok : doc.tokens) {
        const std::int32_t id = vocab.id(tok);
        if (id >= 2) ++counts[id];
      }
      for (const auto& [id, count] : counts) {
        const auto t = static_cast<std::size_t>(id);
        const auto x = static_cast<double>(count);
        ++doc_frequency_[t];
        total_sum_[t] += x;
        total_sum_sq_[t] += x * x;
        occurrences_[t].emplace_back(di, count);
        for (std::size_t label : doc.labels) {
          const std::size_t k = t * num_classes_ + label;
          ++present_[k];
          sum_[k] += x;
          sum_sq_[k] += x * x;
        }
      }
    }
    for (auto& occ : occurrences_) std::sort(occ.begin(), occ.end());
    for (std::size_t c = 0; c < num_classes_; ++c) {
      if (class_sizes_[c] == 0) throw InputError("class '" + labels.name(c) + "' has no documents");
    }
  }

  std::int64_t num_docs() const { return num_docs_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_tokens() const { return num_tokens_; }
  std::int64_t class_size(std::size_t cls) const { return class_sizes_.at(cls); }
  std::int64_t doc_frequency(std::int32_t token) const { return doc_frequency_.at(static_cast<std::size_t>(token)); }

  Contingency contingency(std::int32_t token, std::size_t cls) const {
    const auto t = static_cast<std::size_t>(token);
    Contingency out;
    out.a = present_.at(t * num_classes_ + cls);
    out.b = doc_frequency_[t] - out.a;
    out.c = class_sizes_[cls] - out.a;
    out.d = num_docs_ - class_sizes_[cls] - out.b;
    return out;
  }

  /// Moments of the token's per-document counts inside and outside `cls`.
  std::pair<GroupMoments, GroupMoments> moments(std::int32_t token, std::size_t cls) const {
    const auto t = static_cast<std::size_t>(token);
    const std::size_t k = t * num_classes_ + cls;
    GroupMoments in{static_cast<double>(class_sizes_[cls]), sum_[k], sum_sq_[k]};
    GroupMoments out{static_cast<double>(num_docs_ - class_sizes_[cls]), total_sum_[t] - sum_[k],
                     total_sum_sq_[t] - sum_sq_[k]};
    return {in, out};
  }

  /// The token's raw count in every document, split by membership of `cls`.
  std::pair<std::vector<double>, std::vector<double>> count_groups(std::int32_t token, std::size_t cls) const {
    std::vector<double> per_doc(static_cast<std::size_t>(num_docs_), 0.0);
    for (const auto& [doc, count] : occurrences_.at(static_cast<std::size_t>(token))) {
      per_doc[doc] = static_cast<double>(count);
    }
    std::pair<std::vector<double>, std::vector<double>> groups;
    for (std::size_t d = 0; d < per_doc.size(); ++d) {
      const auto& l = doc_labels_[d];
      (std::binary_search(l.begin(), l.end(), cls) ? groups.first : groups.second).push_back(per_doc[d]);
    }
    return groups;
  }

 private:
  std::int64_t num_docs_;
  std::size_t num_classes_;
  std::size_t num_tokens_;
  std::vector<std::int64_t> class_sizes_;
  std::vector<std::int64_t> doc_frequency_;
  std::vector<std::int64_t> present_;  // [token * C + class]
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
  std::vector<double> total_sum_;
  std::vector<double> total_sum_sq_;
  std::vector<std::vector<std::pair<std::size_t, std::int64_t>>> occurrences_;
  std::vector<std::vector<std::size_t>> doc_labels_;
};

inline TokenClassStats build_contingency(std::span<const Document> corpus, const Vocabulary& vocab,
                                         const LabelSpace& labels) {
  return TokenClassStats(corpus, vocab, labels);
}

inline double chi2_score(const TokenClassStats& stats, std::int32_t token, std::size_t cls) {
  return chi2_statistic(stats.contingency(token, cls));
}

inline double anova_score(const TokenClassStats& stats, std::int32_t token, std::size_t cls) {
  const auto [in, out] = stats.moments(token, cls);
  return anova_f_from_moments(in, out);
}

struct ScoredToken {
  std::string token;
  double score = 0;
  bool operator==(const ScoredToken&) const = default;
};

class ClassDescriptorSet {
 public:
  ClassDescriptorSet(DescriptorTest test, std::size_t dimension) : test_(test), dimension_(dimension) {}

  DescriptorTest test() const { return test_; }
  std::size_t dimension() const { return dimension_; }

  void add_class(std::string name, std::vector<ScoredToken> entries) {
    for (const auto& e : entries) union_.insert(e.token);
    class_names_.push_back(std::move(name));
    lists_.push_back(std::move(entries));
  }

  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<ScoredToken>& entries(std::size_t cls) const { return lists_.at(cls); }

  /// Entries for class `name`; empty when the class has none.
  const std::vector<ScoredToken>& entries(std::string_view name) const {
    static const std::vector<ScoredToken> kEmpty;
    for (std::size_t i = 0; i < class_names_.size(); ++i) {
      if (class_names_[i] == name) return lists_[i];
    }
    return kEmpty;
  }

  const std::set<std::string>& union_vocabulary() const { return union_; }

  std::string serialize() const {
    std::ostringstream out;
    out << "#test=" << to_string(test_) << " n=" << dimension_ << '\n';
    char buf[64];
    for (std::size_t c = 0; c < lists_.size(); ++c) {
      for (const auto& e : lists_[c]) {
        std::snprintf(buf, sizeof buf, "%.17g", e.score);
        out << class_names_[c] << '\t' << e.token << '\t' << buf << '\n';
      }
    }
    return out.str();
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write descriptor file '" + path + "'");
    out << serialize();
  }

  static ClassDescriptorSet parse(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw InputError(origin + ":1: empty descriptor file");
    char test_name[16] = {};
    unsigned long long dim = 0;
    int consumed = 0;
    if (std::sscanf(line.c_str(), "#test=%15s n=%llu%n", test_name, &dim, &consumed) != 2 ||
        static_cast<std::size_t>(consumed) != line.size()) {
      throw InputError(origin + ":1: expected header '#test=<chi2|anova> n=<int>'");
    }
    DescriptorTest test;
    try {
      test = parse_descriptor_test(test_name);
    } catch (const InputError& e) {
      throw InputError(origin + ":1: " + e.what());
    }
    ClassDescriptorSet set(test, static_cast<std::size_t>(dim));
    std::string current;
    std::vector<ScoredToken> entries;
    std::set<std::string> finished;
    std::size_t line_no = 1;
    auto flush = [&] {
      if (!current.empty()) {
        finished.insert(current);
        set.add_class(current, std::move(entries));
        entries.clear();
      }
    };
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = origin + ":" + std::to_string(line_no);
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
      if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
        throw InputError(where + ": expected class<TAB>token<TAB>score");
      }
      std::string cls = line.substr(0, t1);
      std::string token = line.substr(t1 + 1, t2 - t1 - 1);
      const std::string score_str = line.substr(t2 + 1);
      char* end = nullptr;
      const double score = std::strtod(score_str.c_str(), &end);
      if (cls.empty() || token.empty() || score_str.empty() || end != score_str.c_str() + score_str.size() ||
          std::isnan(score)) {
        throw InputError(where + ": malformed descriptor entry");
      }
      if (cls != current) {
        if (finished.count(cls) != 0) throw InputError(where + ": class '" + cls + "' entries are not contiguous");
        flush();
        current = cls;
      }
      if (!entries.empty() && entries.back().score < score) throw InputError(where + ": scores are not in rank order");
      entries.push_back({std::move(token), score});
    }
    flush();
    return set;
  }

  static ClassDescriptorSet load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open descriptor file '" + path + "'");
    return parse(in, path);
  }

  bool operator==(const ClassDescriptorSet& other) const {
    return test_ == other.test_ && dimension_ == other.dimension_ && class_names_ == other.class_names_ &&
           lists_ == other.lists_;
  }

 private:
  DescriptorTest test_;
  std::size_t dimension_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<ScoredToken>> lists_;
  std::set<std::string> union_;
};

struct DescriptorOptions {
  DescriptorTest test = DescriptorTest::chi2;
  std::size_t dimension = 100;
  std::int64_t min_doc_frequency = 2;
};

/// Top-n tokens per class by descending score; ties go to the higher document
/// frequency, then to the lexicographically smaller token.
inline ClassDescriptorSet extract_descriptors(const TokenClassStats& stats, const Vocabulary& vocab,
                                              const LabelSpace& labels, const DescriptorOptions& options) {
  if (options.dimension < 1) throw InputError("descriptor dimension must be at least 1");
  std::vector<std::int32_t> candidates;
  for (std::size_t t = 2; t < stats.num_tokens(); ++t) {
    const auto id = static_cast<std::int32_t>(t);
    if (stats.doc_frequency(id) >= std::max<std::int64_t>(1, options.min_doc_frequency)) candidates.push_back(id);
  }
  ClassDescriptorSet set(options.test, options.dimension);
  std::vector<std::pair<double, std::int32_t>> scored;
  for (std::size_t cls = 0; cls < labels.size(); ++cls) {
    scored.clear();
    for (std::int32_t id : candidates) {
      const double s = options.test == DescriptorTest::chi2 ? chi2_score(stats, id, cls) : anova_score(stats, id, cls);
      scored.emplace_back(s, id);
    }
    const std::size_t keep = std::min(options.dimension, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      [&](const auto& x, const auto& y) {
                        if (x.first != y.first) return x.first > y.first;
                        const auto dx = stats.doc_frequency(x.second), dy = stats.doc_frequency(y.second);
                        if (dx != dy) return dx > dy;
                        return vocab.token(x.second) < vocab.token(y.second);
                      });
    std::vector<ScoredToken> entries;
    entries.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) entries.push_back({vocab.token(scored[i].second), scored[i].first});
    set.add_class(labels.name(cls), std::move(entries));
  }
  return set;
}

inline ClassDescriptorSet extract_descriptors(std::span<const Document> corpus, const Vocabulary& vocab,
                                              const LabelSpace& labels, const DescriptorOptions& options) {
  return extract_descriptors(build_contingency(corpus, vocab, labels), vocab, labels, options);
}

/// Keeps the document's tokens that appear in any class list, in order, then
/// encodes and pads them like the text channel.
inline std::vector<std::int32_t> build_descriptor_channel_input(std::span<const std::string> tokens,
                                                                const ClassDescriptorSet& descriptors,
                                                                const Vocabulary& vocab, std::size_t max_len) {
  const auto& keep = descriptors.union_vocabulary();
  std::vector<std::string> filtered;
  for (const auto& tok : tokens) {
    if (keep.count(tok) != 0) filtered.push_back(tok);
  }
  return encode(filtered, vocab, max_len);
}

}  // namespace descnet
