// SPDX-License-Identifier: Apache-2.0
#pragma once

// Slow reference computations used by the built-in verification suite. Each
// works from raw inputs, not from the production data structures.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "descnet/corpus.hpp"
#include "descnet/descriptors.hpp"

namespace descnet::verify {

/// Pearson's statistic as the sum of (O - E)^2 / E over the four cells.
/// Cells of a table with an empty margin have E = 0; the statistic is 0 then.
inline double chi2_by_cells(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const std::array<double, 2> rows{a + b, c + d};
  const std::array<double, 2> cols{a + c, b + d};
  if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0) return 0.0;
  const std::array<std::array<double, 2>, 2> observed{{{a, b}, {c, d}}};
  double sum = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / n;
      const double diff = observed[i][j] - expected;
      sum += diff * diff / expected;
    }
  }
  return sum;
}

/// One-way ANOVA over two groups from the textbook sums of squares.
inline double anova_by_definition(std::span<const double> g1, std::span<const double> g2) {
  const std::array<std::span<const double>, 2> groups{g1, g2};
  double grand = 0, n = 0;
  for (auto g : groups) {
    for (double x : g) grand += x;
    n += static_cast<double>(g.size());
  }
  grand /= n;
  double ssb = 0, ssw = 0;
  for (auto g : groups) {
    double mean = 0;
    for (double x : g) mean += x;
    mean /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double x : g) ssw += (x - mean) * (x - mean);
  }
  const double msb = ssb / 1.0;
  const double msw = ssw / (n - 2.0);
  if (msb == 0) return 0.0;
  if (msw == 0) return kUnboundedScore;
  return msb / msw;
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting 1/2.
inline double auc_by_pairs(std::span<const double> scores, std::span<const int> labels) {
  double concordant = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) concordant += 1;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  return concordant / pairs;
}

/// |x - y| / max(|x|, |y|, 1e-12).
inline double relative_error(double x, double y) {
  if (x == y) return 0.0;
  return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-12});
}

/// A small random multi-class corpus: 3..10 documents over at most 15 word
/// types and 2..4 classes, every class non-empty.
inline Corpus random_small_corpus(Rng& rng, std::size_t& num_classes) {
  num_classes = 2 + rng.uniform_index(3);
  const std::size_t docs = std::max<std::size_t>(3, num_classes) + rng.uniform_index(11 - std::max<std::size_t>(3, num_classes));
  const std::size_t types = 1 + rng.uniform_index(15);
  Corpus corpus;
  for (std::size_t i = 0; i < docs; ++i) {
    const std::size_t cls = i < num_classes ? i : rng.uniform_index(num_classes);
    const std::size_t len = rng.uniform_index(9);
    std::string text;
    for (std::size_t k = 0; k < len; ++k) text += "w" + std::to_string(rng.uniform_index(types)) + " ";
    corpus.push_back(make_document(static_cast<std::int64_t>(i), text, {cls}));
  }
  return corpus;
}

}  // namespace descnet::verify
