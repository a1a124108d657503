// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central-difference verification of tape gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "descnet/error.hpp"
#include "descnet/numerics/tape.hpp"

namespace descnet::numerics {

/// Builds a scalar loss on the given tape. Must bind parameters through
/// tape.parameter() and be deterministic.
using ScalarFunction = std::function<Var<double>(Tape<double>&)>;

struct GradCheckResult {
  double max_relative_error = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  std::size_t entries_checked = 0;
};

/// Compares the tape gradient of every trainable scalar entry with
/// (f(x + eps) - f(x - eps)) / (2 eps). Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-12).
inline GradCheckResult grad_check(const ScalarFunction& fn, const std::vector<Parameter<double>*>& params,
                                  double epsilon = 1e-6) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) throw InputError("grad_check: epsilon must lie in [1e-7, 1e-4]");
  auto evaluate = [&] {
    Tape<double> tape;
    const double v = fn(tape).value()[0];
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite function value");
    return v;
  };

  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    auto loss = fn(tape);
    if (!std::isfinite(loss.value()[0])) throw NumericalError("grad_check: non-finite function value");
    tape.backward(loss);
  }

  GradCheckResult result;
  for (auto* p : params) {
    if (!p->trainable) continue;
    const Tensor<double> analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      if (!std::isfinite(analytic[i])) throw NumericalError("grad_check: non-finite gradient in '" + p->name + "'");
      const double saved = p->value[i];
      p->value[i] = saved + epsilon;
      const double up = evaluate();
      p->value[i] = saved - epsilon;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2 * epsilon);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
      const double err = std::abs(analytic[i] - numeric) / denom;
      ++result.entries_checked;
      if (result.entries_checked == 1 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace descnet::numerics
