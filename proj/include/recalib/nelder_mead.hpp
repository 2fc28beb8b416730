// Copyright 2026 The Recalib Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RECALIB_NELDER_MEAD_HPP
#define RECALIB_NELDER_MEAD_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "recalib/error.hpp"

namespace recalib {

struct SimplexOptions {
  long long max_evals = 400;
  double ftol = 1e-14;  // function spread below which the simplex restarts
  double xtol = 1e-12;  // likewise for the vertex spread
  int max_restarts = 8;
  double restart_shrink = 0.5;  // step scale applied on each restart
};

struct SimplexResult {
  std::vector<double> x;
  double fx = std::numeric_limits<double>::infinity();
  long long evaluations = 0;
  int restarts = 0;
};

/// Downhill simplex with reflection 1, expansion 2, contraction 0.5 and
/// shrink 0.5. When the simplex collapses (function and vertex spread under
/// tolerance) it is rebuilt around the incumbent with shrunken steps, until
/// restarts or the evaluation budget run out. Fully deterministic; returns
/// the best point ever evaluated.
template <typename F>
SimplexResult nelder_mead(F&& f, const std::vector<double>& x0,
                          const std::vector<double>& steps,
                          const SimplexOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw Error(ErrorCode::bad_config, "empty parameter vector");
  if (steps.size() != n)
    throw Error(ErrorCode::bad_config, "steps size must match x0");
  for (double s : steps)
    if (s == 0.0) throw Error(ErrorCode::bad_config, "zero simplex step");
  if (opt.max_evals < static_cast<long long>(n) + 1)
    throw Error(ErrorCode::bad_config, "evaluation budget too small");

  SimplexResult result;
  result.x = x0;

  auto evaluate = [&](const std::vector<double>& x) {
    const double v = f(x);
    ++result.evaluations;
    if (v < result.fx) {
      result.fx = v;
      result.x = x;
    }
    return v;
  };
  auto budget_left = [&]() { return result.evaluations < opt.max_evals; };

  std::vector<std::vector<double>> vertices(n + 1);
  std::vector<double> values(n + 1);
  std::vector<std::size_t> order(n + 1);

  auto build_simplex = [&](const std::vector<double>& center, double scale) {
    for (std::size_t i = 0; i <= n; ++i) {
      vertices[i] = center;
      if (i > 0) vertices[i][i - 1] += steps[i - 1] * scale;
      values[i] = evaluate(vertices[i]);
      if (!budget_left() && i < n) return false;
    }
    return true;
  };

  double scale = 1.0;
  if (!build_simplex(x0, scale)) return result;

  std::vector<double> centroid(n), candidate(n);
  while (budget_left()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b];
    });
    const std::size_t best = order[0];
    const std::size_t second_worst = order[n - 1];
    const std::size_t worst = order[n];

    double f_spread = values[worst] - values[best];
    double x_spread = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d)
        x_spread = std::max(x_spread,
                            std::abs(vertices[i][d] - vertices[best][d]));
    if (f_spread <= opt.ftol && x_spread <= opt.xtol) {
      if (result.restarts >= opt.max_restarts) break;
      ++result.restarts;
      scale *= opt.restart_shrink;
      if (!build_simplex(result.x, scale)) break;
      continue;
    }

    for (std::size_t d = 0; d < n; ++d) {
      double sum = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        if (i != worst) sum += vertices[i][d];
      centroid[d] = sum / static_cast<double>(n);
    }

    for (std::size_t d = 0; d < n; ++d)
      candidate[d] = centroid[d] + (centroid[d] - vertices[worst][d]);
    const double f_reflect = evaluate(candidate);

    if (f_reflect < values[best]) {
      if (!budget_left()) break;
      std::vector<double> expanded(n);
      for (std::size_t d = 0; d < n; ++d)
        expanded[d] = centroid[d] + 2.0 * (candidate[d] - centroid[d]);
      const double f_expand = evaluate(expanded);
      if (f_expand < f_reflect) {
        vertices[worst] = expanded;
        values[worst] = f_expand;
      } else {
        vertices[worst] = candidate;
        values[worst] = f_reflect;
      }
    } else if (f_reflect < values[second_worst]) {
      vertices[worst] = candidate;
      values[worst] = f_reflect;
    } else {
      if (!budget_left()) break;
      std::vector<double> contracted(n);
      if (f_reflect < values[worst]) {
        for (std::size_t d = 0; d < n; ++d)
          contracted[d] = centroid[d] + 0.5 * (candidate[d] - centroid[d]);
        const double f_contract = evaluate(contracted);
        if (f_contract <= f_reflect) {
          vertices[worst] = contracted;
          values[worst] = f_contract;
        } else {
          for (std::size_t i = 0; i <= n; ++i) {
            if (i == best || !budget_left()) continue;
            for (std::size_t d = 0; d < n; ++d)
              vertices[i][d] =
                  vertices[best][d] + 0.5 * (vertices[i][d] - vertices[best][d]);
            values[i] = evaluate(vertices[i]);
          }
        }
      } else {
        for (std::size_t d = 0; d < n; ++d)
          contracted[d] = centroid[d] + 0.5 * (vertices[worst][d] - centroid[d]);
        const double f_contract = evaluate(contracted);
        if (f_contract < values[worst]) {
          vertices[worst] = contracted;
          values[worst] = f_contract;
        } else {
          for (std::size_t i = 0; i <= n; ++i) {
            if (i == best || !budget_left()) continue;
            for (std::size_t d = 0; d < n; ++d)
              vertices[i][d] =
                  vertices[best][d] + 0.5 * (vertices[i][d] - vertices[best][d]);
            values[i] = evaluate(vertices[i]);
          }
        }
      }
    }
  }
  return result;
}

}  // namespace recalib

#endif  // RECALIB_NELDER_MEAD_HPP
