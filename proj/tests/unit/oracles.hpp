// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PLANTMON_TESTS_ORACLES_HPP_
#define PLANTMON_TESTS_ORACLES_HPP_

// Reference computations shared by the unit and acceptance tests. They are
// written directly from the definitions and share no code with the library.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "plantmon/anomaly.hpp"
#include "plantmon/estimator.hpp"

namespace plantmon::testing {

// Independent forward pass over a flat parameter vector laid out like
// AeModel::parameters(). Appends the sign pattern of every hidden
// pre-activation to `signs` when given.
inline double oracle_loss(std::size_t dim, const std::vector<double>& params,
                          const std::vector<anomaly::Segment>& batch,
                          std::vector<bool>* signs = nullptr) {
  const std::vector<std::size_t> widths = {dim, 64, 32, 64, dim};
  double total = 0.0;
  for (const auto& x : batch) {
    std::vector<double> a = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::size_t in = widths[l], out = widths[l + 1];
      std::vector<double> z(out);
      for (std::size_t o = 0; o < out; ++o) {
        double s = params[off + in * out + o];
        for (std::size_t i = 0; i < in; ++i) s += params[off + o * in + i] * a[i];
        z[o] = s;
      }
      off += in * out + out;
      const bool hidden = l + 2 < widths.size();
      if (hidden) {
        for (auto& v : z) {
          if (signs) signs->push_back(v > 0);
          v = v > 0 ? v : 0.0;
        }
      }
      a = std::move(z);
    }
    double err = 0.0;
    for (std::size_t i = 0; i < dim; ++i) err += (a[i] - x[i]) * (a[i] - x[i]);
    total += err / static_cast<double>(dim);
  }
  return total / static_cast<double>(batch.size());
}

inline double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double a : v) m += a;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double a : v) s += (a - m) * (a - m);
  return s;
}

inline double mean(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m += a;
  return m / static_cast<double>(v.size());
}

struct BruteSplit {
  double sse = std::numeric_limits<double>::infinity();
  double runner_up = std::numeric_limits<double>::infinity();
  std::size_t feature = 0;
  double threshold = 0.0;
  double left_mean = 0.0;
  double right_mean = 0.0;
};

// Every feature, every midpoint between consecutive distinct values.
inline BruteSplit brute_force(const estimator::DesignMatrix& x, const std::vector<double>& y) {
  BruteSplit best;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::vector<double> vals = x.columns[f];
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = (vals[k] + vals[k + 1]) / 2;
      std::vector<double> l, r;
      for (std::size_t i = 0; i < y.size(); ++i) (x.columns[f][i] <= t ? l : r).push_back(y[i]);
      const double s = sse(l) + sse(r);
      if (s < best.sse) {
        best.runner_up = best.sse;
        best = {s, best.runner_up, f, t, mean(l), mean(r)};
      } else if (s < best.runner_up) {
        best.runner_up = s;
      }
    }
  }
  return best;
}

}  // namespace plantmon::testing

#endif  // PLANTMON_TESTS_ORACLES_HPP_
