/* Copyright 2026 The sirank Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sirank/errors.hpp"

namespace sirank {

/// Dense 64-bit real vector. Everything in this library is double precision.
using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Row-major layout is part of the
/// serialized model format, so it must not change.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;  // rows * cols, row-major

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

inline void ensure_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) {
    throw NumericError(std::string("non-finite value in ") + what);
  }
}

/// Kronecker product of two vectors: result[i*|b| + j] = a[i] * b[j].
inline Vec kron(const Vec& a, const Vec& b) {
  if (a.empty() || b.empty()) {
    throw DimensionMismatch("kron: inputs must be non-empty");
  }
  Vec out(a.size() * b.size());
  std::size_t p = 0;
  for (double ai : a) {
    for (double bj : b) {
      out[p++] = ai * bj;
    }
  }
  return out;
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("dot: lengths differ (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Natural log applied per element. Inputs must be strictly positive.
inline Vec log_elementwise(const Vec& x) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) {
      throw NonPositiveFeature("log_elementwise: element " + std::to_string(i) +
                               " is " + std::to_string(x[i]) +
                               ", expected > 0");
    }
    out[i] = std::log(x[i]);
  }
  return out;
}

/// Max-subtracted softmax: safe for inputs of any magnitude.
inline Vec softmax(const Vec& s) {
  if (s.empty()) {
    throw DimensionMismatch("softmax: input must be non-empty");
  }
  ensure_finite(s, "softmax input");
  const double m = *std::max_element(s.begin(), s.end());
  Vec out(s.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = std::exp(s[i] - m);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

/// log(sum(exp(x))) with max subtraction.
inline double logsumexp(std::span<const double> x) {
  if (x.empty()) {
    throw DimensionMismatch("logsumexp: input must be non-empty");
  }
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

inline Vec matvec(const Mat& a, const Vec& x) {
  if (a.cols != x.size()) {
    throw DimensionMismatch("matvec: " + std::to_string(a.rows) + "x" +
                            std::to_string(a.cols) + " vs vector of length " +
                            std::to_string(x.size()));
  }
  Vec y(a.rows, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    double s = 0.0;
    const double* row = a.data.data() + r * a.cols;
    for (std::size_t c = 0; c < a.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

/// Neumaier compensated sum. Used wherever a reported mean must not depend
/// on accumulation noise (metric aggregation, standardizer fitting).
inline double compensated_sum(std::span<const double> xs) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

inline double compensated_mean(std::span<const double> xs) {
  if (xs.empty()) {
    throw DimensionMismatch("compensated_mean: empty input");
  }
  return compensated_sum(xs) / static_cast<double>(xs.size());
}

/// Gather x at the given column indices, in index-list order.
inline Vec gather(const Vec& x, const std::vector<std::size_t>& idx) {
  Vec out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.size()) {
      throw DimensionMismatch("gather: index " + std::to_string(idx[i]) +
                              " out of range for length " +
                              std::to_string(x.size()));
    }
    out[i] = x[idx[i]];
  }
  return out;
}

}  // namespace sirank
