// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit and acceptance tests: central finite-difference
// gradient checks, random inputs, and direct-summation reference formulas that
// share no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "rddc/tensor.hpp"

namespace rddc::testing {

struct GradReport {
  double max_rel = 0.0;    // worst elementwise relative error
  double vector_rel = 0.0;  // ||auto - numeric|| / max(||auto||, ||numeric||)
  std::size_t checked = 0;
};

/// Relative error of one component, with denominators floored at `floor` so
/// that near-zero gradients are compared absolutely at that scale.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares reverse-mode gradients of `f` with central differences, step
/// 1e-5 * max(1, |x|), for every element of every leaf in `leaves`.
/// `f` must rebuild its graph from the current leaf values on every call.
inline GradReport gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> leaves) {
  for (auto& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Graph g;
    GradScope scope(g);
    Tensor loss = f();
    g.backward(loss);
  }
  GradReport report;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto& t : leaves) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    auto x = t.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double x0 = x[i];
      const double h = 1e-5 * std::max(1.0, std::abs(x0));
      x[i] = x0 + h;
      double up = f().item();
      x[i] = x0 - h;
      double down = f().item();
      x[i] = x0;
      double numeric = (up - down) / (2.0 * h);
      report.max_rel = std::max(report.max_rel, relative_error(analytic[i], numeric));
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      ++report.checked;
    }
    t.zero_grad();
  }
  double scale = std::sqrt(std::max(a2, n2));
  report.vector_rel = scale > 0.0 ? std::sqrt(diff2) / scale : 0.0;
  return report;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape.numel());
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

/// Row-stochastic n×k matrix from random logits.
inline std::vector<double> random_simplex_rows(std::size_t n, std::size_t k, std::mt19937_64& rng,
                                               double spread = 3.0) {
  std::normal_distribution<double> g(0.0, spread);
  std::vector<double> a(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (a[i * k + j] = std::exp(g(rng)));
    for (std::size_t j = 0; j < k; ++j) a[i * k + j] /= s;
  }
  return a;
}

// Reference formulas -----------------------------------------------------------

/// Gaussian kernel by explicit loops over coordinates.
inline std::vector<double> ref_kernel(const std::vector<double>& h, std::size_t n, std::size_t d, double sigma) {
  std::vector<double> k(n * n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t m = 0; m < n; ++m) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (h[l * d + c] - h[m * d + c]) * (h[l * d + c] - h[m * d + c]);
      k[l * n + m] = std::exp(-s / (2.0 * sigma * sigma));
    }
  return k;
}

/// (1/k) sum_{i<j} b_i'Kb_j / sqrt((b_i'Kb_i + eps)(b_j'Kb_j + eps)) as a
/// double summation over items for every quadratic form.
inline double ref_cs_pair_sum(const std::vector<double>& b, std::size_t n, std::size_t k,
                              const std::vector<double>& kern, double eps = 1e-9) {
  auto form = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t m = 0; m < n; ++m) s += b[l * k + i] * kern[l * n + m] * b[m * k + j];
    return s;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) total += form(i, j) / std::sqrt((form(i, i) + eps) * (form(j, j) + eps));
  return total / static_cast<double>(k);
}

/// m_li = exp(-||alpha_l - e_i||^2) by explicit coordinates.
inline std::vector<double> ref_simplex(const std::vector<double>& a, std::size_t n, std::size_t k) {
  std::vector<double> m(n * k);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t i = 0; i < k; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        double e = c == i ? 1.0 : 0.0;
        s += (a[l * k + c] - e) * (a[l * k + c] - e);
      }
      m[l * k + i] = std::exp(-s);
    }
  return m;
}

/// Accuracy maximized over all k! bijections by enumeration.
inline double brute_force_acc(const std::vector<int>& labels, const std::vector<int>& preds, std::size_t k) {
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += perm[static_cast<std::size_t>(preds[i])] == labels[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

}  // namespace rddc::testing
