// SPDX-License-Identifier: Apache-2.0
#include "rddc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rddc/errors.hpp"

namespace rddc {

double median_sigma(const Tensor& h, double fraction) {
  if (h.rank() != 2) throw DimensionError("median_sigma: expected n×d, got " + h.shape().str());
  std::size_t n = h.shape()[0], d = h.shape()[1];
  if (n < 2) throw ContractError("median_sigma: need at least 2 rows, got " + std::to_string(n));
  auto v = h.data();
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t m = l + 1; m < n; ++m) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double diff = v[l * d + c] - v[m * d + c];
        s += diff * diff;
      }
      dist.push_back(std::sqrt(s));
    }
  }
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double median = *mid;
  if (dist.size() % 2 == 0) median = 0.5 * (median + *std::max_element(dist.begin(), mid));
  return std::max(fraction * median, kMinSigma);
}

KernelMatrix kernel_matrix(const Tensor& h, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("kernel_matrix: sigma must be positive");
  return {exp(sq_dists(h, h) * (-1.0 / (2.0 * sigma * sigma))), sigma};
}

Tensor cs_pair_sum(const Tensor& b, const Tensor& k) {
  if (b.rank() != 2 || k.rank() != 2 || k.shape()[0] != b.shape()[0] || k.shape()[1] != b.shape()[0]) {
    throw DimensionError("cs_pair_sum: columns " + b.shape().str() + " with kernel " + k.shape().str());
  }
  std::size_t clusters = b.shape()[1];
  if (clusters < 2) throw ContractError("cs_pair_sum: need at least 2 clusters");
  Tensor gram = matmul(transpose(b), matmul(k, b));
  Tensor self = diagonal(gram) + kCsEpsilon;
  Tensor denom = sqrt(matmul(reshape(self, {clusters, 1}), reshape(self, {1, clusters})));
  return triu_sum(gram / denom) / static_cast<double>(clusters);
}

Tensor l1(const Tensor& a, const KernelMatrix& k) { return cs_pair_sum(a, k.k); }

Tensor l2(const Tensor& a, bool normalize) {
  if (a.rank() != 2) throw DimensionError("l2: expected n×k, got " + a.shape().str());
  Tensor raw = triu_sum(matmul(transpose(a), a));
  std::size_t n = a.shape()[0], k = a.shape()[1];
  if (!normalize || k < 2 || n == 0) return raw;
  return raw * (2.0 / static_cast<double>(n * k * (k - 1)));
}

Tensor simplex_matrix(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("simplex_matrix: expected n×k, got " + a.shape().str());
  std::size_t k = a.shape()[1];
  std::vector<double> eye(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) eye[i * k + i] = 1.0;
  return exp(-sq_dists(a, Tensor({k, k}, std::move(eye))));
}

Tensor l3(const Tensor& a, const KernelMatrix& k) { return cs_pair_sum(simplex_matrix(a), k.k); }

LossTerms total_loss(const Tensor& h, const Tensor& a, const LossOptions& options,
                     std::optional<double> sigma) {
  if (h.rank() != 2 || a.rank() != 2 || h.shape()[0] != a.shape()[0]) {
    throw DimensionError("total_loss: h " + h.shape().str() + " and A " + a.shape().str() +
                         " disagree on n");
  }
  double s = sigma ? *sigma : median_sigma(h, options.sigma_fraction);
  KernelMatrix k = kernel_matrix(h, s);
  Tensor t1 = l1(a, k);
  Tensor t2 = l2(a, options.normalize_l2);
  Tensor t3 = l3(a, k);
  LossTerms terms;
  terms.total = t1 + t2 * options.weights.w2 + t3 * options.weights.w3;
  terms.l1 = t1.item();
  terms.l2 = t2.item();
  terms.l3 = t3.item();
  terms.sigma = s;
  return terms;
}

}  // namespace rddc
