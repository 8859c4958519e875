// SPDX-License-Identifier: Apache-2.0
//
// Divergence-based clustering objective over hidden representations h (n×d_h)
// and soft assignments A (n×k):
//
//   L = L1 + w2 * L2 + w3 * L3
//
// L1 is the kernel-estimated pairwise Cauchy-Schwarz ratio between the columns
// of A, L2 penalizes non-orthogonal columns of A, and L3 repeats L1 on the
// simplex-corner similarities M. The Gaussian bandwidth is a per-call constant
// with no gradient path.
#pragma once

#include <optional>

#include "rddc/tensor.hpp"

namespace rddc {

/// Added to each quadratic form under the square root of the CS ratio.
inline constexpr double kCsEpsilon = 1e-9;
/// Lower bound on the kernel bandwidth.
inline constexpr double kMinSigma = 1e-6;

struct LossWeights {
  double w2 = 1.0;
  double w3 = 1.0;
};

struct LossOptions {
  LossWeights weights;
  /// Scale L2 by 2 / (n k (k-1)) so its weight does not depend on batch size.
  bool normalize_l2 = true;
  /// Bandwidth as a fraction of the median pairwise distance of h.
  double sigma_fraction = 0.15;
};

/// max(fraction * median pairwise Euclidean distance between rows, 1e-6).
/// An even number of pairs takes the mean of the two central values.
double median_sigma(const Tensor& h, double fraction = 0.15);

struct KernelMatrix {
  Tensor k;  // n×n
  double sigma = 0.0;
};

/// K[l, m] = exp(-||h_l - h_m||^2 / (2 sigma^2)), differentiable in h.
KernelMatrix kernel_matrix(const Tensor& h, double sigma);

/// (1/k) sum_{i<j} b_i'K b_j / sqrt((b_i'K b_i + eps)(b_j'K b_j + eps)) over the
/// columns b_i of B.
Tensor cs_pair_sum(const Tensor& b, const Tensor& k);

Tensor l1(const Tensor& a, const KernelMatrix& k);

/// Sum over i < j of a_i'a_j, optionally normalized (see LossOptions).
Tensor l2(const Tensor& a, bool normalize = true);

/// M[l, i] = exp(-||alpha_l - e_i||^2).
Tensor simplex_matrix(const Tensor& a);

Tensor l3(const Tensor& a, const KernelMatrix& k);

struct LossTerms {
  Tensor total;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double sigma = 0.0;
};

/// Bandwidth comes from median_sigma(h) unless `sigma` is supplied.
LossTerms total_loss(const Tensor& h, const Tensor& a, const LossOptions& options = {},
                     std::optional<double> sigma = std::nullopt);

}  // namespace rddc
