// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "rddc/tensor.hpp"

namespace rddc {

/// n sequences zero-padded to a common length. `values` is n×T_max×d and
/// values[i, t, :] == 0 for every t >= lengths[i].
class PaddedBatch {
 public:
  PaddedBatch() = default;
  /// Validates lengths (1 <= L <= T_max) and the zero-padding contract.
  PaddedBatch(Tensor values, std::vector<std::size_t> lengths, std::vector<std::size_t> items = {});

  /// Packs row-major T×d blocks; `lengths[i] * d` values are read from rows[i].
  static PaddedBatch pack(const std::vector<std::vector<double>>& rows,
                          const std::vector<std::size_t>& lengths, std::size_t dim,
                          std::vector<std::size_t> items = {}, std::size_t min_steps = 0);

  std::size_t size() const noexcept { return lengths_.size(); }
  std::size_t max_length() const { return values_.shape()[1]; }
  std::size_t dim() const { return values_.shape()[2]; }
  const Tensor& values() const noexcept { return values_; }
  const std::vector<std::size_t>& lengths() const noexcept { return lengths_; }
  /// Dataset indices of the rows, empty when the batch was built by hand.
  const std::vector<std::size_t>& items() const noexcept { return items_; }

  /// Same sequences with `extra` more zero steps appended.
  PaddedBatch with_extra_padding(std::size_t extra) const;

 private:
  Tensor values_;
  std::vector<std::size_t> lengths_;
  std::vector<std::size_t> items_;
};

}  // namespace rddc
