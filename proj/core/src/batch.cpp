// SPDX-License-Identifier: Apache-2.0
#include "rddc/batch.hpp"

#include <algorithm>

#include "rddc/errors.hpp"

namespace rddc {

PaddedBatch::PaddedBatch(Tensor values, std::vector<std::size_t> lengths, std::vector<std::size_t> items)
    : values_(std::move(values)), lengths_(std::move(lengths)), items_(std::move(items)) {
  if (values_.rank() != 3) {
    throw DimensionError("padded batch values must be n×T×d, got " + values_.shape().str());
  }
  std::size_t n = values_.shape()[0], t_max = values_.shape()[1], d = values_.shape()[2];
  if (lengths_.size() != n) {
    throw DimensionError("padded batch has " + std::to_string(n) + " rows but " +
                         std::to_string(lengths_.size()) + " lengths");
  }
  if (!items_.empty() && items_.size() != n) throw DimensionError("padded batch item count mismatch");
  auto data = values_.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (lengths_[i] == 0) throw ContractError("sequence length must be at least 1");
    if (lengths_[i] > t_max) {
      throw ContractError("sequence length " + std::to_string(lengths_[i]) + " exceeds T_max " +
                          std::to_string(t_max));
    }
    auto row = data.subspan((i * t_max + lengths_[i]) * d, (t_max - lengths_[i]) * d);
    if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) {
      throw ContractError("padding past a sequence's length must be zero");
    }
  }
}

PaddedBatch PaddedBatch::pack(const std::vector<std::vector<double>>& rows,
                              const std::vector<std::size_t>& lengths, std::size_t dim,
                              std::vector<std::size_t> items, std::size_t min_steps) {
  if (rows.size() != lengths.size()) throw DimensionError("pack: rows and lengths differ in count");
  std::size_t t_max = min_steps;
  for (std::size_t l : lengths) t_max = std::max(t_max, l);
  std::size_t n = rows.size();
  std::vector<double> values(n * t_max * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() < lengths[i] * dim) throw DimensionError("pack: row shorter than its length");
    std::copy_n(rows[i].begin(), lengths[i] * dim,
                values.begin() + static_cast<std::ptrdiff_t>(i * t_max * dim));
  }
  return PaddedBatch(Tensor({n, t_max, dim}, std::move(values)), lengths, std::move(items));
}

PaddedBatch PaddedBatch::with_extra_padding(std::size_t extra) const {
  std::size_t n = size(), t_max = max_length(), d = dim();
  std::size_t t_new = t_max + extra;
  std::vector<double> values(n * t_new * d, 0.0);
  auto src = values_.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * t_max * d), t_max * d,
                values.begin() + static_cast<std::ptrdiff_t>(i * t_new * d));
  }
  return PaddedBatch(Tensor({n, t_new, d}, std::move(values)), lengths_, items_);
}

}  // namespace rddc
