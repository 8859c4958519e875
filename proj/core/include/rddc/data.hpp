// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rddc/batch.hpp"

namespace rddc {

/// One multivariate series; `values` is row-major steps×dim.
struct Sequence {
  std::string id;
  std::optional<int> label;
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t steps() const noexcept { return dim ? values.size() / dim : 0; }
  double at(std::size_t t, std::size_t j) const { return values[t * dim + j]; }

  bool operator==(const Sequence&) const = default;
};

struct Dataset {
  std::vector<Sequence> sequences;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return sequences.size(); }
  bool empty() const noexcept { return sequences.empty(); }
  bool labeled() const;
  /// Sorted distinct labels.
  std::vector<int> classes() const;
  std::size_t min_steps() const;
  std::size_t max_steps() const;

  /// Throws FormatError on inconsistent dim, T = 0, non-finite values or
  /// duplicate ids.
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;

  bool operator==(const Dataset&) const = default;
};

/// One JSON object per line: {"id": str, "label": int|null, "values": [[...], ...]}.
Dataset read_dataset(std::istream& in);
void write_dataset(const Dataset& ds, std::ostream& out);
Dataset load(const std::filesystem::path& path);
void save(const Dataset& ds, const std::filesystem::path& path);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train, val, test;
};

/// Seeded shuffle, then floor(train*n) / floor(val*n) / remainder.
Splits split(const Dataset& ds, const SplitSpec& spec);
/// Index form of split(), in the same order.
std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n, const SplitSpec& spec);

struct SinusoidClass {
  double frequency = 1.0;  // cycles per sequence
  double amplitude = 1.0;
  double noise_sd = 0.0;
};

struct SynthSpec {
  std::vector<SinusoidClass> classes;
  std::size_t dim = 1;
  std::size_t min_length = 20;
  std::size_t max_length = 40;
  std::size_t per_class = 50;
  std::uint64_t seed = 0;
};

/// x[t, j] = amplitude * sin(2 pi frequency t / T + phase_j) + noise, with a
/// uniform phase per dimension and T uniform in [min_length, max_length].
Dataset synth_sinusoid(const SynthSpec& spec);

/// Row-major n×p matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  Matrix select_rows(const std::vector<std::size_t>& indices) const;
};

enum class Vectorization { zero_pad, crop, time_avg };

const char* to_string(Vectorization mode);
Vectorization parse_vectorization(const std::string& name);

/// zero_pad: T_max*d, crop: T_min*d (both timestep-major), time_avg: d.
Matrix vectorize(const Dataset& ds, Vectorization mode);

/// Fixed-length vectors as single-step sequences, for the dense-head model.
Dataset from_vectors(const Matrix& x, const std::vector<std::optional<int>>& labels = {});

/// True when every sequence has per-dimension time mean within `tol` of 0.
bool is_zero_mean(const Dataset& ds, double tol = 1e-8);

/// Seeded shuffle into batches of `batch_size`, last batch possibly short,
/// each padded to its own T_max.
std::vector<PaddedBatch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed);
/// Dataset order, no shuffle.
std::vector<PaddedBatch> sequential_batches(const Dataset& ds, std::size_t batch_size);
PaddedBatch to_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace rddc
