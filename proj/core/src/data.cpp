// SPDX-License-Identifier: Apache-2.0
#include "rddc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rddc/errors.hpp"

namespace rddc {

using json = nlohmann::ordered_json;

// Dataset ----------------------------------------------------------------------

bool Dataset::labeled() const {
  return !sequences.empty() &&
         std::all_of(sequences.begin(), sequences.end(), [](const Sequence& s) { return s.label.has_value(); });
}

std::vector<int> Dataset::classes() const {
  std::set<int> seen;
  for (const auto& s : sequences)
    if (s.label) seen.insert(*s.label);
  return {seen.begin(), seen.end()};
}

std::size_t Dataset::min_steps() const {
  if (sequences.empty()) throw ContractError("min_steps of an empty dataset");
  std::size_t m = sequences.front().steps();
  for (const auto& s : sequences) m = std::min(m, s.steps());
  return m;
}

std::size_t Dataset::max_steps() const {
  if (sequences.empty()) throw ContractError("max_steps of an empty dataset");
  std::size_t m = 0;
  for (const auto& s : sequences) m = std::max(m, s.steps());
  return m;
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const Sequence& s = sequences[i];
    std::string where = "sequence '" + s.id + "'";
    if (s.dim != dim) {
      throw FormatError(where + " has d=" + std::to_string(s.dim) + ", dataset has d=" + std::to_string(dim),
                        i + 1);
    }
    if (s.dim == 0 || s.values.empty() || s.values.size() % s.dim != 0) {
      throw FormatError(where + " must have at least one timestep", i + 1);
    }
    if (std::any_of(s.values.begin(), s.values.end(), [](double v) { return !std::isfinite(v); })) {
      throw FormatError(where + " contains non-finite values", i + 1);
    }
    if (s.label && *s.label < 0) throw FormatError(where + " has a negative label", i + 1);
    if (!ids.insert(s.id).second) throw FormatError("duplicate id '" + s.id + "'", i + 1);
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.dim = dim;
  out.sequences.reserve(indices.size());
  for (std::size_t i : indices) out.sequences.push_back(sequences.at(i));
  return out;
}

// File format ------------------------------------------------------------------

namespace {

Sequence parse_record(const std::string& line, std::size_t line_no) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  if (!rec.is_object()) throw FormatError("record must be an object", line_no);
  Sequence s;
  auto id = rec.find("id");
  if (id == rec.end() || !id->is_string()) throw FormatError("field 'id' must be a string", line_no);
  s.id = id->get<std::string>();
  auto label = rec.find("label");
  if (label != rec.end() && !label->is_null()) {
    if (!label->is_number_integer()) throw FormatError("field 'label' must be an integer or null", line_no);
    s.label = label->get<int>();
  }
  auto values = rec.find("values");
  if (values == rec.end() || !values->is_array() || values->empty()) {
    throw FormatError("field 'values' must be a nonempty array of timesteps", line_no);
  }
  for (const auto& step : *values) {
    if (!step.is_array() || step.empty()) throw FormatError("each timestep must be a nonempty array", line_no);
    if (s.dim == 0) s.dim = step.size();
    if (step.size() != s.dim) throw FormatError("timesteps of '" + s.id + "' differ in width", line_no);
    for (const auto& v : step) {
      if (!v.is_number()) throw FormatError("values must be numbers", line_no);
      s.values.push_back(v.get<double>());
    }
  }
  return s;
}

}  // namespace

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    Sequence s = parse_record(line, line_no);
    if (ds.sequences.empty()) ds.dim = s.dim;
    if (s.dim != ds.dim) {
      throw FormatError("inconsistent dimensionality: d=" + std::to_string(s.dim) + ", expected " +
                            std::to_string(ds.dim),
                        line_no);
    }
    if (!ids.insert(s.id).second) throw FormatError("duplicate id '" + s.id + "'", line_no);
    if (std::any_of(s.values.begin(), s.values.end(), [](double v) { return !std::isfinite(v); })) {
      throw FormatError("non-finite value", line_no);
    }
    if (s.label && *s.label < 0) throw FormatError("negative label", line_no);
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  ds.validate();
  for (const auto& s : ds.sequences) {
    json rec;
    rec["id"] = s.id;
    rec["label"] = s.label ? json(*s.label) : json(nullptr);
    json steps = json::array();
    for (std::size_t t = 0; t < s.steps(); ++t) {
      json step = json::array();
      for (std::size_t j = 0; j < s.dim; ++j) step.push_back(s.at(t, j));
      steps.push_back(std::move(step));
    }
    rec["values"] = std::move(steps);
    out << rec.dump() << '\n';
  }
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

void save(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  write_dataset(ds, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Splits -----------------------------------------------------------------------

std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n, const SplitSpec& spec) {
  if (n < 10) throw ContractError("split needs at least 10 sequences, got " + std::to_string(n));
  if (spec.train < 0 || spec.val < 0 || spec.test < 0 ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ContractError("split fractions must be nonnegative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const double dn = static_cast<double>(n);
  auto n_train = static_cast<std::size_t>(std::floor(spec.train * dn + 1e-9));
  auto n_val = static_cast<std::size_t>(std::floor(spec.val * dn + 1e-9));
  auto at = [&](std::size_t i) { return order.begin() + static_cast<std::ptrdiff_t>(i); };
  return {std::vector<std::size_t>(at(0), at(n_train)),
          std::vector<std::size_t>(at(n_train), at(n_train + n_val)),
          std::vector<std::size_t>(at(n_train + n_val), order.end())};
}

Splits split(const Dataset& ds, const SplitSpec& spec) {
  auto idx = split_indices(ds.size(), spec);
  return {ds.subset(idx[0]), ds.subset(idx[1]), ds.subset(idx[2])};
}

// Synthetic data ---------------------------------------------------------------

Dataset synth_sinusoid(const SynthSpec& spec) {
  if (spec.classes.empty()) throw ContractError("synth_sinusoid: no classes given");
  if (spec.min_length < 2 || spec.max_length < spec.min_length) {
    throw ContractError("synth_sinusoid: length range must satisfy 2 <= min <= max");
  }
  if (spec.dim == 0) throw ContractError("synth_sinusoid: dim must be positive");
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.dim = spec.dim;
  std::size_t serial = 0;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const SinusoidClass& cls = spec.classes[c];
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      Sequence s;
      std::ostringstream id;
      id << "syn-" << serial++;
      s.id = id.str();
      s.label = static_cast<int>(c);
      s.dim = spec.dim;
      std::size_t steps = length(rng);
      std::vector<double> phases(spec.dim);
      for (double& p : phases) p = phase(rng);
      s.values.resize(steps * spec.dim);
      for (std::size_t t = 0; t < steps; ++t) {
        double angle = 2.0 * std::numbers::pi * cls.frequency * static_cast<double>(t) / static_cast<double>(steps);
        for (std::size_t j = 0; j < spec.dim; ++j) {
          double v = cls.amplitude * std::sin(angle + phases[j]);
          if (cls.noise_sd > 0.0) v += cls.noise_sd * noise(rng);
          s.values[t * spec.dim + j] = v;
        }
      }
      ds.sequences.push_back(std::move(s));
    }
  }
  return ds;
}

// Vectorization ----------------------------------------------------------------

Matrix Matrix::select_rows(const std::vector<std::size_t>& indices) const {
  Matrix out{indices.size(), cols, {}};
  out.data.reserve(indices.size() * cols);
  for (std::size_t i : indices) {
    if (i >= rows) throw DimensionError("select_rows: index out of range");
    out.data.insert(out.data.end(), row(i), row(i) + cols);
  }
  return out;
}

const char* to_string(Vectorization mode) {
  switch (mode) {
    case Vectorization::zero_pad: return "zero";
    case Vectorization::crop: return "crop";
    case Vectorization::time_avg: return "avg";
  }
  return "?";
}

Vectorization parse_vectorization(const std::string& name) {
  if (name == "zero" || name == "zero_pad") return Vectorization::zero_pad;
  if (name == "crop") return Vectorization::crop;
  if (name == "avg" || name == "time_avg") return Vectorization::time_avg;
  throw ContractError("unknown vectorization '" + name + "' (expected zero, crop or avg)");
}

Matrix vectorize(const Dataset& ds, Vectorization mode) {
  if (ds.empty()) throw ContractError("vectorize: empty dataset");
  const std::size_t d = ds.dim, n = ds.size();
  Matrix x;
  x.rows = n;
  switch (mode) {
    case Vectorization::zero_pad: {
      x.cols = ds.max_steps() * d;
      x.data.assign(n * x.cols, 0.0);
      for (std::size_t i = 0; i < n; ++i) std::copy(ds.sequences[i].values.begin(), ds.sequences[i].values.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * x.cols));
      break;
    }
    case Vectorization::crop: {
      x.cols = ds.min_steps() * d;
      x.data.resize(n * x.cols);
      for (std::size_t i = 0; i < n; ++i) std::copy_n(ds.sequences[i].values.begin(), x.cols, x.data.begin() + static_cast<std::ptrdiff_t>(i * x.cols));
      break;
    }
    case Vectorization::time_avg: {
      x.cols = d;
      x.data.assign(n * d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const Sequence& s = ds.sequences[i];
        for (std::size_t t = 0; t < s.steps(); ++t)
          for (std::size_t j = 0; j < d; ++j) x(i, j) += s.at(t, j);
        for (std::size_t j = 0; j < d; ++j) x(i, j) /= static_cast<double>(s.steps());
      }
      break;
    }
  }
  return x;
}

Dataset from_vectors(const Matrix& x, const std::vector<std::optional<int>>& labels) {
  if (!labels.empty() && labels.size() != x.rows) throw DimensionError("from_vectors: label count mismatch");
  Dataset ds;
  ds.dim = x.cols;
  for (std::size_t i = 0; i < x.rows; ++i) {
    Sequence s;
    s.id = "v" + std::to_string(i);
    s.dim = x.cols;
    s.values.assign(x.row(i), x.row(i) + x.cols);
    if (!labels.empty()) s.label = labels[i];
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

bool is_zero_mean(const Dataset& ds, double tol) {
  if (ds.empty()) return false;
  Matrix avg = vectorize(ds, Vectorization::time_avg);
  return std::all_of(avg.data.begin(), avg.data.end(), [tol](double v) { return std::abs(v) <= tol; });
}

// Batching ---------------------------------------------------------------------

PaddedBatch to_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lengths;
  rows.reserve(indices.size());
  for (std::size_t i : indices) {
    rows.push_back(ds.sequences.at(i).values);
    lengths.push_back(ds.sequences[i].steps());
  }
  return PaddedBatch::pack(rows, lengths, ds.dim, indices);
}

std::vector<PaddedBatch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 2) throw ContractError("batch size must be at least 2");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<PaddedBatch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    std::size_t end = std::min(order.size(), begin + batch_size);
    batches.push_back(to_batch(ds, {order.begin() + static_cast<std::ptrdiff_t>(begin),
                                    order.begin() + static_cast<std::ptrdiff_t>(end)}));
  }
  return batches;
}

std::vector<PaddedBatch> sequential_batches(const Dataset& ds, std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<PaddedBatch> batches;
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, ds.size() - begin));
    std::iota(idx.begin(), idx.end(), begin);
    batches.push_back(to_batch(ds, idx));
  }
  return batches;
}

}  // namespace rddc
