// SPDX-License-Identifier: Apache-2.0
//
// Versioned JSON checkpoint of an RddcModel. Layout (version 1):
//
//   {"format": "rddc-checkpoint", "version": 1,
//    "config": {"input_size", "gru_units", "fc1_units", "clusters"},
//    "batch_norm": {"momentum", "eps", "running_mean": [...], "running_var": [...]},
//    "tensors": [{"name": str, "shape": [...], "data": [...]}, ...]}
//
// Tensor names are those of RddcModel::named_parameters(). Numbers use the
// shortest decimal form that round-trips, so save/load is bit-exact.
#pragma once

#include <filesystem>
#include <iosfwd>

#include "rddc/nn.hpp"

namespace rddc {

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(const RddcModel& model, std::ostream& out);
RddcModel read_checkpoint(std::istream& in);

void save_checkpoint(const RddcModel& model, const std::filesystem::path& path);
RddcModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rddc
