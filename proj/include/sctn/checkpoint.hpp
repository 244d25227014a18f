// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "sctn/params.hpp"

namespace sctn {

// "SCTNW1", then per array until EOF: u32 name length, name, u32 rank,
// u32 dims[rank], f32 data. Little-endian, parameter insertion order.
void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);

// Every array in file order, values widened from f32.
ParamSet read_checkpoint(const std::filesystem::path& path);

// Replaces the values of `params` with the checkpoint's. The names and
// shapes must match exactly; a mismatch throws ShapeError naming the array.
void load_checkpoint(const std::filesystem::path& path, ParamSet& params);

}  // namespace sctn
