// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sctn/pointcloud.hpp"

namespace sctn {

// k nearest rows of `points` for every row (Euclidean, ties by lower index),
// row-major n x k. With exclude_self the query row itself is skipped.
// Throws InvariantError when fewer than k candidates exist.
std::vector<std::uint32_t> knn_indices(std::span<const Point3> points, std::size_t k, bool exclude_self);

}  // namespace sctn
