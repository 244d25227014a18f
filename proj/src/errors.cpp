// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/errors.hpp"

namespace sctn {

std::string format_shape(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::string shape_message(const std::string& primitive,
                          const std::vector<std::vector<std::size_t>>& shapes,
                          const std::string& detail) {
  std::string msg = primitive + ": shape mismatch";
  if (!detail.empty()) msg += " (" + detail + ")";
  msg += ", operands";
  for (const auto& s : shapes) msg += " " + format_shape(s);
  return msg;
}

}  // namespace

ShapeError::ShapeError(std::string primitive, std::vector<std::vector<std::size_t>> shapes,
                       const std::string& detail)
    : Error(shape_message(primitive, shapes, detail)),
      primitive_(std::move(primitive)),
      shapes_(std::move(shapes)) {}

IndexError::IndexError(std::string primitive, std::size_t index, std::size_t bound)
    : Error(primitive + ": index " + std::to_string(index) + " out of range (bound " +
            std::to_string(bound) + ")"),
      index_(index),
      bound_(bound) {}

FormatError::FormatError(const std::string& path, const std::string& detail)
    : Error(path + ": " + detail), path_(path) {}

}  // namespace sctn
