// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sctn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform to a primitive.
class ShapeError : public Error {
 public:
  ShapeError(std::string primitive, std::vector<std::vector<std::size_t>> shapes,
             const std::string& detail = {});

  const std::string& primitive() const noexcept { return primitive_; }
  const std::vector<std::vector<std::size_t>>& shapes() const noexcept { return shapes_; }

 private:
  std::string primitive_;
  std::vector<std::vector<std::size_t>> shapes_;
};

class IndexError : public Error {
 public:
  IndexError(std::string primitive, std::size_t index, std::size_t bound);

  std::size_t index() const noexcept { return index_; }
  std::size_t bound() const noexcept { return bound_; }

 private:
  std::size_t index_;
  std::size_t bound_;
};

// NaN or Inf produced or supplied where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Malformed file: bad magic, truncated payload, unsupported version.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, const std::string& detail);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Structurally valid input that violates a data invariant (lengths, masks).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

std::string format_shape(const std::vector<std::size_t>& shape);

}  // namespace sctn
