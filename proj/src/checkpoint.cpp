// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/checkpoint.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "binary_io.hpp"

namespace sctn {

namespace {

constexpr std::string_view kMagic = "SCTNW1";

}  // namespace

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
  io::Writer w;
  w.bytes(kMagic);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string& name = params.names()[k];
    const Tensor& t = params.values()[k];
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) {
      if (!std::isfinite(v) || std::abs(v) > std::numeric_limits<float>::max()) {
        throw NonFiniteError("checkpoint: " + name + " holds a value outside f32 range");
      }
      w.f32(static_cast<float>(v));
    }
  }
  w.save(path);
}

ParamSet read_checkpoint(const std::filesystem::path& path) {
  io::Reader r(path);
  r.expect_magic(kMagic);
  ParamSet params;
  while (r.remaining() > 0) {
    const std::uint32_t len = r.u32();
    if (len == 0 || len > 4096) r.fail("bad array name length " + std::to_string(len));
    std::string name = r.str(len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) r.fail("array " + name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = r.u32();
      count *= d;
    }
    if (count * 4 > r.remaining()) r.fail("truncated data for array " + name);
    std::vector<double> values(count);
    for (auto& v : values) {
      v = r.f32();
      if (!std::isfinite(v)) r.fail("non-finite value in array " + name);
    }
    if (params.contains(name)) r.fail("duplicate array " + name);
    params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return params;
}

void load_checkpoint(const std::filesystem::path& path, ParamSet& params) {
  const ParamSet loaded = read_checkpoint(path);
  for (const auto& name : params.names()) {
    if (!loaded.contains(name)) throw ShapeError("checkpoint", {params.get(name).shape()}, name + " missing from " + path.string());
    const Tensor& t = loaded.get(name);
    if (t.shape() != params.get(name).shape()) {
      throw ShapeError("checkpoint", {params.get(name).shape(), t.shape()},
                       name + ": model expects " + format_shape(params.get(name).shape()) + ", file has " +
                           format_shape(t.shape()));
    }
  }
  for (const auto& name : loaded.names()) {
    if (!params.contains(name)) throw ShapeError("checkpoint", {loaded.get(name).shape()}, "unexpected array " + name);
  }
  for (const auto& name : params.names()) params.set(name, loaded.get(name));
}

}  // namespace sctn
