// Copyright 2026 The Recalib Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RECALIB_TENSOR_IO_HPP
#define RECALIB_TENSOR_IO_HPP

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "recalib/cloud_io.hpp"
#include "recalib/error.hpp"

namespace recalib {

enum class TensorDtype : std::uint8_t {
  f32 = 0,
  u8 = 1,
};

/// Dense row-major tensor. Exactly one of `f32` / `u8` is populated,
/// matching `dtype`.
struct Tensor {
  std::vector<std::uint32_t> dims;
  TensorDtype dtype = TensorDtype::f32;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  std::size_t element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t d) { return a * d; });
  }
};

namespace detail {

constexpr char kTensorMagic[4] = {'R', 'C', 'T', 'F'};
constexpr std::uint32_t kTensorVersion = 1;

inline void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t b[4];
  u32_to_le(v, b);
  out.insert(out.end(), b, b + 4);
}

}  // namespace detail

/// Container layout, all little-endian:
///   "RCTF" | version u32 | ndim u32 | dims u32[ndim] | dtype u8 | payload
/// Payload is the row-major element data (4 bytes per f32, 1 per u8).
inline std::vector<std::uint8_t> export_tensor(const Tensor& t) {
  if (t.dims.empty())
    throw Error(ErrorCode::bad_config, "tensor needs at least one dimension");
  const std::size_t count = t.element_count();
  const std::size_t have =
      t.dtype == TensorDtype::f32 ? t.f32.size() : t.u8.size();
  if (have != count)
    throw Error(ErrorCode::length_mismatch,
                "tensor payload holds " + std::to_string(have) +
                    " elements, dims say " + std::to_string(count));

  std::vector<std::uint8_t> out;
  out.insert(out.end(), detail::kTensorMagic, detail::kTensorMagic + 4);
  detail::append_u32(out, detail::kTensorVersion);
  detail::append_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) detail::append_u32(out, d);
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  if (t.dtype == TensorDtype::f32) {
    std::uint8_t b[4];
    for (float v : t.f32) {
      detail::f32_to_le(v, b);
      out.insert(out.end(), b, b + 4);
    }
  } else {
    out.insert(out.end(), t.u8.begin(), t.u8.end());
  }
  return out;
}

inline Tensor import_tensor(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - pos < n)
      throw Error(ErrorCode::length_mismatch,
                  std::string("tensor truncated in ") + what);
  };
  need(4, "magic");
  if (!std::equal(detail::kTensorMagic, detail::kTensorMagic + 4,
                  bytes.begin()))
    throw Error(ErrorCode::bad_magic, "not a tensor container");
  pos = 4;

  need(4, "version");
  const std::uint32_t version = detail::u32_from_le(&bytes[pos]);
  pos += 4;
  if (version != detail::kTensorVersion)
    throw Error(ErrorCode::unsupported_version,
                "tensor container version " + std::to_string(version));

  need(4, "rank");
  const std::uint32_t ndim = detail::u32_from_le(&bytes[pos]);
  pos += 4;
  if (ndim == 0 || ndim > 8)
    throw Error(ErrorCode::bad_header, "tensor rank out of range");

  Tensor t;
  need(std::size_t{4} * ndim, "dims");
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.dims.push_back(detail::u32_from_le(&bytes[pos]));
    pos += 4;
  }

  need(1, "dtype");
  const std::uint8_t dtype = bytes[pos++];
  if (dtype > 1)
    throw Error(ErrorCode::bad_header,
                "unknown tensor dtype " + std::to_string(dtype));
  t.dtype = static_cast<TensorDtype>(dtype);

  const std::size_t count = t.element_count();
  const std::size_t elem_size = t.dtype == TensorDtype::f32 ? 4 : 1;
  if (bytes.size() - pos != count * elem_size)
    throw Error(ErrorCode::length_mismatch,
                "tensor payload is " + std::to_string(bytes.size() - pos) +
                    " bytes, expected " + std::to_string(count * elem_size));
  if (t.dtype == TensorDtype::f32) {
    t.f32.reserve(count);
    for (std::size_t i = 0; i < count; ++i, pos += 4)
      t.f32.push_back(detail::f32_from_le(&bytes[pos]));
  } else {
    t.u8.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  }
  return t;
}

}  // namespace recalib

#endif  // RECALIB_TENSOR_IO_HPP
