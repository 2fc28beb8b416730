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

#ifndef RECALIB_CLOUD_IO_HPP
#define RECALIB_CLOUD_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "recalib/error.hpp"
#include "recalib/geometry.hpp"

namespace recalib {

/// Point cloud with one semantic class id per point (0 = background).
struct LabeledCloud {
  struct Point {
    double x = 0, y = 0, z = 0;
    double reflectance = 0;
  };
  std::vector<Point> points;
  std::vector<std::uint32_t> labels;  // same length as points

  std::size_t size() const { return points.size(); }
  Vec3 xyz(std::size_t i) const {
    return Vec3(points[i].x, points[i].y, points[i].z);
  }
};

namespace detail {

inline float f32_from_le(const std::uint8_t* b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                          (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(u);
}

inline void f32_to_le(float f, std::uint8_t* b) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  b[0] = static_cast<std::uint8_t>(u & 0xFF);
  b[1] = static_cast<std::uint8_t>((u >> 8) & 0xFF);
  b[2] = static_cast<std::uint8_t>((u >> 16) & 0xFF);
  b[3] = static_cast<std::uint8_t>((u >> 24) & 0xFF);
}

inline std::uint32_t u32_from_le(const std::uint8_t* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void u32_to_le(std::uint32_t u, std::uint8_t* b) {
  b[0] = static_cast<std::uint8_t>(u & 0xFF);
  b[1] = static_cast<std::uint8_t>((u >> 8) & 0xFF);
  b[2] = static_cast<std::uint8_t>((u >> 16) & 0xFF);
  b[3] = static_cast<std::uint8_t>((u >> 24) & 0xFF);
}

}  // namespace detail

/// KITTI .bin layout: packed little-endian float32 records (x, y, z,
/// reflectance). Labels come back zero-filled.
inline LabeledCloud read_cloud_bin(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorCode::truncated_file,
                std::to_string(bytes.size()) + " bytes is not a whole number of"
                " 16-byte point records");
  }
  LabeledCloud cloud;
  const std::size_t n = bytes.size() / 16;
  cloud.points.resize(n);
  cloud.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * 16;
    cloud.points[i].x = detail::f32_from_le(rec);
    cloud.points[i].y = detail::f32_from_le(rec + 4);
    cloud.points[i].z = detail::f32_from_le(rec + 8);
    cloud.points[i].reflectance = detail::f32_from_le(rec + 12);
  }
  return cloud;
}

inline std::vector<std::uint8_t> write_cloud_bin(const LabeledCloud& cloud) {
  std::vector<std::uint8_t> bytes(cloud.points.size() * 16);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    std::uint8_t* rec = bytes.data() + i * 16;
    detail::f32_to_le(static_cast<float>(cloud.points[i].x), rec);
    detail::f32_to_le(static_cast<float>(cloud.points[i].y), rec + 4);
    detail::f32_to_le(static_cast<float>(cloud.points[i].z), rec + 8);
    detail::f32_to_le(static_cast<float>(cloud.points[i].reflectance), rec + 12);
  }
  return bytes;
}

/// SemanticKITTI-style .label: one little-endian u32 per point, class id in
/// the lower 16 bits.
inline std::vector<std::uint32_t> read_labels(
    const std::vector<std::uint8_t>& bytes, std::size_t expected_count) {
  if (bytes.size() != 4 * expected_count) {
    throw Error(ErrorCode::count_mismatch,
                "expected " + std::to_string(expected_count) + " labels, got " +
                    std::to_string(bytes.size() / 4) + " (" +
                    std::to_string(bytes.size()) + " bytes)");
  }
  std::vector<std::uint32_t> labels(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    labels[i] = detail::u32_from_le(bytes.data() + i * 4) & 0xFFFFu;
  }
  return labels;
}

inline std::vector<std::uint8_t> write_labels(
    const std::vector<std::uint32_t>& labels) {
  std::vector<std::uint8_t> bytes(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    detail::u32_to_le(labels[i] & 0xFFFFu, bytes.data() + i * 4);
  }
  return bytes;
}

// File helpers.

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_error, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::io_error, "cannot open " + path + " for write");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::io_error, "short write to " + path);
}

inline std::string read_file_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_error, "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

inline void write_file_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::io_error, "cannot open " + path + " for write");
  f << text;
  if (!f) throw Error(ErrorCode::io_error, "short write to " + path);
}

}  // namespace recalib

#endif  // RECALIB_CLOUD_IO_HPP
