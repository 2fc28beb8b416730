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

#ifndef RECALIB_DISTANCE_TRANSFORM_HPP
#define RECALIB_DISTANCE_TRANSFORM_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "recalib/error.hpp"
#include "recalib/mask.hpp"

namespace recalib {
namespace detail {

constexpr double kEdtInfinity = 1e20;

// Exact 1-D squared distance transform (lower envelope of parabolas).
// Reads n values from f with the given stride, writes n back in place.
inline void edt_1d(double* f, int n, int stride, std::vector<double>& scratch,
                   std::vector<int>& vertex, std::vector<double>& boundary) {
  scratch.resize(static_cast<std::size_t>(n));
  vertex.resize(static_cast<std::size_t>(n));
  boundary.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) scratch[i] = f[i * stride];

  int k = 0;
  vertex[0] = 0;
  boundary[0] = -kEdtInfinity;
  boundary[1] = kEdtInfinity;
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const int p = vertex[k];
      s = ((scratch[q] + static_cast<double>(q) * q) -
           (scratch[p] + static_cast<double>(p) * p)) /
          (2.0 * q - 2.0 * p);
      if (s > boundary[k]) break;
      --k;
    }
    ++k;
    vertex[k] = q;
    boundary[k] = s;
    boundary[k + 1] = kEdtInfinity;
  }

  k = 0;
  for (int q = 0; q < n; ++q) {
    while (boundary[k + 1] < q) ++k;
    const double d = q - vertex[k];
    f[q * stride] = d * d + scratch[vertex[k]];
  }
}

// 2-D exact squared Euclidean distance transform over a row-major grid.
inline void edt_2d(std::vector<double>& grid, int width, int height) {
  std::vector<double> scratch;
  std::vector<int> vertex;
  std::vector<double> boundary;
  for (int col = 0; col < width; ++col)
    edt_1d(grid.data() + col, height, width, scratch, vertex, boundary);
  for (int row = 0; row < height; ++row)
    edt_1d(grid.data() + static_cast<std::size_t>(row) * width, width, 1,
           scratch, vertex, boundary);
}

}  // namespace detail

/// Per-class Euclidean distance fields over a segmentation mask. Distances
/// are exact (in pixels) to the nearest pixel of the class.
class MaskDistanceField {
 public:
  MaskDistanceField() = default;

  MaskDistanceField(const SegMask& mask,
                    const std::vector<std::uint32_t>& interested)
      : width_(mask.width), height_(mask.height) {
    if (interested.empty())
      throw Error(ErrorCode::bad_config, "no interested classes given");
    const std::size_t n = static_cast<std::size_t>(width_) * height_;
    for (std::uint32_t c : interested) {
      if (fields_.count(c)) continue;
      std::vector<double> grid(n, detail::kEdtInfinity);
      bool seen = false;
      const std::uint8_t cid = static_cast<std::uint8_t>(c & 0xFF);
      for (std::size_t i = 0; i < n; ++i) {
        if (mask.class_ids[i] == cid) {
          grid[i] = 0.0;
          seen = true;
        }
      }
      if (seen) detail::edt_2d(grid, width_, height_);
      fields_.emplace(c, std::move(grid));
      present_.emplace(c, seen);
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  /// Whether the mask has at least one pixel of the class.
  bool has_class(std::uint32_t c) const {
    auto it = present_.find(c);
    return it != present_.end() && it->second;
  }

  /// Pixel distance from (col, row) to the nearest pixel of class c.
  /// Only valid when has_class(c).
  double distance_at(std::uint32_t c, int col, int row) const {
    auto it = fields_.find(c);
    if (it == fields_.end() || !has_class(c))
      throw Error(ErrorCode::internal,
                  "no distance field for class " + std::to_string(c));
    return std::sqrt(
        it->second[static_cast<std::size_t>(row) * width_ + col]);
  }

  /// Image diagonal in pixels; the stand-in cost for a class missing from
  /// the mask.
  double diagonal() const {
    return std::sqrt(static_cast<double>(width_) * width_ +
                     static_cast<double>(height_) * height_);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::map<std::uint32_t, std::vector<double>> fields_;  // squared distances
  std::map<std::uint32_t, bool> present_;
};

}  // namespace recalib

#endif  // RECALIB_DISTANCE_TRANSFORM_HPP
