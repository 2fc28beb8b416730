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

#ifndef RECALIB_KDTREE2D_HPP
#define RECALIB_KDTREE2D_HPP

#include <algorithm>
#include <limits>
#include <vector>

#include "recalib/error.hpp"
#include "recalib/geometry.hpp"

namespace recalib {

/// Static 2-D kd-tree with exact nearest-neighbor queries. The tree is the
/// point array itself, median-split in place, so a range's root always sits
/// at its midpoint.
class KdTree2d {
 public:
  KdTree2d() = default;

  explicit KdTree2d(std::vector<Vec2> points) : pts_(std::move(points)) {
    if (!pts_.empty()) build(0, pts_.size(), 0);
  }

  bool empty() const { return pts_.empty(); }
  std::size_t size() const { return pts_.size(); }

  /// Squared distance from q to the nearest stored point.
  double nearest_squared(const Vec2& q) const {
    if (pts_.empty())
      throw Error(ErrorCode::internal, "nearest query on an empty tree");
    double best = std::numeric_limits<double>::infinity();
    search(0, pts_.size(), 0, q, &best);
    return best;
  }

 private:
  void build(std::size_t first, std::size_t last, int axis) {
    if (last - first <= 1) return;
    const std::size_t mid = first + (last - first) / 2;
    std::nth_element(pts_.begin() + first, pts_.begin() + mid,
                     pts_.begin() + last,
                     [axis](const Vec2& a, const Vec2& b) {
                       return a[axis] < b[axis];
                     });
    build(first, mid, axis ^ 1);
    build(mid + 1, last, axis ^ 1);
  }

  void search(std::size_t first, std::size_t last, int axis, const Vec2& q,
              double* best) const {
    if (first >= last) return;
    const std::size_t mid = first + (last - first) / 2;
    const Vec2& p = pts_[mid];
    *best = std::min(*best, (p - q).squaredNorm());
    const double delta = q[axis] - p[axis];
    if (delta < 0) {
      search(first, mid, axis ^ 1, q, best);
      if (delta * delta < *best) search(mid + 1, last, axis ^ 1, q, best);
    } else {
      search(mid + 1, last, axis ^ 1, q, best);
      if (delta * delta < *best) search(first, mid, axis ^ 1, q, best);
    }
  }

  std::vector<Vec2> pts_;
};

}  // namespace recalib

#endif  // RECALIB_KDTREE2D_HPP
