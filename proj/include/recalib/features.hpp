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

#ifndef RECALIB_FEATURES_HPP
#define RECALIB_FEATURES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "recalib/cloud_io.hpp"
#include "recalib/error.hpp"
#include "recalib/geometry.hpp"
#include "recalib/mask.hpp"
#include "recalib/tensor_io.hpp"

namespace recalib {

/// Projection of the interested classes of a labeled cloud, grouped by
/// class. Within a class, points keep cloud order; source_index refers back
/// to the original cloud so LiDAR coordinates stay reachable.
struct ProjectedSet {
  std::map<std::uint32_t, std::vector<PixelPoint>> by_class;
  CalibrationSet calib;
  std::size_t dropped = 0;  // interested points behind the camera

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const auto& [c, pts] : by_class) n += pts.size();
    return n;
  }
};

inline std::vector<std::uint32_t> sorted_unique(
    std::vector<std::uint32_t> classes) {
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

inline ProjectedSet project_labeled(const LabeledCloud& cloud,
                                    const CalibrationSet& calib,
                                    const std::vector<std::uint32_t>& interested) {
  if (interested.empty())
    throw Error(ErrorCode::bad_config, "no interested classes given");
  if (cloud.labels.size() != cloud.points.size())
    throw Error(ErrorCode::count_mismatch,
                "cloud has " + std::to_string(cloud.points.size()) +
                    " points but " + std::to_string(cloud.labels.size()) +
                    " labels");

  ProjectedSet out;
  out.calib = calib;
  for (std::uint32_t c : sorted_unique(interested)) out.by_class[c];

  const Projector projector(calib);
  PixelPoint pp;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    auto it = out.by_class.find(cloud.labels[i]);
    if (it == out.by_class.end()) continue;
    if (projector.project(cloud.xyz(i), &pp)) {
      pp.source_index = i;
      it->second.push_back(pp);
    } else {
      ++out.dropped;
    }
  }
  return out;
}

/// Rounds half away from zero and rejects pixels outside the image.
inline bool round_to_pixel(double u, double v, int width, int height,
                           int* col, int* row) {
  const double rc = std::round(u);
  const double rr = std::round(v);
  if (rc < 0 || rc >= width || rr < 0 || rr >= height) return false;
  *col = static_cast<int>(rc);
  *row = static_cast<int>(rr);
  return true;
}

/// Binary co-registration stack: for C interested classes (ascending), C
/// mask planes followed by C point planes, each height x width. A point
/// plane marks the rounded pixel of every projected point of that class;
/// out-of-image points contribute nothing.
struct AlignmentFeature {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> classes;  // ascending
  std::vector<std::uint8_t> planes;    // 2 * classes.size() * height * width

  std::size_t plane_stride() const {
    return static_cast<std::size_t>(width) * height;
  }
  const std::uint8_t* mask_plane(std::size_t class_index) const {
    return planes.data() + class_index * plane_stride();
  }
  const std::uint8_t* point_plane(std::size_t class_index) const {
    return planes.data() + (classes.size() + class_index) * plane_stride();
  }
};

inline AlignmentFeature make_alignment_feature(const ProjectedSet& projected,
                                               const SegMask& mask) {
  AlignmentFeature f;
  f.width = mask.width;
  f.height = mask.height;
  for (const auto& [c, pts] : projected.by_class) f.classes.push_back(c);
  if (f.classes.empty())
    throw Error(ErrorCode::bad_config, "no interested classes given");
  f.planes.assign(2 * f.classes.size() * f.plane_stride(), 0);

  const std::size_t stride = f.plane_stride();
  for (std::size_t ci = 0; ci < f.classes.size(); ++ci) {
    std::uint8_t* mp = f.planes.data() + ci * stride;
    const std::uint8_t cid = static_cast<std::uint8_t>(f.classes[ci] & 0xFF);
    for (std::size_t i = 0; i < stride; ++i)
      mp[i] = mask.class_ids[i] == cid ? 1 : 0;

    std::uint8_t* pp = f.planes.data() + (f.classes.size() + ci) * stride;
    int col, row;
    for (const PixelPoint& q : projected.by_class.at(f.classes[ci]))
      if (round_to_pixel(q.u, q.v, f.width, f.height, &col, &row))
        pp[static_cast<std::size_t>(row) * f.width + col] = 1;
  }
  return f;
}

/// Dense geometric image: per pixel the LiDAR coordinates (x, y, z), the
/// continuous pixel coordinates (u, v) of the point that landed there, and
/// an occupancy flag. When several points share a pixel the nearest one (by
/// camera depth) wins.
struct CalibrationFeature {
  int width = 0;
  int height = 0;
  std::vector<float> channels;  // 6 * height * width: x, y, z, u, v, occupancy

  std::size_t plane_stride() const {
    return static_cast<std::size_t>(width) * height;
  }
  float at(int channel, int col, int row) const {
    return channels[channel * plane_stride() +
                    static_cast<std::size_t>(row) * width + col];
  }
};

inline CalibrationFeature make_calibration_feature(const LabeledCloud& cloud,
                                                   const ProjectedSet& projected,
                                                   int width, int height) {
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::bad_config, "image size must be positive");
  CalibrationFeature f;
  f.width = width;
  f.height = height;
  const std::size_t stride = f.plane_stride();
  f.channels.assign(6 * stride, 0.0f);
  std::vector<double> depth(stride, std::numeric_limits<double>::infinity());

  int col, row;
  for (const auto& [c, pts] : projected.by_class) {
    for (const PixelPoint& q : pts) {
      if (!round_to_pixel(q.u, q.v, width, height, &col, &row)) continue;
      const std::size_t at = static_cast<std::size_t>(row) * width + col;
      if (q.depth >= depth[at]) continue;
      depth[at] = q.depth;
      const Vec3 xyz = cloud.xyz(q.source_index);
      f.channels[0 * stride + at] = static_cast<float>(xyz.x());
      f.channels[1 * stride + at] = static_cast<float>(xyz.y());
      f.channels[2 * stride + at] = static_cast<float>(xyz.z());
      f.channels[3 * stride + at] = static_cast<float>(q.u);
      f.channels[4 * stride + at] = static_cast<float>(q.v);
      f.channels[5 * stride + at] = 1.0f;
    }
  }
  return f;
}

inline Tensor to_tensor(const AlignmentFeature& f) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(2 * f.classes.size()),
            static_cast<std::uint32_t>(f.height),
            static_cast<std::uint32_t>(f.width)};
  t.dtype = TensorDtype::u8;
  t.u8 = f.planes;
  return t;
}

inline Tensor to_tensor(const CalibrationFeature& f) {
  Tensor t;
  t.dims = {6, static_cast<std::uint32_t>(f.height),
            static_cast<std::uint32_t>(f.width)};
  t.dtype = TensorDtype::f32;
  t.f32 = f.channels;
  return t;
}

inline std::string alignment_feature_filename(const std::string& frame_id) {
  return frame_id + ".align.rctf";
}

inline std::string calibration_feature_filename(const std::string& frame_id) {
  return frame_id + ".calib5.rctf";
}

}  // namespace recalib

#endif  // RECALIB_FEATURES_HPP
