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

#ifndef RECALIB_SCENE_HPP
#define RECALIB_SCENE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "recalib/cloud_io.hpp"
#include "recalib/error.hpp"
#include "recalib/geometry.hpp"
#include "recalib/mask.hpp"
#include "recalib/rng.hpp"

namespace recalib {

/// Axis-aligned box rotated by yaw about the vertical (z) axis, in the
/// LiDAR frame.
struct ObjectBox {
  Vec3 center = Vec3::Zero();        // meters
  Vec3 half_extents = Vec3::Ones();  // meters, strictly positive
  double yaw = 0.0;                  // radians
  std::uint32_t class_id = 1;
};

/// Desk-scale synthetic scene description. The named fields mirror the JSON
/// document accepted by the CLI; image geometry and the background sampling
/// range ride along as context with reasonable defaults.
struct SceneSpec {
  std::vector<ObjectBox> object_boxes;
  int points_per_object = 512;
  int background_points = 1024;
  std::uint64_t rng_seed = 0;

  // Context.
  int image_width = 512;
  int image_height = 256;
  Vec3 background_lo = Vec3(3.0, -12.0, -1.8);
  Vec3 background_hi = Vec3(25.0, 12.0, 2.5);
  int dense_samples_per_object = 1500;

  void validate() const {
    for (const ObjectBox& b : object_boxes) {
      if (!(b.half_extents.x() > 0 && b.half_extents.y() > 0 &&
            b.half_extents.z() > 0)) {
        throw Error(ErrorCode::bad_config, "half_extents must be > 0");
      }
    }
    if (points_per_object < 0)
      throw Error(ErrorCode::bad_config, "points_per_object must be >= 0");
    if (background_points < 0)
      throw Error(ErrorCode::bad_config, "background_points must be >= 0");
    if (image_width <= 0 || image_height <= 0)
      throw Error(ErrorCode::bad_config, "image size must be positive");
  }
};

/// Pinhole calibration with the usual LiDAR-to-camera axis permutation
/// (camera x = -lidar y, camera y = -lidar z, camera z = lidar x) and the
/// principal point at the image center.
inline CalibrationSet make_pinhole_calib(int width, int height,
                                         double focal_length) {
  CalibrationSet c;
  c.v2c << 0, -1, 0, 0,
           0, 0, -1, -0.08,
           1, 0, 0, -0.27;
  c.r0.setIdentity();
  c.p << focal_length, 0, width / 2.0, 0,
         0, focal_length, height / 2.0, 0,
         0, 0, 1, 0;
  return c;
}

namespace detail {

// Uniform point on the surface of a box (faces weighted by area),
// LiDAR-frame coordinates.
inline Vec3 sample_box_surface(const ObjectBox& box, SplitMix64& rng) {
  const double ax = box.half_extents.x();
  const double ay = box.half_extents.y();
  const double az = box.half_extents.z();
  const double area_x = ay * az;  // each +-x face, up to the common factor 4
  const double area_y = ax * az;
  const double area_z = ax * ay;
  const double total = 2 * (area_x + area_y + area_z);
  double pick = rng.next_double() * total;
  const double u = rng.next_double() * 2.0 - 1.0;
  const double v = rng.next_double() * 2.0 - 1.0;

  Vec3 local;
  if (pick < area_x) local = Vec3(ax, u * ay, v * az);
  else if (pick < 2 * area_x) local = Vec3(-ax, u * ay, v * az);
  else if (pick < 2 * area_x + area_y) local = Vec3(u * ax, ay, v * az);
  else if (pick < 2 * (area_x + area_y)) local = Vec3(u * ax, -ay, v * az);
  else if (pick < 2 * (area_x + area_y) + area_z) local = Vec3(u * ax, v * ay, az);
  else local = Vec3(u * ax, v * ay, -az);

  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  return Vec3(c * local.x() - s * local.y(), s * local.x() + c * local.y(),
              local.z()) + box.center;
}

// Andrew's monotone chain; returns the hull in counter-clockwise order.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) {
                          return a.x() == b.x() && a.y() == b.y();
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

// Inside test inflated by `margin` pixels, so pixel centers within half a
// pixel of the hull still count as covered.
inline bool inside_hull(const std::vector<Vec2>& hull, double x, double y,
                        double margin) {
  const std::size_t n = hull.size();
  if (n == 0) return false;
  if (n == 1) return std::hypot(x - hull[0].x(), y - hull[0].y()) <= margin;
  if (n == 2) {
    // Distance to the segment.
    const Vec2 a = hull[0], b = hull[1];
    const Vec2 ab = b - a, ap = Vec2(x, y) - a;
    const double t = std::clamp(ap.dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Vec2 closest = a + t * ab;
    return std::hypot(x - closest.x(), y - closest.y()) <= margin;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % n];
    const double ex = b.x() - a.x(), ey = b.y() - a.y();
    const double cross = ex * (y - a.y()) - ey * (x - a.x());
    const double len = std::hypot(ex, ey);
    if (cross < -margin * len) return false;
  }
  return true;
}

}  // namespace detail

struct SyntheticScene {
  LabeledCloud cloud;
  SegMask mask;
};

/// Builds a labeled cloud plus the matching segmentation mask.
///
/// Cloud: `points_per_object` samples on each box surface (the box's class),
/// then `background_points` uniform in the background range (class 0).
///
/// Mask: each box's cloud points plus `dense_samples_per_object` extra
/// surface samples are projected with the *clean* calibration; the filled
/// convex hull of the projections is rasterized, nearest box winning by
/// depth. Including the box's own cloud points makes the mask a superset of
/// the point projection by construction.
///
/// Deterministic for a given rng_seed.
inline SyntheticScene synth_scene(const SceneSpec& spec,
                                  const CalibrationSet& calib) {
  spec.validate();
  SplitMix64 rng(spec.rng_seed);
  SyntheticScene scene;
  scene.mask = SegMask::zeros(spec.image_width, spec.image_height);

  // Cloud first, so per-box point ranges are known when building the mask.
  std::vector<std::pair<std::size_t, std::size_t>> box_ranges;
  for (const ObjectBox& box : spec.object_boxes) {
    const std::size_t begin = scene.cloud.points.size();
    for (int i = 0; i < spec.points_per_object; ++i) {
      const Vec3 p = detail::sample_box_surface(box, rng);
      scene.cloud.points.push_back({p.x(), p.y(), p.z(), rng.next_double()});
      scene.cloud.labels.push_back(box.class_id);
    }
    box_ranges.emplace_back(begin, scene.cloud.points.size());
  }
  for (int i = 0; i < spec.background_points; ++i) {
    Vec3 p;
    for (int k = 0; k < 3; ++k)
      p[k] = rng.uniform(spec.background_lo[k], spec.background_hi[k]);
    scene.cloud.points.push_back({p.x(), p.y(), p.z(), rng.next_double()});
    scene.cloud.labels.push_back(0);
  }

  // Mask: depth buffer decides pixel ownership between overlapping boxes.
  std::vector<double> depth_buffer(
      static_cast<std::size_t>(spec.image_width) * spec.image_height,
      std::numeric_limits<double>::infinity());
  const Projector projector(calib);

  for (std::size_t bi = 0; bi < spec.object_boxes.size(); ++bi) {
    const ObjectBox& box = spec.object_boxes[bi];
    std::vector<Vec2> pixels;
    double min_depth = std::numeric_limits<double>::infinity();
    PixelPoint pp;
    for (std::size_t i = box_ranges[bi].first; i < box_ranges[bi].second; ++i) {
      if (projector.project(scene.cloud.xyz(i), &pp)) {
        pixels.emplace_back(pp.u, pp.v);
        min_depth = std::min(min_depth, pp.depth);
      }
    }
    for (int i = 0; i < spec.dense_samples_per_object; ++i) {
      const Vec3 p = detail::sample_box_surface(box, rng);
      if (projector.project(p, &pp)) {
        pixels.emplace_back(pp.u, pp.v);
        min_depth = std::min(min_depth, pp.depth);
      }
    }
    if (pixels.empty()) continue;

    const std::vector<Vec2> hull = detail::convex_hull(pixels);
    double lo_x = pixels[0].x(), hi_x = pixels[0].x();
    double lo_y = pixels[0].y(), hi_y = pixels[0].y();
    for (const Vec2& q : pixels) {
      lo_x = std::min(lo_x, q.x());
      hi_x = std::max(hi_x, q.x());
      lo_y = std::min(lo_y, q.y());
      hi_y = std::max(hi_y, q.y());
    }
    const int col_lo = std::max(0, static_cast<int>(std::floor(lo_x - 1)));
    const int col_hi = std::min(spec.image_width - 1,
                                static_cast<int>(std::ceil(hi_x + 1)));
    const int row_lo = std::max(0, static_cast<int>(std::floor(lo_y - 1)));
    const int row_hi = std::min(spec.image_height - 1,
                                static_cast<int>(std::ceil(hi_y + 1)));
    const std::uint8_t cid = static_cast<std::uint8_t>(box.class_id & 0xFF);
    const auto claim = [&](int col, int row) {
      const std::size_t idx =
          static_cast<std::size_t>(row) * spec.image_width + col;
      if (min_depth < depth_buffer[idx]) {
        depth_buffer[idx] = min_depth;
        scene.mask.class_ids[idx] = cid;
      }
    };
    for (int row = row_lo; row <= row_hi; ++row)
      for (int col = col_lo; col <= col_hi; ++col)
        if (detail::inside_hull(hull, col, row, 0.0)) claim(col, row);
    // The fill keeps pixel centers inside the hull; a sample right on the
    // silhouette can still round to a pixel whose center falls outside, so
    // claim every sample's rounded pixel directly.  This keeps the mask an
    // exact superset of the rounded point projection without fattening the
    // silhouette by a half-pixel ring.
    for (const Vec2& q : pixels) {
      const int col = static_cast<int>(std::round(q.x()));
      const int row = static_cast<int>(std::round(q.y()));
      if (col < 0 || col >= spec.image_width || row < 0 ||
          row >= spec.image_height)
        continue;
      claim(col, row);
    }
  }
  return scene;
}

// --- JSON bindings (field names match the struct members) -----------------

inline void to_json(nlohmann::json& j, const ObjectBox& b) {
  j = nlohmann::json{{"center", {b.center.x(), b.center.y(), b.center.z()}},
                     {"half_extents",
                      {b.half_extents.x(), b.half_extents.y(), b.half_extents.z()}},
                     {"yaw", b.yaw},
                     {"class_id", b.class_id}};
}

inline void from_json(const nlohmann::json& j, ObjectBox& b) {
  const auto c = j.at("center");
  const auto h = j.at("half_extents");
  b.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
  b.half_extents =
      Vec3(h.at(0).get<double>(), h.at(1).get<double>(), h.at(2).get<double>());
  b.yaw = j.value("yaw", 0.0);
  b.class_id = j.value("class_id", 1u);
}

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{
      {"object_boxes", s.object_boxes},
      {"points_per_object", s.points_per_object},
      {"background_points", s.background_points},
      {"rng_seed", s.rng_seed},
      {"image_width", s.image_width},
      {"image_height", s.image_height},
      {"background_lo", {s.background_lo.x(), s.background_lo.y(), s.background_lo.z()}},
      {"background_hi", {s.background_hi.x(), s.background_hi.y(), s.background_hi.z()}},
      {"dense_samples_per_object", s.dense_samples_per_object}};
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.object_boxes = j.value("object_boxes", std::vector<ObjectBox>{});
  s.points_per_object = j.value("points_per_object", 512);
  s.background_points = j.value("background_points", 1024);
  s.rng_seed = j.value("rng_seed", std::uint64_t{0});
  s.image_width = j.value("image_width", 512);
  s.image_height = j.value("image_height", 256);
  if (j.contains("background_lo")) {
    const auto& v = j.at("background_lo");
    s.background_lo = Vec3(v.at(0).get<double>(), v.at(1).get<double>(),
                           v.at(2).get<double>());
  }
  if (j.contains("background_hi")) {
    const auto& v = j.at("background_hi");
    s.background_hi = Vec3(v.at(0).get<double>(), v.at(1).get<double>(),
                           v.at(2).get<double>());
  }
  s.dense_samples_per_object = j.value("dense_samples_per_object", 1500);
}

}  // namespace recalib

#endif  // RECALIB_SCENE_HPP
