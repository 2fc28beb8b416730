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

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "recalib/features.hpp"
#include "recalib/scene.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace recalib;
using testutil::expect_error;

namespace {

LabeledCloud cloud_from(const std::vector<Vec3>& xyz,
                        const std::vector<std::uint32_t>& labels) {
  LabeledCloud cloud;
  for (const Vec3& p : xyz) cloud.points.push_back({p.x(), p.y(), p.z(), 0.0});
  cloud.labels = labels;
  return cloud;
}

// A flat wall of class-1 points facing the camera, projecting to a dense
// pixel block well inside the image.
LabeledCloud wall_cloud() {
  std::vector<Vec3> xyz;
  std::vector<std::uint32_t> labels;
  for (int i = -16; i <= 16; ++i)
    for (int j = -8; j <= 8; ++j) {
      xyz.push_back(Vec3(i * 0.1, j * 0.1, 10.0));
      labels.push_back(1);
    }
  return cloud_from(xyz, labels);
}

// Pinhole chain with the camera looking down +z of the sensor frame.
CalibrationSet wall_calib() {
  CalibrationSet c = CalibrationSet::identity();
  c.p(0, 0) = 100.0;
  c.p(1, 1) = 100.0;
  c.p(0, 2) = 32.0;
  c.p(1, 2) = 16.0;
  return c;
}

}  // namespace

TEST_CASE("projection honours the interested-class filter", "[features]") {
  const LabeledCloud cloud =
      cloud_from({Vec3(0.5, -0.25, 5.0), Vec3(1.0, 1.0, 4.0)}, {1, 2});

  const ProjectedSet only_missing =
      project_labeled(cloud, CalibrationSet::identity(), {5});
  REQUIRE(only_missing.by_class.count(5) == 1);
  CHECK(only_missing.by_class.at(5).empty());
  CHECK(only_missing.total_points() == 0);

  const ProjectedSet both =
      project_labeled(cloud, CalibrationSet::identity(), {1, 2});
  CHECK(both.by_class.at(1).size() == 1);
  CHECK(both.by_class.at(2).size() == 1);

  expect_error(ErrorCode::bad_config, [&] {
    project_labeled(cloud, CalibrationSet::identity(), {});
  });
}

TEST_CASE("projection rejects label/point length mismatches", "[features]") {
  LabeledCloud cloud = cloud_from({Vec3(1, 0, 5)}, {1, 1});
  expect_error(ErrorCode::count_mismatch, [&] {
    project_labeled(cloud, CalibrationSet::identity(), {1});
  });
}

TEST_CASE("per-class counts match a filter-then-project reference",
          "[features][property]") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const CalibrationSet calib = testutil::random_calib(rng);
    LabeledCloud cloud;
    for (int i = 0; i < 300; ++i) {
      cloud.points.push_back({rng.uniform(-10, 25), rng.uniform(-10, 10),
                              rng.uniform(-3, 3), 0.0});
      cloud.labels.push_back(static_cast<std::uint32_t>(rng.next_u64() % 4));
    }
    const std::vector<std::uint32_t> interested = {0, 2};
    const ProjectedSet set = project_labeled(cloud, calib, interested);

    std::map<std::uint32_t, std::size_t> want;
    std::size_t want_dropped = 0;
    for (std::uint32_t c : interested) want[c] = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const std::uint32_t label = cloud.labels[i];
      if (label != 0 && label != 2) continue;
      const auto px =
          oracle::project(calib.v2c, calib.r0, calib.p, cloud.xyz(i));
      if (px)
        ++want[label];
      else
        ++want_dropped;
    }
    CHECK(set.dropped == want_dropped);
    for (std::uint32_t c : interested)
      CHECK(set.by_class.at(c).size() == want[c]);
  }
}

TEST_CASE("pixel rounding accepts only in-image coordinates", "[features]") {
  int col = -1;
  int row = -1;
  CHECK(round_to_pixel(0.4, 0.4, 64, 32, &col, &row));
  CHECK(col == 0);
  CHECK(row == 0);
  CHECK(round_to_pixel(63.4, 31.4, 64, 32, &col, &row));
  CHECK(col == 63);
  CHECK(row == 31);
  CHECK_FALSE(round_to_pixel(-0.6, 0.0, 64, 32, &col, &row));
  CHECK_FALSE(round_to_pixel(63.6, 0.0, 64, 32, &col, &row));
  CHECK_FALSE(round_to_pixel(0.0, 31.6, 64, 32, &col, &row));
}

TEST_CASE("point planes live inside their mask planes on clean scenes",
          "[features]") {
  SceneSpec spec;
  ObjectBox box;
  box.center = Vec3(8.0, 0.0, 0.0);
  box.half_extents = Vec3(0.4, 1.2, 0.9);
  box.class_id = 1;
  spec.object_boxes.push_back(box);
  spec.points_per_object = 400;
  spec.background_points = 300;
  spec.rng_seed = 5;
  const CalibrationSet calib = make_pinhole_calib(512, 256, 350.0);
  const SyntheticScene scene = synth_scene(spec, calib);

  const ProjectedSet proj = project_labeled(scene.cloud, calib, {1});
  const AlignmentFeature f = make_alignment_feature(proj, scene.mask);
  REQUIRE(f.classes == std::vector<std::uint32_t>{1});

  const std::uint8_t* mask_plane = f.mask_plane(0);
  const std::uint8_t* point_plane = f.point_plane(0);
  std::size_t set_pixels = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < f.plane_stride(); ++i) {
    if (!point_plane[i]) continue;
    ++set_pixels;
    if (mask_plane[i]) ++covered;
  }
  REQUIRE(set_pixels > 50);
  CHECK(static_cast<double>(covered) >= 0.99 * static_cast<double>(set_pixels));
}

TEST_CASE("an empty projection leaves the point planes dark", "[features]") {
  const LabeledCloud cloud = cloud_from({Vec3(1, 0, 5)}, {2});
  const ProjectedSet proj =
      project_labeled(cloud, CalibrationSet::identity(), {1});
  const AlignmentFeature f =
      make_alignment_feature(proj, SegMask::zeros(32, 16));
  for (std::size_t i = 0; i < f.plane_stride(); ++i)
    CHECK(f.point_plane(0)[i] == 0);
}

TEST_CASE("a principal-point shift slides the point plane sideways",
          "[features]") {
  const LabeledCloud cloud = wall_cloud();
  const CalibrationSet a_calib = wall_calib();
  CalibrationSet b_calib = a_calib;
  b_calib.p(0, 2) += 10.0;

  const SegMask mask = SegMask::zeros(64, 32);
  const AlignmentFeature a =
      make_alignment_feature(project_labeled(cloud, a_calib, {1}), mask);
  const AlignmentFeature b =
      make_alignment_feature(project_labeled(cloud, b_calib, {1}), mask);

  std::size_t checked = 0;
  for (int row = 0; row < 32; ++row)
    for (int col = 0; col < 64; ++col) {
      const std::size_t at = static_cast<std::size_t>(row) * 64 + col;
      if (col + 10 < 64) {
        const std::size_t shifted = at + 10;
        CHECK(b.point_plane(0)[shifted] == a.point_plane(0)[at]);
        checked += a.point_plane(0)[at];
      }
    }
  REQUIRE(checked > 100);
}

TEST_CASE("pixel shifts act equivariantly on both feature kinds",
          "[features][property]") {
  const LabeledCloud cloud = wall_cloud();
  const CalibrationSet a_calib = wall_calib();
  const int du = 3;
  const int dv = -2;
  CalibrationSet b_calib = a_calib;
  b_calib.p(0, 2) += du;
  b_calib.p(1, 2) += dv;

  const ProjectedSet pa = project_labeled(cloud, a_calib, {1});
  const ProjectedSet pb = project_labeled(cloud, b_calib, {1});
  const CalibrationFeature fa = make_calibration_feature(cloud, pa, 64, 32);
  const CalibrationFeature fb = make_calibration_feature(cloud, pb, 64, 32);

  std::size_t occupied = 0;
  for (int row = 0; row < 32; ++row)
    for (int col = 0; col < 64; ++col) {
      const int col2 = col + du;
      const int row2 = row + dv;
      if (col2 < 0 || col2 >= 64 || row2 < 0 || row2 >= 32) continue;
      CHECK(fb.at(5, col2, row2) == fa.at(5, col, row));
      if (fa.at(5, col, row) == 1.0f) {
        ++occupied;
        // Same source point wins the cell, so the sensor coordinates agree.
        for (int ch = 0; ch < 3; ++ch)
          CHECK(fb.at(ch, col2, row2) == fa.at(ch, col, row));
      }
    }
  REQUIRE(occupied > 100);
}

TEST_CASE("a single point fills exactly one calibration cell", "[features]") {
  const LabeledCloud cloud = cloud_from({Vec3(0.5, -0.25, 5.0)}, {1});
  CalibrationSet calib = CalibrationSet::identity();
  calib.p(0, 2) = 4.0;  // recentre so the pixel is in a small image
  calib.p(1, 2) = 2.0;

  const ProjectedSet proj = project_labeled(cloud, calib, {1});
  const CalibrationFeature f = make_calibration_feature(cloud, proj, 8, 4);

  std::size_t occupied = 0;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 8; ++col)
      if (f.at(5, col, row) == 1.0f) {
        ++occupied;
        CHECK(col == 4);  // u = 0.1 + 4.0
        CHECK(row == 2);  // v = -0.05 + 2.0
        CHECK(f.at(0, col, row) == 0.5f);
        CHECK(f.at(1, col, row) == -0.25f);
        CHECK(f.at(2, col, row) == 5.0f);
        CHECK(f.at(3, col, row) == Catch::Approx(4.1).margin(1e-6));
        CHECK(f.at(4, col, row) == Catch::Approx(1.95).margin(1e-6));
      }
  CHECK(occupied == 1);
}

TEST_CASE("the nearer point wins a contested calibration cell", "[features]") {
  // The second point sits on the same camera ray, 40% farther out.
  const LabeledCloud cloud = cloud_from(
      {Vec3(0.7, -0.35, 7.0), Vec3(0.5, -0.25, 5.0)}, {1, 1});
  CalibrationSet calib = CalibrationSet::identity();
  calib.p(0, 2) = 4.0;
  calib.p(1, 2) = 2.0;

  const ProjectedSet proj = project_labeled(cloud, calib, {1});
  const CalibrationFeature f = make_calibration_feature(cloud, proj, 8, 4);
  CHECK(f.at(2, 4, 2) == 5.0f);
  CHECK(f.at(5, 4, 2) == 1.0f);
}

TEST_CASE("an empty cloud produces an all-zero calibration feature",
          "[features]") {
  const LabeledCloud cloud;
  ProjectedSet proj;
  proj.by_class[1] = {};
  const CalibrationFeature f = make_calibration_feature(cloud, proj, 16, 8);
  for (float v : f.channels) CHECK(v == 0.0f);

  expect_error(ErrorCode::bad_config, [&] {
    make_calibration_feature(cloud, proj, 0, 8);
  });
}

TEST_CASE("occupied cells sit within half a pixel of their point",
          "[features][property]") {
  SceneSpec spec;
  ObjectBox box;
  box.center = Vec3(9.0, 0.0, 0.0);
  box.half_extents = Vec3(0.5, 1.5, 1.0);
  box.class_id = 1;
  spec.object_boxes.push_back(box);
  spec.points_per_object = 500;
  spec.background_points = 0;
  spec.rng_seed = 17;
  const CalibrationSet calib = make_pinhole_calib(512, 256, 350.0);
  const SyntheticScene scene = synth_scene(spec, calib);

  const ProjectedSet proj = project_labeled(scene.cloud, calib, {1});
  const CalibrationFeature f =
      make_calibration_feature(scene.cloud, proj, 512, 256);
  std::size_t occupied = 0;
  for (int row = 0; row < 256; ++row)
    for (int col = 0; col < 512; ++col) {
      if (f.at(5, col, row) != 1.0f) continue;
      ++occupied;
      // Half a pixel, with slack for the f32 cast of the stored coordinate.
      CHECK(std::abs(f.at(3, col, row) - col) <= 0.5f + 1e-4f);
      CHECK(std::abs(f.at(4, col, row) - row) <= 0.5f + 1e-4f);
    }
  REQUIRE(occupied > 100);
}

TEST_CASE("feature tensors carry the documented shapes", "[features]") {
  const LabeledCloud cloud = cloud_from({Vec3(1, 0, 5)}, {1});
  const ProjectedSet proj =
      project_labeled(cloud, CalibrationSet::identity(), {1, 3});
  const AlignmentFeature a =
      make_alignment_feature(proj, SegMask::zeros(32, 16));
  const Tensor ta = to_tensor(a);
  CHECK(ta.dims == std::vector<std::uint32_t>{4, 16, 32});
  CHECK(ta.dtype == TensorDtype::u8);
  CHECK(ta.u8.size() == 4u * 16u * 32u);

  const CalibrationFeature c = make_calibration_feature(cloud, proj, 32, 16);
  const Tensor tc = to_tensor(c);
  CHECK(tc.dims == std::vector<std::uint32_t>{6, 16, 32});
  CHECK(tc.dtype == TensorDtype::f32);
  CHECK(tc.f32.size() == 6u * 16u * 32u);
}

TEST_CASE("feature files are named by frame and kind", "[features]") {
  CHECK(alignment_feature_filename("000001") == "000001.align.rctf");
  CHECK(calibration_feature_filename("000001") == "000001.calib5.rctf");
}
