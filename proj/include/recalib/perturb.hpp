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

#ifndef RECALIB_PERTURB_HPP
#define RECALIB_PERTURB_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "recalib/cloud_io.hpp"
#include "recalib/error.hpp"
#include "recalib/geometry.hpp"
#include "recalib/rng.hpp"
#include "recalib/scene.hpp"

namespace recalib {

/// Additive gaussian corruption of the LiDAR-to-camera extrinsic.
struct NoiseSpec {
  double sigma = 0.01;
  std::uint64_t rng_seed = 0;
};

/// Rigid shift applied to every cloud point, in LiDAR-frame meters.
struct TranslationSpec {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct CorruptedCalib {
  CalibrationSet calib;
  BiasSpec true_bias;  // additive-12; apply_bias(clean, true_bias) == calib
};

/// Draws N(0, sigma^2) per extrinsic entry. The exact draws are recorded in
/// true_bias so supervised fitting has a loss-free target.
inline CorruptedCalib gaussian_noise_calib(const CalibrationSet& clean,
                                           const NoiseSpec& noise) {
  if (noise.sigma < 0)
    throw Error(ErrorCode::bad_range, "sigma must be >= 0");
  SplitMix64 rng(noise.rng_seed);
  BiasSpec bias = BiasSpec::zero(BiasForm::additive12);
  for (int i = 0; i < 12; ++i) bias.values[i] = noise.sigma * rng.gaussian();
  CorruptedCalib out;
  out.calib = apply_bias(clean, bias);
  out.true_bias = bias;
  return out;
}

struct TranslatedScene {
  LabeledCloud cloud;
  CalibrationSet calib;  // compensated so projections match the original
};

/// Shifts the cloud by (a, b, c) and folds the inverse shift into the
/// extrinsic: with R and t the rotation and translation columns of v2c, the
/// compensated extrinsic is [R | t - R * (a, b, c)]. Pixels are unchanged.
inline TranslatedScene translate_cloud_with_label(const LabeledCloud& cloud,
                                                  const CalibrationSet& calib,
                                                  const TranslationSpec& shift) {
  TranslatedScene out;
  out.cloud = cloud;
  for (auto& p : out.cloud.points) {
    p.x += shift.a;
    p.y += shift.b;
    p.z += shift.c;
  }
  const Vec3 t(shift.a, shift.b, shift.c);
  out.calib = calib;
  out.calib.v2c.col(3) -= calib.v2c.leftCols<3>() * t;
  return out;
}

inline std::vector<ObjectBox> translate_boxes(const std::vector<ObjectBox>& boxes,
                                              const TranslationSpec& shift) {
  std::vector<ObjectBox> out = boxes;
  for (ObjectBox& b : out) b.center += Vec3(shift.a, shift.b, shift.c);
  return out;
}

/// Uniform bias draw inside per-parameter ranges: 12 ranges for the additive
/// form, 6 for the rigid form. Each range is [lo, hi] with lo <= hi.
inline BiasSpec sample_bias(const std::vector<std::array<double, 2>>& ranges,
                            BiasForm form, std::uint64_t seed) {
  const std::size_t want = form == BiasForm::additive12 ? 12 : 6;
  if (ranges.size() != want)
    throw Error(ErrorCode::bad_range,
                "expected " + std::to_string(want) + " ranges, got " +
                    std::to_string(ranges.size()));
  for (const auto& r : ranges)
    if (r[0] > r[1]) throw Error(ErrorCode::bad_range, "range lo > hi");
  SplitMix64 rng(seed);
  BiasSpec bias = BiasSpec::zero(form);
  for (std::size_t i = 0; i < want; ++i)
    bias.values[i] = rng.uniform(ranges[i][0], ranges[i][1]);
  return bias;
}

/// What was done to a frame, serialized next to the corrupted inputs so a
/// run can be audited or replayed.
struct CorruptionManifest {
  std::string frame_id;
  std::string corruption_type;  // "gaussian_noise" | "cloud_translation"
  std::uint64_t seed = 0;
  double sigma = 0.0;                     // gaussian_noise only
  TranslationSpec shift;                  // cloud_translation only
  BiasSpec true_bias = BiasSpec::zero();  // additive-12 label
};

inline void to_json(nlohmann::json& j, const BiasSpec& b) {
  j = nlohmann::json{
      {"form", b.form == BiasForm::additive12 ? "additive12" : "rigid6dof"},
      {"values", b.values}};
}

inline void from_json(const nlohmann::json& j, BiasSpec& b) {
  const std::string form = j.at("form").get<std::string>();
  if (form == "additive12") b.form = BiasForm::additive12;
  else if (form == "rigid6dof") b.form = BiasForm::rigid6dof;
  else throw Error(ErrorCode::bad_config, "unknown bias form: " + form);
  b.values = j.at("values").get<std::array<double, 12>>();
  if (b.form == BiasForm::rigid6dof)
    for (int i = 6; i < 12; ++i)
      if (b.values[i] != 0.0)
        throw Error(ErrorCode::bad_config,
                    "rigid6dof bias uses only the first 6 values");
}

inline void to_json(nlohmann::json& j, const CorruptionManifest& m) {
  j = nlohmann::json{{"frame_id", m.frame_id},
                     {"corruption_type", m.corruption_type},
                     {"seed", m.seed},
                     {"true_bias", m.true_bias}};
  if (m.corruption_type == "gaussian_noise") {
    j["sigma"] = m.sigma;
  } else if (m.corruption_type == "cloud_translation") {
    j["translation"] = {m.shift.a, m.shift.b, m.shift.c};
  }
}

inline void from_json(const nlohmann::json& j, CorruptionManifest& m) {
  m.frame_id = j.at("frame_id").get<std::string>();
  m.corruption_type = j.at("corruption_type").get<std::string>();
  m.seed = j.value("seed", std::uint64_t{0});
  m.sigma = j.value("sigma", 0.0);
  if (j.contains("translation")) {
    const auto& t = j.at("translation");
    m.shift = {t.at(0).get<double>(), t.at(1).get<double>(),
               t.at(2).get<double>()};
  }
  m.true_bias = j.value("true_bias", BiasSpec::zero());
}

}  // namespace recalib

#endif  // RECALIB_PERTURB_HPP
