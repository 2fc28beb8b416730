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

#ifndef RECALIB_EVALUATE_HPP
#define RECALIB_EVALUATE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "recalib/error.hpp"
#include "recalib/geometry.hpp"
#include "recalib/perturb.hpp"
#include "recalib/recalibrate.hpp"
#include "recalib/rng.hpp"
#include "recalib/scene.hpp"
#include "recalib/version.hpp"

namespace recalib {

// Reference operating point for the kitti-style setup this tool targets;
// surfaced in reports as context, never as a pass/fail gate.
constexpr double kReferenceTranslationErrorCm = 10.3;
constexpr double kReferenceRotationErrorDeg = 0.21;

struct CalibError {
  double translation_error_cm = 0.0;
  double rotation_error_deg = 0.0;
};

/// Distance between two extrinsics: centimeters between the translation
/// columns and the geodesic angle between the rotation blocks. Each block
/// is snapped to its nearest rotation first; a block further than 0.1 from
/// any rotation is rejected.
inline CalibError calib_error(const CalibrationSet& a, const CalibrationSet& b) {
  const ProcrustesResult ra = nearest_rotation(a.v2c.leftCols<3>());
  const ProcrustesResult rb = nearest_rotation(b.v2c.leftCols<3>());
  if (ra.residual > 0.1 || rb.residual > 0.1)
    throw Error(ErrorCode::not_decomposable,
                "extrinsic rotation block is not close to a rotation");
  CalibError e;
  e.translation_error_cm = 100.0 * (a.v2c.col(3) - b.v2c.col(3)).norm();
  e.rotation_error_deg = rotation_angle_deg(ra.rotation, rb.rotation);
  return e;
}

// ---------------------------------------------------------------------------
// Corruption sweep
// ---------------------------------------------------------------------------

struct GaussianCorruption {
  double sigma = 0.01;
};

struct TranslationCorruption {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

using CorruptionSpec = std::variant<GaussianCorruption, TranslationCorruption>;

/// Ranges for the per-frame random scenes the sweep builds. Lateral box
/// placement is drawn as a fraction of the usable half field of view rather
/// than in meters: every box is guaranteed to sit well off the optical axis,
/// which is what makes depth shifts visible to the pixel objective, while
/// still projecting fully inside the frame.
struct SceneRandomization {
  int min_boxes = 3;
  int max_boxes = 5;
  double depth_lo = 8.0;    ///< box center distance along the LiDAR x axis, m
  double depth_hi = 18.0;
  double lateral_lo = 0.35, lateral_hi = 0.85;  ///< |offset| / half-FOV
  Vec3 half_lo = Vec3(0.7, 0.7, 0.7);
  Vec3 half_hi = Vec3(1.4, 1.4, 1.4);
  /// One randomly chosen axis of every box is squeezed to this range. A
  /// filled silhouette of a chunky box zeroes the directed point-to-mask
  /// loss for any pose that tucks the points into its interior (shrinking
  /// the cloud into the blob is as good as aligning it); a slab projects to
  /// a strip with no interior to hide in, so only poses close to the truth
  /// keep every point on the mask.
  double thin_lo = 0.04, thin_hi = 0.10;
  std::vector<std::uint32_t> classes = {1};
  int points_per_object = 400;
  int background_points = 600;
  int image_width = 1024;
  int image_height = 384;
  double focal_length = 600.0;
};

inline SceneSpec random_scene_spec(std::uint64_t seed,
                                   const SceneRandomization& r = {}) {
  if (r.min_boxes < 1 || r.max_boxes < r.min_boxes)
    throw Error(ErrorCode::bad_config, "bad box count range");
  if (r.classes.empty())
    throw Error(ErrorCode::bad_config, "scene needs at least one class");
  if (r.depth_lo <= 1.0 || r.depth_hi < r.depth_lo)
    throw Error(ErrorCode::bad_config, "bad depth range");
  if (!(r.lateral_lo >= 0.0 && r.lateral_lo <= r.lateral_hi &&
        r.lateral_hi <= 1.0))
    throw Error(ErrorCode::bad_config,
                "lateral fractions must satisfy 0 <= lo <= hi <= 1");
  SplitMix64 rng(seed);
  SceneSpec spec;
  spec.rng_seed = SplitMix64::derive(seed, 101);
  spec.points_per_object = r.points_per_object;
  spec.background_points = r.background_points;
  spec.image_width = r.image_width;
  spec.image_height = r.image_height;
  // Usable view cone, a little narrower than the real frustum so whole boxes
  // stay inside the frame (axis conventions from make_pinhole_calib).
  const double tan_u = 0.475 * r.image_width / r.focal_length;
  const double tan_v = 0.450 * r.image_height / r.focal_length;
  const int count =
      r.min_boxes +
      static_cast<int>(rng.next_u64() %
                       static_cast<std::uint64_t>(r.max_boxes - r.min_boxes + 1));
  const double span = r.depth_hi - r.depth_lo;
  for (int i = 0; i < count; ++i) {
    ObjectBox box;
    // Anchor the first box near, the second far. Two boxes at similar
    // depths leave a small rotation indistinguishable from a lateral shift;
    // a guaranteed depth spread keeps the recalibration problem well posed.
    double depth;
    if (i == 0)
      depth = rng.uniform(r.depth_lo, r.depth_lo + 0.2 * span);
    else if (i == 1)
      depth = rng.uniform(r.depth_hi - 0.2 * span, r.depth_hi);
    else
      depth = rng.uniform(r.depth_lo, r.depth_hi);
    for (int k = 0; k < 3; ++k)
      box.half_extents[k] = rng.uniform(r.half_lo[k], r.half_hi[k]);
    // Slab orientations must disagree or the strips constrain only one
    // image direction: the first box is a horizontal platter, the second a
    // vertical strip, later ones draw at random.
    const int thin_axis =
        i == 0 ? 2 : i == 1 ? 1 : static_cast<int>(rng.next_u64() % 3);
    box.half_extents[thin_axis] = rng.uniform(r.thin_lo, r.thin_hi);
    box.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double cam_depth = depth - 0.27;
    const double r_xy = std::hypot(box.half_extents.x(), box.half_extents.y());
    const double lateral_room = std::max(0.0, tan_u * cam_depth - r_xy);
    const double lateral =
        std::min(rng.uniform(r.lateral_lo, r.lateral_hi) * tan_u * cam_depth,
                 lateral_room);
    const double side = (rng.next_u64() & 1u) ? 1.0 : -1.0;
    const double vert_room =
        std::max(0.0, tan_v * cam_depth - box.half_extents.z());
    const double vert = vert_room > 0.0 ? rng.uniform(-vert_room, vert_room) : 0.0;
    box.center = Vec3(depth, side * lateral, vert - 0.08);
    box.class_id = r.classes[static_cast<std::size_t>(i) % r.classes.size()];
    spec.object_boxes.push_back(box);
  }
  return spec;
}

struct SweepConfig {
  std::vector<CorruptionSpec> corruptions;
  int frames_per_level = 10;
  std::uint64_t master_seed = 0;
  std::vector<std::uint32_t> interested = {1};
  SearchConfig search;
  SceneRandomization randomization;
  int jobs = 1;
};

struct SweepRow {
  std::string frame_id;
  nlohmann::ordered_json corruption;
  CalibError before;
  CalibError after;
  double chamfer_before = 0.0;
  double chamfer_after = 0.0;
  long long evaluations = 0;
};

struct SweepFailure {
  std::string frame_id;
  std::string code;
  std::string message;
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  std::vector<SweepFailure> failures;
  Aggregate translation_before_cm;
  Aggregate translation_after_cm;
  Aggregate rotation_before_deg;
  Aggregate rotation_after_deg;
  Aggregate objective_reduction;  // 1 - after/before, per frame
};

namespace detail {

inline Aggregate aggregate(std::vector<double> values) {
  Aggregate a;
  if (values.empty()) return a;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  const std::size_t n = values.size();
  a.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(n)));
  a.p95 = values[std::min(n - 1, rank == 0 ? 0 : rank - 1)];
  return a;
}

inline nlohmann::ordered_json corruption_json(const CorruptionSpec& c) {
  nlohmann::ordered_json j;
  if (const auto* g = std::get_if<GaussianCorruption>(&c)) {
    j["type"] = "gaussian_noise";
    j["sigma"] = g->sigma;
  } else {
    const auto& t = std::get<TranslationCorruption>(c);
    j["type"] = "cloud_translation";
    j["translation"] = {t.a, t.b, t.c};
  }
  return j;
}

}  // namespace detail

/// Aggregate statistics over finished rows. Also the re-summarization entry
/// point: feeding a report's rows back through gives the same summary.
inline SweepSummary summarize_rows(std::vector<SweepRow> rows,
                                   std::vector<SweepFailure> failures = {}) {
  SweepSummary summary;
  std::vector<double> tb, ta, rb, ra, red;
  for (const SweepRow& row : rows) {
    tb.push_back(row.before.translation_error_cm);
    ta.push_back(row.after.translation_error_cm);
    rb.push_back(row.before.rotation_error_deg);
    ra.push_back(row.after.rotation_error_deg);
    if (row.chamfer_before > 0)
      red.push_back(1.0 - row.chamfer_after / row.chamfer_before);
  }
  summary.rows = std::move(rows);
  summary.failures = std::move(failures);
  summary.translation_before_cm = detail::aggregate(std::move(tb));
  summary.translation_after_cm = detail::aggregate(std::move(ta));
  summary.rotation_before_deg = detail::aggregate(std::move(rb));
  summary.rotation_after_deg = detail::aggregate(std::move(ra));
  summary.objective_reduction = detail::aggregate(std::move(red));
  return summary;
}

/// Runs every (corruption, frame) cell: build a random scene, corrupt it,
/// recalibrate, and measure the extrinsic error before and after against
/// the ground truth. Frames are independent and deterministically seeded
/// from the master seed, so results do not depend on the job count. Frames
/// that fail with a typed error are collected, not fatal.
inline SweepSummary run_sweep(const SweepConfig& cfg) {
  if (cfg.corruptions.empty() || cfg.frames_per_level <= 0)
    throw Error(ErrorCode::bad_grid,
                "sweep needs at least one corruption and one frame");
  if (cfg.interested.empty())
    throw Error(ErrorCode::bad_config, "no interested classes given");

  struct Cell {
    std::optional<SweepRow> row;
    std::optional<SweepFailure> failure;
  };
  const std::size_t total =
      cfg.corruptions.size() * static_cast<std::size_t>(cfg.frames_per_level);
  std::vector<Cell> cells(total);

  auto run_cell = [&](std::size_t index) {
    const std::size_t ci = index / static_cast<std::size_t>(cfg.frames_per_level);
    const std::size_t fi = index % static_cast<std::size_t>(cfg.frames_per_level);
    char id[32];
    std::snprintf(id, sizeof id, "c%02zu_f%03zu", ci, fi);
    Cell& cell = cells[index];
    try {
      const std::uint64_t frame_seed =
          SplitMix64::derive(cfg.master_seed, static_cast<std::uint64_t>(index));
      const std::uint64_t scene_seed = SplitMix64::derive(frame_seed, 0);
      const std::uint64_t corrupt_seed = SplitMix64::derive(frame_seed, 1);
      const std::uint64_t search_seed = SplitMix64::derive(frame_seed, 2);

      const SceneSpec spec = random_scene_spec(scene_seed, cfg.randomization);
      const CalibrationSet clean = make_pinhole_calib(
          spec.image_width, spec.image_height, cfg.randomization.focal_length);
      SyntheticScene scene = synth_scene(spec, clean);

      CalibrationSet calib_in = clean;
      CalibrationSet truth = clean;
      const CorruptionSpec& corruption = cfg.corruptions[ci];
      if (const auto* g = std::get_if<GaussianCorruption>(&corruption)) {
        calib_in = gaussian_noise_calib(clean, {g->sigma, corrupt_seed}).calib;
      } else {
        const auto& t = std::get<TranslationCorruption>(corruption);
        TranslatedScene shifted =
            translate_cloud_with_label(scene.cloud, clean, {t.a, t.b, t.c});
        scene.cloud = std::move(shifted.cloud);
        truth = shifted.calib;  // stale calib_in stays at `clean`
      }

      SearchConfig search = cfg.search;
      search.rng_seed = search_seed;
      const RecalibResult fit = recalibrate(scene.cloud, scene.mask, calib_in,
                                            cfg.interested, search);

      SweepRow row;
      row.frame_id = id;
      row.corruption = detail::corruption_json(corruption);
      row.before = calib_error(calib_in, truth);
      row.after = calib_error(apply_bias(calib_in, fit.bias), truth);
      row.chamfer_before = fit.objective_initial;
      row.chamfer_after = fit.objective_final;
      row.evaluations = fit.evaluations;
      cell.row = std::move(row);
    } catch (const Error& e) {
      cell.failure = SweepFailure{id, error_code_name(e.code()), e.what()};
    }
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < total; ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(static_cast<std::size_t>(jobs), total);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1))
          run_cell(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  std::vector<SweepRow> rows;
  std::vector<SweepFailure> failures;
  for (Cell& cell : cells) {
    if (cell.failure) failures.push_back(std::move(*cell.failure));
    if (cell.row) rows.push_back(std::move(*cell.row));
  }
  return summarize_rows(std::move(rows), std::move(failures));
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// FNV-1a 64 over a canonical JSON dump; stable identity for "same config".
inline std::string config_fingerprint(const nlohmann::ordered_json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::ordered_json scene_randomization_json(
    const SceneRandomization& r) {
  return nlohmann::ordered_json{{"min_boxes", r.min_boxes},
                                {"max_boxes", r.max_boxes},
                                {"depth_lo", r.depth_lo},
                                {"depth_hi", r.depth_hi},
                                {"lateral_lo", r.lateral_lo},
                                {"lateral_hi", r.lateral_hi},
                                {"thin_lo", r.thin_lo},
                                {"thin_hi", r.thin_hi},
                                {"points_per_object", r.points_per_object},
                                {"background_points", r.background_points},
                                {"image_width", r.image_width},
                                {"image_height", r.image_height},
                                {"focal_length", r.focal_length},
                                {"classes", r.classes}};
}

inline nlohmann::ordered_json sweep_config_json(const SweepConfig& cfg) {
  nlohmann::ordered_json j;
  j["corruptions"] = nlohmann::ordered_json::array();
  for (const CorruptionSpec& c : cfg.corruptions)
    j["corruptions"].push_back(detail::corruption_json(c));
  j["frames_per_level"] = cfg.frames_per_level;
  j["master_seed"] = cfg.master_seed;
  j["interested"] = cfg.interested;
  {
    nlohmann::json search;
    to_json(search, cfg.search);
    j["search"] = search;
  }
  j["scene"] = scene_randomization_json(cfg.randomization);
  return j;
}

/// Deterministic report: identical config and master seed give identical
/// bytes. Timings deliberately live elsewhere (the run log), never here.
inline nlohmann::ordered_json build_report(std::uint64_t seed,
                                           const nlohmann::ordered_json& config,
                                           const SweepSummary& summary) {
  nlohmann::ordered_json report;
  report["schema"] = kReportSchema;

  report["meta"] = {
      {"seed", seed},
      {"config_hash", config_fingerprint(config)},
      {"toolkit_version", kToolkitVersion},
      {"reference",
       {{"dataset", "kitti"},
        {"translation_error_cm", kReferenceTranslationErrorCm},
        {"rotation_error_deg", kReferenceRotationErrorDeg},
        {"note", "published operating point for context; not a gate"}}}};
  report["config"] = config;

  report["rows"] = nlohmann::ordered_json::array();
  for (const SweepRow& row : summary.rows) {
    nlohmann::ordered_json r;
    r["frame_id"] = row.frame_id;
    r["corruption"] = row.corruption;
    r["before"] = {{"translation_error_cm", row.before.translation_error_cm},
                   {"rotation_error_deg", row.before.rotation_error_deg},
                   {"chamfer", row.chamfer_before}};
    r["after"] = {{"translation_error_cm", row.after.translation_error_cm},
                  {"rotation_error_deg", row.after.rotation_error_deg},
                  {"chamfer", row.chamfer_after},
                  {"evaluations", row.evaluations}};
    report["rows"].push_back(std::move(r));
  }

  report["failures"] = nlohmann::ordered_json::array();
  for (const SweepFailure& f : summary.failures)
    report["failures"].push_back(
        {{"frame_id", f.frame_id}, {"code", f.code}, {"message", f.message}});

  auto agg = [](const Aggregate& a) {
    return nlohmann::ordered_json{
        {"mean", a.mean}, {"median", a.median}, {"p95", a.p95}};
  };
  report["summary"] = {
      {"frames", summary.rows.size()},
      {"failed_frames", summary.failures.size()},
      {"translation_before_cm", agg(summary.translation_before_cm)},
      {"translation_after_cm", agg(summary.translation_after_cm)},
      {"rotation_before_deg", agg(summary.rotation_before_deg)},
      {"rotation_after_deg", agg(summary.rotation_after_deg)},
      {"objective_reduction", agg(summary.objective_reduction)}};
  return report;
}

inline nlohmann::ordered_json sweep_report(const SweepConfig& cfg,
                                           const SweepSummary& summary) {
  return build_report(cfg.master_seed, sweep_config_json(cfg), summary);
}

// --- JSON bindings for the sweep config ------------------------------------

inline void from_json(const nlohmann::json& j, SceneRandomization& r) {
  const SceneRandomization defaults;
  r.min_boxes = j.value("min_boxes", defaults.min_boxes);
  r.max_boxes = j.value("max_boxes", defaults.max_boxes);
  r.depth_lo = j.value("depth_lo", defaults.depth_lo);
  r.depth_hi = j.value("depth_hi", defaults.depth_hi);
  r.lateral_lo = j.value("lateral_lo", defaults.lateral_lo);
  r.lateral_hi = j.value("lateral_hi", defaults.lateral_hi);
  r.thin_lo = j.value("thin_lo", defaults.thin_lo);
  r.thin_hi = j.value("thin_hi", defaults.thin_hi);
  r.points_per_object = j.value("points_per_object", defaults.points_per_object);
  r.background_points = j.value("background_points", defaults.background_points);
  r.image_width = j.value("image_width", defaults.image_width);
  r.image_height = j.value("image_height", defaults.image_height);
  r.focal_length = j.value("focal_length", defaults.focal_length);
  r.classes = j.value("classes", defaults.classes);
}

inline void from_json(const nlohmann::json& j, CorruptionSpec& c) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian_noise") {
    c = GaussianCorruption{j.value("sigma", 0.01)};
  } else if (type == "cloud_translation") {
    const auto& t = j.at("translation");
    c = TranslationCorruption{t.at(0).get<double>(), t.at(1).get<double>(),
                              t.at(2).get<double>()};
  } else {
    throw Error(ErrorCode::bad_config, "unknown corruption type: " + type);
  }
}

inline void from_json(const nlohmann::json& j, SweepConfig& cfg) {
  cfg.corruptions = j.value("corruptions", std::vector<CorruptionSpec>{});
  cfg.frames_per_level = j.value("frames_per_level", 10);
  cfg.master_seed = j.value("master_seed", std::uint64_t{0});
  cfg.interested = j.value("interested", std::vector<std::uint32_t>{1});
  if (j.contains("search")) cfg.search = j.at("search").get<SearchConfig>();
  if (j.contains("scene")) cfg.randomization = j.at("scene").get<SceneRandomization>();
  cfg.jobs = j.value("jobs", 1);
}

}  // namespace recalib

#endif  // RECALIB_EVALUATE_HPP
