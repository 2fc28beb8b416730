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

#ifndef RECALIB_RECALIBRATE_HPP
#define RECALIB_RECALIBRATE_HPP

#include <array>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "recalib/cloud_io.hpp"
#include "recalib/distance_transform.hpp"
#include "recalib/error.hpp"
#include "recalib/features.hpp"
#include "recalib/geometry.hpp"
#include "recalib/losses.hpp"
#include "recalib/mask.hpp"
#include "recalib/nelder_mead.hpp"
#include "recalib/rng.hpp"

namespace recalib {

enum class Parameterization {
  rigid6dof,   ///< axis-angle (3) + camera-frame translation (3)
  additive12,  ///< raw deltas on the 12 extrinsic entries
};

/// Per-parameter [lo, hi] boxes the search stays inside. Defaults cover the
/// drift magnitudes the tool is meant for: +-2 degrees of rotation and
/// +-0.3 m of translation.
inline std::vector<std::array<double, 2>> default_bounds(Parameterization p) {
  const double rot = 2.0 * std::numbers::pi / 180.0;
  const double trans = 0.3;
  std::vector<std::array<double, 2>> b;
  if (p == Parameterization::rigid6dof) {
    for (int i = 0; i < 3; ++i) b.push_back({-rot, rot});
    for (int i = 0; i < 3; ++i) b.push_back({-trans, trans});
  } else {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) b.push_back({-0.1, 0.1});
      b.push_back({-trans, trans});
    }
  }
  return b;
}

struct SearchConfig {
  Parameterization parameterization = Parameterization::rigid6dof;
  std::vector<std::array<double, 2>> bounds;  // empty -> default_bounds()
  int coarse_grid = 7;         // grid points per translation axis; <2 skips
  long long polytope_iters = 400;  // evaluation budget per simplex run
  int restarts = 8;            // simplex runs (first starts at the grid best)
  double tolerance = 1e-10;    // simplex collapse threshold
  std::uint64_t rng_seed = 0;

  std::size_t dimensions() const {
    return parameterization == Parameterization::rigid6dof ? 6 : 12;
  }

  std::vector<std::array<double, 2>> effective_bounds() const {
    if (bounds.empty()) return default_bounds(parameterization);
    if (bounds.size() != dimensions())
      throw Error(ErrorCode::bad_config,
                  "bounds size must match the parameterization");
    for (const auto& b : bounds)
      if (b[0] > b[1]) throw Error(ErrorCode::bad_config, "bound lo > hi");
    return bounds;
  }

  long long total_budget() const {
    const int grid = coarse_grid >= 2 ? coarse_grid : 0;
    return 1 + static_cast<long long>(grid) * grid * grid +
           polytope_iters * restarts;
  }
};

struct RecalibResult {
  BiasSpec bias;
  double objective_initial = 0.0;
  double objective_final = 0.0;
  long long evaluations = 0;
  double wall_time_ms = 0.0;
};

namespace detail {

inline BiasSpec params_to_bias(const std::vector<double>& x,
                               Parameterization p) {
  if (p == Parameterization::rigid6dof)
    return BiasSpec::rigid(Vec3(x[0], x[1], x[2]), Vec3(x[3], x[4], x[5]));
  BiasSpec b = BiasSpec::zero(BiasForm::additive12);
  for (int i = 0; i < 12; ++i) b.values[i] = x[i];
  return b;
}

// Translation parameter slots: the coarse grid sweeps only these.
inline std::array<int, 3> translation_indices(Parameterization p) {
  return p == Parameterization::rigid6dof ? std::array<int, 3>{3, 4, 5}
                                          : std::array<int, 3>{3, 7, 11};
}

// Sub-cloud with only the interested classes, order preserved.
inline LabeledCloud focus_cloud(const LabeledCloud& cloud,
                                const std::vector<std::uint32_t>& interested) {
  const std::vector<std::uint32_t> classes = sorted_unique(interested);
  LabeledCloud out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (std::binary_search(classes.begin(), classes.end(), cloud.labels[i])) {
      out.points.push_back(cloud.points[i]);
      out.labels.push_back(cloud.labels[i]);
    }
  }
  return out;
}

// Mean camera-frame depth of the points that project in front of the
// camera; 0 when none do. Scales the rotation-translation equivalence used
// to place restart seeds.
inline double mean_camera_depth(const LabeledCloud& cloud,
                                const CalibrationSet& calib) {
  const Projector projector(calib);
  PixelPoint pp;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (projector.project(cloud.xyz(i), &pp)) {
      sum += pp.depth;
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

constexpr double kBoundsPenalty = 1e6;

inline double clamp_into_bounds(std::vector<double>& x,
                                const std::vector<std::array<double, 2>>& bounds) {
  double penalty = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = std::clamp(x[i], bounds[i][0], bounds[i][1]);
    const double d = x[i] - c;
    penalty += kBoundsPenalty * d * d;
    x[i] = c;
  }
  return penalty;
}

/// Runs the shared two-stage search: a coarse grid over the translation
/// parameters, then restarted simplex runs over all of them. `objective`
/// sees only in-bounds parameters (out-of-bounds proposals are clamped and
/// surcharged), so callers can track their own incumbent inside it.
///
/// `depth_hint` (mean camera-frame depth of the points, meters; 0 disables)
/// shapes the rigid-parameterization restart seeds. A small rotation
/// (wx, wy) moves the image of a point at depth d almost exactly like the
/// translation (wy*d, -wx*d): pixel objectives are slow to tell the two
/// apart, and plain uniform seeds nearly always fall into the
/// translation-compensated valley. Each restart therefore starts ON that
/// equivalence trough — rotation spread low-discrepancy across its bounds,
/// translation slaved to cancel it around the grid-stage winner — so the
/// simplex only has to walk along the trough to wherever the depth spread
/// of the scene breaks the tie.
///
/// `warm_start`, when given, replaces the second restart's seed (clamped
/// into bounds). Callers that can point at a promising region analytically
/// — e.g. the closed-form minimizer of a strictly convex term of their
/// objective — inject it here and let the simplex confirm or beat it.
template <typename Objective>
inline void run_search(const SearchConfig& cfg, Objective&& objective,
                       long long* evaluations, double depth_hint = 0.0,
                       const std::vector<double>* warm_start = nullptr) {
  const auto bounds = cfg.effective_bounds();
  const std::size_t dims = cfg.dimensions();
  const auto tidx = translation_indices(cfg.parameterization);

  auto penalized = [&](const std::vector<double>& raw) {
    std::vector<double> x = raw;
    const double penalty = clamp_into_bounds(x, bounds);
    ++*evaluations;
    return objective(x) + penalty;
  };

  std::vector<double> grid_best(dims, 0.0);
  double grid_best_value = std::numeric_limits<double>::infinity();
  if (cfg.coarse_grid >= 2) {
    const int g = cfg.coarse_grid;
    std::vector<double> x(dims, 0.0);
    for (int ia = 0; ia < g; ++ia) {
      for (int ib = 0; ib < g; ++ib) {
        for (int ic = 0; ic < g; ++ic) {
          const std::array<int, 3> steps = {ia, ib, ic};
          for (int k = 0; k < 3; ++k) {
            const auto& b = bounds[static_cast<std::size_t>(tidx[k])];
            x[static_cast<std::size_t>(tidx[k])] =
                b[0] + (b[1] - b[0]) * steps[k] / (g - 1);
          }
          const double v = penalized(x);
          if (v < grid_best_value) {
            grid_best_value = v;
            grid_best = x;
          }
        }
      }
    }
  }

  SimplexOptions opt;
  opt.max_evals = cfg.polytope_iters;
  opt.ftol = cfg.tolerance;
  opt.xtol = cfg.tolerance;
  std::vector<double> steps(dims);
  for (std::size_t i = 0; i < dims; ++i)
    steps[i] = (bounds[i][1] - bounds[i][0]) / 8.0;
  // Rotation-spread restarts walk the rotation error down before touching
  // translation: a wide translation step lets the simplex cancel leftover
  // rotation with a depth-scaled shift instead (the two look alike through
  // the projection), and it then stalls at that mixed point.
  std::vector<double> rotation_first_steps = steps;
  for (std::size_t i = 3; i < rotation_first_steps.size() && i < 6; ++i)
    rotation_first_steps[i] /= 5.0;
  // The warm seed is already believed near-optimal; polish it locally
  // rather than lurching a bounds-scale reflection away on move one.
  std::vector<double> warm_steps = steps;
  for (double& v : warm_steps) v *= 0.25;

  SplitMix64 rng(cfg.rng_seed);
  const bool trough_seeds =
      cfg.parameterization == Parameterization::rigid6dof && depth_hint > 0.0;
  for (int run = 0; run < cfg.restarts; ++run) {
    std::vector<double> start(dims);
    if (run == 0) {
      start = grid_best;
    } else if (warm_start && run == 1) {
      start = *warm_start;
      clamp_into_bounds(start, bounds);
    } else if (trough_seeds) {
      // R2 low-discrepancy spread over the (wx, wy) rotation plane, jittered.
      const double ux = std::fmod(0.7548776662466927 * run, 1.0);
      const double uy = std::fmod(0.5698402909980532 * run, 1.0);
      const double jx = rng.uniform(-0.05, 0.05);
      const double jy = rng.uniform(-0.05, 0.05);
      start[0] = bounds[0][0] +
                 std::clamp(ux + jx, 0.0, 1.0) * (bounds[0][1] - bounds[0][0]);
      start[1] = bounds[1][0] +
                 std::clamp(uy + jy, 0.0, 1.0) * (bounds[1][1] - bounds[1][0]);
      start[2] = rng.uniform(bounds[2][0], bounds[2][1]) * 0.25;
      start[3] = rng.uniform(-0.02, 0.02);
      start[4] = rng.uniform(-0.02, 0.02);
      start[5] = rng.uniform(-0.05, 0.05);
      clamp_into_bounds(start, bounds);
    } else {
      for (std::size_t i = 0; i < dims; ++i)
        start[i] = rng.uniform(bounds[i][0], bounds[i][1]);
    }
    const std::vector<double>* run_steps = &steps;
    if (warm_start && run == 1)
      run_steps = &warm_steps;
    else if (run > 0 && trough_seeds)
      run_steps = &rotation_first_steps;
    nelder_mead(penalized, start, *run_steps, opt);
  }
}

}  // namespace detail

/// Label-free recalibration: searches for the bias that best aligns the
/// projected interested points with the segmentation mask. Never returns a
/// bias worse than zero bias under the objective.
inline RecalibResult recalibrate(const LabeledCloud& cloud, const SegMask& mask,
                                 const CalibrationSet& calib_in,
                                 const std::vector<std::uint32_t>& interested,
                                 const SearchConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (interested.empty())
    throw Error(ErrorCode::bad_config, "no interested classes given");

  const LabeledCloud focus = detail::focus_cloud(cloud, interested);
  if (focus.points.empty())
    throw Error(ErrorCode::no_interested_points,
                "cloud has no points of the interested classes");
  const MaskDistanceField field(mask, interested);
  bool any_class = false;
  for (std::uint32_t c : interested) any_class = any_class || field.has_class(c);
  if (!any_class)
    throw Error(ErrorCode::degenerate_mask,
                "mask has no pixels of the interested classes");

  RecalibResult result;
  result.bias = BiasSpec::zero(cfg.parameterization == Parameterization::rigid6dof
                                   ? BiasForm::rigid6dof
                                   : BiasForm::additive12);

  long long evaluations = 0;
  std::vector<double> incumbent(cfg.dimensions(), 0.0);
  double incumbent_value = std::numeric_limits<double>::infinity();

  auto objective = [&](const std::vector<double>& x) {
    const BiasSpec bias = detail::params_to_bias(x, cfg.parameterization);
    const CalibrationSet candidate = apply_bias(calib_in, bias);
    const double value =
        mask_chamfer_loss(project_labeled(focus, candidate, interested), field);
    if (value < incumbent_value) {
      incumbent_value = value;
      incumbent = x;
    }
    return value;
  };

  // Zero bias is the reference point and the incumbent to beat.
  ++evaluations;
  result.objective_initial = objective(std::vector<double>(cfg.dimensions(), 0.0));

  detail::run_search(cfg, objective, &evaluations,
                     detail::mean_camera_depth(focus, calib_in));

  result.bias = detail::params_to_bias(incumbent, cfg.parameterization);
  result.objective_final = incumbent_value;
  result.evaluations = evaluations;
  result.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t0)
          .count();
  return result;
}

/// Supervised fit: the label calibration is known, and the search minimizes
/// the scheduled blend of the extrinsic squared error and the directed
/// projection distance against the label projection. The schedule is keyed
/// to the global evaluation counter; the incumbent is kept under the final
/// phase's weights so early- and late-phase candidates compare fairly.
inline RecalibResult supervised_fit(const LabeledCloud& cloud,
                                    const CalibrationSet& calib_in,
                                    const CalibrationSet& calib_label,
                                    const std::vector<std::uint32_t>& interested,
                                    const SearchConfig& cfg = {},
                                    LossSchedule schedule = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (interested.empty())
    throw Error(ErrorCode::bad_config, "no interested classes given");
  if (schedule.phases.empty())
    schedule = LossSchedule::default_two_phase(cfg.total_budget());

  const LabeledCloud focus = detail::focus_cloud(cloud, interested);
  if (focus.points.empty())
    throw Error(ErrorCode::no_interested_points,
                "cloud has no points of the interested classes");
  const LabelProjectionIndex reference(
      project_labeled(focus, calib_label, interested));

  long long evaluations = 0;
  std::vector<double> incumbent(cfg.dimensions(), 0.0);
  double incumbent_value = std::numeric_limits<double>::infinity();
  const long long end_phase = std::numeric_limits<long long>::max() / 2;

  auto score = [&](const std::vector<double>& x) {
    const BiasSpec bias = detail::params_to_bias(x, cfg.parameterization);
    const CalibrationSet candidate = apply_bias(calib_in, bias);
    const double mse =
        bias_mse(bias_to_additive(bias, calib_in), calib_in, calib_label);
    const double projected = reference.loss(
        to_pixel_clusters(project_labeled(focus, candidate, interested)));
    const double final_total =
        composite_loss(mse, projected, schedule, end_phase).total;
    if (final_total < incumbent_value) {
      incumbent_value = final_total;
      incumbent = x;
    }
    return composite_loss(mse, projected, schedule, evaluations).total;
  };

  RecalibResult result;
  ++evaluations;
  score(std::vector<double>(cfg.dimensions(), 0.0));
  result.objective_initial = incumbent_value;

  // The MSE term is strictly convex with the closed-form minimizer
  // label − input; hand it to the search as a warm seed and let the
  // simplex confirm it against the full composite. In additive form the
  // seed is that minimizer itself; in rigid form its nearest rigid fit.
  const BiasSpec label_delta =
      BiasSpec::additive(calib_label.v2c - calib_in.v2c);
  std::vector<double> warm(cfg.dimensions(), 0.0);
  if (cfg.parameterization == Parameterization::additive12) {
    for (int i = 0; i < 12; ++i) warm[i] = label_delta.values[i];
  } else {
    const BiasSpec rigid_seed = bias_to_rigid(label_delta, calib_in);
    for (int i = 0; i < 6; ++i) warm[i] = rigid_seed.values[i];
  }

  detail::run_search(cfg, score, &evaluations,
                     detail::mean_camera_depth(focus, calib_in), &warm);

  result.bias = detail::params_to_bias(incumbent, cfg.parameterization);
  result.objective_final = incumbent_value;
  result.evaluations = evaluations;
  result.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t0)
          .count();
  return result;
}

// --- JSON bindings ---------------------------------------------------------

inline void to_json(nlohmann::json& j, const SearchConfig& c) {
  j = nlohmann::json{
      {"parameterization", c.parameterization == Parameterization::rigid6dof
                               ? "rigid6dof"
                               : "additive12"},
      {"bounds", c.bounds},
      {"coarse_grid", c.coarse_grid},
      {"polytope_iters", c.polytope_iters},
      {"restarts", c.restarts},
      {"tolerance", c.tolerance},
      {"rng_seed", c.rng_seed}};
}

inline void from_json(const nlohmann::json& j, SearchConfig& c) {
  const std::string p = j.value("parameterization", std::string("rigid6dof"));
  if (p == "rigid6dof") c.parameterization = Parameterization::rigid6dof;
  else if (p == "additive12") c.parameterization = Parameterization::additive12;
  else throw Error(ErrorCode::bad_config, "unknown parameterization: " + p);
  c.bounds = j.value("bounds", std::vector<std::array<double, 2>>{});
  c.coarse_grid = j.value("coarse_grid", 7);
  c.polytope_iters = j.value("polytope_iters", 400ll);
  c.restarts = j.value("restarts", 8);
  c.tolerance = j.value("tolerance", 1e-10);
  c.rng_seed = j.value("rng_seed", std::uint64_t{0});
}

}  // namespace recalib

#endif  // RECALIB_RECALIBRATE_HPP
