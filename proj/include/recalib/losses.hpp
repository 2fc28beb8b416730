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

#ifndef RECALIB_LOSSES_HPP
#define RECALIB_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "recalib/distance_transform.hpp"
#include "recalib/error.hpp"
#include "recalib/features.hpp"
#include "recalib/geometry.hpp"
#include "recalib/kdtree2d.hpp"

namespace recalib {

/// Pixel positions grouped by class id.
using PixelClusters = std::map<std::uint32_t, std::vector<Vec2>>;

inline PixelClusters to_pixel_clusters(const ProjectedSet& projected) {
  PixelClusters out;
  for (const auto& [c, pts] : projected.by_class) {
    auto& v = out[c];
    v.reserve(pts.size());
    for (const PixelPoint& p : pts) v.emplace_back(p.u, p.v);
  }
  return out;
}

/// Reference-side nearest-neighbor index for the directed per-class
/// distance: each query point pays its pixel distance to the nearest
/// reference point of the same class, and classes sum.
class LabelProjectionIndex {
 public:
  LabelProjectionIndex() = default;

  explicit LabelProjectionIndex(const PixelClusters& reference) {
    for (const auto& [c, pts] : reference)
      if (!pts.empty()) trees_.emplace(c, KdTree2d(pts));
  }

  explicit LabelProjectionIndex(const ProjectedSet& reference)
      : LabelProjectionIndex(to_pixel_clusters(reference)) {}

  /// Sum over classes and query points of the distance to the nearest
  /// reference point of the class. A class that is empty on the query side
  /// contributes nothing; a non-empty query class with no reference points
  /// is an error.
  double loss(const PixelClusters& query) const {
    double total = 0.0;
    for (const auto& [c, pts] : query) {
      if (pts.empty()) continue;
      auto it = trees_.find(c);
      if (it == trees_.end())
        throw Error(ErrorCode::empty_label_class,
                    "no reference points for class " + std::to_string(c));
      for (const Vec2& q : pts) total += std::sqrt(it->second.nearest_squared(q));
    }
    return total;
  }

 private:
  std::map<std::uint32_t, KdTree2d> trees_;
};

inline double projected_loss(const PixelClusters& query,
                             const PixelClusters& reference) {
  return LabelProjectionIndex(reference).loss(query);
}

inline double projected_loss(const ProjectedSet& query,
                             const ProjectedSet& reference) {
  return LabelProjectionIndex(reference).loss(to_pixel_clusters(query));
}

/// Mean squared difference, over the 12 extrinsic entries, between the
/// biased input extrinsic and the label extrinsic. Additive form only.
inline double bias_mse(const BiasSpec& bias, const CalibrationSet& calib_in,
                       const CalibrationSet& calib_label) {
  if (bias.form != BiasForm::additive12)
    throw Error(ErrorCode::form_mismatch,
                "bias_mse expects the additive form");
  const Mat34 predicted = calib_in.v2c + bias.delta();
  double sum = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 4; ++col) {
      const double d = predicted(r, col) - calib_label.v2c(r, col);
      sum += d * d;
    }
  }
  return sum / 12.0;
}

// ---------------------------------------------------------------------------
// Weight schedule
// ---------------------------------------------------------------------------

struct LossPhase {
  double lambda_mse = 0.0;
  double lambda_projected = 0.0;
  long long duration = 0;  // evaluations; the last phase absorbs overruns
};

struct LossSchedule {
  std::vector<LossPhase> phases;

  /// Heavy projected weight for the first 60% of the budget, then a much
  /// lighter one so the squared-error term dominates the endgame.
  static LossSchedule default_two_phase(long long total_evals) {
    LossSchedule s;
    const long long first = (total_evals * 3) / 5;
    s.phases.push_back({10.0, 0.001, first});
    s.phases.push_back({10.0, 0.00001, total_evals - first});
    return s;
  }

  int phase_index_at(long long eval_index) const {
    if (phases.empty())
      throw Error(ErrorCode::bad_config, "empty loss schedule");
    long long cum = 0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
      cum += phases[i].duration;
      if (eval_index < cum) return static_cast<int>(i);
    }
    return static_cast<int>(phases.size()) - 1;
  }

  const LossPhase& phase_at(long long eval_index) const {
    return phases[static_cast<std::size_t>(phase_index_at(eval_index))];
  }
};

struct LossReport {
  double projected = 0.0;
  double mse = 0.0;
  double total = 0.0;
  int phase_index = 0;
};

inline LossReport composite_loss(double mse, double projected,
                                 const LossSchedule& schedule,
                                 long long eval_index) {
  LossReport r;
  r.mse = mse;
  r.projected = projected;
  r.phase_index = schedule.phase_index_at(eval_index);
  const LossPhase& p = schedule.phases[static_cast<std::size_t>(r.phase_index)];
  r.total = p.lambda_mse * mse + p.lambda_projected * projected;
  return r;
}

// ---------------------------------------------------------------------------
// Mask alignment objective
// ---------------------------------------------------------------------------

/// Sum over projected points of the pixel distance to the nearest mask pixel
/// of the point's class. Points rounding outside the image pay the distance
/// field value at the clamped border pixel plus the distance to the border;
/// a class absent from the mask costs the image diagonal per point. The
/// field must cover every class in the projected set.
inline double mask_chamfer_loss(const ProjectedSet& projected,
                                const MaskDistanceField& field) {
  const double w = field.width(), h = field.height();
  double total = 0.0;
  for (const auto& [c, pts] : projected.by_class) {
    if (pts.empty()) continue;
    if (!field.has_class(c)) {
      total += field.diagonal() * static_cast<double>(pts.size());
      continue;
    }
    for (const PixelPoint& q : pts) {
      const double rc = std::round(q.u);
      const double rr = std::round(q.v);
      const double cc = std::clamp(rc, 0.0, w - 1);
      const double cr = std::clamp(rr, 0.0, h - 1);
      const double overshoot = std::hypot(rc - cc, rr - cr);
      total += field.distance_at(c, static_cast<int>(cc),
                                 static_cast<int>(cr)) +
               overshoot;
    }
  }
  return total;
}

inline double mask_chamfer_loss(const ProjectedSet& projected,
                                const SegMask& mask) {
  std::vector<std::uint32_t> classes;
  for (const auto& [c, pts] : projected.by_class) classes.push_back(c);
  if (classes.empty())
    throw Error(ErrorCode::bad_config, "projected set has no classes");
  return mask_chamfer_loss(projected, MaskDistanceField(mask, classes));
}

}  // namespace recalib

#endif  // RECALIB_LOSSES_HPP
