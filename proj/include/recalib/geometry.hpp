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

#ifndef RECALIB_GEOMETRY_HPP
#define RECALIB_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "recalib/error.hpp"

namespace recalib {

using Mat33 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat44 = Eigen::Matrix4d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

/// Points at camera-frame depth at or below this are treated as behind the
/// camera and dropped by projection.
inline constexpr double kDepthEpsilon = 1e-6;

// ---------------------------------------------------------------------------
// Calibration triple
// ---------------------------------------------------------------------------

/// The KITTI-convention projection chain. All math in this library uses
/// column vectors: a LiDAR point X lands on the pixel
///
///   y = r0 * (v2c * [X; 1]),   h = p * [y; 1],   (u, v) = (h_x/h_z, h_y/h_z)
///
/// which is the transpose of the equivalent row-vector form
/// [X,1] * v2c' * r0'. Corrupted calibration sets may carry a
/// non-orthonormal r0 or rotation block; nothing here assumes otherwise.
struct CalibrationSet {
  Mat34 v2c = Mat34::Zero();  ///< velodyne -> camera extrinsic [R|t], meters
  Mat33 r0 = Mat33::Identity();  ///< rectifying rotation
  Mat34 p = Mat34::Zero();       ///< camera projection, pixels

  static CalibrationSet identity() {
    CalibrationSet c;
    c.v2c.setZero();
    c.v2c.leftCols<3>().setIdentity();
    c.r0.setIdentity();
    c.p.setZero();
    c.p.leftCols<3>().setIdentity();
    return c;
  }
};

struct PixelPoint {
  double u = 0.0;      ///< pixel column (continuous)
  double v = 0.0;      ///< pixel row (continuous)
  double depth = 0.0;  ///< camera-frame z, meters; > 0 for retained points
  std::size_t source_index = 0;  ///< index into the originating cloud
};

// ---------------------------------------------------------------------------
// Rigid transforms
// ---------------------------------------------------------------------------

inline bool is_orthonormal(const Mat33& r, double tol) {
  return ((r.transpose() * r) - Mat33::Identity()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_rotation(const Mat33& r, double tol) {
  return is_orthonormal(r, tol) && r.determinant() > 0.0;
}

struct RigidTransform {
  Mat33 rotation = Mat33::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return RigidTransform{}; }

  /// Rodrigues. The axis-angle vector's norm is the angle in radians; small
  /// angles use the series expansion so the result stays orthonormal.
  static RigidTransform from_axis_angle(const Vec3& axis_angle,
                                        const Vec3& translation = Vec3::Zero()) {
    const double theta2 = axis_angle.squaredNorm();
    const double theta = std::sqrt(theta2);
    Mat33 hat;
    hat << 0, -axis_angle.z(), axis_angle.y(),
        axis_angle.z(), 0, -axis_angle.x(),
        -axis_angle.y(), axis_angle.x(), 0;
    double sinc, versine;  // sin(t)/t and (1-cos(t))/t^2
    if (theta < 1e-8) {
      sinc = 1.0 - theta2 / 6.0;
      versine = 0.5 - theta2 / 24.0;
    } else {
      sinc = std::sin(theta) / theta;
      versine = (1.0 - std::cos(theta)) / theta2;
    }
    RigidTransform t;
    t.rotation = Mat33::Identity() + sinc * hat + versine * (hat * hat);
    t.translation = translation;
    return t;
  }

  /// Intrinsic Z-Y-X Euler convenience constructor (yaw, pitch, roll).
  static RigidTransform from_euler_zyx(double yaw, double pitch, double roll,
                                       const Vec3& translation = Vec3::Zero()) {
    const RigidTransform rz = from_axis_angle(Vec3(0, 0, yaw));
    const RigidTransform ry = from_axis_angle(Vec3(0, pitch, 0));
    const RigidTransform rx = from_axis_angle(Vec3(roll, 0, 0));
    RigidTransform t;
    t.rotation = rz.rotation * ry.rotation * rx.rotation;
    t.translation = translation;
    return t;
  }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  RigidTransform inverse() const {
    RigidTransform t;
    t.rotation = rotation.transpose();
    t.translation = -(rotation.transpose() * translation);
    return t;
  }
};

/// compose(a, b) applies b first: compose(a, b).apply(x) == a.apply(b.apply(x)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform t;
  t.rotation = a.rotation * b.rotation;
  t.translation = a.rotation * b.translation + a.translation;
  return t;
}

/// Geodesic angle between two rotations, in degrees. Symmetric, >= 0.
inline double rotation_angle_deg(const Mat33& a, const Mat33& b) {
  if (!is_rotation(a, 1e-6) || !is_rotation(b, 1e-6)) {
    throw Error(ErrorCode::not_a_rotation,
                "rotation_angle_deg requires orthonormal inputs (1e-6)");
  }
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  const double clamped = c < -1.0 ? -1.0 : (c > 1.0 ? 1.0 : c);
  return std::acos(clamped) * 180.0 / 3.14159265358979323846;
}

struct ProcrustesResult {
  Mat33 rotation = Mat33::Identity();
  double residual = 0.0;  ///< Frobenius distance from the input to `rotation`
};

/// Nearest rotation in Frobenius norm (orthogonal Procrustes with the
/// determinant corrected to +1).
inline ProcrustesResult nearest_rotation(const Mat33& m) {
  Eigen::JacobiSVD<Mat33> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat33 u = svd.matrixU();
  Mat33 v = svd.matrixV();
  Mat33 d = Mat33::Identity();
  if ((u * v.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  ProcrustesResult r;
  r.rotation = u * d * v.transpose();
  r.residual = (m - r.rotation).norm();
  return r;
}

// ---------------------------------------------------------------------------
// Extrinsic bias
// ---------------------------------------------------------------------------

enum class BiasForm {
  additive12,  ///< 12 row-major deltas added to v2c
  rigid6dof,   ///< axis-angle rotation (3) + translation (3), camera frame
};

/// An extrinsic perturbation. The additive form is exact for per-element
/// noise corruption; the rigid form keeps search iterates on SO(3).
struct BiasSpec {
  BiasForm form = BiasForm::additive12;
  /// additive12: all 12 used (row-major delta on v2c).
  /// rigid6dof: [0..2] axis-angle radians, [3..5] translation meters.
  std::array<double, 12> values{};

  static BiasSpec zero(BiasForm f = BiasForm::additive12) {
    BiasSpec b;
    b.form = f;
    return b;
  }

  static BiasSpec additive(const Mat34& delta) {
    BiasSpec b;
    b.form = BiasForm::additive12;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) b.values[r * 4 + c] = delta(r, c);
    return b;
  }

  static BiasSpec rigid(const Vec3& axis_angle, const Vec3& translation) {
    BiasSpec b;
    b.form = BiasForm::rigid6dof;
    for (int i = 0; i < 3; ++i) {
      b.values[i] = axis_angle[i];
      b.values[3 + i] = translation[i];
    }
    return b;
  }

  Mat34 delta() const {
    if (form != BiasForm::additive12)
      throw Error(ErrorCode::form_mismatch, "delta() needs an additive-12 bias");
    Mat34 d;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) d(r, c) = values[r * 4 + c];
    return d;
  }

  RigidTransform transform() const {
    if (form != BiasForm::rigid6dof)
      throw Error(ErrorCode::form_mismatch, "transform() needs a rigid-6dof bias");
    return RigidTransform::from_axis_angle(
        Vec3(values[0], values[1], values[2]),
        Vec3(values[3], values[4], values[5]));
  }

  /// Exact inverse perturbation: applying a bias and then its negation is the
  /// identity (bitwise for the additive form).
  BiasSpec negated() const {
    if (form == BiasForm::additive12) {
      BiasSpec b = *this;
      for (double& x : b.values) x = -x;
      return b;
    }
    const RigidTransform inv = transform().inverse();
    const Vec3 w(-values[0], -values[1], -values[2]);  // R(-w) == R(w)^T
    return rigid(w, inv.translation);
  }
};

/// Applies a bias to the extrinsic; r0 and p are untouched.
///   additive: v2c + delta, elementwise.
///   rigid:    [R_b R | R_b t + t_b] where v2c = [R|t].
inline CalibrationSet apply_bias(const CalibrationSet& calib_in,
                                 const BiasSpec& bias) {
  CalibrationSet out = calib_in;
  if (bias.form == BiasForm::additive12) {
    out.v2c += bias.delta();
  } else {
    const RigidTransform b = bias.transform();
    out.v2c.leftCols<3>() = b.rotation * calib_in.v2c.leftCols<3>();
    out.v2c.col(3) = b.rotation * calib_in.v2c.col(3) + b.translation;
  }
  return out;
}

/// Exact additive equivalent of a bias relative to `calib_in`.
inline BiasSpec bias_to_additive(const BiasSpec& bias,
                                 const CalibrationSet& calib_in) {
  if (bias.form == BiasForm::additive12) return bias;
  const Mat34 delta = apply_bias(calib_in, bias).v2c - calib_in.v2c;
  return BiasSpec::additive(delta);
}

/// Nearest rigid equivalent of an additive bias: Procrustes on the rotation
/// block of the perturbed extrinsic. Exact when the additive delta happens to
/// be rigid; a best-fit otherwise.
inline BiasSpec bias_to_rigid(const BiasSpec& bias,
                              const CalibrationSet& calib_in) {
  if (bias.form == BiasForm::rigid6dof) return bias;
  const Mat34 noisy = calib_in.v2c + bias.delta();
  const Mat33 r_base = calib_in.v2c.leftCols<3>();
  const Mat33 r_b = nearest_rotation(noisy.leftCols<3>() * r_base.transpose()).rotation;
  const Vec3 t_b = noisy.col(3) - r_b * calib_in.v2c.col(3);
  // Recover axis-angle from the rotation via the quaternion-free route:
  // angle from the trace, axis from the skew part (stable away from pi,
  // which is far outside any plausible extrinsic bias).
  const double c = std::min(1.0, std::max(-1.0, (r_b.trace() - 1.0) / 2.0));
  const double angle = std::acos(c);
  Vec3 axis(r_b(2, 1) - r_b(1, 2), r_b(0, 2) - r_b(2, 0), r_b(1, 0) - r_b(0, 1));
  const double n = axis.norm();
  Vec3 w = Vec3::Zero();
  if (n > 1e-14) w = axis * (angle / n);
  return BiasSpec::rigid(w, t_b);
}

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

/// Per-calibration projection kernel. Shared by every code path that maps
/// LiDAR points to pixels so they all agree bit-for-bit.
class Projector {
 public:
  explicit Projector(const CalibrationSet& calib) {
    const Mat34 d = calib.r0 * calib.v2c;       // velodyne -> rectified camera
    m_ = calib.p.leftCols<3>() * d;             // velodyne -> homogeneous pixel
    m3_ = calib.p.col(3);
    depth_row_ = d.row(2);
  }

  /// Returns false when the point is behind the camera (dropped).
  bool project(const Vec3& x, PixelPoint* out) const {
    const Vec4 ph(x.x(), x.y(), x.z(), 1.0);
    const double depth = depth_row_.dot(ph);
    if (depth <= kDepthEpsilon) return false;
    const Vec3 h = m_ * ph + m3_;
    out->u = h.x() / h.z();
    out->v = h.y() / h.z();
    out->depth = depth;
    return true;
  }

 private:
  Eigen::Matrix<double, 3, 4> m_;
  Vec3 m3_;
  Eigen::Matrix<double, 1, 4> depth_row_;
};

struct ProjectionResult {
  std::vector<PixelPoint> points;  ///< retained points, input order
  std::size_t dropped = 0;         ///< behind-camera count
};

inline ProjectionResult project(const std::vector<Vec3>& cloud_xyz,
                                const CalibrationSet& calib) {
  ProjectionResult result;
  result.points.reserve(cloud_xyz.size());
  const Projector proj(calib);
  PixelPoint pp;
  for (std::size_t i = 0; i < cloud_xyz.size(); ++i) {
    if (proj.project(cloud_xyz[i], &pp)) {
      pp.source_index = i;
      result.points.push_back(pp);
    } else {
      ++result.dropped;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// KITTI calibration text format
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> parse_numbers(std::string_view line, int line_no,
                                         std::string_view key,
                                         std::size_t value_offset) {
  std::vector<double> values;
  std::size_t i = value_offset;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    double v = 0.0;
    const auto res = std::from_chars(line.data() + start, line.data() + i, v);
    if (res.ec != std::errc() || res.ptr != line.data() + i) {
      throw Error(ErrorCode::malformed_number,
                  "line " + std::to_string(line_no) + ", column " +
                      std::to_string(start + 1) + " (key " + std::string(key) +
                      "): '" + std::string(line.substr(start, i - start)) + "'");
    }
    values.push_back(v);
  }
  return values;
}

template <typename M>
inline void fill_row_major(M& m, const std::vector<double>& v) {
  int k = 0;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = v[static_cast<std::size_t>(k++)];
}

}  // namespace detail

/// Parses the `P2:` / `R0_rect:` / `Tr_velo_to_cam:` lines of a KITTI
/// calibration file. Unknown keys are ignored and line order is irrelevant.
inline CalibrationSet parse_kitti_calibration(std::string_view text) {
  CalibrationSet calib;
  bool have_p = false, have_r0 = false, have_v2c = false;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    ++line_no;
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;

    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string_view key = line.substr(0, colon);
    while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back())))
      key.remove_suffix(1);

    const bool is_p = (key == "P2");
    const bool is_r0 = (key == "R0_rect");
    const bool is_v2c = (key == "Tr_velo_to_cam");
    if (!is_p && !is_r0 && !is_v2c) continue;

    const std::vector<double> values =
        detail::parse_numbers(line, line_no, key, colon + 1);
    const std::size_t expect = is_r0 ? 9 : 12;
    if (values.size() != expect) {
      throw Error(ErrorCode::wrong_arity,
                  std::string(key) + " expects " + std::to_string(expect) +
                      " values, got " + std::to_string(values.size()));
    }
    if (is_p) {
      detail::fill_row_major(calib.p, values);
      have_p = true;
    } else if (is_r0) {
      detail::fill_row_major(calib.r0, values);
      have_r0 = true;
    } else {
      detail::fill_row_major(calib.v2c, values);
      have_v2c = true;
    }
  }

  if (!have_p) throw Error(ErrorCode::missing_key, "P2");
  if (!have_r0) throw Error(ErrorCode::missing_key, "R0_rect");
  if (!have_v2c) throw Error(ErrorCode::missing_key, "Tr_velo_to_cam");
  return calib;
}

namespace detail {

inline void append_17g(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

template <typename M>
inline void append_matrix_line(std::string& out, const char* key, const M& m) {
  out += key;
  out += ':';
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      out += ' ';
      append_17g(out, m(r, c));
    }
  out += '\n';
}

}  // namespace detail

/// Emits P2, R0_rect, Tr_velo_to_cam (in that order) with 17 significant
/// digits, so parse(serialize(parse(text))) is a fixed point.
inline std::string serialize_kitti_calibration(const CalibrationSet& calib) {
  std::string out;
  out.reserve(512);
  detail::append_matrix_line(out, "P2", calib.p);
  detail::append_matrix_line(out, "R0_rect", calib.r0);
  detail::append_matrix_line(out, "Tr_velo_to_cam", calib.v2c);
  return out;
}

}  // namespace recalib

#endif  // RECALIB_GEOMETRY_HPP
