#pragma once

// Rigid-transform algebra and the pose distances used for consensus scoring
// and evaluation. All angles are radians unless a name says otherwise.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "pose_consensus/error.hpp"

namespace pose_consensus {

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Norm below which a translation carries no usable direction.
inline constexpr double kDegenerateTranslationNorm = 1e-8;

// Element of SO(3) stored as a 3x3 matrix. Construction either validates
// (from_matrix) or projects (project); an instance always satisfies
// R^T R = I and det R = +1 to within 1e-9.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}

  static Rotation identity() { return Rotation(); }

  // Throws InvalidRotation when m is not orthonormal with det +1 within tol.
  static Rotation from_matrix(const Eigen::Matrix3d& m, double tol = 1e-9) {
    if (!m.allFinite()) throw InvalidRotation("rotation has non-finite entries");
    const double orth = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    const double det = m.determinant();
    if (orth > tol || std::abs(det - 1.0) > tol) {
      throw InvalidRotation("matrix is not a proper rotation");
    }
    return Rotation(m);
  }

  // Nearest rotation in Frobenius norm (orthogonal polar factor with the
  // determinant forced to +1). Throws DegenerateMatrix for rank < 3.
  static Rotation project(const Eigen::Matrix3d& m) {
    if (!m.allFinite()) throw DegenerateMatrix("matrix has non-finite entries");
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d s = svd.singularValues();
    if (!(s(0) > 0.0) || s(2) <= 1e-12 * s(0)) {
      throw DegenerateMatrix("matrix is rank deficient");
    }
    Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return Rotation(u * v.transpose());
  }

  // Rotation by `angle` about `axis` (normalized internally).
  static Rotation about(const Eigen::Vector3d& axis, double angle) {
    return Rotation(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix());
  }

  // Exponential map of a rotation vector.
  static Rotation exp(const Eigen::Vector3d& rotvec) {
    const double angle = rotvec.norm();
    if (angle == 0.0) return Rotation();
    return about(rotvec / angle, angle);
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Rotation inverse() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& rhs) const { return Rotation(m_ * rhs.m_); }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }

  bool operator==(const Rotation& rhs) const { return m_ == rhs.m_; }

 private:
  explicit Rotation(const Eigen::Matrix3d& m) : m_(m) {}

  Eigen::Matrix3d m_;
};

// Rigid transform x -> R x + t. Used for world-to-camera poses.
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t.topLeftCorner<3, 3>() = rotation.matrix();
    t.topRightCorner<3, 1>() = translation;
    return t;
  }

  Pose inverse() const {
    const Rotation rt = rotation.inverse();
    return {rt, -(rt * translation)};
  }

  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
};

// Relative transform carrying camera A's frame to camera B's. Translation
// is meaningful only up to a positive scale and may be zero.
struct RelativePose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RelativePose identity() { return {}; }

  bool translation_defined() const { return translation.norm() >= kDegenerateTranslationNorm; }

  Eigen::Matrix4d matrix() const { return Pose{rotation, translation}.matrix(); }

  // this ∘ rhs as 4x4 transforms.
  RelativePose compose(const RelativePose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
};

struct PoseDistance {
  double rot_rad = 0.0;
  double trans_rad = 0.0;
  double total_rad = 0.0;
  bool trans_defined = false;
};

// T_rel = T_B T_A^{-1}: R_rel = R_B R_A^T, t_rel = t_B - R_rel t_A.
inline RelativePose relative_pose(const Pose& a, const Pose& b) {
  const Rotation r = b.rotation * a.rotation.inverse();
  return {r, b.translation - r * a.translation};
}

// Geodesic angle of R2 R1^T. Evaluated as atan2(sin, cos) with sin taken
// from the skew part, which equals arccos((tr - 1) / 2) on its domain but
// stays accurate near 0 and pi.
inline double dist_rot(const Rotation& r1, const Rotation& r2) {
  // Entries of M = R2 R1^T are formed with a fixed summation order so that
  // swapping the arguments yields exactly M^T and the result is symmetric.
  const Eigen::Matrix3d& a = r2.matrix();
  const Eigen::Matrix3d& b = r1.matrix();
  const auto entry = [&](int r, int c) { return a(r, 0) * b(c, 0) + a(r, 1) * b(c, 1) + a(r, 2) * b(c, 2); };
  const double trace = entry(0, 0) + entry(1, 1) + entry(2, 2);
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  const double k0 = entry(2, 1) - entry(1, 2);
  const double k1 = entry(0, 2) - entry(2, 0);
  const double k2 = entry(1, 0) - entry(0, 1);
  const double s = std::min(std::sqrt(k0 * k0 + k1 * k1 + k2 * k2) / 2.0, 1.0);
  return std::atan2(s, c);
}

namespace detail {

// Unit direction of t with components snapped to single precision, then
// renormalized. Snapping makes the direction exactly invariant to rescaling
// of t (barring a ~1e-8 chance of straddling a float boundary), so distances
// built on it do not drift in the last ulp when translations are rescaled.
// Written out per component: at -O3, Eigen reductions and vectorized
// three-element loops came out differently at different inlining sites.
inline std::array<double, 3> canonical_direction(const Eigen::Vector3d& t) {
  const double n = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
  const double x = static_cast<float>(t[0] / n);
  const double y = static_cast<float>(t[1] / n);
  const double z = static_cast<float>(t[2] / n);
  const double m = std::sqrt(x * x + y * y + z * z);
  return {x / m, y / m, z / m};
}

}  // namespace detail

struct TranslationAngle {
  double rad = 0.0;
  bool defined = false;
};

// Angle between translation directions with the sign folded out, in
// [0, pi/2]. Either norm below 1e-8 yields {0, defined = false}.
inline TranslationAngle dist_trans(const Eigen::Vector3d& t1, const Eigen::Vector3d& t2) {
  const auto norm = [](const Eigen::Vector3d& t) { return std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]); };
  if (!(norm(t1) >= kDegenerateTranslationNorm) || !(norm(t2) >= kDegenerateTranslationNorm)) {
    return {0.0, false};
  }
  const auto a = detail::canonical_direction(t1);
  const auto b = detail::canonical_direction(t2);
  const double c = std::min(std::abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]), 1.0);
  const double x = a[1] * b[2] - a[2] * b[1];
  const double y = a[2] * b[0] - a[0] * b[2];
  const double z = a[0] * b[1] - a[1] * b[0];
  const double s = std::min(std::sqrt(x * x + y * y + z * z), 1.0);
  return {std::atan2(s, c), true};
}

inline PoseDistance dist_pose(const RelativePose& p1, const RelativePose& p2, bool rotation_only = false) {
  PoseDistance d;
  d.rot_rad = dist_rot(p1.rotation, p2.rotation);
  if (!rotation_only) {
    const TranslationAngle t = dist_trans(p1.translation, p2.translation);
    d.trans_rad = t.rad;
    d.trans_defined = t.defined;
  }
  d.total_rad = d.trans_defined ? d.rot_rad + d.trans_rad : d.rot_rad;
  return d;
}

enum class YawMode { twist, geodesic };

// Magnitude in degrees of the change in heading between two cameras about
// the world up axis. The world-frame orientation change R_B^T R_A is split
// by swing-twist decomposition and the twist angle about `up_axis` returned.
// YawMode::geodesic returns the full rotation angle instead.
inline double delta_yaw(const Pose& a, const Pose& b, const Eigen::Vector3d& up_axis,
                        YawMode mode = YawMode::twist) {
  const Eigen::Matrix3d change = b.rotation.matrix().transpose() * a.rotation.matrix();
  if (mode == YawMode::geodesic) {
    return rad_to_deg(dist_rot(a.rotation, b.rotation));
  }
  const Eigen::Quaterniond q(change);
  const double along = q.vec().dot(up_axis.normalized());
  return rad_to_deg(2.0 * std::atan2(std::abs(along), std::abs(q.w())));
}

inline Rotation project_to_rotation(const Eigen::Matrix3d& m) { return Rotation::project(m); }

// Rotation vector (axis * angle) of r.
inline Eigen::Vector3d log_map(const Rotation& r) {
  const Eigen::AngleAxisd aa(r.matrix());
  return aa.axis() * aa.angle();
}

}  // namespace pose_consensus
