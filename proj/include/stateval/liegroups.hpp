#pragma once

// Dense matrix Lie groups used by the evaluation metrics: SO(3) with its
// exponential and logarithm maps, SE(3) rigid transforms, and SE_2(3)
// extended poses (rotation, translation, linear velocity).

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>

#include "stateval/error.hpp"

namespace stateval {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Matrix5 = Eigen::Matrix<double, 5, 5>;

/// Below this angle exp/log switch to second-order Taylor expansions.
inline constexpr double kSmallAngle = 1e-5;

/// Default tolerance for orthonormality and skew-symmetry checks.
inline constexpr double kGroupTolerance = 1e-9;

/// Components below this are treated as zero when fixing the quaternion sign.
inline constexpr double kQuaternionSignTolerance = 1e-12;

inline bool is_rotation_matrix(const Matrix3& m, double tol = kGroupTolerance) {
  if (!m.allFinite()) return false;
  const double ortho = (m.transpose() * m - Matrix3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

/// An element of SO(3).
class Rotation {
 public:
  Rotation() : m_(Matrix3::Identity()) {}

  static Rotation identity() { return {}; }

  /// Validates orthonormality and det = +1 within `tol`.
  static Rotation from_matrix(const Matrix3& m, double tol = kGroupTolerance) {
    if (!is_rotation_matrix(m, tol)) {
      throw Error(ErrorCode::InvalidRotation, "matrix is not in SO(3)");
    }
    return Rotation(m);
  }

  /// Skips validation. Only for matrices known to be rotations by construction.
  static Rotation trusted(const Matrix3& m) { return Rotation(m); }

  /// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
  static Rotation project(const Matrix3& m);

  /// Hamilton quaternion; normalized before conversion.
  static Rotation from_quaternion(const Eigen::Quaterniond& q) {
    return Rotation(q.normalized().toRotationMatrix());
  }

  const Matrix3& matrix() const noexcept { return m_; }

  /// Unit quaternion with non-negative scalar part.
  Eigen::Quaterniond quaternion() const {
    Eigen::Quaterniond q(m_);
    q.normalize();
    // w >= 0; for half turns (w == 0) the first nonzero of x, y, z is positive
    for (int i : {3, 0, 1, 2}) {
      if (std::abs(q.coeffs()[i]) > kQuaternionSignTolerance) {
        if (q.coeffs()[i] < 0.0) q.coeffs() = -q.coeffs();
        break;
      }
    }
    return q;
  }

  Rotation inverse() const { return Rotation(m_.transpose()); }

  Rotation operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }
  Vector3 operator*(const Vector3& v) const { return m_ * v; }

 private:
  explicit Rotation(const Matrix3& m) : m_(m) {}

  Matrix3 m_;
};

// so(3)

inline Matrix3 so3_hat(const Vector3& w) {
  Matrix3 s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

inline Vector3 so3_vee(const Matrix3& s) {
  if (!s.allFinite() || (s + s.transpose()).norm() >= kGroupTolerance) {
    throw Error(ErrorCode::NotSkewSymmetric, "so3_vee requires a skew-symmetric matrix");
  }
  return {s(2, 1), s(0, 2), s(1, 0)};
}

inline Rotation so3_exp(const Vector3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Matrix3 k = so3_hat(w);
  return Rotation::trusted(Matrix3::Identity() + a * k + b * k * k);
}

/// Rotation vector with norm in [0, pi]. At exactly pi the axis sign is
/// chosen so that its first nonzero component is positive.
inline Vector3 so3_log(const Rotation& rotation) {
  const Matrix3& r = rotation.matrix();
  // sin(theta) * axis
  const Vector3 skew = 0.5 * Vector3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double sin_theta = skew.norm();
  const double cos_theta = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < kSmallAngle) {
    // theta / sin(theta) ~ 1 + theta^2 / 6
    return (1.0 + theta * theta / 6.0) * skew;
  }
  if (cos_theta > -0.9) {
    return (theta / sin_theta) * skew;
  }

  // Near pi the skew part vanishes; recover the axis from the symmetric part
  // (R + R^T) / 2 = cos(theta) I + (1 - cos(theta)) a a^T.
  const Matrix3 sym = 0.5 * (r + r.transpose());
  const Matrix3 aat = (sym - cos_theta * Matrix3::Identity()) / (1.0 - cos_theta);
  Eigen::Index k = 0;
  aat.diagonal().maxCoeff(&k);
  Vector3 axis = aat.col(k) / std::sqrt(aat(k, k));
  axis.normalize();

  if (sin_theta > 1e-12) {
    if (axis.dot(skew) < 0.0) axis = -axis;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

inline Rotation Rotation::project(const Matrix3& m) {
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 d = Matrix3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return Rotation(svd.matrixU() * d * svd.matrixV().transpose());
}

// SE(3)

struct Pose {
  Rotation rotation;
  Vector3 translation = Vector3::Zero();

  Pose inverse() const {
    const Rotation rinv = rotation.inverse();
    return {rinv, -(rinv * translation)};
  }

  Pose operator*(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  Matrix4 matrix() const {
    Matrix4 t = Matrix4::Identity();
    t.topLeftCorner<3, 3>() = rotation.matrix();
    t.topRightCorner<3, 1>() = translation;
    return t;
  }
};

// SE_2(3)

/// Rotation, translation and linear velocity of a body. The 5x5 matrix form
/// is only produced on demand by `embed`.
struct ExtendedPose {
  Rotation rotation;
  Vector3 translation = Vector3::Zero();
  Vector3 velocity = Vector3::Zero();

  static ExtendedPose identity() { return {}; }

  Pose pose() const { return {rotation, translation}; }
};

inline ExtendedPose se23_compose(const ExtendedPose& a, const ExtendedPose& b) {
  return {a.rotation * b.rotation,
          a.rotation * b.translation + a.translation,
          a.rotation * b.velocity + a.velocity};
}

inline ExtendedPose se23_inverse(const ExtendedPose& t) {
  const Rotation rinv = t.rotation.inverse();
  return {rinv, -(rinv * t.translation), -(rinv * t.velocity)};
}

inline ExtendedPose operator*(const ExtendedPose& a, const ExtendedPose& b) {
  return se23_compose(a, b);
}

inline Matrix5 embed(const ExtendedPose& x) {
  Matrix5 m = Matrix5::Identity();
  m.topLeftCorner<3, 3>() = x.rotation.matrix();
  m.block<3, 1>(0, 3) = x.translation;
  m.block<3, 1>(0, 4) = x.velocity;
  return m;
}

/// Inverse of `embed`. Checks the constant bottom rows and the rotation block.
inline ExtendedPose extract(const Matrix5& m, double tol = kGroupTolerance) {
  Eigen::Matrix<double, 2, 5> bottom = Eigen::Matrix<double, 2, 5>::Zero();
  bottom(0, 3) = 1.0;
  bottom(1, 4) = 1.0;
  if ((m.bottomRows<2>() - bottom).cwiseAbs().maxCoeff() > tol) {
    throw Error(ErrorCode::InvalidArgument, "matrix is not an SE_2(3) embedding");
  }
  return {Rotation::from_matrix(m.topLeftCorner<3, 3>(), tol), m.block<3, 1>(0, 3),
          m.block<3, 1>(0, 4)};
}

/// ||E - I_5||_F. The bottom two rows of E - I are zero, so only the
/// rotation, translation and velocity blocks contribute.
inline double frobenius_error(const ExtendedPose& e) {
  const double rot = (e.rotation.matrix() - Matrix3::Identity()).squaredNorm();
  return std::sqrt(rot + e.translation.squaredNorm() + e.velocity.squaredNorm());
}

}  // namespace stateval
