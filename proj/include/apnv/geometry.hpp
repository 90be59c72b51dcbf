// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace apnv {

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

/// World-from-object rotation. Columns are the object axes expressed in the world frame.
using Rotation = Matrix3<double>;

template <typename Scalar>
inline constexpr Scalar kPi = Scalar(3.141592653589793238462643383279502884L);

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) {
  return deg * kPi<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad2deg(Scalar rad) {
  return rad * Scalar(180) / kPi<Scalar>;
}

/// Maps any angle in degrees to [0, 360).
template <typename Scalar>
Scalar wrap_degrees(Scalar deg) {
  Scalar w = std::fmod(deg, Scalar(360));
  if (w < 0) w += Scalar(360);
  if (w >= Scalar(360)) w -= Scalar(360);
  return w;
}

/// Maps any angle in degrees to (-180, 180].
template <typename Scalar>
Scalar wrap_signed_degrees(Scalar deg) {
  Scalar w = wrap_degrees(deg);
  return w > Scalar(180) ? w - Scalar(360) : w;
}

template <typename Scalar>
Matrix3<Scalar> rot_x(Scalar deg) {
  return Eigen::AngleAxis<Scalar>(deg2rad(deg), Vector3<Scalar>::UnitX()).toRotationMatrix();
}

template <typename Scalar>
Matrix3<Scalar> rot_y(Scalar deg) {
  return Eigen::AngleAxis<Scalar>(deg2rad(deg), Vector3<Scalar>::UnitY()).toRotationMatrix();
}

/// Counterclockwise rotation about +z, viewed from above.
template <typename Scalar>
Matrix3<Scalar> rot_z(Scalar deg) {
  return Eigen::AngleAxis<Scalar>(deg2rad(deg), Vector3<Scalar>::UnitZ()).toRotationMatrix();
}

template <typename Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& r, typename Derived::Scalar tol = 1e-9) {
  using Scalar = typename Derived::Scalar;
  if (r.rows() != 3 || r.cols() != 3) return false;
  const Matrix3<Scalar> m = r;
  return (m * m.transpose() - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(m.determinant() - Scalar(1)) <= tol;
}

/// Geodesic distance on SO(3) in degrees, in [0, 180].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar angle_error(const Eigen::MatrixBase<DerivedA>& estimate,
                                      const Eigen::MatrixBase<DerivedB>& truth) {
  using Scalar = typename DerivedA::Scalar;
  if (!is_rotation(estimate, Scalar(1e-6)) || !is_rotation(truth, Scalar(1e-6))) {
    throw std::invalid_argument("angle_error: input is not a rotation matrix");
  }
  const Scalar c = ((estimate.transpose() * truth).trace() - Scalar(1)) / Scalar(2);
  return rad2deg(std::acos(std::clamp(c, Scalar(-1), Scalar(1))));
}

}  // namespace apnv
