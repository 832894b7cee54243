#pragma once

#include <Eigen/Core>

namespace focuscal {

// Pixel coordinates.
struct Point2 {
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector2d vec() const { return {u, v}; }
  static Point2 FromVec(const Eigen::Vector2d& p) { return {p.x(), p.y()}; }
};

// World coordinates in millimetres. Template points lie on z = 0.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
};

// Scale factors, skew and principal point of the pin-hole model.
struct Intrinsics {
  double alpha = 1.0;  // px
  double beta = 1.0;   // px
  double gamma = 0.0;
  double u0 = 0.0;     // px
  double v0 = 0.0;     // px

  bool IsValid() const;
  // Throws InvalidArgument when alpha/beta are not positive or a field is
  // not finite.
  void Validate() const;
};

// Second order radial distortion. The radius is measured in normalized
// image coordinates, i.e. pixel offsets from (u0, v0) mapped through A^-1.
struct Distortion {
  double k1 = 0.0;
  double k2 = 0.0;

  bool IsZero() const { return k1 == 0.0 && k2 == 0.0; }
};

// World-to-camera transform x_c = R * x_w + t, with R stored as a Rodrigues
// vector (radians).
struct Pose {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // mm

  Eigen::Matrix3d RotationMatrix() const;
  Eigen::Vector3d Transform(const Eigen::Vector3d& world) const;
  Pose Inverse() const;
  // this * other, i.e. apply `other` first.
  Pose Compose(const Pose& other) const;

  static Pose FromMatrix(const Eigen::Matrix3d& rotation,
                         const Eigen::Vector3d& translation);
};

Eigen::Matrix3d IntrinsicMatrix(const Intrinsics& intr);

Eigen::Matrix3d Skew(const Eigen::Vector3d& w);

Eigen::Matrix3d RodriguesToMatrix(const Eigen::Vector3d& rotation);
Eigen::Vector3d MatrixToRodrigues(const Eigen::Matrix3d& rotation);

// Geodesic angle of a * b^T.
double RotationAngleBetween(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

// d(R(r) * p) / dr for the Rodrigues vector r.
Eigen::Matrix3d RotatePointJacobian(const Eigen::Vector3d& rotation,
                                    const Eigen::Vector3d& point);

// Ideal (distortion-free) projection. Throws NonPositiveDepth when the point
// is not in front of the camera.
Point2 Project(const Point3& world, const Intrinsics& intr, const Pose& pose);
Point2 ProjectHomogeneous(const Eigen::Vector4d& world, const Intrinsics& intr,
                          const Pose& pose);

// Normalized squared radius of a pixel offset from the principal point.
double NormalizedRadiusSquared(const Eigen::Vector2d& offset,
                               const Intrinsics& intr);

// Maps an observed (distorted) pixel to its corrected position:
// p = p* + delta(p*).
Point2 Undistort(const Point2& observed, const Intrinsics& intr,
                 const Distortion& dist);

// Inverse of Undistort by fixed-point iteration. Throws NoConvergence.
Point2 Distort(const Point2& ideal, const Intrinsics& intr,
               const Distortion& dist);

// Full forward model: ideal projection followed by Distort.
Point2 ProjectDistorted(const Point3& world, const Intrinsics& intr,
                        const Distortion& dist, const Pose& pose);

}  // namespace focuscal
