#include "focuscal/core_types.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "focuscal/error.h"

namespace focuscal {
namespace {

constexpr double kSmallAngle = 1e-7;
constexpr int kDistortMaxIterations = 50;
constexpr double kDistortTolerance = 1e-12;

}  // namespace

bool Intrinsics::IsValid() const {
  return std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma) &&
         std::isfinite(u0) && std::isfinite(v0) && alpha > 0.0 && beta > 0.0;
}

void Intrinsics::Validate() const {
  if (!IsValid()) {
    Throw(ErrorCode::kInvalidArgument,
          "intrinsics require finite values and positive scale factors");
  }
}

Eigen::Matrix3d Pose::RotationMatrix() const {
  return RodriguesToMatrix(rotation);
}

Eigen::Vector3d Pose::Transform(const Eigen::Vector3d& world) const {
  return RotationMatrix() * world + translation;
}

Pose Pose::Inverse() const {
  const Eigen::Matrix3d rt = RotationMatrix().transpose();
  return FromMatrix(rt, -rt * translation);
}

Pose Pose::Compose(const Pose& other) const {
  const Eigen::Matrix3d r = RotationMatrix();
  return FromMatrix(r * other.RotationMatrix(),
                    r * other.translation + translation);
}

Pose Pose::FromMatrix(const Eigen::Matrix3d& rotation,
                      const Eigen::Vector3d& translation) {
  Pose pose;
  pose.rotation = MatrixToRodrigues(rotation);
  pose.translation = translation;
  return pose;
}

Eigen::Matrix3d IntrinsicMatrix(const Intrinsics& intr) {
  Eigen::Matrix3d a;
  a << intr.alpha, intr.gamma, intr.u0,
       0.0, intr.beta, intr.v0,
       0.0, 0.0, 1.0;
  return a;
}

Eigen::Matrix3d Skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

Eigen::Matrix3d RodriguesToMatrix(const Eigen::Vector3d& rotation) {
  const double theta2 = rotation.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d k = Skew(rotation);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d MatrixToRodrigues(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0),
                            r(1, 0) - r(0, 1));
  const double s = 0.5 * vee.norm();          // sin(theta)
  const double c = 0.5 * (r.trace() - 1.0);   // cos(theta)
  const double theta = std::atan2(s, c);

  if (c > 0.0) {
    // theta < pi/2: the antisymmetric part is well conditioned.
    const double factor =
        s < kSmallAngle ? 0.5 * (1.0 + s * s / 6.0) : 0.5 * theta / s;
    return factor * vee;
  }

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part, R + R^T = 2c I + 2(1 - c) a a^T.
  const Eigen::Matrix3d aat =
      (0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity()) / (1.0 - c);
  int col = 0;
  aat.diagonal().maxCoeff(&col);
  Eigen::Vector3d axis = aat.col(col) / std::sqrt(std::max(aat(col, col), 0.0));
  axis.normalize();
  if (axis.dot(vee) < 0.0) axis = -axis;
  return theta * axis;
}

double RotationAngleBetween(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d d = a * b.transpose();
  const Eigen::Vector3d vee(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0),
                            d(1, 0) - d(0, 1));
  return std::atan2(0.5 * vee.norm(), 0.5 * (d.trace() - 1.0));
}

Eigen::Matrix3d RotatePointJacobian(const Eigen::Vector3d& rotation,
                                    const Eigen::Vector3d& point) {
  const double theta2 = rotation.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d k = Skew(rotation);
  double b;  // (1 - cos) / theta^2
  double c;  // (theta - sin) / theta^3
  if (theta < 1e-4) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  // Left Jacobian of SO(3): R(r + dr) = Exp(J_l dr) R(r).
  const Eigen::Matrix3d left = Eigen::Matrix3d::Identity() + b * k + c * k * k;
  return -Skew(RodriguesToMatrix(rotation) * point) * left;
}

Point2 ProjectHomogeneous(const Eigen::Vector4d& world, const Intrinsics& intr,
                          const Pose& pose) {
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = pose.RotationMatrix();
  rt.col(3) = pose.translation;
  const Eigen::Vector3d cam = rt * world;
  // Depth sign is invariant only for positive homogeneous scale; use w.
  const double depth = cam.z() * (world.w() < 0.0 ? -1.0 : 1.0);
  if (!(depth > 0.0)) {
    Throw(ErrorCode::kNonPositiveDepth,
          "point at depth " + std::to_string(cam.z()) + " is not in front of the camera");
  }
  const double x = cam.x() / cam.z();
  const double y = cam.y() / cam.z();
  return {intr.alpha * x + intr.gamma * y + intr.u0, intr.beta * y + intr.v0};
}

Point2 Project(const Point3& world, const Intrinsics& intr, const Pose& pose) {
  return ProjectHomogeneous(Eigen::Vector4d(world.x, world.y, world.z, 1.0),
                            intr, pose);
}

double NormalizedRadiusSquared(const Eigen::Vector2d& offset,
                               const Intrinsics& intr) {
  const double ny = offset.y() / intr.beta;
  const double nx = (offset.x() - intr.gamma * ny) / intr.alpha;
  return nx * nx + ny * ny;
}

Point2 Undistort(const Point2& observed, const Intrinsics& intr,
                 const Distortion& dist) {
  const Eigen::Vector2d offset(observed.u - intr.u0, observed.v - intr.v0);
  const double r2 = NormalizedRadiusSquared(offset, intr);
  const double factor = dist.k1 * r2 + dist.k2 * r2 * r2;
  return {observed.u + offset.x() * factor, observed.v + offset.y() * factor};
}

Point2 Distort(const Point2& ideal, const Intrinsics& intr,
               const Distortion& dist) {
  if (dist.IsZero()) return ideal;
  // Iterate on the offset from the principal point: d* = d - d* * f(d*).
  const Eigen::Vector2d target(ideal.u - intr.u0, ideal.v - intr.v0);
  Eigen::Vector2d current = target;
  for (int it = 0; it < kDistortMaxIterations; ++it) {
    const double r2 = NormalizedRadiusSquared(current, intr);
    const double factor = dist.k1 * r2 + dist.k2 * r2 * r2;
    const Eigen::Vector2d next = target - current * factor;
    if (!next.allFinite()) break;
    const double change = (next - current).lpNorm<Eigen::Infinity>();
    current = next;
    // The absolute tolerance cannot go below a few ulps of the offset.
    const double floor =
        8.0 * std::numeric_limits<double>::epsilon() * current.lpNorm<Eigen::Infinity>();
    if (change <= std::max(kDistortTolerance, floor)) {
      return {current.x() + intr.u0, current.y() + intr.v0};
    }
  }
  Throw(ErrorCode::kNoConvergence,
        "radial distortion inversion did not converge");
}

Point2 ProjectDistorted(const Point3& world, const Intrinsics& intr,
                        const Distortion& dist, const Pose& pose) {
  return Distort(Project(world, intr, pose), intr, dist);
}

}  // namespace focuscal
