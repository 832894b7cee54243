#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "focuscal/core_types.h"
#include "focuscal/homography.h"

namespace focuscal::testing {

inline Eigen::Vector3d RandomUnitVector(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

// Uniform rotation via a random unit quaternion.
inline Eigen::Matrix3d RandomRotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double OrthonormalityError(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
}

// Frobenius distance after removing scale and sign.
inline double ScaleAlignedError(const Eigen::Matrix3d& estimate,
                                const Eigen::Matrix3d& truth) {
  const Eigen::Matrix3d a = estimate / estimate.norm();
  Eigen::Matrix3d b = truth / truth.norm();
  if ((a - b).norm() > (a + b).norm()) b = -b;
  return (a - b).norm();
}

// Pixel from the full 3x4 product A [R t] P divided by its third entry.
inline Eigen::Vector2d MatrixProductProjection(const Eigen::Matrix3d& a,
                                               const Eigen::Matrix3d& r,
                                               const Eigen::Vector3d& t,
                                               const Eigen::Vector3d& p) {
  Eigen::Matrix<double, 3, 4> rt;
  rt << r, t;
  const Eigen::Vector3d s = a * rt * p.homogeneous();
  return s.head<2>() / s.z();
}

inline std::vector<Correspondence> GridCorrespondences(
    const Eigen::Matrix3d& h, int n, double pitch) {
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector3d w(i * pitch, j * pitch, 1.0);
      const Eigen::Vector3d m = h * w;
      out.push_back({{w.x(), w.y(), 0.0}, {m.x() / m.z(), m.y() / m.z()}});
    }
  }
  return out;
}

}  // namespace focuscal::testing
