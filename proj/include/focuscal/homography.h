#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "focuscal/core_types.h"

namespace focuscal {

// Template point (z = 0) and its detection in the image.
struct Correspondence {
  Point3 world;
  Point2 image;
};

// Plane-to-image homography, stored in canonical form: unit Frobenius norm
// and positive H(2,2) (or positive first nonzero entry when H(2,2) == 0).
struct Homography {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  // Ratio of largest to second-smallest singular value of the normalized
  // design matrix. Large values flag poorly conditioned input.
  double condition = 1.0;

  Eigen::Vector2d Map(const Eigen::Vector2d& plane_xy) const;
};

Eigen::Matrix3d CanonicalizeHomography(const Eigen::Matrix3d& h);

struct NormalizedPoints {
  std::vector<Eigen::Vector2d> points;
  // Similarity with transform * [p; 1] = [normalized; 1].
  Eigen::Matrix3d transform = Eigen::Matrix3d::Identity();
};

// Translates the centroid to the origin and scales the mean distance from
// it to sqrt(2). Throws DegenerateInput when all points coincide.
NormalizedPoints NormalizePoints(std::span<const Eigen::Vector2d> points);

// Normalized DLT from >= 4 correspondences. Throws
// InsufficientCorrespondences or DegenerateConfiguration.
Homography EstimateHomography(std::span<const Correspondence> corrs);

struct HomographyResiduals {
  std::vector<double> errors;  // px, one per correspondence
  double mean = 0.0;
  double stddev = 0.0;
};

// Euclidean transfer error |image - H * world|. Throws PointAtInfinity.
HomographyResiduals ComputeHomographyResiduals(
    const Homography& h, std::span<const Correspondence> corrs);

}  // namespace focuscal
