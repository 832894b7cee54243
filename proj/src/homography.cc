#include "focuscal/homography.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "focuscal/error.h"

namespace focuscal {
namespace {

// Smallest/largest eigenvalue ratio of the 2x2 scatter below which a point
// set is treated as collinear.
constexpr double kCollinearRatio = 1e-12;
// Relative size of the second smallest singular value of L below which the
// null space is considered more than one-dimensional.
constexpr double kRankTolerance = 1e-10;

bool IsCollinear(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) scatter += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  const double hi = eig.eigenvalues()(1);
  return !(hi > 0.0) || eig.eigenvalues()(0) <= kCollinearRatio * hi;
}

}  // namespace

Eigen::Vector2d Homography::Map(const Eigen::Vector2d& plane_xy) const {
  const Eigen::Vector3d p = matrix * plane_xy.homogeneous();
  return p.hnormalized();
}

Eigen::Matrix3d CanonicalizeHomography(const Eigen::Matrix3d& h) {
  const double norm = h.norm();
  // Already unit norm up to rounding: leave the entries untouched so that
  // canonicalization is exactly idempotent.
  Eigen::Matrix3d out =
      std::abs(norm - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon()
          ? h
          : Eigen::Matrix3d(h / norm);
  double sign_ref = out(2, 2);
  if (sign_ref == 0.0) {
    for (Eigen::Index i = 0; i < 9; ++i) {
      if (out(i / 3, i % 3) != 0.0) {
        sign_ref = out(i / 3, i % 3);
        break;
      }
    }
  }
  if (sign_ref < 0.0) out = -out;
  return out;
}

NormalizedPoints NormalizePoints(std::span<const Eigen::Vector2d> points) {
  if (points.size() < 2) {
    Throw(ErrorCode::kDegenerateInput, "normalization needs at least 2 points");
  }
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  if (!(mean_dist > 0.0)) {
    Throw(ErrorCode::kDegenerateInput, "all points are identical");
  }
  const double s = std::numbers::sqrt2 / mean_dist;

  NormalizedPoints out;
  out.transform << s, 0.0, -s * centroid.x(),
                   0.0, s, -s * centroid.y(),
                   0.0, 0.0, 1.0;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(s * (p - centroid));
  return out;
}

Homography EstimateHomography(std::span<const Correspondence> corrs) {
  if (corrs.size() < 4) {
    Throw(ErrorCode::kInsufficientCorrespondences,
          "homography needs at least 4 correspondences, got " +
              std::to_string(corrs.size()));
  }
  std::vector<Eigen::Vector2d> world;
  std::vector<Eigen::Vector2d> image;
  world.reserve(corrs.size());
  image.reserve(corrs.size());
  for (const auto& c : corrs) {
    world.emplace_back(c.world.x, c.world.y);
    image.emplace_back(c.image.u, c.image.v);
  }
  if (IsCollinear(world) || IsCollinear(image)) {
    Throw(ErrorCode::kDegenerateConfiguration, "points are collinear");
  }
  const NormalizedPoints nw = NormalizePoints(world);
  const NormalizedPoints ni = NormalizePoints(image);

  // Two rows per point: [w^T 0 -u w^T; 0 w^T -v w^T] c = 0.
  const auto n = static_cast<Eigen::Index>(corrs.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d w = nw.points[static_cast<size_t>(i)].homogeneous();
    const double u = ni.points[static_cast<size_t>(i)].x();
    const double v = ni.points[static_cast<size_t>(i)].y();
    design.block<1, 3>(2 * i, 0) = w.transpose();
    design.block<1, 3>(2 * i, 6) = -u * w.transpose();
    design.block<1, 3>(2 * i + 1, 3) = w.transpose();
    design.block<1, 3>(2 * i + 1, 6) = -v * w.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  // For n == 4 the design matrix is 8x9 and only 8 singular values exist.
  const Eigen::Index k = sv.size();
  const double second_smallest = k >= 9 ? sv(7) : sv(k - 1);
  if (!(second_smallest > kRankTolerance * sv(0))) {
    Throw(ErrorCode::kDegenerateConfiguration,
          "design matrix has more than one null vector");
  }
  const Eigen::VectorXd c = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << c(0), c(1), c(2), c(3), c(4), c(5), c(6), c(7), c(8);

  Homography out;
  out.matrix = CanonicalizeHomography(ni.transform.inverse() * hn * nw.transform);
  out.condition = sv(0) / second_smallest;
  return out;
}

HomographyResiduals ComputeHomographyResiduals(
    const Homography& h, std::span<const Correspondence> corrs) {
  HomographyResiduals out;
  out.errors.reserve(corrs.size());
  for (const auto& c : corrs) {
    const Eigen::Vector3d p = h.matrix * Eigen::Vector3d(c.world.x, c.world.y, 1.0);
    if (p.z() == 0.0) {
      Throw(ErrorCode::kPointAtInfinity, "homography maps a template point to infinity");
    }
    out.errors.push_back((Eigen::Vector2d(c.image.u, c.image.v) - p.hnormalized()).norm());
  }
  if (out.errors.empty()) return out;
  double sum = 0.0;
  for (double e : out.errors) sum += e;
  out.mean = sum / static_cast<double>(out.errors.size());
  double var = 0.0;
  for (double e : out.errors) var += (e - out.mean) * (e - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(out.errors.size()));
  return out;
}

}  // namespace focuscal
