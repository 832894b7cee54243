#include "focuscal/lens_model.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "focuscal/error.h"

namespace focuscal {

void LensSpec::Validate() const {
  if (!(radius_mm > 0.0) || !std::isfinite(radius_mm)) {
    Throw(ErrorCode::kInvalidArgument, "lens radius must be positive");
  }
  if (!(angle_ratio > 0.0 && angle_ratio < 1.0)) {
    Throw(ErrorCode::kInvalidArgument, "lens angle ratio k must lie in (0, 1)");
  }
  if (!(probe_offset_mm >= 0.0) || !std::isfinite(probe_offset_mm)) {
    Throw(ErrorCode::kInvalidArgument, "probe offset must be non-negative");
  }
}

double IncomingAngle(const LensSpec& lens, double distance_mm) {
  if (!(distance_mm > 0.0)) {
    Throw(ErrorCode::kInvalidArgument, "distance must be positive");
  }
  const double lever = lens.radius_mm - lens.probe_offset_mm;
  if (lever == 0.0) {
    Throw(ErrorCode::kDegenerateGeometry,
          "probe point lies on the lens edge (D == a)");
  }
  return std::atan(distance_mm / lever);
}

double SharpFocalLength(const LensSpec& lens, double distance_mm) {
  const double phi = IncomingAngle(lens, distance_mm);
  const double omega = lens.angle_ratio * phi;
  const double denom =
      std::tan(std::numbers::pi / 2.0 - omega) - lens.probe_offset_mm / distance_mm;
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    Throw(ErrorCode::kDegenerateGeometry,
          "no sharp focus at distance " + std::to_string(distance_mm) + " mm");
  }
  return lens.radius_mm / denom;
}

double AsymptoticFocalLength(const LensSpec& lens) {
  if (!(lens.radius_mm > lens.probe_offset_mm)) {
    Throw(ErrorCode::kDegenerateGeometry,
          "asymptotic focal length needs D > a");
  }
  return lens.radius_mm /
         std::tan(std::numbers::pi / 2.0 * (1.0 - lens.angle_ratio));
}

FocalCurve FitFocalCurve(std::span<const FocalSample> samples) {
  if (samples.size() < 2) {
    Throw(ErrorCode::kInsufficientData, "curve fit needs at least 2 samples");
  }
  FocalCurve curve;
  curve.samples.assign(samples.begin(), samples.end());
  std::sort(curve.samples.begin(), curve.samples.end(),
            [](const FocalSample& a, const FocalSample& b) {
              return a.distance_mm < b.distance_mm ||
                     (a.distance_mm == b.distance_mm && a.value < b.value);
            });
  for (const FocalSample& s : curve.samples) {
    if (!(s.distance_mm > 0.0)) {
      Throw(ErrorCode::kInvalidArgument, "sample distances must be positive");
    }
  }
  if (curve.samples.front().distance_mm == curve.samples.back().distance_mm) {
    Throw(ErrorCode::kSingularSystem,
          "all samples share one distance; k_f is not identifiable");
  }

  // Regressors (-1/d^2, 1); the first column is rescaled to unit RMS so the
  // normal equations stay well conditioned for any distance unit.
  const auto n = static_cast<Eigen::Index>(curve.samples.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = curve.samples[static_cast<size_t>(i)].distance_mm;
    design(i, 0) = -1.0 / (d * d);
    design(i, 1) = 1.0;
    rhs(i) = curve.samples[static_cast<size_t>(i)].value;
  }
  const double scale = design.col(0).norm() / std::sqrt(static_cast<double>(n));
  design.col(0) /= scale;

  const Eigen::Matrix2d normal = design.transpose() * design;
  const Eigen::Vector2d moment = design.transpose() * rhs;
  Eigen::LDLT<Eigen::Matrix2d> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
    Throw(ErrorCode::kSingularSystem, "focal curve normal equations are singular");
  }
  const Eigen::Vector2d solution = ldlt.solve(moment);
  curve.fit = FocalCurveFit{solution(0) / scale, solution(1)};
  return curve;
}

double EvalFocalCurve(const FocalCurveFit& fit, double distance_mm) {
  if (!(distance_mm > 0.0)) {
    Throw(ErrorCode::kInvalidArgument, "distance must be positive");
  }
  return -fit.k_f / (distance_mm * distance_mm) + fit.value0;
}

}  // namespace focuscal
