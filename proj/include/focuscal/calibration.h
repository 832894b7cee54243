#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "focuscal/core_types.h"
#include "focuscal/homography.h"
#include "focuscal/lens_model.h"
#include "focuscal/levenberg_marquardt.h"
#include "focuscal/scale_estimation.h"

namespace focuscal {

struct CalibrationView {
  int id = 0;
  double distance_mm = 0.0;
  std::vector<Correspondence> correspondences;
  std::optional<Pose> ground_truth;

  void Validate() const;
};

// Camera parameters for a set of views. Baseline models share one
// Intrinsics across all views; proposed models carry per-view alpha/beta
// with a common gamma and principal point.
struct CameraModel {
  std::vector<Intrinsics> intrinsics;  // one per view
  Distortion distortion;
  std::vector<Pose> poses;             // one per view
};

// Projection of one world point with its derivatives. Column order:
// alpha, beta, gamma, u0, v0, k1, k2, rotation (3), translation (3).
struct ProjectionJacobian {
  Eigen::Vector2d pixel;
  Eigen::Matrix<double, 2, 13> jacobian;
};

ProjectionJacobian ProjectWithJacobian(const Point3& world,
                                       const Intrinsics& intr,
                                       const Distortion& dist,
                                       const Pose& pose);

Eigen::Matrix3d OrthogonalizeRotation(const Eigen::Matrix3d& q);

Pose ExtrinsicsFromHomography(const Homography& h, const Eigen::Matrix3d& a);

// Closed-form single camera matrix from three or more plane homographies.
Intrinsics ClosedFormIntrinsics(std::span<const Homography> homographies);

enum class ParameterMode {
  kSharedIntrinsics,  // alpha, beta, gamma, u0, v0 common to all views
  kFrozenScales,      // per-view alpha, beta held fixed
};

struct RefinementSpec {
  ParameterMode mode = ParameterMode::kSharedIntrinsics;
  bool estimate_distortion = true;
};

// Reprojection objective over all views. Residuals are predicted minus
// observed pixel coordinates, two per correspondence, in view order.
class ReprojectionProblem : public LeastSquaresProblem {
 public:
  ReprojectionProblem(std::span<const CalibrationView> views,
                      const CameraModel& reference, RefinementSpec spec);

  Eigen::Index NumParameters() const override { return num_parameters_; }
  Eigen::Index NumResiduals() const override { return num_residuals_; }
  Eigen::VectorXd Residuals(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd Jacobian(const Eigen::VectorXd& x) const override;

  Eigen::VectorXd Pack(const CameraModel& model) const;
  // Frozen quantities (per-view scales, or distortion when not estimated)
  // are copied from the reference model.
  CameraModel Unpack(const Eigen::VectorXd& x) const;

 private:
  Eigen::Index IntrinsicBlockSize() const;

  std::span<const CalibrationView> views_;
  CameraModel reference_;
  RefinementSpec spec_;
  std::vector<Eigen::Index> row_offsets_;
  Eigen::Index num_parameters_ = 0;
  Eigen::Index num_residuals_ = 0;
};

struct RefinementResult {
  CameraModel model;
  SolverSummary summary;
};

RefinementResult RefineCameraModel(std::span<const CalibrationView> views,
                                   const CameraModel& initial,
                                   RefinementSpec spec,
                                   const SolverOptions& options,
                                   const LogSink& log = {});

struct ViewReprojection {
  int view_id = 0;
  int points = 0;
  double mean_px = 0.0;
  double stddev_px = 0.0;
  double rms_px = 0.0;
};

// Signed residuals observed - predicted, pooled over u and v.
struct ReprojectionStats {
  double mean_px = 0.0;
  double median_px = 0.0;
  double stddev_px = 0.0;
  double rms_px = 0.0;
  double max_abs_px = 0.0;
  std::vector<ViewReprojection> per_view;
};

ReprojectionStats ComputeReprojectionStats(
    const CameraModel& model, std::span<const CalibrationView> views);

// Per-distance scale lookup: nearest table row within 10% of the distance,
// otherwise the fitted curves. Throws MissingScaleForDistance.
struct ScaleSource {
  std::optional<ScaleTable> table;
  std::optional<FocalCurveFit> alpha_curve;
  std::optional<FocalCurveFit> beta_curve;

  PlateauScale Lookup(double distance_mm) const;
};

enum class Method { kBaseline, kProposed };

struct CalibrationOptions {
  SolverOptions solver;
  bool estimate_distortion = true;
  // Principal point start for the proposed method; defaults to the image
  // centre, or the centre of the observed points when the size is unknown.
  std::optional<Point2> principal_point_init;
  std::optional<ImageSize> image_size;
};

struct CalibrationResult {
  Method method = Method::kBaseline;
  CameraModel algebraic;
  ReprojectionStats algebraic_stats;
  CameraModel refined;
  ReprojectionStats stats;
  SolverSummary summary;

  bool converged() const { return summary.converged(); }
};

CalibrationResult CalibrateBaseline(std::span<const CalibrationView> views,
                                    const CalibrationOptions& options,
                                    const LogSink& log = {});

CalibrationResult CalibrateProposed(std::span<const CalibrationView> views,
                                    const ScaleSource& scales,
                                    const CalibrationOptions& options,
                                    const LogSink& log = {});

}  // namespace focuscal
