#include "focuscal/calibration.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "focuscal/error.h"
#include "focuscal/parallel.h"

namespace focuscal {

namespace {

constexpr double kScaleTableTolerance = 0.10;

// Row 2k and 2k+1 of the absolute-conic system for one homography.
Eigen::Matrix<double, 1, 6> ConicRow(const Eigen::Matrix3d& h, int i, int j) {
  const Eigen::Vector3d a = h.col(i);
  const Eigen::Vector3d b = h.col(j);
  Eigen::Matrix<double, 1, 6> row;
  row << a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[1] * b[1],
      a[2] * b[0] + a[0] * b[2], a[2] * b[1] + a[1] * b[2], a[2] * b[2];
  return row;
}

Point2 ObservationCentre(std::span<const CalibrationView> views) {
  double min_u = std::numeric_limits<double>::infinity();
  double min_v = min_u;
  double max_u = -min_u;
  double max_v = -min_u;
  for (const auto& view : views) {
    for (const auto& c : view.correspondences) {
      min_u = std::min(min_u, c.image.u);
      max_u = std::max(max_u, c.image.u);
      min_v = std::min(min_v, c.image.v);
      max_v = std::max(max_v, c.image.v);
    }
  }
  return {0.5 * (min_u + max_u), 0.5 * (min_v + max_v)};
}

std::vector<Homography> EstimateAll(std::span<const CalibrationView> views) {
  std::vector<Homography> out(views.size());
  ParallelFor(views.size(), [&](size_t i) {
    out[i] = EstimateHomography(views[i].correspondences);
  });
  return out;
}

void ValidateViews(std::span<const CalibrationView> views) {
  for (const auto& view : views) view.Validate();
}

}  // namespace

void CalibrationView::Validate() const {
  if (!(distance_mm > 0.0) || !std::isfinite(distance_mm)) {
    Throw(ErrorCode::kInvalidArgument,
          "view " + std::to_string(id) + " has non-positive distance");
  }
  if (correspondences.size() < 4) {
    Throw(ErrorCode::kInsufficientCorrespondences,
          "view " + std::to_string(id) + " has fewer than 4 points");
  }
}

ProjectionJacobian ProjectWithJacobian(const Point3& world,
                                       const Intrinsics& intr,
                                       const Distortion& dist,
                                       const Pose& pose) {
  const Eigen::Vector3d cam = pose.Transform(world.vec());
  if (!(cam.z() > 0.0)) {
    Throw(ErrorCode::kNonPositiveDepth, "point is not in front of the camera");
  }
  const double iz = 1.0 / cam.z();
  const double x = cam.x() * iz;
  const double y = cam.y() * iz;
  const Point2 ideal = Project(world, intr, pose);

  Eigen::Matrix<double, 2, 3> d_ideal_d_cam;
  d_ideal_d_cam << intr.alpha * iz, intr.gamma * iz,
      -(intr.alpha * x + intr.gamma * y) * iz, 0.0, intr.beta * iz,
      -intr.beta * y * iz;
  Eigen::Matrix<double, 2, 6> d_cam_pose;
  Eigen::Matrix<double, 3, 6> d_cam;
  d_cam.leftCols<3>() = RotatePointJacobian(pose.rotation, world.vec());
  d_cam.rightCols<3>().setIdentity();
  d_cam_pose = d_ideal_d_cam * d_cam;

  Eigen::Matrix<double, 2, 7> d_ideal_intr = Eigen::Matrix<double, 2, 7>::Zero();
  d_ideal_intr(0, 0) = x;
  d_ideal_intr(1, 1) = y;
  d_ideal_intr(0, 2) = y;
  d_ideal_intr(0, 3) = 1.0;
  d_ideal_intr(1, 4) = 1.0;

  ProjectionJacobian out;
  const Point2 distorted = Distort(ideal, intr, dist);
  out.pixel = distorted.vec();

  // The distorted pixel p* solves p* + delta(p* - c) = p_ideal. Implicit
  // differentiation gives dp*/dq = M^-1 (dp_ideal/dq - ddelta/dq) with
  // M = I + ddelta/dp*.
  const Eigen::Vector2d off(out.pixel.x() - intr.u0, out.pixel.y() - intr.v0);
  const double ny = off.y() / intr.beta;
  const double nx = (off.x() - intr.gamma * ny) / intr.alpha;
  const double r2 = nx * nx + ny * ny;
  const double s = dist.k1 * r2 + dist.k2 * r2 * r2;
  const double ds = dist.k1 + 2.0 * dist.k2 * r2;

  const Eigen::RowVector2d dr2_doff(
      2.0 * nx / intr.alpha,
      -2.0 * nx * intr.gamma / (intr.alpha * intr.beta) + 2.0 * ny / intr.beta);
  const Eigen::Matrix2d ddelta_doff =
      s * Eigen::Matrix2d::Identity() + ds * off * dr2_doff;

  Eigen::Matrix<double, 2, 7> ddelta_intr;
  ddelta_intr.col(0) = ds * off * (-2.0 * nx * nx / intr.alpha);
  ddelta_intr.col(1) =
      ds * off *
      (2.0 * nx * intr.gamma * ny / (intr.alpha * intr.beta) -
       2.0 * ny * ny / intr.beta);
  ddelta_intr.col(2) = ds * off * (-2.0 * nx * ny / intr.alpha);
  ddelta_intr.col(3) = -ddelta_doff.col(0);
  ddelta_intr.col(4) = -ddelta_doff.col(1);
  ddelta_intr.col(5) = off * r2;
  ddelta_intr.col(6) = off * (r2 * r2);

  const Eigen::Matrix2d m = Eigen::Matrix2d::Identity() + ddelta_doff;
  const Eigen::Matrix2d m_inv = m.inverse();
  out.jacobian.leftCols<7>() = m_inv * (d_ideal_intr - ddelta_intr);
  out.jacobian.rightCols<6>() = m_inv * d_cam_pose;
  return out;
}

Eigen::Matrix3d OrthogonalizeRotation(const Eigen::Matrix3d& q) {
  if (!q.allFinite()) {
    Throw(ErrorCode::kSingularInput, "matrix has non-finite entries");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(q,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[2] > 1e-12 * sv[0])) {
    Throw(ErrorCode::kSingularInput, "matrix is singular");
  }
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d r = u * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    u.col(2) = -u.col(2);
    r = u * svd.matrixV().transpose();
  }
  return r;
}

Pose ExtrinsicsFromHomography(const Homography& h, const Eigen::Matrix3d& a) {
  Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
  if (!a.allFinite() || !lu.isInvertible()) {
    Throw(ErrorCode::kSingularIntrinsics, "intrinsic matrix is singular");
  }
  const Eigen::Matrix3d m = lu.solve(h.matrix);
  const double norm1 = m.col(0).norm();
  if (!(norm1 > 0.0)) {
    Throw(ErrorCode::kSingularInput, "homography has a null first column");
  }
  double rho = 1.0 / norm1;
  const double tz = m(2, 2);
  if (tz == 0.0 || !std::isfinite(tz)) {
    Throw(ErrorCode::kBehindCamera, "template plane passes through the camera");
  }
  if (tz < 0.0) rho = -rho;
  const Eigen::Vector3d r1 = rho * m.col(0);
  const Eigen::Vector3d r2 = rho * m.col(1);
  Eigen::Matrix3d q;
  q << r1, r2, r1.cross(r2);
  return Pose::FromMatrix(OrthogonalizeRotation(q), rho * m.col(2));
}

Intrinsics ClosedFormIntrinsics(std::span<const Homography> homographies) {
  if (homographies.size() < 3) {
    Throw(ErrorCode::kDegenerateViewSet,
          "closed-form intrinsics need at least 3 views");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(homographies.size());
  Eigen::MatrixXd v(2 * n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Matrix3d& h = homographies[i].matrix;
    v.row(2 * i) = ConicRow(h, 0, 1);
    v.row(2 * i + 1) = ConicRow(h, 0, 0) - ConicRow(h, 1, 1);
  }
  // Columns span many orders of magnitude in pixel units.
  Eigen::VectorXd col_scale(6);
  for (int j = 0; j < 6; ++j) {
    const double norm = v.col(j).norm();
    col_scale[j] = norm > 0.0 ? norm : 1.0;
  }
  const Eigen::MatrixXd vs = v * col_scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vs, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() < 6 || !(sv[4] > 1e-9 * sv[0])) {
    Throw(ErrorCode::kDegenerateViewSet,
          "homographies do not constrain the camera matrix");
  }
  const Eigen::VectorXd b =
      col_scale.cwiseInverse().asDiagonal() * svd.matrixV().col(5);
  const double b11 = b[0], b12 = b[1], b22 = b[2], b13 = b[3], b23 = b[4],
               b33 = b[5];

  const double den = b11 * b22 - b12 * b12;
  if (den == 0.0 || b11 == 0.0) {
    Throw(ErrorCode::kDegenerateViewSet, "conic estimate is degenerate");
  }
  Intrinsics intr;
  intr.v0 = (b12 * b13 - b11 * b23) / den;
  const double lambda =
      b33 - (b13 * b13 + intr.v0 * (b12 * b13 - b11 * b23)) / b11;
  if (!(lambda / b11 > 0.0) || !(lambda * b11 / den > 0.0)) {
    Throw(ErrorCode::kDegenerateViewSet,
          "conic estimate is not positive definite");
  }
  intr.alpha = std::sqrt(lambda / b11);
  intr.beta = std::sqrt(lambda * b11 / den);
  intr.gamma = -b12 * intr.alpha * intr.alpha * intr.beta / lambda;
  intr.u0 = intr.gamma * intr.v0 / intr.beta -
            b13 * intr.alpha * intr.alpha / lambda;
  if (!intr.IsValid()) {
    Throw(ErrorCode::kDegenerateViewSet, "closed-form intrinsics are invalid");
  }
  return intr;
}

ReprojectionProblem::ReprojectionProblem(std::span<const CalibrationView> views,
                                         const CameraModel& reference,
                                         RefinementSpec spec)
    : views_(views), reference_(reference), spec_(spec) {
  if (reference_.intrinsics.size() != views.size() ||
      reference_.poses.size() != views.size()) {
    Throw(ErrorCode::kInvalidArgument,
          "camera model does not match the number of views");
  }
  row_offsets_.reserve(views.size() + 1);
  Eigen::Index rows = 0;
  for (const auto& view : views) {
    row_offsets_.push_back(rows);
    rows += 2 * static_cast<Eigen::Index>(view.correspondences.size());
  }
  row_offsets_.push_back(rows);
  num_residuals_ = rows;
  num_parameters_ =
      IntrinsicBlockSize() + 6 * static_cast<Eigen::Index>(views.size());
}

Eigen::Index ReprojectionProblem::IntrinsicBlockSize() const {
  const Eigen::Index base =
      spec_.mode == ParameterMode::kSharedIntrinsics ? 5 : 3;
  return base + (spec_.estimate_distortion ? 2 : 0);
}

Eigen::VectorXd ReprojectionProblem::Pack(const CameraModel& model) const {
  Eigen::VectorXd x(num_parameters_);
  const Intrinsics& intr = model.intrinsics.front();
  Eigen::Index k = 0;
  if (spec_.mode == ParameterMode::kSharedIntrinsics) {
    x[k++] = intr.alpha;
    x[k++] = intr.beta;
  }
  x[k++] = intr.gamma;
  x[k++] = intr.u0;
  x[k++] = intr.v0;
  if (spec_.estimate_distortion) {
    x[k++] = model.distortion.k1;
    x[k++] = model.distortion.k2;
  }
  for (const auto& pose : model.poses) {
    x.segment<3>(k) = pose.rotation;
    x.segment<3>(k + 3) = pose.translation;
    k += 6;
  }
  return x;
}

CameraModel ReprojectionProblem::Unpack(const Eigen::VectorXd& x) const {
  CameraModel model;
  model.intrinsics = reference_.intrinsics;
  model.distortion = reference_.distortion;
  Eigen::Index k = 0;
  double alpha = 0.0;
  double beta = 0.0;
  const bool shared = spec_.mode == ParameterMode::kSharedIntrinsics;
  if (shared) {
    alpha = x[k++];
    beta = x[k++];
  }
  const double gamma = x[k++];
  const double u0 = x[k++];
  const double v0 = x[k++];
  for (auto& intr : model.intrinsics) {
    if (shared) {
      intr.alpha = alpha;
      intr.beta = beta;
    }
    intr.gamma = gamma;
    intr.u0 = u0;
    intr.v0 = v0;
  }
  if (spec_.estimate_distortion) {
    model.distortion.k1 = x[k++];
    model.distortion.k2 = x[k++];
  }
  model.poses.resize(views_.size());
  for (auto& pose : model.poses) {
    pose.rotation = x.segment<3>(k);
    pose.translation = x.segment<3>(k + 3);
    k += 6;
  }
  return model;
}

Eigen::VectorXd ReprojectionProblem::Residuals(const Eigen::VectorXd& x) const {
  const CameraModel model = Unpack(x);
  Eigen::VectorXd r(num_residuals_);
  ParallelFor(views_.size(), [&](size_t i) {
    Eigen::Index row = row_offsets_[i];
    for (const auto& c : views_[i].correspondences) {
      const Point2 p = ProjectDistorted(c.world, model.intrinsics[i],
                                        model.distortion, model.poses[i]);
      r[row++] = p.u - c.image.u;
      r[row++] = p.v - c.image.v;
    }
  });
  return r;
}

Eigen::MatrixXd ReprojectionProblem::Jacobian(const Eigen::VectorXd& x) const {
  const CameraModel model = Unpack(x);
  const bool shared = spec_.mode == ParameterMode::kSharedIntrinsics;
  // Projection-Jacobian column feeding each intrinsic-block parameter.
  std::vector<int> intrinsic_cols;
  if (shared) intrinsic_cols = {0, 1};
  intrinsic_cols.insert(intrinsic_cols.end(), {2, 3, 4});
  if (spec_.estimate_distortion) {
    intrinsic_cols.insert(intrinsic_cols.end(), {5, 6});
  }
  const Eigen::Index block = IntrinsicBlockSize();

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(num_residuals_, num_parameters_);
  ParallelFor(views_.size(), [&](size_t i) {
    Eigen::Index row = row_offsets_[i];
    const Eigen::Index pose_col = block + 6 * static_cast<Eigen::Index>(i);
    for (const auto& c : views_[i].correspondences) {
      const ProjectionJacobian pj = ProjectWithJacobian(
          c.world, model.intrinsics[i], model.distortion, model.poses[i]);
      for (size_t k = 0; k < intrinsic_cols.size(); ++k) {
        jac.block<2, 1>(row, static_cast<Eigen::Index>(k)) =
            pj.jacobian.col(intrinsic_cols[k]);
      }
      jac.block<2, 6>(row, pose_col) = pj.jacobian.rightCols<6>();
      row += 2;
    }
  });
  return jac;
}

RefinementResult RefineCameraModel(std::span<const CalibrationView> views,
                                   const CameraModel& initial,
                                   RefinementSpec spec,
                                   const SolverOptions& options,
                                   const LogSink& log) {
  const ReprojectionProblem problem(views, initial, spec);
  SolverResult solved =
      LevenbergMarquardt(problem, problem.Pack(initial), options, log);
  return {problem.Unpack(solved.parameters), std::move(solved.summary)};
}

ReprojectionStats ComputeReprojectionStats(
    const CameraModel& model, std::span<const CalibrationView> views) {
  ReprojectionStats stats;
  std::vector<double> all;
  for (size_t i = 0; i < views.size(); ++i) {
    std::vector<double> errors;
    errors.reserve(2 * views[i].correspondences.size());
    for (const auto& c : views[i].correspondences) {
      const Point2 p = ProjectDistorted(c.world, model.intrinsics[i],
                                        model.distortion, model.poses[i]);
      errors.push_back(c.image.u - p.u);
      errors.push_back(c.image.v - p.v);
    }
    ViewReprojection vr;
    vr.view_id = views[i].id;
    vr.points = static_cast<int>(views[i].correspondences.size());
    if (!errors.empty()) {
      double sum = 0.0;
      double sq = 0.0;
      for (double e : errors) {
        sum += e;
        sq += e * e;
      }
      const double count = static_cast<double>(errors.size());
      vr.mean_px = sum / count;
      double var = 0.0;
      for (double e : errors) var += (e - vr.mean_px) * (e - vr.mean_px);
      vr.stddev_px = std::sqrt(var / count);
      vr.rms_px = std::sqrt(sq / count);
    }
    stats.per_view.push_back(vr);
    all.insert(all.end(), errors.begin(), errors.end());
  }
  if (all.empty()) return stats;

  const double count = static_cast<double>(all.size());
  double sum = 0.0;
  double sq = 0.0;
  for (double e : all) {
    sum += e;
    sq += e * e;
    stats.max_abs_px = std::max(stats.max_abs_px, std::abs(e));
  }
  stats.mean_px = sum / count;
  double var = 0.0;
  for (double e : all) var += (e - stats.mean_px) * (e - stats.mean_px);
  stats.stddev_px = std::sqrt(var / count);
  stats.rms_px = std::sqrt(sq / count);

  std::sort(all.begin(), all.end());
  const size_t mid = all.size() / 2;
  stats.median_px =
      all.size() % 2 == 1 ? all[mid] : 0.5 * (all[mid - 1] + all[mid]);
  return stats;
}

PlateauScale ScaleSource::Lookup(double distance_mm) const {
  if (table && !table->rows.empty()) {
    const ScaleRow* best = nullptr;
    for (const auto& row : table->rows) {
      if (!best || std::abs(row.distance_mm - distance_mm) <
                       std::abs(best->distance_mm - distance_mm)) {
        best = &row;
      }
    }
    if (std::abs(best->distance_mm - distance_mm) <=
        kScaleTableTolerance * distance_mm) {
      return {best->alpha_px, best->beta_px};
    }
  }
  if (alpha_curve && beta_curve) {
    return {EvalFocalCurve(*alpha_curve, distance_mm),
            EvalFocalCurve(*beta_curve, distance_mm)};
  }
  Throw(ErrorCode::kMissingScaleForDistance,
        "no scale factors for distance " + std::to_string(distance_mm) + " mm");
}

CalibrationResult CalibrateBaseline(std::span<const CalibrationView> views,
                                    const CalibrationOptions& options,
                                    const LogSink& log) {
  options.solver.Validate();
  if (views.size() < 3) {
    Throw(ErrorCode::kDegenerateViewSet, "baseline calibration needs 3 views");
  }
  ValidateViews(views);
  const std::vector<Homography> hs = EstimateAll(views);
  const Intrinsics intr = ClosedFormIntrinsics(hs);
  const Eigen::Matrix3d a = IntrinsicMatrix(intr);

  CalibrationResult result;
  result.method = Method::kBaseline;
  result.algebraic.intrinsics.assign(views.size(), intr);
  result.algebraic.poses.resize(views.size());
  for (size_t i = 0; i < views.size(); ++i) {
    result.algebraic.poses[i] = ExtrinsicsFromHomography(hs[i], a);
  }
  result.algebraic_stats = ComputeReprojectionStats(result.algebraic, views);

  RefinementResult refined = RefineCameraModel(
      views, result.algebraic,
      {ParameterMode::kSharedIntrinsics, options.estimate_distortion},
      options.solver, log);
  result.refined = std::move(refined.model);
  result.summary = std::move(refined.summary);
  result.stats = ComputeReprojectionStats(result.refined, views);
  return result;
}

CalibrationResult CalibrateProposed(std::span<const CalibrationView> views,
                                    const ScaleSource& scales,
                                    const CalibrationOptions& options,
                                    const LogSink& log) {
  options.solver.Validate();
  if (views.empty()) {
    Throw(ErrorCode::kInsufficientData, "no views to calibrate");
  }
  ValidateViews(views);

  Point2 centre;
  if (options.principal_point_init) {
    centre = *options.principal_point_init;
  } else if (options.image_size) {
    centre = {0.5 * options.image_size->width, 0.5 * options.image_size->height};
  } else {
    centre = ObservationCentre(views);
  }

  CalibrationResult result;
  result.method = Method::kProposed;
  result.algebraic.intrinsics.resize(views.size());
  for (size_t i = 0; i < views.size(); ++i) {
    const PlateauScale s = scales.Lookup(views[i].distance_mm);
    Intrinsics& intr = result.algebraic.intrinsics[i];
    intr.alpha = s.alpha_px;
    intr.beta = s.beta_px;
    intr.gamma = 0.0;
    intr.u0 = centre.u;
    intr.v0 = centre.v;
    intr.Validate();
  }

  const std::vector<Homography> hs = EstimateAll(views);
  result.algebraic.poses.resize(views.size());
  for (size_t i = 0; i < views.size(); ++i) {
    result.algebraic.poses[i] = ExtrinsicsFromHomography(
        hs[i], IntrinsicMatrix(result.algebraic.intrinsics[i]));
  }
  result.algebraic_stats = ComputeReprojectionStats(result.algebraic, views);

  RefinementResult refined = RefineCameraModel(
      views, result.algebraic,
      {ParameterMode::kFrozenScales, options.estimate_distortion},
      options.solver, log);
  result.refined = std::move(refined.model);
  result.summary = std::move(refined.summary);
  result.stats = ComputeReprojectionStats(result.refined, views);
  return result;
}

}  // namespace focuscal
