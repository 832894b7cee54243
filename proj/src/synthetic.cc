#include "focuscal/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "focuscal/error.h"

namespace focuscal {

namespace {

bool InsideImage(const Point2& p, const ImageSize& size) {
  return p.u >= 0.0 && p.v >= 0.0 && p.u < size.width && p.v < size.height;
}

AxisSummary Summarize(const std::vector<double>& xs) {
  AxisSummary s;
  if (xs.empty()) return s;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  return s;
}

}  // namespace

void TemplateSpec::Validate() const {
  if (rows < 2 || cols < 2 || !(pitch_mm > 0.0) || !std::isfinite(pitch_mm)) {
    Throw(ErrorCode::kInvalidArgument,
          "template needs at least 2x2 points and a positive pitch");
  }
}

Point3 TemplateSpec::Centre() const {
  return {0.5 * (cols - 1) * pitch_mm, 0.5 * (rows - 1) * pitch_mm, 0.0};
}

std::vector<Point3> GenerateTemplate(const TemplateSpec& spec) {
  spec.Validate();
  std::vector<Point3> points;
  points.reserve(static_cast<size_t>(spec.rows) * spec.cols);
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      points.push_back({c * spec.pitch_mm, r * spec.pitch_mm, 0.0});
    }
  }
  return points;
}

void CameraPreset::Validate() const {
  if (name.empty()) Throw(ErrorCode::kInvalidArgument, "preset needs a name");
  if (image_size.width <= 0 || image_size.height <= 0) {
    Throw(ErrorCode::kInvalidArgument, "preset image size must be positive");
  }
  intrinsics.Validate();
  lens.Validate();
  AsymptoticFocalLength(lens);
  if (!std::isfinite(distortion.k1) || !std::isfinite(distortion.k2)) {
    Throw(ErrorCode::kInvalidArgument, "preset distortion must be finite");
  }
  if (!(hyperfocal_mm >= 0.0) || !(resolution_limit_mm >= 0.0)) {
    Throw(ErrorCode::kInvalidArgument, "preset distances must be non-negative");
  }
}

Point2 CameraPreset::PixelsPerMm() const {
  const double f_inf = AsymptoticFocalLength(lens);
  return {intrinsics.alpha / f_inf, intrinsics.beta / f_inf};
}

Intrinsics ViewIntrinsics(const CameraPreset& preset, FocusMode mode,
                          double distance_mm) {
  Intrinsics intr = preset.intrinsics;
  if (mode == FocusMode::kDistanceDependent) {
    const Point2 ppm = preset.PixelsPerMm();
    const double f = SharpFocalLength(preset.lens, distance_mm);
    intr.alpha = ppm.u * f;
    intr.beta = ppm.v * f;
  }
  return intr;
}

double FocusDistance(const TemplateSpec& spec, const Pose& pose) {
  return pose.Transform(spec.Centre().vec()).z();
}

uint64_t MixSeed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GeneratedView GenerateView(const CameraPreset& preset,
                           const TemplateSpec& spec, const Pose& pose,
                           FocusMode mode, double noise_px, uint64_t seed,
                           int id) {
  if (!(noise_px >= 0.0) || !std::isfinite(noise_px)) {
    Throw(ErrorCode::kInvalidArgument, "noise must be non-negative");
  }
  const double distance = FocusDistance(spec, pose);
  if (!(distance > 0.0)) {
    Throw(ErrorCode::kEmptyView, "template centre is behind the camera");
  }
  GeneratedView out;
  out.intrinsics = ViewIntrinsics(preset, mode, distance);
  out.view.id = id;
  out.view.distance_mm = distance;
  out.view.ground_truth = pose;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const Point3& w : GenerateTemplate(spec)) {
    if (!(pose.Transform(w.vec()).z() > 0.0)) continue;
    Point2 p;
    try {
      p = ProjectDistorted(w, out.intrinsics, preset.distortion, pose);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNoConvergence) continue;
      throw;
    }
    if (!InsideImage(p, preset.image_size)) continue;
    if (noise_px > 0.0) {
      p.u += noise_px * noise(rng);
      p.v += noise_px * noise(rng);
    }
    out.view.correspondences.push_back({w, p});
  }
  if (out.view.correspondences.empty()) {
    Throw(ErrorCode::kEmptyView,
          "no template point projects inside the image for view " +
              std::to_string(id));
  }
  return out;
}

Pose LookAtTemplate(const TemplateSpec& spec, double distance_mm,
                    double tilt_rad, double azimuth_rad, double roll_rad) {
  const Eigen::Vector3d axis(std::cos(azimuth_rad), std::sin(azimuth_rad), 0.0);
  const Eigen::Matrix3d rotation =
      RodriguesToMatrix(Eigen::Vector3d(0.0, 0.0, roll_rad)) *
      RodriguesToMatrix(tilt_rad * axis);
  const Eigen::Vector3d translation =
      Eigen::Vector3d(0.0, 0.0, distance_mm) - rotation * spec.Centre().vec();
  return Pose::FromMatrix(rotation, translation);
}

std::vector<GeneratedView> GenerateDataset(const CameraPreset& preset,
                                           const TemplateSpec& spec,
                                           const DatasetRequest& request) {
  if (request.views < 1 || !(request.min_distance_mm > 0.0) ||
      request.max_distance_mm < request.min_distance_mm ||
      request.max_tilt_rad < request.min_tilt_rad) {
    Throw(ErrorCode::kInvalidArgument, "invalid dataset request");
  }
  std::mt19937_64 rng(MixSeed(request.seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GeneratedView> views;
  views.reserve(static_cast<size_t>(request.views));
  for (int i = 0; i < request.views; ++i) {
    const double d =
        request.min_distance_mm +
        (request.max_distance_mm - request.min_distance_mm) * unit(rng);
    const double tilt = request.min_tilt_rad +
                        (request.max_tilt_rad - request.min_tilt_rad) * unit(rng);
    const double azimuth = 2.0 * std::numbers::pi * unit(rng);
    const Pose pose = LookAtTemplate(spec, d, tilt, azimuth);
    views.push_back(GenerateView(preset, spec, pose, request.mode,
                                 request.noise_px,
                                 MixSeed(request.seed, static_cast<uint64_t>(i) + 1),
                                 i));
  }
  return views;
}

std::vector<ParallelView> GenerateParallelStack(
    const CameraPreset& preset, const TemplateSpec& spec,
    std::span<const double> distances, double noise_px, uint64_t seed) {
  std::vector<ParallelView> stack;
  stack.reserve(distances.size());
  for (size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] > 0.0)) {
      Throw(ErrorCode::kInvalidArgument, "stack distances must be positive");
    }
    const Pose pose = LookAtTemplate(spec, distances[i], 0.0, 0.0);
    const GeneratedView g =
        GenerateView(preset, spec, pose, FocusMode::kDistanceDependent,
                     noise_px, MixSeed(seed, i + 1), static_cast<int>(i));
    ParallelView view;
    view.distance_mm = distances[i];
    view.pitch_mm = spec.pitch_mm;
    view.image_size = preset.image_size;
    for (const Correspondence& c : g.view.correspondences) {
      view.points.push_back({static_cast<int>(std::lround(c.world.y / spec.pitch_mm)),
                             static_cast<int>(std::lround(c.world.x / spec.pitch_mm)),
                             c.image});
    }
    stack.push_back(std::move(view));
  }
  return stack;
}

BiasReport ComputeBiasReport(std::span<const Pose> estimated,
                             std::span<const CalibrationView> views) {
  if (estimated.size() != views.size()) {
    Throw(ErrorCode::kInvalidArgument, "pose count does not match view count");
  }
  BiasReport report;
  std::vector<double> xs, ys, zs;
  for (size_t i = 0; i < views.size(); ++i) {
    if (!views[i].ground_truth) {
      Throw(ErrorCode::kMissingGroundTruth,
            "view " + std::to_string(views[i].id) + " has no ground-truth pose");
    }
    const Pose& truth = *views[i].ground_truth;
    ViewBias b;
    b.view_id = views[i].id;
    b.translation_error = estimated[i].translation - truth.translation;
    b.rotation_error_rad = RotationAngleBetween(estimated[i].RotationMatrix(),
                                                truth.RotationMatrix());
    xs.push_back(b.translation_error.x());
    ys.push_back(b.translation_error.y());
    zs.push_back(b.translation_error.z());
    report.mean_translation_error_mm += b.translation_error.norm();
    report.mean_rotation_error_rad += b.rotation_error_rad;
    report.views.push_back(b);
  }
  if (!views.empty()) {
    report.mean_translation_error_mm /= static_cast<double>(views.size());
    report.mean_rotation_error_rad /= static_cast<double>(views.size());
  }
  report.x = Summarize(xs);
  report.y = Summarize(ys);
  report.z = Summarize(zs);
  return report;
}

}  // namespace focuscal
