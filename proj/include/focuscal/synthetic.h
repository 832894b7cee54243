#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "focuscal/calibration.h"
#include "focuscal/core_types.h"
#include "focuscal/lens_model.h"
#include "focuscal/scale_estimation.h"

namespace focuscal {

struct TemplateSpec {
  int rows = 9;
  int cols = 9;
  double pitch_mm = 25.0;

  void Validate() const;
  Point3 Centre() const;
};

// Row-major grid points (col * pitch, row * pitch, 0).
std::vector<Point3> GenerateTemplate(const TemplateSpec& spec);

struct CameraPreset {
  std::string name;
  ImageSize image_size;
  Intrinsics intrinsics;  // values on the focus plateau
  LensSpec lens;
  Distortion distortion;
  // Reference distances used to build reproduction fixtures.
  double hyperfocal_mm = 0.0;
  double resolution_limit_mm = 0.0;

  void Validate() const;
  // Pixels per millimetre of focal length along u and v, so that
  // alpha = PixelsPerMm().u * f on the plateau.
  Point2 PixelsPerMm() const;
};

enum class FocusMode { kFixedPlateau, kDistanceDependent };

// Scale factors the simulator uses at a focus distance. Distance dependent
// values follow f(d) / f_inf times the plateau.
Intrinsics ViewIntrinsics(const CameraPreset& preset, FocusMode mode,
                          double distance_mm);

// Depth of the template centre along the optical axis.
double FocusDistance(const TemplateSpec& spec, const Pose& pose);

// Per-view generator state: SplitMix64 of (seed + golden * (index + 1)).
uint64_t MixSeed(uint64_t seed, uint64_t index);

struct GeneratedView {
  CalibrationView view;
  Intrinsics intrinsics;  // camera used to render the view
};

// Projects the template through the preset camera, keeps points whose
// noise-free image lies inside the frame, and adds N(0, noise^2) to each
// coordinate. Throws EmptyView.
GeneratedView GenerateView(const CameraPreset& preset,
                           const TemplateSpec& spec, const Pose& pose,
                           FocusMode mode, double noise_px, uint64_t seed,
                           int id = 0);

// Pose looking at the template centre from `distance_mm` with the given
// tilt away from fronto-parallel about an in-plane axis at `azimuth_rad`.
Pose LookAtTemplate(const TemplateSpec& spec, double distance_mm,
                    double tilt_rad, double azimuth_rad, double roll_rad = 0.0);

struct DatasetRequest {
  int views = 15;
  double min_distance_mm = 0.0;
  double max_distance_mm = 0.0;
  double min_tilt_rad = 5.0 * std::numbers::pi / 180.0;
  double max_tilt_rad = 30.0 * std::numbers::pi / 180.0;
  FocusMode mode = FocusMode::kFixedPlateau;
  double noise_px = 0.0;
  uint64_t seed = 0;
};

// Distances uniform in [min, max], tilt uniform in [min_tilt, max_tilt],
// azimuth uniform.
std::vector<GeneratedView> GenerateDataset(const CameraPreset& preset,
                                           const TemplateSpec& spec,
                                           const DatasetRequest& request);

// Fronto-parallel views, template centre on the optical axis, in distance
// dependent focus mode.
std::vector<ParallelView> GenerateParallelStack(
    const CameraPreset& preset, const TemplateSpec& spec,
    std::span<const double> distances, double noise_px, uint64_t seed);

struct ViewBias {
  int view_id = 0;
  Eigen::Vector3d translation_error = Eigen::Vector3d::Zero();  // mm
  double rotation_error_rad = 0.0;
};

struct AxisSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct BiasReport {
  std::vector<ViewBias> views;
  AxisSummary x, y, z;
  double mean_translation_error_mm = 0.0;  // mean of |t_hat - t_true|
  double mean_rotation_error_rad = 0.0;
};

// Translation errors t_hat - t_true in the true camera frame. Throws
// MissingGroundTruth.
BiasReport ComputeBiasReport(std::span<const Pose> estimated,
                             std::span<const CalibrationView> views);

}  // namespace focuscal
