#pragma once

#include <optional>
#include <span>
#include <vector>

namespace focuscal {

// Single-ray focus model of a lens. A probe point at distance d from the
// lens plane and `a` off the optical axis sends a ray through the lens edge
// (radius D); the lens bends it by w = k * phi. The sharpest image forms
// where that ray meets the pin-hole ray.
struct LensSpec {
  double radius_mm = 1.0;       // D
  double angle_ratio = 0.5;     // k, in (0, 1)
  double probe_offset_mm = 0.0; // a

  void Validate() const;
};

// Angle of the ray entering the lens edge, atan(d / (D - a)).
double IncomingAngle(const LensSpec& lens, double distance_mm);

// Sensor-to-lens distance producing the sharpest image of an object at
// `distance_mm`: f = D / (tan(pi/2 - k*phi) - a/d).
double SharpFocalLength(const LensSpec& lens, double distance_mm);

// Limit of SharpFocalLength as d -> infinity (requires D > a).
double AsymptoticFocalLength(const LensSpec& lens);

struct FocalSample {
  double distance_mm = 0.0;
  double value = 0.0;
};

// value(d) = -k_f / d^2 + value0
struct FocalCurveFit {
  double k_f = 0.0;
  double value0 = 0.0;
};

struct FocalCurve {
  std::vector<FocalSample> samples;  // sorted by distance
  std::optional<FocalCurveFit> fit;
};

// Linear least squares fit of value = -k_f / d^2 + value0. Throws
// InsufficientData (< 2 samples) or SingularSystem (no distance spread).
FocalCurve FitFocalCurve(std::span<const FocalSample> samples);

double EvalFocalCurve(const FocalCurveFit& fit, double distance_mm);

}  // namespace focuscal
