#pragma once

#include <span>
#include <vector>

#include "focuscal/core_types.h"

namespace focuscal {

// A template corner detected in a fronto-parallel view, indexed by its grid
// position (col along template x, row along template y).
struct GridPoint {
  int row = 0;
  int col = 0;
  Point2 image;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  double Diagonal() const;
};

// Template photographed with the image plane parallel to it.
struct ParallelView {
  double distance_mm = 0.0;
  double pitch_mm = 0.0;
  ImageSize image_size;
  std::vector<GridPoint> points;
};

struct CentralIncrements {
  double du = 0.0;  // px, mean horizontal gap
  double dv = 0.0;  // px, mean vertical gap
  double du_stddev = 0.0;
  double dv_stddev = 0.0;
  int horizontal_pairs = 0;
  int vertical_pairs = 0;
};

// Fraction of the image diagonal used as the radius of the central window.
inline constexpr double kDefaultCentralFraction = 0.2;

// Mean gaps between grid neighbours whose both ends lie within the central
// window. Throws TooFewCentralPoints when a direction has no pair.
CentralIncrements ComputeCentralIncrements(
    const ParallelView& view, double central_fraction = kDefaultCentralFraction);

struct ScaleRow {
  double distance_mm = 0.0;
  double alpha_px = 0.0;
  double beta_px = 0.0;
};

struct ScaleTable {
  std::vector<ScaleRow> rows;
};

// alpha_i = du_i * d_i / pitch, beta_i = dv_i * d_i / pitch, one row per
// view in input order.
ScaleTable ComputeScaleFactors(std::span<const ParallelView> views,
                               double central_fraction = kDefaultCentralFraction);

// Twice the per-view gap standard deviation mapped through d / pitch; the
// median over views.
double DefaultNoiseBand(std::span<const ParallelView> views,
                        double central_fraction = kDefaultCentralFraction);

struct ZoneSegmentation {
  double zone1_end_mm = 0.0;  // hyperfocal boundary
  double zone2_end_mm = 0.0;  // resolution limit
  double plateau_alpha_px = 0.0;
  double plateau_beta_px = 0.0;
  bool has_zone3 = false;
};

// Splits a table sorted by distance into the focusing zone, the constant
// plateau and the resolution-limited tail. Throws InsufficientData (< 5
// rows) or NoPlateauFound.
ZoneSegmentation SegmentZones(const ScaleTable& table, double noise_band_px);

struct PlateauScale {
  double alpha_px = 0.0;
  double beta_px = 0.0;
};

// Mean scale factors over rows with zone1_end <= d <= zone2_end. Throws
// EmptyZone2.
PlateauScale ComputePlateauScale(const ScaleTable& table,
                                 const ZoneSegmentation& seg);

}  // namespace focuscal
