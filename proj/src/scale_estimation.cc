#include "focuscal/scale_estimation.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "focuscal/error.h"

namespace focuscal {
namespace {

double PopulationStdDev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

// True when every sample in [first, last] lies within `band` of the mean of
// that range.
double Mean(std::span<const double> xs, size_t first, size_t last) {
  double mean = 0.0;
  for (size_t j = first; j <= last; ++j) mean += xs[j];
  return mean / static_cast<double>(last - first + 1);
}

double Median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const size_t mid = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

bool NearLevel(std::span<const double> xs, size_t first, size_t last,
               double level, double band) {
  for (size_t j = first; j <= last; ++j) {
    if (std::abs(xs[j] - level) > band) return false;
  }
  return true;
}

bool FlatWithinBand(std::span<const double> xs, size_t first, size_t last,
                    double band) {
  const double mean = Mean(xs, first, last);
  for (size_t j = first; j <= last; ++j) {
    if (std::abs(xs[j] - mean) > band) return false;
  }
  return true;
}

}  // namespace

double ImageSize::Diagonal() const {
  return std::hypot(static_cast<double>(width), static_cast<double>(height));
}

CentralIncrements ComputeCentralIncrements(const ParallelView& view,
                                           double central_fraction) {
  const double cx = 0.5 * view.image_size.width;
  const double cy = 0.5 * view.image_size.height;
  const double radius = central_fraction * view.image_size.Diagonal();

  std::map<std::pair<int, int>, Point2> central;
  for (const GridPoint& p : view.points) {
    if (std::hypot(p.image.u - cx, p.image.v - cy) < radius) {
      central.emplace(std::make_pair(p.row, p.col), p.image);
    }
  }

  std::vector<double> du;
  std::vector<double> dv;
  for (const auto& [key, img] : central) {
    const auto right = central.find({key.first, key.second + 1});
    if (right != central.end()) du.push_back(std::abs(right->second.u - img.u));
    const auto below = central.find({key.first + 1, key.second});
    if (below != central.end()) dv.push_back(std::abs(below->second.v - img.v));
  }
  if (du.empty() || dv.empty()) {
    Throw(ErrorCode::kTooFewCentralPoints,
          "view at " + std::to_string(view.distance_mm) +
              " mm has no adjacent point pair in the central window");
  }

  CentralIncrements out;
  for (double g : du) out.du += g;
  for (double g : dv) out.dv += g;
  out.du /= static_cast<double>(du.size());
  out.dv /= static_cast<double>(dv.size());
  out.du_stddev = PopulationStdDev(du);
  out.dv_stddev = PopulationStdDev(dv);
  out.horizontal_pairs = static_cast<int>(du.size());
  out.vertical_pairs = static_cast<int>(dv.size());
  return out;
}

ScaleTable ComputeScaleFactors(std::span<const ParallelView> views,
                               double central_fraction) {
  ScaleTable table;
  table.rows.reserve(views.size());
  for (const ParallelView& view : views) {
    if (!(view.distance_mm > 0.0) || !(view.pitch_mm > 0.0)) {
      Throw(ErrorCode::kInvalidArgument,
            "parallel views need positive distance and pitch");
    }
    const CentralIncrements inc = ComputeCentralIncrements(view, central_fraction);
    table.rows.push_back({view.distance_mm, inc.du * view.distance_mm / view.pitch_mm,
                          inc.dv * view.distance_mm / view.pitch_mm});
  }
  return table;
}

double DefaultNoiseBand(std::span<const ParallelView> views,
                        double central_fraction) {
  std::vector<double> bands;
  for (const ParallelView& view : views) {
    const CentralIncrements inc = ComputeCentralIncrements(view, central_fraction);
    bands.push_back(2.0 * std::max(inc.du_stddev, inc.dv_stddev) *
                    view.distance_mm / view.pitch_mm);
  }
  if (bands.empty()) {
    Throw(ErrorCode::kInsufficientData, "noise band needs at least one view");
  }
  std::sort(bands.begin(), bands.end());
  const size_t mid = bands.size() / 2;
  return bands.size() % 2 == 1 ? bands[mid] : 0.5 * (bands[mid - 1] + bands[mid]);
}

ZoneSegmentation SegmentZones(const ScaleTable& table, double noise_band_px) {
  const size_t n = table.rows.size();
  if (n < 5) {
    Throw(ErrorCode::kInsufficientData, "zone segmentation needs at least 5 rows");
  }
  if (!(noise_band_px >= 0.0)) {
    Throw(ErrorCode::kInvalidArgument, "noise band must be non-negative");
  }
  std::vector<double> alpha(n);
  std::vector<double> beta(n);
  for (size_t i = 0; i < n; ++i) {
    if (i > 0 && table.rows[i].distance_mm < table.rows[i - 1].distance_mm) {
      Throw(ErrorCode::kInvalidArgument, "scale table must be sorted by distance");
    }
    alpha[i] = table.rows[i].alpha_px;
    beta[i] = table.rows[i].beta_px;
  }

  // Plateau level from the far half of the table, which does not depend on
  // the band. The knee is the earliest run of 3 or more samples that is flat
  // within the band and whose samples all lie within the band of that level;
  // a wider band can only admit more runs, so the knee never moves later.
  const double level_a = Median(std::vector<double>(alpha.begin() + n / 2, alpha.end()));
  const double level_b = Median(std::vector<double>(beta.begin() + n / 2, beta.end()));
  auto plateau_run = [&](size_t s, size_t e) {
    return FlatWithinBand(alpha, s, e, noise_band_px) &&
           FlatWithinBand(beta, s, e, noise_band_px) &&
           NearLevel(alpha, s, e, level_a, noise_band_px) &&
           NearLevel(beta, s, e, level_b, noise_band_px);
  };
  size_t start = n;
  for (size_t s = 0; s + 2 < n && start == n; ++s) {
    for (size_t e = s + 2; e < n; ++e) {
      if (plateau_run(s, e)) {
        start = s;
        break;
      }
    }
  }
  if (start == n) {
    Throw(ErrorCode::kNoPlateauFound,
          "no run of 3 consecutive samples is flat within the noise band");
  }
  // The plateau extends to the furthest sample that keeps it flat.
  size_t end = start + 2;
  for (size_t e = n - 1; e > start + 2; --e) {
    if (FlatWithinBand(alpha, start, e, noise_band_px) &&
        FlatWithinBand(beta, start, e, noise_band_px)) {
      end = e;
      break;
    }
  }

  ZoneSegmentation seg;
  seg.has_zone3 = end + 1 < n;

  // Sustained dispersion inside the band: from some index on, every 3-sample
  // window scatters more than 3x the plateau before it.
  const std::span<const double> as(alpha);
  const std::span<const double> bs(beta);
  for (size_t j = start + 3; j + 2 <= end; ++j) {
    const double head_a = PopulationStdDev(as.subspan(start, j - start));
    const double head_b = PopulationStdDev(bs.subspan(start, j - start));
    bool sustained = true;
    for (size_t w = j; w + 2 <= end && sustained; ++w) {
      sustained = PopulationStdDev(as.subspan(w, 3)) > 3.0 * head_a ||
                  PopulationStdDev(bs.subspan(w, 3)) > 3.0 * head_b;
    }
    if (sustained) {
      end = j - 1;
      seg.has_zone3 = true;
      break;
    }
  }

  seg.zone1_end_mm = table.rows[start].distance_mm;
  seg.zone2_end_mm = table.rows[end].distance_mm;
  const PlateauScale plateau = ComputePlateauScale(table, seg);
  seg.plateau_alpha_px = plateau.alpha_px;
  seg.plateau_beta_px = plateau.beta_px;
  return seg;
}

PlateauScale ComputePlateauScale(const ScaleTable& table,
                                 const ZoneSegmentation& seg) {
  double sa = 0.0;
  double sb = 0.0;
  int count = 0;
  for (const ScaleRow& row : table.rows) {
    if (row.distance_mm >= seg.zone1_end_mm && row.distance_mm <= seg.zone2_end_mm) {
      sa += row.alpha_px;
      sb += row.beta_px;
      ++count;
    }
  }
  if (count == 0) {
    Throw(ErrorCode::kEmptyZone2, "no table row lies inside zone 2");
  }
  return {sa / count, sb / count};
}

}  // namespace focuscal
