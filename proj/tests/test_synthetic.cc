#include <cmath>
#include <numeric>

#include "doctest.h"
#include "focuscal/calibration.h"
#include "focuscal/error.h"
#include "focuscal/io.h"
#include "focuscal/synthetic.h"

using namespace focuscal;

namespace {

std::vector<double> Range(double a, double b, double step) {
  std::vector<double> out;
  for (double d = a; d <= b + 1e-9; d += step) out.push_back(d);
  return out;
}

}  // namespace

TEST_CASE("template layout") {
  const TemplateSpec spec{9, 9, 25};
  const auto pts = GenerateTemplate(spec);
  REQUIRE(pts.size() == 81);
  CHECK(pts[0].x == 0.0);
  CHECK(pts[1].x == 25.0);
  CHECK(pts[9].y == 25.0);
  CHECK(pts[80].x == 200.0);
  CHECK(pts[80].y == 200.0);
  for (const auto& p : pts) CHECK(p.z == 0.0);
  CHECK(spec.Centre().x == 100.0);
  CHECK(spec.Centre().y == 100.0);
  CHECK_THROWS_AS((TemplateSpec{1, 9, 25}.Validate()), Error);
  CHECK_THROWS_AS((TemplateSpec{9, 9, 0}.Validate()), Error);
}

TEST_CASE("presets are consistent") {
  for (const auto& name : BuiltinPresetNames()) {
    const CameraPreset p = BuiltinPreset(name);
    p.Validate();
    const Intrinsics plateau = ViewIntrinsics(p, FocusMode::kFixedPlateau, 500);
    CHECK(plateau.alpha == p.intrinsics.alpha);
    const double f_inf = AsymptoticFocalLength(p.lens);
    CHECK(p.PixelsPerMm().u * f_inf == doctest::Approx(p.intrinsics.alpha).epsilon(1e-12));
    // About one percent of focal deficit at the hyperfocal distance.
    const double deficit = 1.0 - SharpFocalLength(p.lens, p.hyperfocal_mm) / f_inf;
    CHECK(deficit == doctest::Approx(0.01).epsilon(0.05));
  }
  CHECK_THROWS_AS(BuiltinPreset("nope"), Error);
}

TEST_CASE("fixed-focus views match direct projection") {
  const CameraPreset preset = BuiltinPreset("robotiq");
  const TemplateSpec spec{9, 9, 25};
  const Pose pose = LookAtTemplate(spec, 600, 0.3, 1.1, 0.2);
  const GeneratedView g = GenerateView(preset, spec, pose, FocusMode::kFixedPlateau, 0.0, 1);
  CHECK(g.view.correspondences.size() == 81);
  CHECK(g.view.distance_mm == doctest::Approx(600).epsilon(1e-12));
  CHECK(g.view.ground_truth.has_value());
  for (const auto& c : g.view.correspondences) {
    const Point2 p = ProjectDistorted(c.world, preset.intrinsics, preset.distortion, pose);
    CHECK(std::abs(p.u - c.image.u) < 1e-9);
    CHECK(std::abs(p.v - c.image.v) < 1e-9);
  }
}

TEST_CASE("distance-dependent focus converges to the fixed camera far away") {
  const CameraPreset preset = BuiltinPreset("robotiq");
  const TemplateSpec spec{9, 9, 25};
  const Pose pose = LookAtTemplate(spec, 1e6, 0.2, 0.4);
  const GeneratedView fixed = GenerateView(preset, spec, pose, FocusMode::kFixedPlateau, 0.0, 1);
  const GeneratedView varying =
      GenerateView(preset, spec, pose, FocusMode::kDistanceDependent, 0.0, 1);
  REQUIRE(fixed.view.correspondences.size() == varying.view.correspondences.size());
  for (size_t i = 0; i < fixed.view.correspondences.size(); ++i) {
    CHECK(std::abs(fixed.view.correspondences[i].image.u -
                   varying.view.correspondences[i].image.u) < 1e-6);
    CHECK(std::abs(fixed.view.correspondences[i].image.v -
                   varying.view.correspondences[i].image.v) < 1e-6);
  }
  // Close up, the scale factors are visibly smaller.
  const Intrinsics near = ViewIntrinsics(preset, FocusMode::kDistanceDependent, 100);
  CHECK(near.alpha < 0.99 * preset.intrinsics.alpha);
  CHECK(near.u0 == preset.intrinsics.u0);
}

TEST_CASE("generation is deterministic per seed") {
  const CameraPreset preset = BuiltinPreset("eosens12cxp");
  const TemplateSpec spec{9, 9, 25};
  DatasetRequest req;
  req.views = 5;
  req.min_distance_mm = 300;
  req.max_distance_mm = 700;
  req.mode = FocusMode::kDistanceDependent;
  req.noise_px = 0.3;
  req.seed = 99;
  const auto a = GenerateDataset(preset, spec, req);
  const auto b = GenerateDataset(preset, spec, req);
  req.seed = 100;
  const auto c = GenerateDataset(preset, spec, req);
  REQUIRE(a.size() == 5);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].view.distance_mm == b[i].view.distance_mm);
    CHECK(a[i].view.distance_mm >= 300.0 - 1e-9);
    CHECK(a[i].view.distance_mm <= 700.0 + 1e-9);
    REQUIRE(a[i].view.correspondences.size() == b[i].view.correspondences.size());
    for (size_t k = 0; k < a[i].view.correspondences.size(); ++k) {
      CHECK(a[i].view.correspondences[k].image.u == b[i].view.correspondences[k].image.u);
    }
    if (a[i].view.distance_mm != c[i].view.distance_mm) differs = true;
  }
  CHECK(differs);
  CHECK(MixSeed(1, 0) != MixSeed(1, 1));
  CHECK(MixSeed(1, 0) == MixSeed(1, 0));
}

TEST_CASE("views with nothing visible are rejected") {
  const CameraPreset preset = BuiltinPreset("robotiq");
  const TemplateSpec spec{9, 9, 25};
  Pose behind;
  behind.translation = {0, 0, -500};
  try {
    GenerateView(preset, spec, behind, FocusMode::kFixedPlateau, 0.0, 1);
    FAIL("expected EmptyView");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyView);
  }
  Pose aside;
  aside.translation = {5000, 0, 300};
  CHECK_THROWS_AS(GenerateView(preset, spec, aside, FocusMode::kFixedPlateau, 0.0, 1), Error);
}

TEST_CASE("parallel stack scale factors recover the simulated camera") {
  for (const std::string name : {"robotiq", "eosens12cxp"}) {
    const CameraPreset preset = BuiltinPreset(name);
    const bool small = name == "robotiq";
    const TemplateSpec spec = small ? TemplateSpec{15, 15, 10} : TemplateSpec{9, 9, 25};
    const auto distances = small ? Range(80, 1200, 10) : Range(300, 4000, 50);
    const auto stack = GenerateParallelStack(preset, spec, distances, 0.0, 1);
    REQUIRE(stack.size() == distances.size());
    const ScaleTable table = ComputeScaleFactors(stack);
    for (size_t i = 0; i < table.rows.size(); ++i) {
      const Intrinsics truth =
          ViewIntrinsics(preset, FocusMode::kDistanceDependent, distances[i]);
      CHECK(std::abs(table.rows[i].alpha_px - truth.alpha) < 1e-3 * truth.alpha);
      CHECK(std::abs(table.rows[i].beta_px - truth.beta) < 1e-3 * truth.beta);
    }

    const double band = 0.01 * preset.intrinsics.alpha;
    const ZoneSegmentation zones = SegmentZones(table, band);
    const double spacing = distances[1] - distances[0];
    CHECK(std::abs(zones.zone1_end_mm - preset.hyperfocal_mm) <= spacing);
  }
}

TEST_CASE("a single parallel view gives a one-row table") {
  const CameraPreset preset = BuiltinPreset("eosens12cxp");
  const std::vector<double> d{500};
  const auto stack = GenerateParallelStack(preset, TemplateSpec{}, d, 0.0, 1);
  const ScaleTable table = ComputeScaleFactors(stack);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].distance_mm == 500.0);
  const Intrinsics truth = ViewIntrinsics(preset, FocusMode::kDistanceDependent, 500);
  CHECK(std::abs(table.rows[0].alpha_px - truth.alpha) < 1e-3 * truth.alpha);
}

TEST_CASE("bias report") {
  const CameraPreset preset = BuiltinPreset("robotiq");
  const TemplateSpec spec{9, 9, 25};
  std::vector<CalibrationView> views;
  std::vector<Pose> poses;
  for (int i = 0; i < 3; ++i) {
    const Pose p = LookAtTemplate(spec, 300 + 50 * i, 0.2, i);
    views.push_back(GenerateView(preset, spec, p, FocusMode::kFixedPlateau, 0.0, 1, i).view);
    poses.push_back(p);
  }
  const BiasReport zero = ComputeBiasReport(poses, views);
  CHECK(zero.mean_translation_error_mm == 0.0);
  CHECK(zero.mean_rotation_error_rad < 1e-12);
  for (auto& p : poses) p.translation.z() -= 100.0;
  const BiasReport closer = ComputeBiasReport(poses, views);
  CHECK(closer.z.mean == doctest::Approx(-100.0));
  CHECK(closer.z.min == doctest::Approx(-100.0));
  CHECK(closer.z.max == doctest::Approx(-100.0));
  CHECK(closer.x.mean == 0.0);
  CHECK(closer.mean_translation_error_mm == doctest::Approx(100.0));
  CHECK(closer.views[1].view_id == 1);

  views[0].ground_truth.reset();
  try {
    ComputeBiasReport(poses, views);
    FAIL("expected MissingGroundTruth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingGroundTruth);
  }
}

TEST_CASE("reprojection RMS grows in proportion to pixel noise") {
  const CameraPreset preset = BuiltinPreset("robotiq");
  const TemplateSpec spec{9, 9, 25};
  const std::vector<double> sigmas{0.1, 0.2, 0.5, 1.0};
  std::vector<double> ratios;
  for (const double sigma : sigmas) {
    double total = 0.0;
    for (uint64_t trial = 0; trial < 10; ++trial) {
      DatasetRequest req;
      req.views = 10;
      req.min_distance_mm = 300;
      req.max_distance_mm = 600;
      req.noise_px = sigma;
      req.seed = 1000 + 17 * trial + static_cast<uint64_t>(sigma * 100);
      std::vector<CalibrationView> views;
      for (const auto& g : GenerateDataset(preset, spec, req)) views.push_back(g.view);
      total += CalibrateBaseline(views, CalibrationOptions{}).stats.rms_px;
    }
    ratios.push_back(total / 10.0 / sigma);
  }
  const double mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / ratios.size();
  for (const double r : ratios) CHECK(r == doctest::Approx(mean).epsilon(0.25));
}
