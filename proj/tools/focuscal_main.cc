#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "focuscal/calibration.h"
#include "focuscal/error.h"
#include "focuscal/io.h"
#include "focuscal/lens_model.h"
#include "focuscal/scale_estimation.h"
#include "focuscal/synthetic.h"

namespace fc = focuscal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Bad arguments detected after parsing; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool g_json_errors = false;

void ReportError(std::string_view code, const std::string& message,
                 int exit_code) {
  if (g_json_errors) {
    fc::Json j = {{"error", {{"code", std::string(code)},
                             {"message", message},
                             {"exit_code", exit_code}}}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "error: " << message << "\n";
  }
}

std::vector<double> ParseNumberList(const std::string& text, char sep,
                                    size_t count, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, sep)) {
    try {
      size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError(flag + " expects numbers, got '" + text + "'");
    }
  }
  if (out.size() != count) {
    throw UsageError(flag + " expects " + std::to_string(count) +
                     " values separated by '" + sep + "'");
  }
  return out;
}

std::vector<double> ParseRange(const std::string& text, const std::string& flag) {
  const auto v = ParseNumberList(text, ':', 3, flag);
  if (!(v[0] > 0.0) || !(v[2] > 0.0) || v[1] < v[0]) {
    throw UsageError(flag + " needs start > 0, step > 0 and end >= start");
  }
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double d = v[0] + i * v[2];
    if (d > v[1] + 1e-9 * v[1]) break;
    out.push_back(d);
  }
  return out;
}

fc::CameraPreset LoadPreset(const std::string& name, const std::string& file) {
  if (!file.empty()) return fc::PresetFromJson(fc::ParseJson(fc::ReadTextFile(file)));
  const auto names = fc::BuiltinPresetNames();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return fc::BuiltinPreset(name);
}

fc::Dataset LoadDataset(const std::string& path) {
  return fc::DatasetFromJson(fc::ParseJson(fc::ReadTextFile(path)));
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string preset = "robotiq";
  std::string preset_file;
  int views = 15;
  std::string mode = "fixed";
  double noise = 0.0;
  uint64_t seed = 0;
  std::string out;
  std::string parallel_stack;
  std::string distance_range;
  int rows = 9;
  int cols = 9;
  double pitch = 25.0;
};

int RunSimulate(const SimulateArgs& a) {
  const fc::CameraPreset preset = LoadPreset(a.preset, a.preset_file);
  fc::TemplateSpec spec{a.rows, a.cols, a.pitch};
  try {
    spec.Validate();
  } catch (const fc::Error& e) {
    throw UsageError(e.what());
  }
  if (!(a.noise >= 0.0)) throw UsageError("--noise must be non-negative");

  fc::Dataset dataset;
  dataset.template_spec = spec;
  dataset.image_size = preset.image_size;
  std::string mode_name;
  if (!a.parallel_stack.empty()) {
    const std::vector<double> distances =
        ParseRange(a.parallel_stack, "--parallel-stack");
    mode_name = "parallel_stack";
    for (size_t i = 0; i < distances.size(); ++i) {
      const fc::Pose pose = fc::LookAtTemplate(spec, distances[i], 0.0, 0.0);
      auto g = fc::GenerateView(preset, spec, pose,
                                fc::FocusMode::kDistanceDependent, a.noise,
                                fc::MixSeed(a.seed, i + 1), static_cast<int>(i));
      dataset.views.push_back(std::move(g.view));
    }
  } else {
    if (a.mode != "fixed" && a.mode != "distance") {
      throw UsageError("--mode must be 'fixed' or 'distance'");
    }
    if (a.views < 1) throw UsageError("--views must be at least 1");
    fc::DatasetRequest request;
    request.views = a.views;
    request.mode = a.mode == "fixed" ? fc::FocusMode::kFixedPlateau
                                     : fc::FocusMode::kDistanceDependent;
    request.noise_px = a.noise;
    request.seed = a.seed;
    if (!a.distance_range.empty()) {
      const auto r = ParseNumberList(a.distance_range, ':', 2, "--distance-range");
      if (!(r[0] > 0.0) || r[1] < r[0]) {
        throw UsageError("--distance-range needs 0 < min <= max");
      }
      request.min_distance_mm = r[0];
      request.max_distance_mm = r[1];
    } else {
      request.min_distance_mm = 1.5 * preset.hyperfocal_mm;
      request.max_distance_mm = 3.0 * preset.hyperfocal_mm;
    }
    mode_name = a.mode;
    for (auto& g : fc::GenerateDataset(preset, spec, request)) {
      dataset.views.push_back(std::move(g.view));
    }
  }
  dataset.meta = {{"preset", preset.name},
                  {"seed", a.seed},
                  {"noise_px", a.noise},
                  {"mode", mode_name}};
  fc::WriteFileAtomic(a.out, fc::CanonicalDump(fc::DatasetToJson(dataset)));

  size_t points = 0;
  for (const auto& v : dataset.views) points += v.correspondences.size();
  std::cout << "simulate: " << dataset.views.size() << " views, " << points
            << " points, mode " << mode_name << " -> " << a.out << "\n";
  return kExitOk;
}

// ----------------------------------------------------------- scale-factors

struct ScaleArgs {
  std::string dataset;
  std::string out_csv;
  std::string out_zones;
  std::string fit;
  double noise_band = -1.0;
  double central_fraction = fc::kDefaultCentralFraction;
};

std::vector<fc::ParallelView> ToParallelViews(const fc::Dataset& d) {
  if (!d.image_size) {
    throw fc::Error(fc::ErrorCode::kSchemaError,
                    "dataset has no image size; scale factors need the image centre");
  }
  std::vector<fc::ParallelView> out;
  for (const auto& view : d.views) {
    fc::ParallelView pv;
    pv.distance_mm = view.distance_mm;
    pv.pitch_mm = d.template_spec.pitch_mm;
    pv.image_size = *d.image_size;
    for (const auto& c : view.correspondences) {
      pv.points.push_back(
          {static_cast<int>(std::lround(c.world.y / pv.pitch_mm)),
           static_cast<int>(std::lround(c.world.x / pv.pitch_mm)), c.image});
    }
    out.push_back(std::move(pv));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.distance_mm < y.distance_mm;
  });
  return out;
}

int RunScaleFactors(const ScaleArgs& a) {
  if (!(a.central_fraction > 0.0 && a.central_fraction <= 1.0)) {
    throw UsageError("--central-fraction must lie in (0, 1]");
  }
  const fc::Dataset dataset = LoadDataset(a.dataset);
  const auto views = ToParallelViews(dataset);
  const fc::ScaleTable table = fc::ComputeScaleFactors(views, a.central_fraction);
  fc::WriteFileAtomic(a.out_csv, fc::ScaleTableToCsv(table));

  if (!a.fit.empty()) {
    std::vector<fc::FocalSample> alpha, beta;
    for (const auto& row : table.rows) {
      alpha.push_back({row.distance_mm, row.alpha_px});
      beta.push_back({row.distance_mm, row.beta_px});
    }
    fc::ScaleCurve curve{*fc::FitFocalCurve(alpha).fit, *fc::FitFocalCurve(beta).fit};
    fc::WriteFileAtomic(a.fit, fc::CanonicalDump(fc::ScaleCurveToJson(curve)));
  }

  double band = a.noise_band;
  if (band < 0.0) {
    std::vector<double> alphas;
    for (const auto& row : table.rows) alphas.push_back(row.alpha_px);
    std::nth_element(alphas.begin(), alphas.begin() + alphas.size() / 2, alphas.end());
    const double floor = 1e-3 * alphas[alphas.size() / 2];
    band = std::max(fc::DefaultNoiseBand(views, a.central_fraction), floor);
  }
  const fc::ZoneSegmentation zones = fc::SegmentZones(table, band);
  if (!a.out_zones.empty()) {
    fc::WriteFileAtomic(a.out_zones, fc::CanonicalDump(fc::ZonesToJson(zones)));
  }
  std::printf(
      "scale-factors: %zu rows, band %.4g px, zone 1 ends at %.6g mm, "
      "zone 2 ends at %.6g mm%s, plateau alpha %.6g px beta %.6g px\n",
      table.rows.size(), band, zones.zone1_end_mm, zones.zone2_end_mm,
      zones.has_zone3 ? "" : " (no zone 3)", zones.plateau_alpha_px,
      zones.plateau_beta_px);
  return kExitOk;
}

// --------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string dataset;
  std::string method;
  std::string scale_table;
  std::string scale_curve;
  std::string out;
  std::string log;
  std::string principal_point;
  bool no_distortion = false;
  int max_iterations = 200;
};

int RunCalibrate(const CalibrateArgs& a) {
  if (a.method != "baseline" && a.method != "proposed") {
    throw UsageError("--method must be 'baseline' or 'proposed'");
  }
  const bool proposed = a.method == "proposed";
  if (proposed && a.scale_table.empty() && a.scale_curve.empty()) {
    throw UsageError("--method proposed needs --scale-table or --scale-curve");
  }
  if (a.max_iterations < 1) throw UsageError("--max-iterations must be >= 1");

  fc::CalibrationOptions options;
  options.solver.max_iterations = a.max_iterations;
  options.estimate_distortion = !a.no_distortion;
  if (!a.principal_point.empty()) {
    const auto pp = ParseNumberList(a.principal_point, ',', 2, "--principal-point");
    options.principal_point_init = fc::Point2{pp[0], pp[1]};
  }

  const std::string dataset_text = fc::ReadTextFile(a.dataset);
  const fc::Dataset dataset = fc::DatasetFromJson(fc::ParseJson(dataset_text));
  options.image_size = dataset.image_size;

  std::ofstream log_file;
  fc::LogSink sink;
  if (a.log == "-") {
    sink = [](const std::string& line) { std::cerr << line << "\n"; };
  } else if (!a.log.empty()) {
    log_file.open(a.log, std::ios::trunc);
    if (!log_file) {
      throw fc::Error(fc::ErrorCode::kIoError, "cannot open log '" + a.log + "'");
    }
    sink = [&log_file](const std::string& line) { log_file << line << "\n"; };
  }

  fc::Json source = nullptr;
  fc::CalibrationResult result;
  if (proposed) {
    fc::ScaleSource scales;
    if (!a.scale_table.empty()) {
      scales.table = fc::ScaleTableFromCsv(fc::ReadTextFile(a.scale_table));
      source = {{"scale_table", a.scale_table}};
    }
    if (!a.scale_curve.empty()) {
      const fc::ScaleCurve c =
          fc::ScaleCurveFromJson(fc::ParseJson(fc::ReadTextFile(a.scale_curve)));
      scales.alpha_curve = c.alpha;
      scales.beta_curve = c.beta;
      if (source.is_null()) source = fc::Json::object();
      source["scale_curve"] = a.scale_curve;
    }
    result = fc::CalibrateProposed(dataset.views, scales, options, sink);
  } else {
    result = fc::CalibrateBaseline(dataset.views, options, sink);
  }

  fc::Json provenance = {
      {"dataset_hash", fc::HashString(dataset_text)},
      {"tool_version", std::string(fc::kToolVersion)},
      {"options", {{"method", a.method},
                   {"estimate_distortion", options.estimate_distortion},
                   {"max_iterations", a.max_iterations},
                   {"scale_source", source}}}};
  const fc::CalibrationFile file =
      fc::MakeCalibrationFile(result, dataset.views, provenance);
  fc::WriteFileAtomic(a.out, fc::CanonicalDump(fc::CalibrationToJson(file)));

  std::printf(
      "calibrate: %s converged=%d termination=%s iterations=%d "
      "mean=%.3g px std=%.3g px rms=%.3g px -> %s\n",
      a.method.c_str(), file.converged ? 1 : 0, file.termination.c_str(),
      file.iterations, file.refined.stats.mean_px, file.refined.stats.stddev_px,
      file.refined.stats.rms_px, a.out.c_str());
  if (!file.converged) {
    ReportError(fc::ErrorName(fc::ErrorCode::kNonConvergence),
                "NonConvergence: solver stopped at the iteration limit; "
                "partial result written with converged=false",
                kExitFailure);
    return kExitFailure;
  }
  return kExitOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string dataset;
  std::string calibration;
  std::string compare;
  std::string out_csv;
  std::string out_json;
};

struct LoadedCalibration {
  fc::CalibrationFile file;
  fc::BiasReport bias;
  fc::ReprojectionStats recomputed;
};

LoadedCalibration LoadAndAssess(const std::string& path, const fc::Dataset& d) {
  LoadedCalibration out;
  out.file = fc::CalibrationFromJson(fc::ParseJson(fc::ReadTextFile(path)));
  const auto& ids = out.file.refined.view_ids;
  if (ids.size() != d.views.size()) {
    throw fc::Error(fc::ErrorCode::kSchemaError,
                    "calibration '" + path + "' does not match the dataset views");
  }
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != d.views[i].id) {
      throw fc::Error(fc::ErrorCode::kSchemaError,
                      "calibration '" + path + "' view ids differ from the dataset");
    }
  }
  out.bias = fc::ComputeBiasReport(out.file.refined.model.poses, d.views);
  out.recomputed = fc::ComputeReprojectionStats(out.file.refined.model, d.views);
  return out;
}

void PrintReport(const std::string& label, const LoadedCalibration& c) {
  std::printf("%s (%s)\n", label.c_str(),
              std::string(fc::MethodName(c.file.method)).c_str());
  std::printf("  %-8s %12s %12s %12s %14s\n", "view", "dx_mm", "dy_mm", "dz_mm",
              "rot_err_rad");
  for (const auto& v : c.bias.views) {
    std::printf("  %-8d %12.4f %12.4f %12.4f %14.3e\n", v.view_id,
                v.translation_error.x(), v.translation_error.y(),
                v.translation_error.z(), v.rotation_error_rad);
  }
  std::printf("  bias z: mean %.4f min %.4f max %.4f mm\n", c.bias.z.mean,
              c.bias.z.min, c.bias.z.max);
  std::printf("  mean |t error| %.6g mm, mean rotation error %.3e rad\n",
              c.bias.mean_translation_error_mm, c.bias.mean_rotation_error_rad);
  std::printf("  reprojection: mean %.4g px median %.4g px std %.4g px rms %.4g px\n",
              c.recomputed.mean_px, c.recomputed.median_px, c.recomputed.stddev_px,
              c.recomputed.rms_px);
}

fc::Json SummaryJson(const LoadedCalibration& c) {
  return {{"method", std::string(fc::MethodName(c.file.method))},
          {"mean_translation_error_mm", c.bias.mean_translation_error_mm},
          {"mean_rotation_error_rad", c.bias.mean_rotation_error_rad},
          {"bias_z_mean_mm", c.bias.z.mean},
          {"bias_z_min_mm", c.bias.z.min},
          {"bias_z_max_mm", c.bias.z.max},
          {"reprojection_mean_px", c.recomputed.mean_px},
          {"reprojection_rms_px", c.recomputed.rms_px}};
}

int RunReport(const ReportArgs& a) {
  const fc::Dataset dataset = LoadDataset(a.dataset);
  const LoadedCalibration main = LoadAndAssess(a.calibration, dataset);
  PrintReport(a.calibration, main);
  fc::Json summary = {{"schema", fc::kSchemaVersion},
                      {"calibration", SummaryJson(main)}};
  if (!a.compare.empty()) {
    const LoadedCalibration other = LoadAndAssess(a.compare, dataset);
    PrintReport(a.compare, other);
    const double ratio = main.bias.mean_translation_error_mm /
                         other.bias.mean_translation_error_mm;
    std::printf("ratio of mean translation errors (%s / %s): %.6g\n",
                a.calibration.c_str(), a.compare.c_str(), ratio);
    summary["compare"] = SummaryJson(other);
    if (std::isfinite(ratio)) summary["ratio"] = ratio;
  }
  if (!a.out_csv.empty()) fc::WriteFileAtomic(a.out_csv, fc::BiasReportToCsv(main.bias));
  if (!a.out_json.empty()) fc::WriteFileAtomic(a.out_json, fc::CanonicalDump(summary));
  return kExitOk;
}

// -------------------------------------------------------------- lens-curve

struct LensArgs {
  std::string preset;
  std::string preset_file;
  double radius = 0.0;
  double angle_ratio = 0.5;
  double offset = 0.0;
  std::string range = "100:3000:100";
  std::string out;
};

int RunLensCurve(const LensArgs& a) {
  fc::LensSpec lens;
  if (!a.preset.empty() || !a.preset_file.empty()) {
    lens = LoadPreset(a.preset, a.preset_file).lens;
  } else {
    if (!(a.radius > 0.0)) throw UsageError("give --preset or a positive --radius");
    lens = {a.radius, a.angle_ratio, a.offset};
    try {
      lens.Validate();
    } catch (const fc::Error& e) {
      throw UsageError(e.what());
    }
  }
  std::string csv = "distance_mm,focal_mm\n";
  char buf[96];
  for (double d : ParseRange(a.range, "--range")) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", d, fc::SharpFocalLength(lens, d));
    csv += buf;
  }
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    fc::WriteFileAtomic(a.out, csv);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::string_view(argv[i]) == "--json-errors") g_json_errors = true;
  }

  CLI::App app{"Camera calibration with distance-dependent focal length"};
  app.require_subcommand(1);
  app.fallthrough();
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Report errors on stderr as JSON");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  auto* preset_opt = simulate->add_option("--preset", sim.preset, "Bundled preset name")
                         ->capture_default_str();
  simulate->add_option("--preset-file", sim.preset_file, "Preset JSON file")
      ->excludes(preset_opt);
  simulate->add_option("--views", sim.views, "Number of views")->capture_default_str();
  simulate->add_option("--mode", sim.mode, "Focus mode: fixed or distance")
      ->capture_default_str();
  simulate->add_option("--noise", sim.noise, "Pixel noise sigma")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output dataset JSON")->required();
  simulate->add_option("--parallel-stack", sim.parallel_stack,
                       "Fronto-parallel stack start:end:step in mm");
  simulate->add_option("--distance-range", sim.distance_range,
                       "Distance range min:max in mm (default 1.5x to 3x the "
                       "preset hyperfocal distance)");
  simulate->add_option("--rows", sim.rows, "Template rows")->capture_default_str();
  simulate->add_option("--cols", sim.cols, "Template columns")->capture_default_str();
  simulate->add_option("--pitch", sim.pitch, "Template pitch in mm")->capture_default_str();

  ScaleArgs scale;
  auto* scale_cmd = app.add_subcommand("scale-factors",
                                       "Estimate per-distance scale factors and zones");
  scale_cmd->add_option("--dataset", scale.dataset, "Fronto-parallel dataset")->required();
  scale_cmd->add_option("--out-csv", scale.out_csv, "Scale table CSV")->required();
  scale_cmd->add_option("--out-zones", scale.out_zones, "Zone segmentation JSON");
  scale_cmd->add_option("--fit", scale.fit, "Write the fitted focal curve JSON");
  scale_cmd->add_option("--noise-band", scale.noise_band,
                        "Plateau band in px (default: from the data)");
  scale_cmd->add_option("--central-fraction", scale.central_fraction,
                        "Central window radius as a fraction of the diagonal")
      ->capture_default_str();

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate a dataset");
  cal_cmd->add_option("--dataset", cal.dataset, "Dataset JSON")->required();
  cal_cmd->add_option("--method", cal.method, "baseline or proposed")->required();
  cal_cmd->add_option("--scale-table", cal.scale_table, "Scale table CSV");
  cal_cmd->add_option("--scale-curve", cal.scale_curve, "Focal curve JSON");
  cal_cmd->add_option("--out", cal.out, "Output calibration JSON")->required();
  cal_cmd->add_option("--log", cal.log, "Solver log file, '-' for stderr");
  cal_cmd->add_option("--principal-point", cal.principal_point,
                      "Principal point start u,v for the proposed method");
  cal_cmd->add_option("--max-iterations", cal.max_iterations, "Solver iteration cap")
      ->capture_default_str();
  cal_cmd->add_flag("--no-distortion", cal.no_distortion, "Keep k1 = k2 = 0");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Pose bias and reprojection report");
  rep_cmd->add_option("--dataset", rep.dataset, "Dataset with ground truth")->required();
  rep_cmd->add_option("--calibration", rep.calibration, "Calibration JSON")->required();
  rep_cmd->add_option("--compare", rep.compare, "Second calibration JSON");
  rep_cmd->add_option("--out-csv", rep.out_csv, "Per-view bias CSV");
  rep_cmd->add_option("--out-json", rep.out_json, "Summary JSON");

  LensArgs lens;
  auto* lens_cmd = app.add_subcommand("lens-curve", "Sweep the sharp-focus focal length");
  auto* lens_preset = lens_cmd->add_option("--preset", lens.preset, "Bundled preset name");
  lens_cmd->add_option("--preset-file", lens.preset_file, "Preset JSON file")
      ->excludes(lens_preset);
  lens_cmd->add_option("--radius", lens.radius, "Lens radius D in mm");
  lens_cmd->add_option("--angle-ratio", lens.angle_ratio, "Angle ratio k")
      ->capture_default_str();
  lens_cmd->add_option("--offset", lens.offset, "Probe offset a in mm")
      ->capture_default_str();
  lens_cmd->add_option("--range", lens.range, "Distances start:end:step in mm")
      ->capture_default_str();
  lens_cmd->add_option("--out", lens.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ReportError("UsageError", e.what(), kExitUsage);
    return kExitUsage;
  }

  try {
    if (*simulate) return RunSimulate(sim);
    if (*scale_cmd) return RunScaleFactors(scale);
    if (*cal_cmd) return RunCalibrate(cal);
    if (*rep_cmd) return RunReport(rep);
    if (*lens_cmd) return RunLensCurve(lens);
  } catch (const UsageError& e) {
    ReportError("UsageError", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const fc::Error& e) {
    ReportError(fc::ErrorName(e.code()), e.what(), kExitFailure);
    return kExitFailure;
  } catch (const std::exception& e) {
    ReportError("InternalError", e.what(), kExitFailure);
    return kExitFailure;
  }
  return kExitUsage;
}
